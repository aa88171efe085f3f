#include "support.hpp"

#include "halsub/synthetics.hpp"

#include <Eigen/Eigenvalues>

using namespace halsub;

TEST(GenPlanted, Deterministic)
{
    SyntheticSpec spec;
    spec.d = 12;
    spec.k = 3;
    spec.M = 20;
    spec.B = 2;
    spec.ambient_noise = 0.1;
    spec.layers = {0, 4};
    const auto a = gen_planted(spec);
    const auto b = gen_planted(spec);
    EXPECT_EQ(hsd_content_hash(a.clean), hsd_content_hash(b.clean));
    EXPECT_EQ(hsd_content_hash(a.cf), hsd_content_hash(b.cf));
    EXPECT_TRUE(a.planted == b.planted);
    spec.seed = 1;
    EXPECT_NE(hsd_content_hash(gen_planted(spec).cf), hsd_content_hash(a.cf));
}

TEST(GenPlanted, ShapesAndManifest)
{
    SyntheticSpec spec;
    spec.d = 10;
    spec.k = 2;
    spec.M = 7;
    spec.B = 5;
    spec.layers = {3, 5};
    const auto data = gen_planted(spec);
    EXPECT_EQ(data.planted.rows(), 2);
    EXPECT_LE(orthonormality_defect(data.planted), 1e-12);
    EXPECT_EQ(data.clean.block(3).rows(), 7);
    EXPECT_EQ(data.cf.block(5).rows(), 35);
    EXPECT_EQ(data.cf.manifest.samples[6].sample_id, "s000001");
    EXPECT_EQ(data.cf.manifest.samples[6].variant, 2);
    EXPECT_NE(data.clean.manifest.model_id.find(kRngAlgorithm), std::string::npos);
    EXPECT_NO_THROW(validate_manifest(data.cf.manifest));
}

TEST(GenPlanted, NoiselessDeltasLieInSpan)
{
    SyntheticSpec spec;
    spec.d = 16;
    spec.k = 3;
    spec.M = 30;
    spec.B = 2;
    spec.coeff_noise = 0.0;
    spec.ambient_noise = 0.0;
    const auto data = gen_planted(spec);
    // Per-variant deltas, not only the aggregated ones.
    const Matrix& clean = data.clean.block(0);
    const Matrix& cf = data.cf.block(0);
    const Matrix& Q = data.planted;
    for (Index i = 0; i < cf.rows(); ++i) {
        const Eigen::RowVectorXd delta = cf.row(i) - clean.row(i / spec.B);
        const Eigen::RowVectorXd resid = delta - (delta * Q.transpose()) * Q;
        // Dumps hold binary32 values, so the bound is set by storage rounding.
        EXPECT_LE(resid.norm(), 1e-10 + 1e-6 * delta.norm());
    }
}

TEST(GenPlanted, NoiselessDeltasLieInSpanBeforeStorage)
{
    SyntheticSpec spec;
    spec.d = 16;
    spec.k = 3;
    spec.M = 30;
    spec.B = 2;
    spec.coeff_noise = 0.0;
    const auto data = gen_planted(spec);
    const Matrix delta = build_delta_matrix(data.clean, data.cf, 0).data;
    const Matrix resid = delta - delta * data.planted.transpose() * data.planted;
    EXPECT_LE(resid.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GenPlanted, MonteCarloMeans)
{
    SyntheticSpec spec;
    spec.d = 64;
    spec.k = 4;
    spec.M = 500;
    spec.B = 1;
    spec.shift = 1.0;
    spec.coeff_noise = 0.5;
    spec.ambient_noise = 0.1;
    const auto data = gen_planted(spec);
    const Matrix delta = build_delta_matrix(data.clean, data.cf, 0).data;
    const Matrix& Q = data.planted;
    const Eigen::RowVectorXd in_coords = (delta * Q.transpose()).colwise().mean();
    const Matrix outside = delta - delta * Q.transpose() * Q;
    const Eigen::RowVectorXd out_mean = outside.colwise().mean();
    // Q^T delta per coordinate: var = coeff_noise^2 + sigma^2; (I - QQ^T) delta: var <= sigma^2.
    const double se_in = std::sqrt((0.25 + 0.01) / 500.0);
    const double se_out = std::sqrt(0.01 / 500.0);
    for (Index a = 0; a < 4; ++a) EXPECT_NEAR(in_coords(a), 1.0, 3.0 * se_in) << "coordinate " << a;
    int outliers = 0;
    for (Index a = 0; a < 64; ++a) outliers += std::abs(out_mean(a)) > 3.0 * se_out;
    EXPECT_LE(outliers, 3);
}

TEST(GenPlanted, SpecValidation)
{
    SyntheticSpec spec;
    spec.k = 0;
    EXPECT_THROW(gen_planted(spec), InvalidInput);
    spec = {};
    spec.k = spec.d + 1;
    EXPECT_THROW(gen_planted(spec), InvalidInput);
    spec = {};
    spec.M = 0;
    EXPECT_THROW(gen_planted(spec), InvalidInput);
    spec = {};
    spec.B = 0;
    EXPECT_THROW(gen_planted(spec), InvalidInput);
    spec = {};
    spec.shift = -1;
    EXPECT_THROW(gen_planted(spec), InvalidInput);
    spec = {};
    spec.ambient_noise = -0.1;
    EXPECT_THROW(gen_planted(spec), InvalidInput);
    spec = {};
    spec.layers = {2, 1};
    EXPECT_THROW(gen_planted(spec), InvalidInput);
}

TEST(RecoveryError, NoiselessPipeline)
{
    SyntheticSpec spec;
    spec.d = 32;
    spec.k = 4;
    spec.M = 80;
    spec.B = 3;
    spec.seed = 9;
    const auto data = gen_planted(spec);
    const auto bank = build_bank(data.clean, data.cf, {0}, 4);
    EXPECT_LE(recovery_error(bank, data.planted), 1e-4);
    // Cross-check against the eigen-oracle span.
    const auto eig = gram_eig_oracle(build_delta_matrix(data.clean, data.cf, 0).data);
    EXPECT_LE(test::max_angle(eig.eigenvectors.leftCols(4).transpose(), data.planted), 1e-4);
}

TEST(RecoveryError, BankEqualToPlanted)
{
    const Matrix Q = test::random_orthonormal(3, 20, 1);
    BasisBank bank;
    bank.hidden_dim = 20;
    bank.rank = 3;
    bank.layers = {0};
    bank.bases.emplace(0, Q);
    EXPECT_LE(recovery_error(bank, Q), 1e-10);
    EXPECT_THROW(recovery_error(bank, Q.topRows(2)), InvalidInput);
}

TEST(RecoveryError, GrowsWithAmbientNoise)
{
    int ordered = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::vector<double> errs;
        for (double sigma : {0.0, 0.1, 0.5, 1.0}) {
            SyntheticSpec spec;
            spec.d = 32;
            spec.k = 4;
            spec.M = 100;
            spec.B = 2;
            spec.ambient_noise = sigma;
            spec.seed = seed;
            const auto data = gen_planted(spec);
            errs.push_back(recovery_error(build_bank(data.clean, data.cf, {0}, 4), data.planted));
        }
        ordered += std::is_sorted(errs.begin(), errs.end());
    }
    EXPECT_GE(ordered, 3);
}

TEST(SpectralRadius, MatchesEigenSolver)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix A = test::random_matrix(12, 12, seed, 3) / std::sqrt(12.0);
        Eigen::EigenSolver<Eigen::MatrixXd> es(A);
        const double rho = es.eigenvalues().cwiseAbs().maxCoeff();
        EXPECT_NEAR(estimate_spectral_radius(A), rho, 0.02 * rho) << "seed " << seed;
    }
}

TEST(ToyDecoder, RecurrenceScaledAndReservedChannelUntouched)
{
    ToyDecoderSpec spec;
    spec.d = 24;
    spec.vocab = 10;
    spec.reserved = 4;
    spec.seed = 2;
    const ToyDecoder dec(spec);
    const Matrix live = dec.recurrence().topLeftCorner(20, 20);
    Eigen::EigenSolver<Eigen::MatrixXd> es(live);
    EXPECT_NEAR(es.eigenvalues().cwiseAbs().maxCoeff(), 0.9, 0.02);
    EXPECT_TRUE(dec.recurrence().rightCols(4).isZero(0.0));
    EXPECT_TRUE(dec.recurrence().bottomRows(4).isZero(0.0));
    EXPECT_TRUE(dec.embeddings().rightCols(4).isZero(0.0));
}

TEST(ToyDecoder, DeterministicGreedy)
{
    ToyDecoderSpec spec;
    spec.seed = 5;
    const ToyDecoder a(spec), b(spec);
    EXPECT_EQ(a.decode({1, 2, 3}, 50), b.decode({1, 2, 3}, 50));
    EXPECT_EQ(a.decode({}, 5).size(), 5u);
}

TEST(ToyDecoder, EmptyBasisNullifierIsIdentity)
{
    ToyDecoderSpec spec;
    spec.d = 16;
    spec.vocab = 12;
    const ToyDecoder dec(spec);
    BasisBank bank;
    bank.hidden_dim = 16;
    bank.rank = 2;
    bank.layers = {0};
    bank.bases.emplace(0, Matrix(0, 16));
    const Nullifier n(bank);
    EXPECT_EQ(dec.decode({0}, 40, {}, &n), dec.decode({0}, 40));
}

TEST(ToyDecoder, InjectionInSpanCancelsExactly)
{
    ToyDecoderSpec spec;
    spec.d = 32;
    spec.vocab = 16;
    spec.reserved = 4;
    spec.seed = 7;
    const ToyDecoder dec(spec);
    BasisBank bank;
    bank.hidden_dim = 32;
    bank.rank = 2;
    bank.layers = {16, 17};
    Matrix V = Matrix::Zero(2, 32);
    V(0, 28) = 1.0;
    V(1, 30) = 1.0;
    bank.bases.emplace(16, V);
    bank.bases.emplace(17, V);
    const Nullifier n(bank);
    Vector g = Vector::Zero(32);
    g(28) = 0.6;
    g(30) = -0.8;
    const auto clean = dec.decode({3}, 100);
    // The readout sees the reserved block, so a large injection corrupts the stream.
    const auto corrupted = dec.decode({3}, 100, Injection{g, 40.0});
    EXPECT_NE(corrupted, clean);
    EXPECT_EQ(dec.decode({3}, 100, Injection{g, 40.0}, &n), clean);
}

TEST(ToyDecoder, InjectionOrthogonalToSpanPassesThrough)
{
    ToyDecoderSpec spec;
    spec.d = 32;
    spec.vocab = 16;
    spec.reserved = 4;
    spec.seed = 8;
    const ToyDecoder dec(spec);
    BasisBank bank;
    bank.hidden_dim = 32;
    bank.rank = 1;
    bank.layers = {0};
    Matrix V = Matrix::Zero(1, 32);
    V(0, 29) = 1.0;
    bank.bases.emplace(0, V);
    const Nullifier n(bank);
    Vector g = Vector::Zero(32);
    g(31) = 1.0;
    const auto corrupted = dec.decode({1}, 100, Injection{g, 40.0});
    EXPECT_EQ(dec.decode({1}, 100, Injection{g, 40.0}, &n), corrupted);
}

TEST(ToyDecoder, InputErrors)
{
    ToyDecoderSpec spec;
    spec.d = 8;
    spec.vocab = 4;
    const ToyDecoder dec(spec);
    EXPECT_THROW(dec.decode({0}, 0), InvalidInput);
    EXPECT_THROW(dec.decode({4}, 1), InvalidInput);
    EXPECT_THROW(dec.decode({0}, 1, Injection{Vector::Zero(7), 1.0}), InvalidInput);
    BasisBank bank;
    bank.hidden_dim = 9;
    bank.rank = 1;
    bank.layers = {0};
    bank.bases.emplace(0, Matrix(0, 9));
    const Nullifier n(bank);
    EXPECT_THROW(dec.decode({0}, 1, {}, &n), InvalidInput);
    spec.reserved = 8;
    EXPECT_THROW(ToyDecoder{spec}, InvalidInput);
}

TEST(NoiseSweep, Properties)
{
    SyntheticSpec spec;
    spec.d = 24;
    spec.k = 3;
    spec.M = 60;
    spec.B = 2;
    spec.ambient_noise = 0.05;
    const auto data = gen_planted(spec);
    const auto bank = build_bank(data.clean, data.cf, {0}, 3);
    const auto report = feature_noise_sweep(data.clean, data.cf, bank, {0.0, 0.5, 1.0, 2.0});
    ASSERT_EQ(report.entries.size(), 4u);
    for (const auto& e : report.entries) {
        ASSERT_EQ(e.layers.size(), 1u);
        EXPECT_LE(e.layers[0].energy_after, 1e-20 + 1e-10 * e.layers[0].energy_before);
        EXPECT_LE(e.layers[0].ratio_after, 1e-10);
    }
    for (std::size_t i = 1; i < 4; ++i) EXPECT_GT(report.entries[i].layers[0].energy_before, report.entries[i - 1].layers[0].energy_before);

    // Sigma 0 reproduces the noise-free in-subspace energy exactly.
    const Matrix& V = bank.basis(0);
    double direct = 0.0;
    const Matrix& cf = data.cf.block(0);
    for (Index i = 0; i < cf.rows(); ++i) direct += (V * cf.row(i).transpose()).squaredNorm();
    EXPECT_DOUBLE_EQ(report.entries[0].layers[0].energy_before, direct / static_cast<double>(cf.rows()));

    const auto again = feature_noise_sweep(data.clean, data.cf, bank, {0.0, 0.5, 1.0, 2.0});
    EXPECT_EQ(again.to_json(), report.to_json());
    EXPECT_THROW(feature_noise_sweep(data.clean, data.cf, bank, {}), InvalidInput);
    EXPECT_THROW(feature_noise_sweep(data.clean, data.cf, bank, {-1.0}), InvalidInput);
}
