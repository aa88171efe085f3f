#include "support.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numbers>

using namespace halsub;
using halsub::test::random_matrix;

namespace {

double reconstruction_error(const Matrix& A, const ThinSVD& s)
{
    Eigen::VectorXd sigma(static_cast<Index>(s.singular_values.size()));
    for (std::size_t i = 0; i < s.singular_values.size(); ++i) sigma(static_cast<Index>(i)) = s.singular_values[i];
    const Matrix R = s.U * sigma.asDiagonal() * s.Vt;
    const double n = A.norm();
    return n == 0.0 ? R.norm() : (A - R).norm() / n;
}

double column_defect(const Matrix& U)
{
    const Matrix g = U.transpose() * U;
    return (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

void expect_svd_invariants(const Matrix& A, const ThinSVD& s)
{
    const Index k = std::min(A.rows(), A.cols());
    ASSERT_EQ(static_cast<Index>(s.singular_values.size()), k);
    ASSERT_EQ(s.U.rows(), A.rows());
    ASSERT_EQ(s.U.cols(), k);
    ASSERT_EQ(s.Vt.rows(), k);
    ASSERT_EQ(s.Vt.cols(), A.cols());
    for (std::size_t i = 0; i < s.singular_values.size(); ++i) {
        EXPECT_GE(s.singular_values[i], 0.0);
        if (i > 0) {
            EXPECT_LE(s.singular_values[i], s.singular_values[i - 1]);
        }
    }
    EXPECT_LE(orthonormality_defect(s.Vt), 1e-10);
    EXPECT_LE(column_defect(s.U), 1e-10);
    EXPECT_LE(reconstruction_error(A, s), 1e-10);
    // Sign convention: largest |entry| of each right vector is non-negative.
    for (Index i = 0; i < s.Vt.rows(); ++i) {
        Index pivot = 0;
        for (Index j = 1; j < s.Vt.cols(); ++j)
            if (std::abs(s.Vt(i, j)) > std::abs(s.Vt(i, pivot))) pivot = j;
        EXPECT_GE(s.Vt(i, pivot), 0.0);
    }
}

} // namespace

TEST(ThinSvd, DiagonalMatrix)
{
    Matrix A(2, 2);
    A << 3, 0, 0, 2;
    const auto s = thin_svd(A);
    EXPECT_DOUBLE_EQ(s.singular_values[0], 3.0);
    EXPECT_DOUBLE_EQ(s.singular_values[1], 2.0);
    EXPECT_LE((s.Vt - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((s.U - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ThinSvd, NegativeDiagonalFlipsLeftVectorOnly)
{
    Matrix A(2, 2);
    A << -3, 0, 0, 2;
    const auto s = thin_svd(A);
    EXPECT_DOUBLE_EQ(s.singular_values[0], 3.0);
    EXPECT_DOUBLE_EQ(s.Vt(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(s.U(0, 0), -1.0);
}

TEST(ThinSvd, ZeroMatrix)
{
    const Matrix A = Matrix::Zero(5, 4);
    const auto s = thin_svd(A);
    for (double v : s.singular_values) EXPECT_EQ(v, 0.0);
    EXPECT_LE(orthonormality_defect(s.Vt), 1e-12);
    EXPECT_LE(column_defect(s.U), 1e-12);
}

TEST(ThinSvd, RandomTallMatchesGramOracle)
{
    const Matrix A = random_matrix(50, 8, 1);
    const auto s = thin_svd(A);
    expect_svd_invariants(A, s);
    const auto eig = gram_eig_oracle(A);
    const double lmax = eig.eigenvalues(0);
    for (Index i = 0; i < 8; ++i) {
        const double sig2 = s.singular_values[static_cast<std::size_t>(i)] * s.singular_values[static_cast<std::size_t>(i)];
        EXPECT_LE(std::abs(sig2 - eig.eigenvalues(i)) / lmax, 1e-8) << "index " << i;
    }
}

TEST(ThinSvd, ShapesAndInvariantsAcrossAspectRatios)
{
    const std::pair<Index, Index> shapes[] = {{1, 1}, {1, 7}, {7, 1}, {3, 9}, {9, 3}, {20, 20}, {64, 10}, {10, 64}, {200, 128}};
    std::uint64_t seed = 100;
    for (auto [m, n] : shapes) {
        SCOPED_TRACE(std::to_string(m) + "x" + std::to_string(n));
        const Matrix A = random_matrix(m, n, seed++);
        expect_svd_invariants(A, thin_svd(A));
    }
}

TEST(ThinSvd, RankDeficientCompletesOrthonormalFactors)
{
    const Matrix A = random_matrix(12, 2, 3) * random_matrix(2, 6, 4);
    const auto s = thin_svd(A);
    expect_svd_invariants(A, s);
    EXPECT_LE(s.singular_values[2], 1e-12 * s.singular_values[0]);
}

TEST(ThinSvd, AgreesWithEigenJacobiSvd)
{
    const Matrix A = random_matrix(30, 12, 9);
    const auto s = thin_svd(A);
    Eigen::JacobiSVD<Eigen::MatrixXd> ref(A, Eigen::ComputeThinV);
    for (Index i = 0; i < 12; ++i)
        EXPECT_NEAR(s.singular_values[static_cast<std::size_t>(i)], ref.singularValues()(i), 1e-12 * ref.singularValues()(0));
    const Matrix Vref = ref.matrixV().leftCols(4).transpose();
    EXPECT_LE(test::max_angle(s.Vt.topRows(4), Vref), 1e-10);
}

TEST(ThinSvd, Deterministic)
{
    const Matrix A = random_matrix(40, 9, 12);
    const auto a = thin_svd(A);
    const auto b = thin_svd(A);
    EXPECT_EQ(a.singular_values, b.singular_values);
    EXPECT_TRUE(a.Vt == b.Vt);
    EXPECT_TRUE(a.U == b.U);
}

TEST(ThinSvd, NonFiniteRejected)
{
    Matrix A = Matrix::Ones(3, 3);
    A(1, 2) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(thin_svd(A), InvalidInput);
    A(1, 2) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(thin_svd(A), InvalidInput);
}

TEST(ThinSvd, LargestSingularValueMatchesPowerIteration)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix A = random_matrix(25, 10, 200 + seed);
        const double s1 = thin_svd(A).singular_values[0];
        EXPECT_LE(std::abs(spectral_norm_power(A) - s1) / s1, 1e-6);
    }
}

TEST(GramOracle, DiagonalMatrix)
{
    Matrix A(2, 2);
    A << 3, 0, 0, 2;
    const auto e = gram_eig_oracle(A);
    EXPECT_NEAR(e.eigenvalues(0), 9.0, 1e-14);
    EXPECT_NEAR(e.eigenvalues(1), 4.0, 1e-14);
}

TEST(GramOracle, ReconstructsGram)
{
    const Matrix A = random_matrix(30, 7, 5);
    const auto e = gram_eig_oracle(A);
    const Eigen::MatrixXd G = A.transpose() * A;
    const Eigen::MatrixXd R = e.eigenvectors * e.eigenvalues.asDiagonal() * e.eigenvectors.transpose();
    EXPECT_LE((G - R).cwiseAbs().maxCoeff(), 1e-10 * G.cwiseAbs().maxCoeff());
    for (Index i = 1; i < e.eigenvalues.size(); ++i) EXPECT_LE(e.eigenvalues(i), e.eigenvalues(i - 1));
}

TEST(GramOracle, TopSpanMatchesSvd)
{
    const Matrix A = random_matrix(40, 6, 6);
    const auto s = thin_svd(A);
    const auto e = gram_eig_oracle(A);
    for (Index k = 1; k < 6; ++k) {
        if (s.singular_values[static_cast<std::size_t>(k - 1)] - s.singular_values[static_cast<std::size_t>(k)] < 1e-3) continue;
        const Matrix eigspan = e.eigenvectors.leftCols(k).transpose();
        EXPECT_LE(test::max_angle(s.Vt.topRows(k), eigspan), 1e-6) << "k=" << k;
    }
}

TEST(GramOracle, DimensionCap)
{
    EXPECT_THROW(gram_eig_oracle(Matrix::Zero(2, kGramOracleMaxDim + 1)), InvalidInput);
    EXPECT_NO_THROW(gram_eig_oracle(Matrix::Zero(1, 8)));
}

TEST(PrincipalAngles, IdenticalSubspaces)
{
    const Matrix A = test::random_orthonormal(3, 8, 1);
    for (double a : principal_angles(A, A)) EXPECT_LE(a, 1e-12);
}

TEST(PrincipalAngles, OrthogonalAxes)
{
    Matrix a(1, 3), b(1, 3);
    a << 1, 0, 0;
    b << 0, 1, 0;
    const auto angles = principal_angles(a, b);
    ASSERT_EQ(angles.size(), 1u);
    EXPECT_NEAR(angles[0], std::numbers::pi / 2, 1e-15);
}

TEST(PrincipalAngles, KnownAngle)
{
    const double theta = 0.3;
    Matrix a(1, 2), b(1, 2);
    a << 1, 0;
    b << std::cos(theta), std::sin(theta);
    EXPECT_NEAR(principal_angles(a, b)[0], theta, 1e-15);
}

TEST(PrincipalAngles, TinyAngleResolved)
{
    // arccos alone cannot resolve 1e-9; the sine route can.
    const double theta = 1e-9;
    Matrix a(1, 3), b(1, 3);
    a << 1, 0, 0;
    b << std::cos(theta), std::sin(theta), 0;
    EXPECT_NEAR(principal_angles(a, b)[0], theta, 1e-20);
}

TEST(PrincipalAngles, RotationWithinSpan)
{
    const Matrix A = test::random_orthonormal(4, 10, 2);
    const Matrix Q = orthonormalize(random_matrix(4, 4, 3));
    const Matrix B = Q * A;
    for (double a : principal_angles(A, B)) EXPECT_LE(a, 1e-8);
}

TEST(PrincipalAngles, SymmetricForEqualSizes)
{
    const Matrix A = test::random_orthonormal(3, 9, 4);
    const Matrix B = test::random_orthonormal(3, 9, 5);
    const auto ab = principal_angles(A, B);
    const auto ba = principal_angles(B, A);
    ASSERT_EQ(ab.size(), ba.size());
    for (std::size_t i = 0; i < ab.size(); ++i) EXPECT_NEAR(ab[i], ba[i], 1e-12);
}

TEST(PrincipalAngles, MixedSizesAscendingCount)
{
    const Matrix A = test::random_orthonormal(2, 9, 6);
    const Matrix B = test::random_orthonormal(5, 9, 7);
    const auto angles = principal_angles(A, B);
    ASSERT_EQ(angles.size(), 2u);
    EXPECT_LE(angles[0], angles[1]);
    // A inside span(B) gives zero angles.
    const Matrix C = orthonormalize(random_matrix(2, 5, 8) * B);
    for (double a : principal_angles(C, B)) EXPECT_LE(a, 1e-8);
}

TEST(PrincipalAngles, RejectsNonOrthonormal)
{
    Matrix a(1, 3), b(1, 3);
    a << 1.01, 0, 0;
    b << 0, 1, 0;
    EXPECT_THROW(principal_angles(a, b), InvalidInput);
    EXPECT_THROW(principal_angles(b, a), InvalidInput);
    EXPECT_THROW(principal_angles(b, Matrix::Identity(2, 2)), InvalidInput);
}

TEST(Orthonormalize, DependentRowsDropped)
{
    Matrix a(2, 3);
    a << 1, 0, 0, 2, 0, 0;
    const Matrix q = orthonormalize(a);
    ASSERT_EQ(q.rows(), 1);
    EXPECT_EQ(q(0, 0), 1.0);
    EXPECT_EQ(q(0, 1), 0.0);
    EXPECT_EQ(q(0, 2), 0.0);
}

TEST(Orthonormalize, OrthonormalInputUnchanged)
{
    const Matrix a = test::random_orthonormal(4, 7, 9);
    EXPECT_LE((orthonormalize(a) - a).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Orthonormalize, RandomGramIsIdentity)
{
    const Matrix q = orthonormalize(random_matrix(6, 10, 10));
    ASSERT_EQ(q.rows(), 6);
    EXPECT_LE(orthonormality_defect(q), 1e-10);
}

TEST(Orthonormalize, ZeroAndNearDependentRows)
{
    Matrix a(4, 3);
    a << 0, 0, 0, 1, 1, 0, 1, 1, 1e-14, 0, 0, 5;
    const Matrix q = orthonormalize(a);
    EXPECT_EQ(q.rows(), 2);
    EXPECT_LE(orthonormality_defect(q), 1e-12);
}
