#pragma once

// Ground-truth fixtures: a planted-subspace generator producing paired
// clean/counterfactual dumps, a greedy toy recurrent decoder with a
// pre-readout hook, and a feature-space noise sweep.

#include "halsub/nullifier.hpp"
#include "halsub/rng.hpp"
#include "halsub/subspace.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace halsub {

struct SyntheticSpec {
    int d = 64;
    int k = 4;
    int M = 500;
    int B = 5;
    double shift = 1.0;
    double coeff_noise = 1.0;
    double ambient_noise = 0.0;
    std::uint64_t seed = 0;
    std::vector<int> layers{0};

    void validate() const
    {
        require(d >= 1, "synthetic spec: d must be >= 1");
        require(k >= 1 && k <= d, "synthetic spec: need 1 <= k <= d");
        require(M >= 1 && B >= 1, "synthetic spec: M and B must be >= 1");
        require(shift >= 0.0 && coeff_noise >= 0.0 && ambient_noise >= 0.0, "synthetic spec: negative magnitude");
        require(!layers.empty(), "synthetic spec: layers must be non-empty");
        for (std::size_t i = 1; i < layers.size(); ++i)
            require(layers[i] > layers[i - 1], "synthetic spec: layers must be strictly increasing");
        require(layers.front() >= 0, "synthetic spec: layers must be non-negative");
    }
};

struct PlantedData {
    HiddenStateDump clean;
    HiddenStateDump cf;
    Matrix planted;  // k x d orthonormal rows
};

namespace detail {

// Stream ids: 0 = planted basis; per layer l, 16*(l+1) + {0: clean, 1: coefficients, 2: ambient}.
inline std::uint64_t layer_stream(int layer, int purpose) { return 16u * (static_cast<std::uint64_t>(layer) + 1u) + static_cast<std::uint64_t>(purpose); }

inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

inline Matrix seeded_orthonormal_rows(Index rows, Index cols, std::uint64_t seed, std::uint64_t stream = 0)
{
    CounterRng rng(seed, stream);
    for (;;) {
        Matrix q = orthonormalize(rng.gaussian_matrix(rows, cols));
        if (q.rows() == rows) return q;
    }
}

/// clean h_i ~ N(0, I_d); counterfactual h_ij = h_i + Q^T c_ij + e_ij with
/// c_ij ~ N(shift 1_k, coeff_noise^2 I_k), e_ij ~ N(0, ambient_noise^2 I_d).
/// Every layer draws independently but shares the planted basis Q.
inline PlantedData gen_planted(const SyntheticSpec& spec)
{
    spec.validate();
    PlantedData out;
    out.planted = seeded_orthonormal_rows(spec.k, spec.d, spec.seed, 0);

    std::ostringstream id;
    id << "synthetic-planted;rng=" << kRngAlgorithm << ";seed=" << spec.seed << ";k=" << spec.k
       << ";shift=" << detail::format_double(spec.shift) << ";coeff_noise=" << detail::format_double(spec.coeff_noise)
       << ";ambient_noise=" << detail::format_double(spec.ambient_noise);

    DatasetManifest base;
    base.model_id = id.str();
    base.hidden_dim = spec.d;
    base.layers = spec.layers;
    base.granularity = Granularity::pooled;
    base.pooling = Pooling::mean;

    out.clean.manifest = base;
    out.cf.manifest = base;
    for (int i = 0; i < spec.M; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "s%06d", i);
        out.clean.manifest.samples.push_back({name, Role::clean, 0, std::nullopt});
        for (int j = 1; j <= spec.B; ++j) out.cf.manifest.samples.push_back({name, Role::counterfactual, j, std::nullopt});
    }

    for (int layer : spec.layers) {
        CounterRng clean_rng(spec.seed, detail::layer_stream(layer, 0));
        CounterRng coeff_rng(spec.seed, detail::layer_stream(layer, 1));
        CounterRng noise_rng(spec.seed, detail::layer_stream(layer, 2));
        Matrix clean = clean_rng.gaussian_matrix(spec.M, spec.d);
        Matrix cf(static_cast<Index>(spec.M) * spec.B, spec.d);
        Eigen::RowVectorXd c(spec.k);
        for (int i = 0; i < spec.M; ++i)
            for (int j = 0; j < spec.B; ++j) {
                for (int a = 0; a < spec.k; ++a) c(a) = spec.shift + spec.coeff_noise * coeff_rng.gaussian();
                Eigen::RowVectorXd row = clean.row(i) + c * out.planted;
                if (spec.ambient_noise > 0.0)
                    for (int a = 0; a < spec.d; ++a) row(a) += spec.ambient_noise * noise_rng.gaussian();
                cf.row(static_cast<Index>(i) * spec.B + j) = row;
            }
        out.clean.blocks.emplace(layer, std::move(clean));
        out.cf.blocks.emplace(layer, std::move(cf));
    }
    return out;
}

/// Largest principal angle between each bank layer's basis and Q.
inline double recovery_error(const BasisBank& bank, const Matrix& planted)
{
    require(!bank.layers.empty(), "recovery_error: empty bank");
    double worst = 0.0;
    for (int layer : bank.layers) {
        const Matrix& basis = bank.basis(layer);
        require(basis.rows() == planted.rows(), "recovery_error: layer " + std::to_string(layer) + " has " +
                                                    std::to_string(basis.rows()) + " basis rows, planted rank is " +
                                                    std::to_string(planted.rows()));
        const auto angles = principal_angles(basis, planted);
        if (!angles.empty()) worst = std::max(worst, angles.back());
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Toy decoder

struct ToyDecoderSpec {
    int d = 64;
    int vocab = 32;
    // The last `reserved` state coordinates are never written by the
    // recurrence or the embeddings; only injections reach them. A bank whose
    // span lies inside this block therefore never touches clean states.
    int reserved = 0;
    std::uint64_t seed = 0;
    double spectral_radius = 0.9;
};

/// (|A^{2K} x| / |A^K x|)^{1/K} from a seeded start vector.
inline double estimate_spectral_radius(const Matrix& A, int K = 200, std::uint64_t seed = 0x7ad1u)
{
    CounterRng rng(seed);
    Vector x(A.cols());
    for (Index i = 0; i < x.size(); ++i) x(i) = rng.gaussian();
    x.normalize();
    double log_growth_half = 0.0;
    double log_growth = 0.0;
    Vector y(A.rows());
    for (int t = 0; t < 2 * K; ++t) {
        y.noalias() = A * x;
        const double n = y.norm();
        if (n == 0.0) return 0.0;
        log_growth += std::log(n);
        if (t + 1 == K) log_growth_half = log_growth;
        x = y / n;
    }
    return std::exp((log_growth - log_growth_half) / K);
}

struct Injection {
    Vector direction;
    double scale = 1.0;
};

class ToyDecoder {
public:
    explicit ToyDecoder(const ToyDecoderSpec& spec) : spec_(spec)
    {
        require(spec.d >= 1 && spec.vocab >= 1, "toy decoder: d and vocab must be >= 1");
        require(spec.reserved >= 0 && spec.reserved < spec.d, "toy decoder: need 0 <= reserved < d");
        require(spec.spectral_radius > 0.0, "toy decoder: spectral radius must be positive");
        const Index d = spec.d;
        const Index live = d - spec.reserved;
        CounterRng rng_a(spec.seed, 1), rng_e(spec.seed, 2), rng_u(spec.seed, 3);
        A_ = Matrix::Zero(d, d);
        A_.topLeftCorner(live, live) = rng_a.gaussian_matrix(live, live, 1.0 / std::sqrt(static_cast<double>(live)));
        const double rho = estimate_spectral_radius(A_.topLeftCorner(live, live));
        if (rho > 0.0) A_ *= spec.spectral_radius / rho;
        E_ = Matrix::Zero(spec.vocab, d);
        E_.leftCols(live) = rng_e.gaussian_matrix(spec.vocab, live);
        U_ = rng_u.gaussian_matrix(spec.vocab, d, 1.0 / std::sqrt(static_cast<double>(d)));
    }

    const ToyDecoderSpec& spec() const { return spec_; }
    const Matrix& recurrence() const { return A_; }
    const Matrix& embeddings() const { return E_; }
    const Matrix& readout() const { return U_; }

    /// Greedy decode. The recurrence h <- tanh(A h + E[token]) consumes the
    /// prompt, then each step forms h' = h + s g (if injecting), runs the
    /// nullifier hook on h' at each of its active layers, and emits
    /// argmax(U h') with ties going to the lowest id. h' never feeds back.
    std::vector<int> decode(const std::vector<int>& prompt, int steps, const std::optional<Injection>& injection = {},
                            const Nullifier* nullifier = nullptr) const
    {
        require(steps >= 1, "toy decode: steps must be >= 1");
        const Index d = spec_.d;
        if (injection) require(injection->direction.size() == d, "toy decode: injection direction has wrong dimension");
        if (nullifier) require(nullifier->hidden_dim() == d, "toy decode: nullifier dimension differs from decoder");
        for (int tok : prompt) require(tok >= 0 && tok < spec_.vocab, "toy decode: prompt token out of range");

        Vector h = Vector::Zero(d);
        Vector pre(d), readout_state(d), logits(spec_.vocab);
        auto advance = [&](int tok) {
            pre.noalias() = A_ * h;
            pre += E_.row(tok).transpose();
            h = pre.array().tanh().matrix();
        };
        for (int tok : prompt) advance(tok);

        std::vector<int> out;
        out.reserve(static_cast<std::size_t>(steps));
        for (int t = 0; t < steps; ++t) {
            readout_state = h;
            if (injection) readout_state += injection->scale * injection->direction;
            if (nullifier)
                for (int layer : nullifier->hook_layers()) nullifier->apply_in_place(readout_state, layer);
            logits.noalias() = U_ * readout_state;
            Index best = 0;
            for (Index v = 1; v < logits.size(); ++v)
                if (logits(v) > logits(best)) best = v;
            out.push_back(static_cast<int>(best));
            advance(static_cast<int>(best));
        }
        return out;
    }

private:
    ToyDecoderSpec spec_;
    Matrix A_;
    Matrix E_;
    Matrix U_;
};

inline std::vector<int> toy_decode(const ToyDecoder& decoder, const std::vector<int>& prompt, int steps,
                                   const std::optional<Injection>& injection = {}, const Nullifier* nullifier = nullptr)
{
    return decoder.decode(prompt, steps, injection, nullifier);
}

// ---------------------------------------------------------------------------
// Feature-space noise sweep

struct NoiseLayerRecord {
    int layer;
    double energy_before;  // mean |V x|^2, x = counterfactual state + noise
    double energy_after;   // mean |V P x|^2
    double ratio_before;   // mean |V^T V x| / |x|
    double ratio_after;    // mean |V^T V P x| / |P x|
};

struct NoiseSweepEntry {
    double sigma;
    std::vector<NoiseLayerRecord> layers;
};

struct NoiseReport {
    std::vector<NoiseSweepEntry> entries;

    json to_json() const
    {
        json arr = json::array();
        for (const auto& e : entries) {
            json layers = json::array();
            for (const auto& l : e.layers)
                layers.push_back({{"layer", l.layer},
                                  {"energy_before", l.energy_before},
                                  {"energy_after", l.energy_after},
                                  {"ratio_before", l.ratio_before},
                                  {"ratio_after", l.ratio_after}});
            arr.push_back({{"sigma", e.sigma}, {"layers", layers}});
        }
        return {{"entries", arr}};
    }

    std::string to_csv() const
    {
        std::ostringstream os;
        os.precision(17);
        os << "sigma,layer,energy_before,energy_after,ratio_before,ratio_after\n";
        for (const auto& e : entries)
            for (const auto& l : e.layers)
                os << e.sigma << ',' << l.layer << ',' << l.energy_before << ',' << l.energy_after << ','
                   << l.ratio_before << ',' << l.ratio_after << '\n';
        return os.str();
    }
};

/// Adds seeded N(0, sigma^2 I) to every pooled counterfactual vector of
/// `cf_dump` and measures the in-subspace component before and after
/// nullification. Entry i draws noise from stream seed + i.
inline NoiseReport feature_noise_sweep(const HiddenStateDump& clean_dump, const HiddenStateDump& cf_dump,
                                       const BasisBank& bank, const std::vector<double>& sigmas,
                                       std::uint64_t seed = 0)
{
    require(!sigmas.empty(), "noise sweep: sigmas must be non-empty");
    for (double s : sigmas) require(std::isfinite(s) && s >= 0.0, "noise sweep: sigmas must be finite and >= 0");
    require(bank.hidden_dim == cf_dump.manifest.hidden_dim, "noise sweep: bank and dump differ in hidden_dim");
    require(clean_dump.manifest.hidden_dim == cf_dump.manifest.hidden_dim, "noise sweep: dumps differ in hidden_dim");
    validate_bank(bank);

    NoiseReport report;
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
        NoiseSweepEntry entry{sigmas[si], {}};
        for (int layer : bank.layers) {
            require(cf_dump.manifest.has_layer(layer), "noise sweep: layer " + std::to_string(layer) + " missing from dump");
            CounterRng rng(seed + si, detail::layer_stream(layer, 3));
            const Matrix& V = bank.basis(layer);
            const auto pooled = pooled_samples(cf_dump, layer);
            NoiseLayerRecord rec{layer, 0.0, 0.0, 0.0, 0.0};
            std::size_t n = 0;
            for (const auto& s : pooled) {
                if (s.role != Role::counterfactual) continue;
                Vector x = s.state;
                if (sigmas[si] > 0.0)
                    for (Index a = 0; a < x.size(); ++a) x(a) += sigmas[si] * rng.gaussian();
                const Vector in_before = V * x;
                const Vector cleaned = x - V.transpose() * in_before;
                const Vector in_after = V * cleaned;
                rec.energy_before += in_before.squaredNorm();
                rec.energy_after += in_after.squaredNorm();
                const double nx = x.norm();
                const double nc = cleaned.norm();
                rec.ratio_before += nx > 0.0 ? in_before.norm() / nx : 0.0;
                rec.ratio_after += nc > 0.0 ? in_after.norm() / nc : 0.0;
                ++n;
            }
            require(n > 0, "noise sweep: dump has no counterfactual records");
            const double inv = 1.0 / static_cast<double>(n);
            rec.energy_before *= inv;
            rec.energy_after *= inv;
            rec.ratio_before *= inv;
            rec.ratio_after *= inv;
            entry.layers.push_back(rec);
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

} // namespace halsub
