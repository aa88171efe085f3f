#pragma once

// Offline phase: pooled hidden states -> per-sample shift vectors -> stacked
// delta matrix -> top right-singular vectors -> basis bank.

#include "halsub/linalg.hpp"
#include "halsub/tensor_store.hpp"

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace halsub {

/// Mean of the rows of an N x d block.
inline Vector pool_tokens(const Matrix& token_states)
{
    require(token_states.rows() >= 1, "pool_tokens: need at least one token row");
    return token_states.colwise().mean().transpose();
}

/// Mean of the B variant vectors (rows) of one sample.
inline Vector aggregate_variants(const Matrix& variant_vectors)
{
    require(variant_vectors.rows() >= 1, "aggregate_variants: need at least one variant");
    return variant_vectors.colwise().mean().transpose();
}

struct DeltaMatrix {
    int layer = 0;
    Matrix data;                          // M x d, row i = aggregated counterfactual - clean
    std::vector<std::string> sample_ids;  // row order (clean manifest order)
};

struct PooledSample {
    std::string sample_id;
    Role role;
    int variant;
    Vector state;
};

/// One pooled vector per manifest record at the given layer.
inline std::vector<PooledSample> pooled_samples(const HiddenStateDump& dump, int layer)
{
    const auto& block = dump.block(layer);
    const auto offsets = dump.manifest.row_offsets();
    std::vector<PooledSample> out;
    out.reserve(dump.manifest.samples.size());
    for (std::size_t i = 0; i < dump.manifest.samples.size(); ++i) {
        const auto& s = dump.manifest.samples[i];
        const Index begin = offsets[i];
        const Index count = offsets[i + 1] - begin;
        out.push_back({s.sample_id, s.role, s.variant, pool_tokens(block.middleRows(begin, count))});
    }
    return out;
}

inline DeltaMatrix build_delta_matrix(const HiddenStateDump& clean_dump, const HiddenStateDump& cf_dump, int layer)
{
    require(clean_dump.manifest.hidden_dim == cf_dump.manifest.hidden_dim, "dumps differ in hidden_dim");
    require(clean_dump.manifest.has_layer(layer), "layer " + std::to_string(layer) + " missing from clean dump");
    require(cf_dump.manifest.has_layer(layer), "layer " + std::to_string(layer) + " missing from counterfactual dump");
    const Index d = clean_dump.manifest.hidden_dim;

    std::vector<const PooledSample*> clean;
    const auto clean_pooled = pooled_samples(clean_dump, layer);
    for (const auto& s : clean_pooled)
        if (s.role == Role::clean) clean.push_back(&s);
    require(!clean.empty(), "clean dump has no clean records");

    std::map<std::string, std::vector<const PooledSample*>> variants;
    const auto cf_pooled = pooled_samples(cf_dump, layer);
    for (const auto& s : cf_pooled)
        if (s.role == Role::counterfactual) variants[s.sample_id].push_back(&s);

    DeltaMatrix delta;
    delta.layer = layer;
    delta.data.resize(static_cast<Index>(clean.size()), d);
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const auto& id = clean[i]->sample_id;
        auto it = variants.find(id);
        require(it != variants.end(), "no counterfactual variants for sample_id '" + id + "'");
        Matrix stack(static_cast<Index>(it->second.size()), d);
        for (std::size_t j = 0; j < it->second.size(); ++j) stack.row(static_cast<Index>(j)) = it->second[j]->state.transpose();
        delta.data.row(static_cast<Index>(i)) = (aggregate_variants(stack) - clean[i]->state).transpose();
        delta.sample_ids.push_back(id);
    }
    if (variants.size() != clean.size()) {
        std::set<std::string> clean_ids(delta.sample_ids.begin(), delta.sample_ids.end());
        for (const auto& [id, _] : variants)
            require(clean_ids.count(id) == 1, "counterfactual sample_id '" + id + "' has no clean record");
    }
    require(all_finite(delta.data), "delta matrix has non-finite entries");
    return delta;
}

struct BasisResult {
    Matrix basis;  // k x d, k <= requested rank
    std::vector<double> singular_values;
    std::optional<std::string> warning;
};

/// Count of singular values above max(M, d) * eps * sigma_1.
inline Index numerical_rank(const std::vector<double>& sv, Index rows, Index cols)
{
    if (sv.empty() || sv.front() == 0.0) return 0;
    const double tol = static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() * sv.front();
    Index k = 0;
    for (double s : sv)
        if (s > tol) ++k;
    return k;
}

namespace detail {

inline BasisResult truncate_svd(const ThinSVD& svd, Index rows, Index cols, int rank, int layer)
{
    require(rank >= 1 && rank <= std::min(rows, cols),
            "rank must be in [1, min(M, d)] = [1, " + std::to_string(std::min(rows, cols)) + "], got " +
                std::to_string(rank));
    const Index k = std::min<Index>(rank, numerical_rank(svd.singular_values, rows, cols));
    BasisResult out;
    out.basis = svd.Vt.topRows(k);
    out.singular_values = svd.singular_values;
    if (k < rank)
        out.warning = "layer " + std::to_string(layer) + ": numerical rank " + std::to_string(k) + " < requested rank " +
                      std::to_string(rank) + ", basis clamped";
    return out;
}

} // namespace detail

/// Top-r right-singular vectors of the delta matrix, no centering.
inline BasisResult extract_basis(const DeltaMatrix& delta, int rank)
{
    require(rank >= 1 && rank <= std::min(delta.data.rows(), delta.data.cols()),
            "rank must be in [1, min(M, d)]");
    return detail::truncate_svd(thin_svd(delta.data), delta.data.rows(), delta.data.cols(), rank, delta.layer);
}

/// ||delta (I - V^T V)||_F^2 computed row by row.
inline double residual_energy(const Matrix& delta, const Matrix& basis)
{
    if (basis.rows() == 0) return delta.squaredNorm();
    const Matrix coeff = delta * basis.transpose();
    return (delta - coeff * basis).squaredNorm();
}

inline std::string pair_source_hash(const HiddenStateDump& clean_dump, const HiddenStateDump& cf_dump)
{
    auto files = serialize_hsd(clean_dump.manifest, clean_dump.blocks);
    auto cf = serialize_hsd(cf_dump.manifest, cf_dump.blocks);
    files.insert(files.end(), cf.begin(), cf.end());
    return content_hash(files);
}

namespace detail {

struct LayerSpectrum {
    int layer;
    Index rows;
    Index cols;
    ThinSVD svd;
};

inline std::vector<LayerSpectrum> layer_spectra(const HiddenStateDump& clean_dump, const HiddenStateDump& cf_dump,
                                                const std::vector<int>& layers)
{
    require(!layers.empty(), "at least one layer is required");
    std::vector<LayerSpectrum> out;
    for (int layer : layers) {
        const auto delta = build_delta_matrix(clean_dump, cf_dump, layer);
        out.push_back({layer, delta.data.rows(), delta.data.cols(), thin_svd(delta.data)});
    }
    return out;
}

inline BasisBank assemble_bank(const std::vector<LayerSpectrum>& spectra, int rank, int hidden_dim,
                               const std::string& source_hash)
{
    BasisBank bank;
    bank.hidden_dim = hidden_dim;
    bank.rank = rank;
    bank.source_hash = source_hash;
    for (const auto& ls : spectra) {
        auto res = truncate_svd(ls.svd, ls.rows, ls.cols, rank, ls.layer);
        bank.layers.push_back(ls.layer);
        bank.bases.emplace(ls.layer, std::move(res.basis));
        if (res.warning) bank.warnings.emplace(ls.layer, *res.warning);
    }
    return bank;
}

inline std::vector<int> sorted_unique(std::vector<int> v)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

} // namespace detail

inline BasisBank build_bank(const HiddenStateDump& clean_dump, const HiddenStateDump& cf_dump,
                            const std::vector<int>& layers, int rank)
{
    const auto sorted = detail::sorted_unique(layers);
    const auto spectra = detail::layer_spectra(clean_dump, cf_dump, sorted);
    return detail::assemble_bank(spectra, rank, clean_dump.manifest.hidden_dim, pair_source_hash(clean_dump, cf_dump));
}

/// Layers of the dump that fall inside an inclusive range.
inline std::vector<int> layers_in_range(const DatasetManifest& m, LayerRange range)
{
    std::vector<int> out;
    for (int l : m.layers)
        if (range.contains(l)) out.push_back(l);
    return out;
}

using BankEvaluator = std::function<double(const BasisBank&)>;

struct RankSweepEntry {
    int rank;
    double score;
    BasisBank bank;
};

struct RankSweepReport {
    std::vector<RankSweepEntry> entries;  // ascending rank

    json to_json() const
    {
        json entries_json = json::array();
        for (const auto& e : entries) {
            json rows = json::object();
            for (int l : e.bank.layers) rows[std::to_string(l)] = e.bank.basis(l).rows();
            json warnings = json::array();
            for (const auto& [_, w] : e.bank.warnings) warnings.push_back(w);
            entries_json.push_back({{"rank", e.rank}, {"score", e.score}, {"layer_rows", rows}, {"warnings", warnings}});
        }
        return {{"entries", entries_json}};
    }
};

inline RankSweepReport sweep_rank(const HiddenStateDump& clean_dump, const HiddenStateDump& cf_dump,
                                  const std::vector<int>& layers, const std::vector<int>& ranks,
                                  const BankEvaluator& evaluator)
{
    require(!ranks.empty(), "sweep_rank: ranks must be non-empty");
    require(static_cast<bool>(evaluator), "sweep_rank: evaluator is required");
    const auto sorted_ranks = detail::sorted_unique(ranks);
    const auto spectra = detail::layer_spectra(clean_dump, cf_dump, detail::sorted_unique(layers));
    for (int r : sorted_ranks)
        for (const auto& ls : spectra)
            require(r >= 1 && r <= std::min(ls.rows, ls.cols),
                    "sweep_rank: rank " + std::to_string(r) + " invalid for layer " + std::to_string(ls.layer));
    const auto hash = pair_source_hash(clean_dump, cf_dump);
    RankSweepReport report;
    for (int r : sorted_ranks) {
        auto bank = detail::assemble_bank(spectra, r, clean_dump.manifest.hidden_dim, hash);
        const double score = evaluator(bank);
        report.entries.push_back({r, score, std::move(bank)});
    }
    return report;
}

/// Evaluator: total residual energy of the delta matrices outside each
/// layer's basis (lower is better).
inline BankEvaluator residual_energy_evaluator(const HiddenStateDump& clean_dump, const HiddenStateDump& cf_dump)
{
    std::map<int, Matrix> deltas;
    for (int l : clean_dump.manifest.layers)
        if (cf_dump.manifest.has_layer(l)) deltas.emplace(l, build_delta_matrix(clean_dump, cf_dump, l).data);
    return [deltas = std::move(deltas)](const BasisBank& bank) {
        double total = 0.0;
        for (int l : bank.layers) total += residual_energy(deltas.at(l), bank.basis(l));
        return total;
    };
}

} // namespace halsub
