#pragma once

// Test-time suppression: h_clean = h - sum_j <h, v_j> v_j for every basis row
// v_j of the layer. Cost is O(d r) per vector; the d x d projector is only
// ever formed by the bounded-size oracle.

#include "halsub/tensor_store.hpp"

#include <array>
#include <span>
#include <vector>

namespace halsub {

inline constexpr int kProjectorOracleMaxDim = 512;

struct NullifierConfig {
    BasisBank bank;
    LayerRange active_layers{16, 32};
    bool enabled = true;
    // When false, the first `prompt_positions` rows handed to nullify_stream
    // are left untouched and only generated positions are projected.
    bool apply_to_prompt = true;
};

class Nullifier {
public:
    explicit Nullifier(NullifierConfig config) : config_(std::move(config))
    {
        validate_bank(config_.bank);
        for (int l = config_.active_layers.first; l <= config_.active_layers.last; ++l)
            require(config_.bank.bases.count(l) == 1,
                    "active layer " + std::to_string(l) + " is not in the basis bank");
        for (int l : config_.bank.layers)
            if (config_.active_layers.contains(l)) hook_layers_.push_back(l);
    }

    /// Active range defaults to every layer the bank holds.
    explicit Nullifier(BasisBank bank) : Nullifier(whole_bank_config(std::move(bank))) {}

    const NullifierConfig& config() const { return config_; }
    int hidden_dim() const { return config_.bank.hidden_dim; }

    bool is_active(int layer) const { return config_.enabled && config_.active_layers.contains(layer); }

    /// Layers at which a decode loop should invoke the hook, ascending.
    const std::vector<int>& hook_layers() const
    {
        static const std::vector<int> none;
        return config_.enabled ? hook_layers_ : none;
    }

    Vector nullify_hidden(const Vector& h, int layer) const
    {
        Vector out = h;
        apply_in_place(out, layer);
        return out;
    }

    /// binary32 boundary: computed in binary64, rounded on the way out.
    std::vector<float> nullify_hidden(std::span<const float> h, int layer) const
    {
        Vector tmp(static_cast<Index>(h.size()));
        for (std::size_t i = 0; i < h.size(); ++i) tmp(static_cast<Index>(i)) = h[i];
        apply_in_place(tmp, layer);
        std::vector<float> out(h.size());
        for (std::size_t i = 0; i < h.size(); ++i) out[i] = static_cast<float>(tmp(static_cast<Index>(i)));
        return out;
    }

    void apply_in_place(Eigen::Ref<Vector> h, int layer) const
    {
        if (h.size() != config_.bank.hidden_dim)
            throw InvalidInput("nullify: vector has dimension " + std::to_string(h.size()) + ", bank has " +
                               std::to_string(config_.bank.hidden_dim));
        if (!is_active(layer)) return;
        const Matrix& basis = config_.bank.basis(layer);
        const Index r = basis.rows();
        if (r == 0) return;
        constexpr Index kStackRank = 128;
        std::array<double, kStackRank> stack;
        std::vector<double> heap;
        double* coeff = stack.data();
        if (r > kStackRank) {
            heap.resize(static_cast<std::size_t>(r));
            coeff = heap.data();
        }
        // All coefficients come from the incoming h, then are subtracted.
        Eigen::Map<Vector> c(coeff, r);
        c.noalias() = basis * h;
        h.noalias() -= basis.transpose() * c;
    }

    /// Dense projector form, P = I - V^T V. Oracle only (d <= 512).
    Vector nullify_via_projector_oracle(const Vector& h, int layer) const
    {
        require(config_.bank.hidden_dim <= kProjectorOracleMaxDim, "projector oracle is limited to d <= 512");
        require(h.size() == config_.bank.hidden_dim, "nullify: dimension mismatch");
        if (!is_active(layer)) return h;
        return projector(layer) * h;
    }

    Eigen::MatrixXd projector(int layer) const
    {
        require(config_.bank.hidden_dim <= kProjectorOracleMaxDim, "projector oracle is limited to d <= 512");
        const Index d = config_.bank.hidden_dim;
        if (!is_active(layer)) return Eigen::MatrixXd::Identity(d, d);
        const Matrix& basis = config_.bank.basis(layer);
        return Eigen::MatrixXd::Identity(d, d) - basis.transpose() * basis;
    }

    /// Row-wise nullification of a T x d block of sequence positions.
    Matrix nullify_stream(const Matrix& states, int layer, Index prompt_positions = 0) const
    {
        require(states.cols() == config_.bank.hidden_dim, "nullify_stream: dimension mismatch");
        Matrix out = states;
        const Index first = config_.apply_to_prompt ? 0 : std::min(prompt_positions, states.rows());
        Vector row(states.cols());
        for (Index t = first; t < states.rows(); ++t) {
            row = states.row(t).transpose();
            apply_in_place(row, layer);
            out.row(t) = row.transpose();
        }
        return out;
    }

private:
    static NullifierConfig whole_bank_config(BasisBank bank)
    {
        require(!bank.layers.empty(), "basis bank has no layers");
        const LayerRange range{bank.layers.front(), bank.layers.back()};
        return NullifierConfig{std::move(bank), range, true, true};
    }

    NullifierConfig config_;
    std::vector<int> hook_layers_;
};

} // namespace halsub
