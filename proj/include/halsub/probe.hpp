#pragma once

// Layer-wise linear probes: L2-regularized logistic regression trained by
// full-batch gradient descent from zero, separating clean from perturbed
// pooled representations.

#include "halsub/confusion.hpp"
#include "halsub/rng.hpp"
#include "halsub/subspace.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

namespace halsub {

struct ProbeHyperparams {
    double l2_lambda = 1e-3;
    double learning_rate = 0.1;
    int max_iters = 5000;
    double tol = 1e-7;
};

struct ProbeModel {
    Vector weights;
    double bias = 0.0;
    ProbeHyperparams hyperparams;
    int iterations = 0;
    std::vector<double> loss_trace;  // loss after every accepted step, starting at the initial point
};

struct ProbeMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

namespace detail {

// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x)
{
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace detail

/// Mean logistic loss plus (lambda / 2) |w|^2; the bias is not penalized.
inline double logistic_loss(const Matrix& X, const std::vector<int>& y, const Vector& w, double b, double lambda)
{
    const Vector z = X * w;
    double acc = 0.0;
    for (Index i = 0; i < X.rows(); ++i) {
        const double zi = z(i) + b;
        // -log p(y|x) = softplus(z) - y z
        acc += detail::softplus(zi) - (y[static_cast<std::size_t>(i)] == 1 ? zi : 0.0);
    }
    return acc / static_cast<double>(X.rows()) + 0.5 * lambda * w.squaredNorm();
}

inline void logistic_gradient(const Matrix& X, const std::vector<int>& y, const Vector& w, double b, double lambda,
                              Vector& grad_w, double& grad_b)
{
    const Vector z = X * w;
    Vector residual(X.rows());
    for (Index i = 0; i < X.rows(); ++i)
        residual(i) = detail::sigmoid(z(i) + b) - static_cast<double>(y[static_cast<std::size_t>(i)]);
    const double n = static_cast<double>(X.rows());
    grad_w = X.transpose() * residual / n + lambda * w;
    grad_b = residual.sum() / n;
}

inline ProbeModel train_probe(const Matrix& X, const std::vector<int>& y, const ProbeHyperparams& hp = {})
{
    require(X.rows() >= 2, "train_probe: need at least two samples");
    require(static_cast<Index>(y.size()) == X.rows(), "train_probe: label count differs from sample count");
    require(all_finite(X), "train_probe: non-finite features");
    bool has0 = false, has1 = false;
    for (int label : y) {
        require(label == 0 || label == 1, "train_probe: labels must be 0 or 1");
        (label == 0 ? has0 : has1) = true;
    }
    require(has0 && has1, "train_probe: both classes must be present");
    require(hp.learning_rate > 0.0 && hp.max_iters >= 0 && hp.tol >= 0.0 && hp.l2_lambda >= 0.0,
            "train_probe: invalid hyperparameters");

    ProbeModel model;
    model.hyperparams = hp;
    model.weights = Vector::Zero(X.cols());
    double loss = logistic_loss(X, y, model.weights, model.bias, hp.l2_lambda);
    model.loss_trace.push_back(loss);

    double step = hp.learning_rate;
    Vector grad_w;
    double grad_b = 0.0;
    for (int it = 0; it < hp.max_iters; ++it) {
        logistic_gradient(X, y, model.weights, model.bias, hp.l2_lambda, grad_w, grad_b);
        const double gnorm = std::sqrt(grad_w.squaredNorm() + grad_b * grad_b);
        if (gnorm <= hp.tol) break;
        // Halve the step until the loss does not increase.
        bool accepted = false;
        while (step > 1e-20) {
            const Vector w_next = model.weights - step * grad_w;
            const double b_next = model.bias - step * grad_b;
            const double next = logistic_loss(X, y, w_next, b_next, hp.l2_lambda);
            if (next <= loss) {
                model.weights = w_next;
                model.bias = b_next;
                loss = next;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        model.loss_trace.push_back(loss);
        model.iterations = it + 1;
    }
    require(all_finite(model.weights) && std::isfinite(model.bias), "train_probe: diverged");
    return model;
}

inline std::vector<int> probe_predict(const ProbeModel& model, const Matrix& X)
{
    const Vector z = X * model.weights;
    std::vector<int> out(static_cast<std::size_t>(X.rows()));
    for (Index i = 0; i < X.rows(); ++i) out[static_cast<std::size_t>(i)] = detail::sigmoid(z(i) + model.bias) >= 0.5 ? 1 : 0;
    return out;
}

inline ProbeMetrics probe_metrics(const ProbeModel& model, const Matrix& X, const std::vector<int>& y)
{
    require(X.rows() >= 1, "probe_metrics: need at least one sample");
    require(static_cast<Index>(y.size()) == X.rows(), "probe_metrics: label count differs from sample count");
    require(model.weights.size() == X.cols(), "probe_metrics: feature dimension mismatch");
    const auto pred = probe_predict(model, X);
    Confusion c;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (pred[i] == 1) (y[i] == 1 ? c.tp : c.fp)++;
        else (y[i] == 1 ? c.fn : c.tn)++;
    }
    return {c.accuracy(), c.precision(), c.recall(), c.f1()};
}

struct ProbeLayerRecord {
    int layer;
    ProbeMetrics metrics;
    int n_train;
    int n_test;
};

struct ProbeReport {
    std::vector<ProbeLayerRecord> layers;

    json to_json() const
    {
        json arr = json::array();
        for (const auto& r : layers)
            arr.push_back({{"layer", r.layer},
                           {"accuracy", r.metrics.accuracy},
                           {"precision", r.metrics.precision},
                           {"recall", r.metrics.recall},
                           {"f1", r.metrics.f1},
                           {"n_train", r.n_train},
                           {"n_test", r.n_test}});
        return {{"layers", arr}};
    }

    std::string to_csv() const
    {
        std::ostringstream os;
        os.precision(17);
        os << "layer,accuracy,precision,recall,f1,n_train,n_test\n";
        for (const auto& r : layers)
            os << r.layer << ',' << r.metrics.accuracy << ',' << r.metrics.precision << ',' << r.metrics.recall << ','
               << r.metrics.f1 << ',' << r.n_train << ',' << r.n_test << '\n';
        return os.str();
    }
};

/// Seeded Fisher-Yates permutation of 0..n-1.
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed, std::uint64_t stream)
{
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    CounterRng rng(seed, stream);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

/// Class 0: clean records of `clean_dump`; class 1: counterfactual records of
/// `perturbed_dump`. Classes are balanced by truncating the larger one after
/// a seeded shuffle, then interleaved so both splits stay balanced. The same
/// samples are used at every layer.
inline ProbeReport layerwise_probe(const HiddenStateDump& clean_dump, const HiddenStateDump& perturbed_dump,
                                   int n_train = 400, int n_test = 1000, std::uint64_t seed = 0,
                                   const ProbeHyperparams& hp = {})
{
    require(n_train >= 2 && n_test >= 1, "layerwise_probe: n_train >= 2 and n_test >= 1 required");
    require(clean_dump.manifest.hidden_dim == perturbed_dump.manifest.hidden_dim, "dumps differ in hidden_dim");
    std::vector<int> layers;
    for (int l : clean_dump.manifest.layers)
        if (perturbed_dump.manifest.has_layer(l)) layers.push_back(l);
    require(!layers.empty(), "layerwise_probe: dumps share no layers");

    std::vector<std::size_t> idx0, idx1;
    for (std::size_t i = 0; i < clean_dump.manifest.samples.size(); ++i)
        if (clean_dump.manifest.samples[i].role == Role::clean) idx0.push_back(i);
    for (std::size_t i = 0; i < perturbed_dump.manifest.samples.size(); ++i)
        if (perturbed_dump.manifest.samples[i].role == Role::counterfactual) idx1.push_back(i);
    const std::size_t per_class = std::min(idx0.size(), idx1.size());
    require(static_cast<std::size_t>(n_train + n_test) <= 2 * per_class,
            "layerwise_probe: insufficient samples: need " + std::to_string(n_train + n_test) + ", have " +
                std::to_string(2 * per_class) + " after balancing");

    const auto perm0 = seeded_permutation(idx0.size(), seed, 1);
    const auto perm1 = seeded_permutation(idx1.size(), seed, 2);
    std::vector<std::pair<std::size_t, int>> order;  // (record index, label)
    for (std::size_t i = 0; i < per_class; ++i) {
        order.emplace_back(idx0[perm0[i]], 0);
        order.emplace_back(idx1[perm1[i]], 1);
    }

    ProbeReport report;
    const Index d = clean_dump.manifest.hidden_dim;
    for (int layer : layers) {
        const auto clean = pooled_samples(clean_dump, layer);
        const auto pert = pooled_samples(perturbed_dump, layer);
        auto fill = [&](std::size_t begin, int count, Matrix& X, std::vector<int>& y) {
            X.resize(count, d);
            y.resize(static_cast<std::size_t>(count));
            for (int i = 0; i < count; ++i) {
                const auto [rec, label] = order[begin + static_cast<std::size_t>(i)];
                X.row(i) = (label == 0 ? clean[rec].state : pert[rec].state).transpose();
                y[static_cast<std::size_t>(i)] = label;
            }
        };
        Matrix Xtr, Xte;
        std::vector<int> ytr, yte;
        fill(0, n_train, Xtr, ytr);
        fill(static_cast<std::size_t>(n_train), n_test, Xte, yte);
        const auto model = train_probe(Xtr, ytr, hp);
        report.layers.push_back({layer, probe_metrics(model, Xte, yte), n_train, n_test});
    }
    return report;
}

} // namespace halsub
