#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace halsub {

// Row-major everywhere: a hidden state is a row, a basis vector is a row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Bad arguments, shape mismatches, violated invariants.
class InvalidInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent files on disk.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem failures (unwritable path, missing file).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what)
{
    if (!cond) throw InvalidInput(what);
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m)
{
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j)
            if (!std::isfinite(static_cast<double>(m(i, j)))) return false;
    return true;
}

/// Inclusive layer range `first..last`.
struct LayerRange {
    int first = 16;
    int last = 32;

    bool contains(int layer) const { return layer >= first && layer <= last; }
    friend bool operator==(const LayerRange&, const LayerRange&) = default;
};

inline LayerRange parse_layer_range(const std::string& text)
{
    auto pos = text.find("..");
    LayerRange r;
    try {
        if (pos == std::string::npos) {
            r.first = r.last = std::stoi(text);
        } else {
            std::size_t used = 0;
            r.first = std::stoi(text.substr(0, pos), &used);
            if (used != pos) throw InvalidInput("bad layer range: " + text);
            auto rest = text.substr(pos + 2);
            r.last = std::stoi(rest, &used);
            if (used != rest.size()) throw InvalidInput("bad layer range: " + text);
        }
    } catch (const std::logic_error&) {
        throw InvalidInput("bad layer range: " + text);
    }
    require(r.first >= 0 && r.first <= r.last, "bad layer range: " + text);
    return r;
}

} // namespace halsub
