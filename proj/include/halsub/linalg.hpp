#pragma once

// Dense, deterministic linear algebra used by the extractor and its oracles.
//
// thin_svd is a one-sided (Hestenes) Jacobi SVD run on the smaller dimension,
// optionally preconditioned by a Householder QR when the matrix is tall.
// gram_eig_oracle is a classical two-sided Jacobi eigensolver on A^T A and
// shares no code with thin_svd; tests pit the two against each other.

#include "halsub/common.hpp"
#include "halsub/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace halsub {

struct ThinSVD {
    Matrix U;                             // M x k
    std::vector<double> singular_values;  // k, non-increasing
    Matrix Vt;                            // k x d, rows are right-singular vectors
};

struct GramEig {
    Vector eigenvalues;   // d, non-increasing
    Matrix eigenvectors;  // d x d, column j pairs with eigenvalues(j)
};

inline constexpr int kGramOracleMaxDim = 512;

namespace detail {

using ColMatrix = Eigen::MatrixXd;

// Orthogonalizes the columns of W in place by plane rotations, accumulating
// the rotations in V. On exit |w_p . w_q| <= tol * |w_p| |w_q| for all pairs.
inline void hestenes_jacobi(ColMatrix& W, ColMatrix& V)
{
    const Index n = W.cols();
    V = ColMatrix::Identity(n, n);
    if (n < 2) return;
    const double tol = std::max(1e-15, std::sqrt(static_cast<double>(W.rows())) *
                                           std::numeric_limits<double>::epsilon());
    constexpr int kMaxSweeps = 80;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (Index p = 0; p < n - 1; ++p) {
            for (Index q = p + 1; q < n; ++q) {
                const double alpha = W.col(p).squaredNorm();
                const double beta = W.col(q).squaredNorm();
                const double gamma = W.col(p).dot(W.col(q));
                if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (Index i = 0; i < W.rows(); ++i) {
                    const double wp = W(i, p);
                    const double wq = W(i, q);
                    W(i, p) = c * wp - s * wq;
                    W(i, q) = s * wp + c * wq;
                }
                for (Index i = 0; i < n; ++i) {
                    const double vp = V(i, p);
                    const double vq = V(i, q);
                    V(i, p) = c * vp - s * vq;
                    V(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }
}

// Replaces the listed columns of Q with unit vectors orthogonal to every
// other column, drawn from the standard basis by Gram-Schmidt.
inline void complete_orthonormal_columns(ColMatrix& Q, const std::vector<Index>& missing)
{
    std::vector<bool> is_missing(static_cast<std::size_t>(Q.cols()), false);
    for (Index j : missing) is_missing[static_cast<std::size_t>(j)] = true;
    Index candidate = 0;
    for (Index j : missing) {
        for (; candidate < Q.rows(); ++candidate) {
            Eigen::VectorXd v = Eigen::VectorXd::Unit(Q.rows(), candidate);
            for (int pass = 0; pass < 2; ++pass)
                for (Index c = 0; c < Q.cols(); ++c)
                    if (!is_missing[static_cast<std::size_t>(c)]) v -= Q.col(c).dot(v) * Q.col(c);
            const double norm = v.norm();
            if (norm > 0.5) {
                Q.col(j) = v / norm;
                is_missing[static_cast<std::size_t>(j)] = false;
                ++candidate;
                break;
            }
        }
    }
}

// SVD of a matrix with at least as many rows as columns: A = L diag(s) R^T.
inline void svd_tall(const ColMatrix& A, ColMatrix& L, Eigen::VectorXd& s, ColMatrix& R)
{
    const Index n = A.cols();
    ColMatrix W;
    ColMatrix Qthin;
    const bool precondition = A.rows() >= 2 * n && n > 0;
    if (precondition) {
        Eigen::HouseholderQR<ColMatrix> qr(A);
        W = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
        Qthin = qr.householderQ() * ColMatrix::Identity(A.rows(), n);
    } else {
        W = A;
    }
    hestenes_jacobi(W, R);
    s.resize(n);
    std::vector<Index> zero_cols;
    for (Index j = 0; j < n; ++j) {
        s(j) = W.col(j).norm();
        if (s(j) > std::numeric_limits<double>::min())
            W.col(j) /= s(j);
        else {
            s(j) = 0.0;
            zero_cols.push_back(j);
        }
    }
    if (!zero_cols.empty()) complete_orthonormal_columns(W, zero_cols);
    L = precondition ? ColMatrix(Qthin * W) : W;
}

} // namespace detail

/// Thin SVD with a deterministic sign convention: in every right-singular
/// vector the entry of largest magnitude (lowest index on ties) is
/// non-negative. Equal singular values are ordered by that pivot index.
inline ThinSVD thin_svd(const Matrix& A)
{
    require(A.rows() >= 1 && A.cols() >= 1, "thin_svd: empty matrix");
    require(all_finite(A), "thin_svd: non-finite entries");

    const Index M = A.rows();
    const Index d = A.cols();
    const Index k = std::min(M, d);

    detail::ColMatrix left, right;
    Eigen::VectorXd s;
    detail::ColMatrix U(M, k), V(d, k);
    if (M >= d) {
        detail::svd_tall(detail::ColMatrix(A), left, s, right);
        U = left;
        V = right;
    } else {
        detail::svd_tall(detail::ColMatrix(A.transpose()), left, s, right);
        U = right;
        V = left;
    }

    std::vector<Index> pivot(static_cast<std::size_t>(k));
    for (Index j = 0; j < k; ++j) {
        Index best = 0;
        for (Index i = 1; i < d; ++i)
            if (std::abs(V(i, j)) > std::abs(V(best, j))) best = i;
        pivot[static_cast<std::size_t>(j)] = best;
        if (V(best, j) < 0.0) {
            V.col(j) = -V.col(j);
            U.col(j) = -U.col(j);
        }
    }

    std::vector<Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        if (s(a) != s(b)) return s(a) > s(b);
        return pivot[static_cast<std::size_t>(a)] < pivot[static_cast<std::size_t>(b)];
    });

    ThinSVD out;
    out.U.resize(M, k);
    out.Vt.resize(k, d);
    out.singular_values.resize(static_cast<std::size_t>(k));
    for (Index j = 0; j < k; ++j) {
        const Index src = order[static_cast<std::size_t>(j)];
        out.U.col(j) = U.col(src);
        out.Vt.row(j) = V.col(src).transpose();
        out.singular_values[static_cast<std::size_t>(j)] = s(src);
    }
    return out;
}

/// Eigendecomposition of A^T A by cyclic Jacobi rotations. Test oracle only.
inline GramEig gram_eig_oracle(const Matrix& A)
{
    const Index d = A.cols();
    require(d >= 1 && d <= kGramOracleMaxDim, "gram_eig_oracle: hidden_dim must be in [1, 512]");
    Eigen::MatrixXd G = A.transpose() * A;
    Eigen::MatrixXd V = Eigen::MatrixXd::Identity(d, d);

    const double scale = G.norm();
    auto off_norm = [&] {
        double acc = 0.0;
        for (Index i = 0; i < d; ++i)
            for (Index j = 0; j < d; ++j)
                if (i != j) acc += G(i, j) * G(i, j);
        return std::sqrt(acc);
    };
    constexpr int kMaxSweeps = 100;
    for (int sweep = 0; sweep < kMaxSweeps && off_norm() > 1e-12 * scale; ++sweep) {
        for (Index p = 0; p < d - 1; ++p) {
            for (Index q = p + 1; q < d; ++q) {
                const double gpq = G(p, q);
                if (gpq == 0.0) continue;
                const double theta = (G(q, q) - G(p, p)) / (2.0 * gpq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Index i = 0; i < d; ++i) {
                    const double gip = G(i, p);
                    const double giq = G(i, q);
                    G(i, p) = c * gip - s * giq;
                    G(i, q) = s * gip + c * giq;
                }
                for (Index i = 0; i < d; ++i) {
                    const double gpi = G(p, i);
                    const double gqi = G(q, i);
                    G(p, i) = c * gpi - s * gqi;
                    G(q, i) = s * gpi + c * gqi;
                }
                for (Index i = 0; i < d; ++i) {
                    const double vip = V(i, p);
                    const double viq = V(i, q);
                    V(i, p) = c * vip - s * viq;
                    V(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return G(a, a) > G(b, b); });
    GramEig out;
    out.eigenvalues.resize(d);
    out.eigenvectors.resize(d, d);
    for (Index j = 0; j < d; ++j) {
        const Index src = order[static_cast<std::size_t>(j)];
        out.eigenvalues(j) = G(src, src);
        out.eigenvectors.col(j) = V.col(src);
    }
    return out;
}

/// Largest deviation of the row Gram matrix from the identity.
inline double orthonormality_defect(const Matrix& rows)
{
    if (rows.rows() == 0) return 0.0;
    const Matrix gram = rows * rows.transpose();
    return (gram - Matrix::Identity(rows.rows(), rows.rows())).cwiseAbs().maxCoeff();
}

/// Principal angles (radians, ascending) between the row spaces of two
/// orthonormal-row matrices. Cosines come from the SVD of A B^T and sines
/// from the SVD of the part of the smaller basis outside the larger span;
/// each angle is atan2(sin, cos), which stays accurate near 0 and pi/2.
inline std::vector<double> principal_angles(const Matrix& A, const Matrix& B)
{
    require(A.cols() == B.cols(), "principal_angles: dimension mismatch");
    require(orthonormality_defect(A) <= 1e-8, "principal_angles: first input is not orthonormal");
    require(orthonormality_defect(B) <= 1e-8, "principal_angles: second input is not orthonormal");
    const Matrix& small = A.rows() <= B.rows() ? A : B;
    const Matrix& large = A.rows() <= B.rows() ? B : A;
    const Index p = small.rows();
    if (p == 0) return {};

    const Matrix cross = small * large.transpose();
    const auto cosines = thin_svd(cross).singular_values;
    const Matrix outside = small - cross * large;
    const auto sines = thin_svd(outside).singular_values;

    std::vector<double> angles(static_cast<std::size_t>(p));
    for (Index i = 0; i < p; ++i) {
        const double c = std::clamp(cosines[static_cast<std::size_t>(i)], 0.0, 1.0);
        const double s = std::clamp(sines[static_cast<std::size_t>(p - 1 - i)], 0.0, 1.0);
        angles[static_cast<std::size_t>(i)] = std::atan2(s, c);
    }
    std::sort(angles.begin(), angles.end());
    return angles;
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Rows whose
/// residual falls to 1e-12 of their original norm are dropped, so the row
/// count of the result is the numerical rank.
inline Matrix orthonormalize(const Matrix& A)
{
    require(all_finite(A), "orthonormalize: non-finite entries");
    Matrix out(A.rows(), A.cols());
    Index kept = 0;
    for (Index i = 0; i < A.rows(); ++i) {
        Eigen::RowVectorXd v = A.row(i);
        const double original = v.norm();
        if (original == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass)
            for (Index j = 0; j < kept; ++j) v -= v.dot(out.row(j)) * out.row(j);
        const double residual = v.norm();
        if (residual <= 1e-12 * original) continue;
        out.row(kept++) = v / residual;
    }
    return out.topRows(kept);
}

/// sigma_1 by power iteration on A^T A from a seeded start vector.
inline double spectral_norm_power(const Matrix& A, int iterations = 1000, std::uint64_t seed = 0x5eed)
{
    CounterRng rng(seed);
    Eigen::VectorXd x(A.cols());
    for (Index i = 0; i < x.size(); ++i) x(i) = rng.gaussian();
    x.normalize();
    double estimate = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Eigen::VectorXd y = A.transpose() * (A * x);
        const double norm = y.norm();
        if (norm == 0.0) return 0.0;
        estimate = std::sqrt(x.dot(y));
        x = y / norm;
    }
    return estimate;
}

} // namespace halsub
