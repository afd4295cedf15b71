#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "mhla/errors.hpp"
#include "mhla/matrix.hpp"

namespace mhla {

/// Thin SVD: input (m x n) factors as U * diag(s) * Vᵀ with k = min(m, n)
/// columns in U and V, singular values sorted descending.
struct SvdResult {
    Vector singular_values;
    Matrix left_vectors;   // m x k, column-orthonormal
    Matrix right_vectors;  // n x k, column-orthonormal
};

/// Full symmetric eigendecomposition, eigenvalues sorted descending.
struct SymEigResult {
    Vector values;
    Matrix vectors;  // column j pairs with values[j]
};

namespace detail {

constexpr int kJacobiMaxSweeps = 100;
constexpr double kJacobiTol = 1e-12;  // relative off-diagonal mass

// Column-major scratch view used by the Jacobi sweeps so paired columns are
// contiguous in memory.
struct ColBuf {
    std::size_t m = 0, n = 0;
    std::vector<double> a;
    ColBuf(std::size_t rows, std::size_t cols) : m(rows), n(cols), a(rows * cols, 0.0) {}
    double* col(std::size_t j) { return a.data() + j * m; }
    const double* col(std::size_t j) const { return a.data() + j * m; }
};

inline SvdResult one_sided_jacobi(const Matrix& input) {
    const std::size_t m = input.rows(), n = input.cols();  // m >= n here
    ColBuf a(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) a.col(j)[i] = input(i, j);

    ColBuf v(n, n);
    for (std::size_t j = 0; j < n; ++j) v.col(j)[j] = 1.0;

    std::vector<double> sq(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double* c = a.col(j);
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += c[i] * c[i];
        sq[j] = acc;
    }

    // A pair is rotated only when its inner product clears both a pairwise
    // relative threshold and an absolute one tied to the largest column;
    // the absolute floor keeps float noise between wildly unequal columns
    // from forcing endless sweeps on rank-deficient inputs.
    bool converged = false;
    for (int sweep = 0; sweep < kJacobiMaxSweeps && !converged; ++sweep) {
        double smax_sq = 0.0;
        for (std::size_t j = 0; j < n; ++j) smax_sq = std::max(smax_sq, sq[j]);
        if (smax_sq == 0.0) {
            converged = true;
            break;
        }
        const double abs_floor = 1e-15 * smax_sq;
        std::size_t rotations = 0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double alpha = sq[p], beta = sq[q];
                if (alpha == 0.0 || beta == 0.0) continue;
                double* ap = a.col(p);
                double* aq = a.col(q);
                double gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) gamma += ap[i] * aq[i];
                const double mag = std::abs(gamma);
                if (mag <= kJacobiTol * std::sqrt(alpha * beta) || mag <= abs_floor)
                    continue;
                ++rotations;

                const double tau = (beta - alpha) / (2.0 * gamma);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double x = ap[i], y = aq[i];
                    ap[i] = c * x - s * y;
                    aq[i] = s * x + c * y;
                }
                double* vp = v.col(p);
                double* vq = v.col(q);
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = vp[i], y = vq[i];
                    vp[i] = c * x - s * y;
                    vq[i] = s * x + c * y;
                }
                sq[p] = c * c * alpha + s * s * beta - 2.0 * c * s * gamma;
                sq[q] = s * s * alpha + c * c * beta + 2.0 * c * s * gamma;
            }
        }
        if (rotations == 0) converged = true;
    }
    if (!converged) throw NumericError("svd: Jacobi sweeps did not converge");

    // Exact column norms are the singular values.
    std::vector<double> sigma(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double* c = a.col(j);
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += c[i] * c[i];
        sigma[j] = std::sqrt(acc);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    const double sig_max = n ? sigma[order[0]] : 0.0;
    const double tiny = sig_max > 0.0 ? sig_max * 1e-300 : 0.0;

    SvdResult out;
    out.singular_values.resize(n);
    out.left_vectors = Matrix(m, n);
    out.right_vectors = Matrix(n, n);
    std::vector<std::size_t> deficient;
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t j = order[r];
        out.singular_values[r] = sigma[j];
        for (std::size_t i = 0; i < n; ++i) out.right_vectors(i, r) = v.col(j)[i];
        if (sigma[j] > tiny && sigma[j] > 0.0) {
            const double inv = 1.0 / sigma[j];
            for (std::size_t i = 0; i < m; ++i) out.left_vectors(i, r) = a.col(j)[i] * inv;
        } else {
            out.singular_values[r] = 0.0;
            deficient.push_back(r);
        }
    }
    // Zero singular values: complete U to an orthonormal set. One pass over
    // the standard basis, Gram-Schmidt with one reorthogonalization; unfilled
    // slots are all-zero so projecting against every column is a no-op there.
    std::size_t next_deficient = 0;
    for (std::size_t cand = 0; cand < m && next_deficient < deficient.size(); ++cand) {
        Vector u(m, 0.0);
        u[cand] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < n; ++k) {
                double proj = 0.0;
                for (std::size_t i = 0; i < m; ++i) proj += out.left_vectors(i, k) * u[i];
                if (proj == 0.0) continue;
                for (std::size_t i = 0; i < m; ++i) u[i] -= proj * out.left_vectors(i, k);
            }
        }
        const double nu = norm2(u);
        if (nu > 1e-8) {
            const std::size_t r = deficient[next_deficient++];
            for (std::size_t i = 0; i < m; ++i) out.left_vectors(i, r) = u[i] / nu;
        }
    }
    return out;
}

}  // namespace detail

/// SVD of an arbitrary finite matrix via one-sided Jacobi. Invariants: UᵀU and
/// VᵀV are identity within 1e-8, and U diag(s) Vᵀ reconstructs the input
/// within 1e-7 relative Frobenius error.
inline SvdResult svd(const Matrix& m) {
    if (m.empty()) throw ContractError("svd: empty matrix");
    if (!m.is_finite()) throw InputError("svd: non-finite entries");
    if (m.rows() >= m.cols()) return detail::one_sided_jacobi(m);
    SvdResult t = detail::one_sided_jacobi(m.transposed());
    return SvdResult{std::move(t.singular_values), std::move(t.right_vectors),
                     std::move(t.left_vectors)};
}

/// Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations.
/// The input is symmetrized as (m + mᵀ)/2 first.
inline SymEigResult sym_eig(const Matrix& m) {
    if (m.rows() != m.cols()) throw ContractError("sym_eig: matrix not square");
    if (!m.is_finite()) throw InputError("sym_eig: non-finite entries");
    const std::size_t n = m.rows();
    Matrix b(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) b(i, j) = 0.5 * (m(i, j) + m(j, i));
    Matrix v = Matrix::identity(n);

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(b(i, j)));
    if (scale == 0.0) scale = 1.0;

    bool converged = false;
    for (int sweep = 0; sweep < detail::kJacobiMaxSweeps && !converged; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double bpq = b(p, q);
                off = std::max(off, std::abs(bpq) / scale);
                if (std::abs(bpq) <= 0.1 * detail::kJacobiTol * scale) continue;
                const double tau = (b(q, q) - b(p, p)) / (2.0 * bpq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t k = 0; k < n; ++k) {
                    const double x = b(p, k), y = b(q, k);
                    b(p, k) = c * x - s * y;
                    b(q, k) = s * x + c * y;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double x = b(k, p), y = b(k, q);
                    b(k, p) = c * x - s * y;
                    b(k, q) = s * x + c * y;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double x = v(k, p), y = v(k, q);
                    v(k, p) = c * x - s * y;
                    v(k, q) = s * x + c * y;
                }
            }
        }
        if (off <= detail::kJacobiTol) converged = true;
    }
    if (!converged) throw NumericError("sym_eig: Jacobi sweeps did not converge");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return b(x, x) > b(y, y); });
    SymEigResult out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        out.values[r] = b(order[r], order[r]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, r) = v(i, order[r]);
    }
    return out;
}

/// Smallest eigenvalue of the symmetrized input.
inline double sym_eig_min(const Matrix& m) {
    const SymEigResult e = sym_eig(m);
    return e.values.back();
}

/// Ridge weight used when a caller asks for the conditioning default:
/// 1e-10 * trace(designᵀ design) / cols. Below every test tolerance.
inline double default_ridge_from_gram(double gram_trace, std::size_t cols) {
    if (cols == 0) return 0.0;
    return 1e-10 * gram_trace / static_cast<double>(cols);
}

namespace detail {

// In-place Cholesky factorization of an SPD matrix (lower triangle). Returns
// false when a pivot is non-positive.
inline bool cholesky_factor(Matrix& a) {
    const std::size_t n = a.rows();
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
        if (!(d > 0.0)) return false;
        const double l = std::sqrt(d);
        a(j, j) = l;
        for (std::size_t i = j + 1; i < n; ++i) {
            double x = a(i, j);
            for (std::size_t k = 0; k < j; ++k) x -= a(i, k) * a(j, k);
            a(i, j) = x / l;
        }
    }
    return true;
}

inline Vector cholesky_apply(const Matrix& l, Vector rhs) {
    const std::size_t n = l.rows();
    for (std::size_t i = 0; i < n; ++i) {
        double x = rhs[i];
        for (std::size_t k = 0; k < i; ++k) x -= l(i, k) * rhs[k];
        rhs[i] = x / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double x = rhs[ii];
        for (std::size_t k = ii + 1; k < n; ++k) x -= l(k, ii) * rhs[k];
        rhs[ii] = x / l(ii, ii);
    }
    return rhs;
}

}  // namespace detail

/// Solve (gram + ridge I) W = rhs for several right-hand sides (columns of
/// rhs), factoring once. With ridge == 0 the minimum-norm solution is
/// returned via eigenvalue cutoff (directions below 1e-12 * lambda_max are
/// dropped).
inline Matrix solve_normal_multi(const Matrix& gram, const Matrix& rhs, double ridge) {
    if (gram.rows() != gram.cols() || gram.rows() != rhs.rows())
        throw ContractError("solve_normal_multi: shape mismatch");
    if (ridge < 0.0) throw ContractError("solve_normal_multi: negative ridge");
    const std::size_t n = gram.rows(), nrhs = rhs.cols();
    if (ridge > 0.0) {
        Matrix a = gram;
        for (std::size_t i = 0; i < n; ++i) a(i, i) += ridge;
        if (detail::cholesky_factor(a)) {
            Matrix w(n, nrhs);
            for (std::size_t c = 0; c < nrhs; ++c)
                w.set_col(c, detail::cholesky_apply(a, rhs.col(c)));
            return w;
        }
        // fall through to the eigenvalue path when conditioning defeats Cholesky
    }
    const SymEigResult e = sym_eig(gram);
    const double lam_max = e.values.empty() ? 0.0 : std::max(e.values.front(), 0.0);
    const double cut = 1e-12 * lam_max;
    Matrix w(n, nrhs);
    for (std::size_t c = 0; c < nrhs; ++c) {
        const Vector b = rhs.col(c);
        Vector x(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const double lam = e.values[k] + ridge;
            if (e.values[k] <= cut || lam <= 0.0) continue;
            double proj = 0.0;
            for (std::size_t i = 0; i < n; ++i) proj += e.vectors(i, k) * b[i];
            proj /= lam;
            for (std::size_t i = 0; i < n; ++i) x[i] += proj * e.vectors(i, k);
        }
        w.set_col(c, x);
    }
    return w;
}

/// Single right-hand-side wrapper around solve_normal_multi.
inline Vector solve_normal(const Matrix& gram, const Vector& rhs, double ridge) {
    Matrix r(rhs.size(), 1);
    for (std::size_t i = 0; i < rhs.size(); ++i) r(i, 0) = rhs[i];
    return solve_normal_multi(gram, r, ridge).col(0);
}

/// argmin over w of ||design w - targets||^2 + ridge ||w||^2, solved through
/// the normal equations. ridge == 0 yields the minimum-norm least-squares
/// solution. Deterministic for fixed inputs.
inline Vector solve_least_squares(const Matrix& design, const Vector& targets, double ridge) {
    if (design.rows() != targets.size())
        throw ContractError("solve_least_squares: rows " + std::to_string(design.rows()) +
                            " vs targets " + std::to_string(targets.size()));
    if (ridge < 0.0) throw ContractError("solve_least_squares: negative ridge");
    if (!design.is_finite() || !is_finite(targets))
        throw InputError("solve_least_squares: non-finite input");
    const std::size_t k = design.cols();
    Matrix gram(k, k);
    Vector rhs(k, 0.0);
    for (std::size_t r = 0; r < design.rows(); ++r) {
        for (std::size_t i = 0; i < k; ++i) {
            const double di = design(r, i);
            if (di == 0.0) continue;
            rhs[i] += di * targets[r];
            for (std::size_t j = i; j < k; ++j) gram(i, j) += di * design(r, j);
        }
    }
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < i; ++j) gram(i, j) = gram(j, i);
    return solve_normal(gram, rhs, ridge);
}

}  // namespace mhla
