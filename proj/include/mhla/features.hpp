#pragma once

#include <cstddef>
#include <optional>

#include "mhla/matrix.hpp"
#include "mhla/model.hpp"

namespace mhla {

/// psi = C(d,2)*d + d², the length of the symmetric certificate features.
inline std::size_t psi_dim(std::size_t d) {
    return (d * (d - 1) / 2) * d + d * d;
}

/// Lexicographic index of the unordered pair {j,k}, j < k, in [0, C(d,2)).
inline std::size_t pair_index(std::size_t j, std::size_t k, std::size_t d) {
    // pairs (0,1),(0,2),...,(0,d-1),(1,2),... in row-major order
    return j * d - j * (j + 1) / 2 + (k - j - 1);
}

/// Learning features X(Z): d rows, d² columns indexed (k,l) row-major, with
/// X[j, k*d + l] = <z_j, z_k> * z_{l,n}. Computed from the row Gram matrix in
/// one pass; identical to the per-entry formula.
inline Matrix extract_learn_features(const Matrix& z) {
    if (z.rows() == 0 || z.cols() == 0)
        throw ContractError("extract_learn_features: empty context");
    const std::size_t d = z.rows(), n = z.cols();
    const Matrix gram = row_gram(z);
    Vector last(d);
    for (std::size_t i = 0; i < d; ++i) last[i] = z(i, n - 1);
    Matrix x(d, d * d);
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k) {
            const double g = gram(j, k);
            for (std::size_t l = 0; l < d; ++l) x(j, k * d + l) = g * last[l];
        }
    return x;
}

/// Symmetric certificate features H(Z), a psi-vector. First block: unordered
/// pairs {j,k}, j < k, crossed with l, entry <z_j, z_k> z_{l,n}; second
/// block: (j,l) with entry ||z_j||² z_{l,n}. Pair order is lexicographic in
/// (j,k), then l; this index layout is the canonical column order for all
/// spectrum/CSV exports.
///
/// With centered_m2 set, the appendix variant is produced instead: pair
/// entries are scaled by 1/sqrt(n) and square entries become
/// (||z_j||² - n*m2) z_{l,n} / sqrt(n). Used by certificate diagnostics only.
inline Vector extract_sym_features(const Matrix& z,
                                   std::optional<double> centered_m2 = std::nullopt) {
    if (z.rows() == 0 || z.cols() == 0)
        throw ContractError("extract_sym_features: empty context");
    const std::size_t d = z.rows(), n = z.cols();
    const Matrix gram = row_gram(z);
    Vector last(d);
    for (std::size_t i = 0; i < d; ++i) last[i] = z(i, n - 1);

    const double scale = centered_m2 ? 1.0 / std::sqrt(static_cast<double>(n)) : 1.0;
    const double center = centered_m2 ? *centered_m2 * static_cast<double>(n) : 0.0;

    Vector h(psi_dim(d), 0.0);
    std::size_t idx = 0;
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = j + 1; k < d; ++k) {
            const double g = scale * gram(j, k);
            for (std::size_t l = 0; l < d; ++l) h[idx++] = g * last[l];
        }
    for (std::size_t j = 0; j < d; ++j) {
        const double g = scale * (gram(j, j) - center);
        for (std::size_t l = 0; l < d; ++l) h[idx++] = g * last[l];
    }
    return h;
}

/// p(Theta): d x psi matrix whose row a linearizes the model output, i.e.
/// forward_last(Theta, Z)[a] = <p_a(Theta), H(Z)>. Pair entries sum
/// V[a,j] Q[k,l] + V[a,k] Q[j,l] over heads; square entries sum V[a,j] Q[j,l].
/// Equal images characterize functional equivalence of parameter sets.
inline Matrix param_feature(const MhlaParams& params) {
    params.validate();
    const std::size_t d = params.dim;
    Matrix p(d, psi_dim(d));
    for (const Head& h : params.heads) {
        for (std::size_t a = 0; a < d; ++a) {
            std::size_t idx = 0;
            for (std::size_t j = 0; j < d; ++j)
                for (std::size_t k = j + 1; k < d; ++k) {
                    const double vj = h.v(a, j), vk = h.v(a, k);
                    for (std::size_t l = 0; l < d; ++l)
                        p(a, idx + l) += vj * h.q(k, l) + vk * h.q(j, l);
                    idx += d;
                }
            for (std::size_t j = 0; j < d; ++j) {
                const double vj = h.v(a, j);
                for (std::size_t l = 0; l < d; ++l) p(a, idx + l) += vj * h.q(j, l);
                idx += d;
            }
        }
    }
    return p;
}

/// Frobenius distance in p-feature space; zero exactly when the two
/// parameter sets compute the same function on all inputs.
inline double param_distance(const MhlaParams& a, const MhlaParams& b) {
    if (a.dim != b.dim) throw ContractError("param_distance: dimension mismatch");
    return frobenius_norm(param_feature(a) - param_feature(b));
}

/// Project a d² x d² regressor onto p-feature space, row block by row block:
/// pair entry {j,k},l of row a is W[(a,j),(k,l)] + W[(a,k),(j,l)]; square
/// entries are W[(a,j),(j,l)]. flatten_params followed by this equals
/// param_feature.
inline Matrix regressor_sym_rows(const Matrix& w, std::size_t d) {
    if (w.rows() != d * d || w.cols() != d * d)
        throw ContractError("regressor_sym_rows: regressor not d² x d²");
    Matrix p(d, psi_dim(d));
    for (std::size_t a = 0; a < d; ++a) {
        std::size_t idx = 0;
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t k = j + 1; k < d; ++k) {
                for (std::size_t l = 0; l < d; ++l)
                    p(a, idx + l) = w(a * d + j, k * d + l) + w(a * d + k, j * d + l);
                idx += d;
            }
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t l = 0; l < d; ++l) p(a, idx + l) = w(a * d + j, j * d + l);
            idx += d;
        }
    }
    return p;
}

/// Inverse direction of regressor_sym_rows for a single output row: place a
/// psi-vector into row block a of an otherwise untouched regressor, splitting
/// each pair entry evenly between its two mirror coordinates. Contractions
/// with X(Z) then equal <v, H(Z)> exactly.
inline void add_sym_to_regressor_block(Matrix& w, std::size_t a, const Vector& v,
                                       std::size_t d) {
    if (v.size() != psi_dim(d)) throw ContractError("add_sym_to_regressor_block: bad length");
    std::size_t idx = 0;
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = j + 1; k < d; ++k) {
            for (std::size_t l = 0; l < d; ++l) {
                w(a * d + j, k * d + l) += 0.5 * v[idx + l];
                w(a * d + k, j * d + l) += 0.5 * v[idx + l];
            }
            idx += d;
        }
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t l = 0; l < d; ++l) w(a * d + j, j * d + l) += v[idx + l];
        idx += d;
    }
}

}  // namespace mhla
