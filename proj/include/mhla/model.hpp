#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mhla/errors.hpp"
#include "mhla/matrix.hpp"
#include "mhla/numerics.hpp"

namespace mhla {

/// One attention head: a value matrix and a key-query matrix, both d x d.
struct Head {
    Matrix v;
    Matrix q;
};

/// Multi-head linear attention parameters. Heads sum; the model computes
/// sum_h V_h Z (Zᵀ Q_h Z[:, n]) on the last column of the context.
struct MhlaParams {
    std::size_t dim = 0;
    std::vector<Head> heads;

    void validate() const {
        if (dim == 0) throw ContractError("MhlaParams: dim must be positive");
        if (heads.empty()) throw ContractError("MhlaParams: at least one head required");
        for (const Head& h : heads) {
            if (h.v.rows() != dim || h.v.cols() != dim || h.q.rows() != dim ||
                h.q.cols() != dim)
                throw ContractError("MhlaParams: head matrices must be d x d");
            if (!h.v.is_finite() || !h.q.is_finite())
                throw InputError("MhlaParams: non-finite head entries");
        }
    }
};

/// One training example: context matrix Z (d x n, n per sample) and target y.
struct SequenceSample {
    Matrix z;
    Vector y;
};

/// Growing contexts Z^0 c Z^1 c ... c Z^Phi produced by autoregressive
/// rollout; each step appends exactly one column.
struct ComputationHistory {
    std::vector<Matrix> steps;
    std::size_t horizon() const { return steps.empty() ? 0 : steps.size() - 1; }
};

/// Ordered token alphabet with orthogonal one-hot embeddings: symbol i maps
/// to basis vector e_i of dimension symbols.size().
struct Vocabulary {
    std::vector<std::string> symbols;

    std::size_t size() const { return symbols.size(); }
    std::size_t index_of(const std::string& s) const {
        for (std::size_t i = 0; i < symbols.size(); ++i)
            if (symbols[i] == s) return i;
        throw ContractError("Vocabulary: unknown symbol '" + s + "'");
    }
    Vector embed(std::size_t index) const {
        if (index >= symbols.size()) throw ContractError("Vocabulary: index out of range");
        Vector v(symbols.size(), 0.0);
        v[index] = 1.0;
        return v;
    }
};

/// Index of the basis vector nearest to v: argmax coordinate, ties broken
/// toward the lowest index.
inline std::size_t round_token(const Vector& v) {
    if (v.empty()) throw ContractError("round_token: empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

/// Last-column output: sum_h V_h Z (Zᵀ Q_h Z[:, n]).
inline Vector forward_last(const MhlaParams& params, const Matrix& z) {
    if (z.rows() != params.dim)
        throw ContractError("forward_last: z has " + std::to_string(z.rows()) +
                            " rows, params expect " + std::to_string(params.dim));
    if (z.cols() == 0) throw ContractError("forward_last: empty context");
    const std::size_t d = params.dim, n = z.cols();
    Vector out(d, 0.0);
    Vector zn(d);
    for (std::size_t i = 0; i < d; ++i) zn[i] = z(i, n - 1);
    for (const Head& h : params.heads) {
        const Vector qz = h.q * zn;                   // d
        Vector scores(n, 0.0);                        // Zᵀ (Q zn)
        for (std::size_t t = 0; t < n; ++t) {
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) acc += z(i, t) * qz[i];
            scores[t] = acc;
        }
        Vector pooled(d, 0.0);                        // Z scores
        for (std::size_t i = 0; i < d; ++i) {
            double acc = 0.0;
            for (std::size_t t = 0; t < n; ++t) acc += z(i, t) * scores[t];
            pooled[i] = acc;
        }
        const Vector vi = h.v * pooled;
        for (std::size_t i = 0; i < d; ++i) out[i] += vi[i];
    }
    return out;
}

/// Full output matrix: column j equals forward_last with query column j over
/// the whole (non-causal) context.
inline Matrix forward_all(const MhlaParams& params, const Matrix& z) {
    if (z.rows() != params.dim) throw ContractError("forward_all: dimension mismatch");
    const std::size_t d = params.dim, n = z.cols();
    const Matrix gram = row_gram(z);  // Z Zᵀ, shared across query columns
    Matrix out(d, n);
    for (const Head& h : params.heads) {
        const Matrix gq = gram * h.q;  // d x d
        const Matrix vgq = h.v * gq;   // d x d
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < d; ++i) {
                double acc = 0.0;
                for (std::size_t k = 0; k < d; ++k) acc += vgq(i, k) * z(k, j);
                out(i, j) += acc;
            }
    }
    return out;
}

/// Row-major vec of a d x d matrix.
inline Vector flatten(const Matrix& m) {
    return m.entries();
}

/// Inverse of flatten: reshape a length-d² vector into a d x d matrix.
inline Matrix fold(const Vector& v, std::size_t d) {
    if (v.size() != d * d) throw ContractError("fold: length is not d*d");
    Matrix m(d, d);
    for (std::size_t i = 0; i < v.size(); ++i) m.data()[i] = v[i];
    return m;
}

/// T_Theta = sum_h vec(V_h) vec(Q_h)ᵀ, the d² x d² regressor-space image of
/// the parameters. Rank is at most the head count.
inline Matrix flatten_params(const MhlaParams& params) {
    const std::size_t d2 = params.dim * params.dim;
    Matrix t(d2, d2);
    for (const Head& h : params.heads) {
        const Vector fv = flatten(h.v);
        const Vector fq = flatten(h.q);
        for (std::size_t i = 0; i < d2; ++i) {
            const double vi = fv[i];
            if (vi == 0.0) continue;
            for (std::size_t j = 0; j < d2; ++j) t(i, j) += vi * fq[j];
        }
    }
    return t;
}

/// Fold-back outcome: the recovered heads plus the retained rank of the
/// regressor (0 for an all-zero input, where a single zero head is emitted).
struct FoldResult {
    MhlaParams params;
    std::size_t rank = 0;
};

/// SVD fold-back of a d² x d² regressor into at most d² heads: keep singular
/// triples with sigma > rank_tol * sigma_max, head h gets
/// V_h = Fold(sqrt(sigma) u_h), Q_h = Fold(sqrt(sigma) v_h). A zero regressor
/// yields a single all-zero head so the H >= 1 invariant holds.
inline FoldResult fold_regressor_full(const Matrix& w, double rank_tol = 1e-10) {
    const std::size_t d2 = w.rows();
    if (w.cols() != d2) throw ContractError("fold_regressor: regressor not square");
    std::size_t d = 0;
    while (d * d < d2) ++d;
    if (d * d != d2) throw ContractError("fold_regressor: side is not a perfect square");

    const SvdResult s = svd(w);
    const double sig_max = s.singular_values.empty() ? 0.0 : s.singular_values.front();
    FoldResult out;
    out.params.dim = d;
    if (sig_max <= 0.0) {
        out.params.heads.push_back(Head{Matrix(d, d), Matrix(d, d)});
        return out;
    }
    for (std::size_t h = 0; h < s.singular_values.size(); ++h) {
        const double sig = s.singular_values[h];
        if (sig <= rank_tol * sig_max) break;
        const double root = std::sqrt(sig);
        Vector u(d2), v(d2);
        for (std::size_t i = 0; i < d2; ++i) {
            u[i] = root * s.left_vectors(i, h);
            v[i] = root * s.right_vectors(i, h);
        }
        out.params.heads.push_back(Head{fold(u, d), fold(v, d)});
    }
    out.rank = out.params.heads.size();
    if (out.params.heads.empty()) {
        out.params.heads.push_back(Head{Matrix(d, d), Matrix(d, d)});
        out.rank = 0;
    }
    return out;
}

inline MhlaParams fold_regressor(const Matrix& w, double rank_tol = 1e-10) {
    return fold_regressor_full(w, rank_tol).params;
}

/// Append a column to a context matrix.
inline Matrix append_column(const Matrix& z, const Vector& col) {
    if (z.rows() != col.size()) throw ContractError("append_column: dimension mismatch");
    Matrix out(z.rows(), z.cols() + 1);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        for (std::size_t j = 0; j < z.cols(); ++j) out(i, j) = z(i, j);
        out(i, z.cols()) = col[i];
    }
    return out;
}

/// Phi-step autoregressive rollout: y^{t+1} = forward_last(params, Z^t) is
/// appended (optionally rounded to the nearest vocabulary one-hot) as the new
/// last column. Steps are immutable snapshots.
inline ComputationHistory rollout(const MhlaParams& params, const Matrix& z0,
                                  std::size_t phi, bool round_tokens = false,
                                  const std::optional<Vocabulary>& vocab = std::nullopt) {
    if (z0.rows() != params.dim) throw ContractError("rollout: z0 dimension mismatch");
    if (round_tokens) {
        if (!vocab) throw ContractError("rollout: rounding requested without vocabulary");
        if (vocab->size() != params.dim)
            throw ContractError("rollout: vocabulary size must equal model dimension");
    }
    ComputationHistory history;
    history.steps.reserve(phi + 1);
    history.steps.push_back(z0);
    Matrix z = z0;
    for (std::size_t t = 0; t < phi; ++t) {
        Vector next = forward_last(params, z);
        if (round_tokens) next = vocab->embed(round_token(next));
        z = append_column(z, next);
        history.steps.push_back(z);
    }
    return history;
}

}  // namespace mhla
