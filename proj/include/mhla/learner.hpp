#pragma once

#include <chrono>
#include <cmath>
#include <cstring>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mhla/features.hpp"
#include "mhla/matrix.hpp"
#include "mhla/model.hpp"
#include "mhla/numerics.hpp"
#include "mhla/rng.hpp"

namespace mhla {

/// Training set: samples share the embedding dimension, sequence lengths vary.
struct Dataset {
    std::vector<SequenceSample> samples;

    std::size_t size() const { return samples.size(); }
    std::size_t dim() const { return samples.empty() ? 0 : samples.front().z.rows(); }
    std::size_t n_max() const {
        std::size_t n = 0;
        for (const auto& s : samples) n = std::max(n, s.z.cols());
        return n;
    }
    void validate() const {
        if (samples.empty()) throw InputError("Dataset: empty");
        const std::size_t d = dim();
        for (const auto& s : samples) {
            if (s.z.rows() != d || s.y.size() != d)
                throw InputError("Dataset: inconsistent dimensions");
            if (s.z.cols() == 0) throw InputError("Dataset: empty context");
            if (!s.z.is_finite() || !is_finite(s.y))
                throw InputError("Dataset: non-finite entries");
        }
    }
};

/// Mean over samples of the squared residual norm ||forward_last(Z_i) - y_i||².
inline double mse(const MhlaParams& params, const Dataset& data) {
    data.validate();
    if (data.dim() != params.dim) throw ContractError("mse: dimension mismatch");
    double acc = 0.0;
    for (const auto& s : data.samples) {
        const Vector yhat = forward_last(params, s.z);
        for (std::size_t a = 0; a < s.y.size(); ++a) {
            const double r = yhat[a] - s.y[a];
            acc += r * r;
        }
    }
    return acc / static_cast<double>(data.size());
}

/// Fit outcome. train_mse averages squared residuals over samples AND output
/// coordinates (mse() above averages over samples only; the two differ by a
/// factor of d).
struct FitReport {
    MhlaParams learned;
    double train_mse = 0.0;
    std::size_t regressor_rank = 0;
    std::vector<double> residual_per_sample;  // squared residual norm per sample
    double wall_time = 0.0;                   // seconds
};

struct FitOptions {
    enum class SolveMode { kAuto, kPrimal, kDual };

    std::optional<double> ridge;  // absent: conditioning default from numerics
    double rank_tol = 1e-10;
    SolveMode solve_mode = SolveMode::kAuto;  // kAuto picks the smaller system
    int threads = 1;  // accumulation order is fixed regardless of thread count
};

namespace detail {

// Per-sample sufficient statistics for the cubic feature map: the row Gram
// matrix and the last context column. vec(X(Z)) = vec(G) (x) c.
struct SampleStats {
    Matrix gram;  // d x d
    Vector last;  // d
};

inline SampleStats sample_stats(const SequenceSample& s) {
    SampleStats st;
    st.gram = row_gram(s.z);
    st.last = s.z.col(s.z.cols() - 1);
    return st;
}

// Exact-duplicate detection: identical samples only change the least-squares
// problem through an integer weight, so collapsing them is a pure speedup.
struct DedupResult {
    std::vector<std::size_t> distinct;     // indices into data.samples, first occurrence
    std::vector<double> weight;            // multiplicity per distinct sample
    std::vector<std::size_t> sample_to_distinct;
};

inline DedupResult deduplicate(const Dataset& data) {
    DedupResult out;
    out.sample_to_distinct.resize(data.size());
    std::unordered_map<std::string, std::size_t> seen;
    seen.reserve(data.size() * 2);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& s = data.samples[i];
        std::string key;
        key.reserve((s.z.size() + s.y.size()) * sizeof(double) + 16);
        const std::size_t zc = s.z.cols();
        key.append(reinterpret_cast<const char*>(&zc), sizeof(zc));
        key.append(reinterpret_cast<const char*>(s.z.data()), s.z.size() * sizeof(double));
        key.append(reinterpret_cast<const char*>(s.y.data()), s.y.size() * sizeof(double));
        auto [it, inserted] = seen.emplace(std::move(key), out.distinct.size());
        if (inserted) {
            out.distinct.push_back(i);
            out.weight.push_back(1.0);
        } else {
            out.weight[it->second] += 1.0;
        }
        out.sample_to_distinct[i] = it->second;
    }
    return out;
}

// Prediction through a d² x d² regressor: y[a] = sum_{j,k,l} W[(a,j),(k,l)]
// G[j,k] c[l].
inline Vector predict_regressor(const Matrix& w, const SampleStats& st, std::size_t d) {
    Vector out(d, 0.0);
    for (std::size_t a = 0; a < d; ++a) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double* wrow = w.data() + (a * d + j) * d * d;
            for (std::size_t k = 0; k < d; ++k) {
                const double g = st.gram(j, k);
                if (g == 0.0) continue;
                const double* wkl = wrow + k * d;
                double inner = 0.0;
                for (std::size_t l = 0; l < d; ++l) inner += wkl[l] * st.last[l];
                acc += g * inner;
            }
        }
        out[a] = acc;
    }
    return out;
}

}  // namespace detail

/// Feature regression fit (the polynomial-time learning path): extract cubic
/// features, solve one ridge least-squares problem per output coordinate
/// (block sparsity makes the d-coordinate split exact), then fold the d² x d²
/// regressor back into at most d² heads via SVD.
///
/// The solve runs in whichever of the primal (d³ features) or dual (one entry
/// per distinct sample) space is smaller; the two are algebraically
/// identical, including the ridge == 0 minimum-norm case. Exact duplicate
/// samples are collapsed into integer weights first.
inline FitReport fit_regression(const Dataset& data, const FitOptions& opts = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    data.validate();
    const std::size_t d = data.dim();
    const std::size_t d2 = d * d;
    const std::size_t nfeat = d * d2;  // per-coordinate feature count (j,k,l)

    const detail::DedupResult dd = detail::deduplicate(data);
    const std::size_t m = dd.distinct.size();
    std::vector<detail::SampleStats> stats(m);
    for (std::size_t i = 0; i < m; ++i)
        stats[i] = detail::sample_stats(data.samples[dd.distinct[i]]);

    // trace of the primal Gram equals the weighted squared feature norms
    double gram_trace = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double gn = 0.0, cn = 0.0;
        for (double x : stats[i].gram.entries()) gn += x * x;
        for (double x : stats[i].last) cn += x * x;
        gram_trace += dd.weight[i] * gn * cn;
    }
    const double ridge =
        opts.ridge ? *opts.ridge : default_ridge_from_gram(gram_trace, nfeat);
    if (ridge < 0.0) throw ContractError("fit_regression: negative ridge");

    const bool use_primal =
        opts.solve_mode == FitOptions::SolveMode::kPrimal ||
        (opts.solve_mode == FitOptions::SolveMode::kAuto && nfeat <= m);

    Matrix w_hat(d2, d2);
    if (use_primal) {
        // Primal: accumulate the (d³ x d³) feature Gram, shared by all output
        // coordinates, exploiting its Kronecker block structure.
        Matrix gram(nfeat, nfeat);
        Matrix rhs(nfeat, d);
        for (std::size_t i = 0; i < m; ++i) {
            const double wt = dd.weight[i];
            const auto& st = stats[i];
            const Vector vg = st.gram.entries();  // length d²
            for (std::size_t p = 0; p < d2; ++p) {
                const double vp = wt * vg[p];
                if (vp == 0.0) continue;
                for (std::size_t q = p; q < d2; ++q) {
                    const double coef = vp * vg[q];
                    if (coef == 0.0) continue;
                    double* blk = gram.data() + (p * d) * nfeat + q * d;
                    for (std::size_t a = 0; a < d; ++a)
                        for (std::size_t b = 0; b < d; ++b)
                            blk[a * nfeat + b] += coef * st.last[a] * st.last[b];
                }
            }
            const SequenceSample& s = data.samples[dd.distinct[i]];
            for (std::size_t a = 0; a < d; ++a) {
                const double ya = wt * s.y[a];
                if (ya == 0.0) continue;
                for (std::size_t p = 0; p < d2; ++p) {
                    const double g = vg[p];
                    if (g == 0.0) continue;
                    for (std::size_t l = 0; l < d; ++l)
                        rhs(p * d + l, a) += ya * g * st.last[l];
                }
            }
        }
        for (std::size_t p = 0; p < nfeat; ++p)
            for (std::size_t q = 0; q < p; ++q) gram(p, q) = gram(q, p);

        const Matrix sol = solve_normal_multi(gram, rhs, ridge);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t j = 0; j < d; ++j)
                for (std::size_t kl = 0; kl < d2; ++kl)
                    w_hat(a * d + j, kl) = sol(j * d2 + kl, a);
    } else {
        // Dual: kernel entries factor as <G_i, G_j>_F <c_i, c_j>.
        Matrix kernel(m, m);
        Vector root_w(m);
        for (std::size_t i = 0; i < m; ++i) root_w[i] = std::sqrt(dd.weight[i]);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i; j < m; ++j) {
                double gg = 0.0;
                const auto& gi = stats[i].gram.entries();
                const auto& gj = stats[j].gram.entries();
                for (std::size_t t = 0; t < gi.size(); ++t) gg += gi[t] * gj[t];
                const double cc = dot(stats[i].last, stats[j].last);
                const double k = root_w[i] * root_w[j] * gg * cc;
                kernel(i, j) = k;
                kernel(j, i) = k;
            }
        }
        Matrix rhs(m, d);
        for (std::size_t i = 0; i < m; ++i) {
            const SequenceSample& s = data.samples[dd.distinct[i]];
            for (std::size_t a = 0; a < d; ++a) rhs(i, a) = root_w[i] * s.y[a];
        }
        const Matrix gamma = solve_normal_multi(kernel, rhs, ridge);
        // w_a = sum_i sqrt(m_i) gamma[i,a] vec(X_i)
        for (std::size_t i = 0; i < m; ++i) {
            const auto& st = stats[i];
            for (std::size_t a = 0; a < d; ++a) {
                const double coef = root_w[i] * gamma(i, a);
                if (coef == 0.0) continue;
                for (std::size_t j = 0; j < d; ++j) {
                    double* wrow = w_hat.data() + (a * d + j) * d2;
                    for (std::size_t k = 0; k < d; ++k) {
                        const double cg = coef * st.gram(j, k);
                        if (cg == 0.0) continue;
                        double* wkl = wrow + k * d;
                        for (std::size_t l = 0; l < d; ++l) wkl[l] += cg * st.last[l];
                    }
                }
            }
        }
    }

    // Fold back into heads and evaluate residuals of the folded model.
    FitReport report;
    FoldResult folded = fold_regressor_full(w_hat, opts.rank_tol);
    report.learned = std::move(folded.params);
    report.regressor_rank = folded.rank;

    const Matrix t_fold = flatten_params(report.learned);
    std::vector<Vector> pred(m);
    for (std::size_t i = 0; i < m; ++i)
        pred[i] = detail::predict_regressor(t_fold, stats[i], d);
    report.residual_per_sample.resize(data.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vector& yhat = pred[dd.sample_to_distinct[i]];
        const Vector& y = data.samples[i].y;
        double r2 = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
            const double r = yhat[a] - y[a];
            r2 += r * r;
        }
        report.residual_per_sample[i] = r2;
        acc += r2;
    }
    report.train_mse = acc / static_cast<double>(data.size() * d);
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

namespace detail {

// Gradient accumulation over precomputed per-sample statistics. The forward
// pass only needs the row Gram and last column, so both the loss and its
// gradient reuse them. Returns the mse alongside the per-head gradients.
inline double gd_gradient(const MhlaParams& params, const std::vector<SampleStats>& stats,
                          const std::vector<const Vector*>& targets,
                          std::vector<Head>& grad) {
    const std::size_t d = params.dim;
    const double scale = 2.0 / static_cast<double>(stats.size());
    double loss = 0.0;
    for (Head& g : grad) {
        std::fill(g.v.data(), g.v.data() + d * d, 0.0);
        std::fill(g.q.data(), g.q.data() + d * d, 0.0);
    }
    const std::size_t n_heads = params.heads.size();
    Vector pooled(n_heads * d), qc(d), resid(d), vtr(d), gvtr(d);
    for (std::size_t i = 0; i < stats.size(); ++i) {
        const SampleStats& st = stats[i];
        std::fill(resid.begin(), resid.end(), 0.0);
        for (std::size_t h = 0; h < n_heads; ++h) {
            const Head& head = params.heads[h];
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (std::size_t l = 0; l < d; ++l) acc += head.q(j, l) * st.last[l];
                qc[j] = acc;
            }
            double* pool = pooled.data() + h * d;  // G Q c, shared with dV
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < d; ++k) acc += st.gram(j, k) * qc[k];
                pool[j] = acc;
            }
            for (std::size_t a = 0; a < d; ++a) {
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) acc += head.v(a, j) * pool[j];
                resid[a] += acc;
            }
        }
        for (std::size_t a = 0; a < d; ++a) {
            resid[a] -= (*targets[i])[a];
            loss += resid[a] * resid[a];
        }
        for (std::size_t h = 0; h < n_heads; ++h) {
            const Head& head = params.heads[h];
            const double* pool = pooled.data() + h * d;
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t j = 0; j < d; ++j)
                    grad[h].v(a, j) += scale * resid[a] * pool[j];
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (std::size_t a = 0; a < d; ++a) acc += head.v(a, j) * resid[a];
                vtr[j] = acc;
            }
            for (std::size_t k = 0; k < d; ++k) {
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) acc += st.gram(k, j) * vtr[j];
                gvtr[k] = acc;
            }
            for (std::size_t k = 0; k < d; ++k)
                for (std::size_t l = 0; l < d; ++l)
                    grad[h].q(k, l) += scale * gvtr[k] * st.last[l];
        }
    }
    return loss / static_cast<double>(stats.size());
}

}  // namespace detail

/// Analytic gradient of mse(params, data) with respect to every head matrix.
/// Returned in head order as (dV_h, dQ_h) pairs.
inline std::vector<Head> mse_gradient(const MhlaParams& params, const Dataset& data) {
    data.validate();
    if (data.dim() != params.dim) throw ContractError("mse_gradient: dimension mismatch");
    const std::size_t d = params.dim;
    std::vector<detail::SampleStats> stats(data.size());
    std::vector<const Vector*> targets(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        stats[i] = detail::sample_stats(data.samples[i]);
        targets[i] = &data.samples[i].y;
    }
    std::vector<Head> grad(params.heads.size(), Head{Matrix(d, d), Matrix(d, d)});
    detail::gd_gradient(params, stats, targets, grad);
    return grad;
}

/// Reference trainer: plain full-batch gradient descent on the MSE for a
/// fixed head count, Gaussian N(0, I/sqrt(d)) initialization. Deterministic
/// given the seed. Throws NumericError naming the epoch if the loss leaves
/// the finite range.
inline FitReport fit_gd(const Dataset& data, std::size_t head_count, double lr,
                        std::size_t epochs, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    data.validate();
    if (head_count == 0) throw ContractError("fit_gd: head_count must be positive");
    if (lr < 0.0) throw ContractError("fit_gd: negative learning rate");
    const std::size_t d = data.dim();

    RngStream rng(seed);
    const double stddev = std::pow(static_cast<double>(d), -0.25);  // variance 1/sqrt(d)
    MhlaParams params;
    params.dim = d;
    for (std::size_t h = 0; h < head_count; ++h) {
        Head head;
        head.v = rng.normal_matrix(d, d, stddev);
        head.q = rng.normal_matrix(d, d, stddev);
        params.heads.push_back(std::move(head));
    }

    std::vector<detail::SampleStats> stats(data.size());
    std::vector<const Vector*> targets(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        stats[i] = detail::sample_stats(data.samples[i]);
        targets[i] = &data.samples[i].y;
    }
    std::vector<Head> grad(head_count, Head{Matrix(d, d), Matrix(d, d)});
    for (std::size_t epoch = 0; epoch < epochs && lr > 0.0; ++epoch) {
        const double loss = detail::gd_gradient(params, stats, targets, grad);
        if (!std::isfinite(loss))
            throw NumericError("fit_gd: diverged at epoch " + std::to_string(epoch));
        for (std::size_t h = 0; h < head_count; ++h) {
            for (std::size_t i = 0; i < d * d; ++i) {
                params.heads[h].v.data()[i] -= lr * grad[h].v.data()[i];
                params.heads[h].q.data()[i] -= lr * grad[h].q.data()[i];
            }
        }
    }

    FitReport report;
    report.learned = params;
    report.regressor_rank = std::min(head_count, d * d);
    report.residual_per_sample.resize(data.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vector yhat = forward_last(params, data.samples[i].z);
        double r2 = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
            const double r = yhat[a] - data.samples[i].y[a];
            r2 += r * r;
        }
        if (!std::isfinite(r2)) throw NumericError("fit_gd: diverged at epoch " +
                                                   std::to_string(epochs));
        report.residual_per_sample[i] = r2;
        acc += r2;
    }
    report.train_mse = acc / static_cast<double>(data.size() * d);
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

/// Data-budget heuristic from the sample-complexity bound with constant 1:
/// ceil((d⁴ + ln(1/delta)) / eps). The small guard keeps exact-boundary
/// inputs (for example delta = e⁻¹) from rounding up through float error.
inline std::size_t sample_budget(std::size_t d, double eps, double delta) {
    if (!(eps > 0.0 && eps <= 1.0)) throw ContractError("sample_budget: eps out of (0,1]");
    if (!(delta > 0.0 && delta < 1.0)) throw ContractError("sample_budget: delta out of (0,1)");
    if (d == 0) throw ContractError("sample_budget: d must be positive");
    const double d4 = std::pow(static_cast<double>(d), 4.0);
    const double raw = (d4 + std::log(1.0 / delta)) / eps;
    return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

}  // namespace mhla
