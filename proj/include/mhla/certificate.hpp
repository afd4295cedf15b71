#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mhla/features.hpp"
#include "mhla/learner.hpp"
#include "mhla/numerics.hpp"

namespace mhla {

/// Identifiability audit of a dataset. identifiable means every empirical
/// risk minimizer over the MHLA class computes the same function; the verdict
/// assumes realizability (or a hypothesis class with at least d² heads), see
/// note.
struct CertificateReport {
    std::size_t psi = 0;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    std::size_t rank_estimate = 0;
    bool identifiable = false;
    double threshold_used = 0.0;
    std::string note;  // hypothesis-class caveat, fixed text
};

/// Empirical second moment of the symmetric features:
/// Lambda_D = (1/N) sum_i H(Z_i) H(Z_i)ᵀ, accumulated in sample order.
inline Matrix second_moment(const Dataset& data,
                            std::optional<double> centered_m2 = std::nullopt) {
    data.validate();
    const std::size_t psi = psi_dim(data.dim());
    Matrix lambda(psi, psi);
    for (const auto& s : data.samples) {
        const Vector h = extract_sym_features(s.z, centered_m2);
        for (std::size_t i = 0; i < psi; ++i) {
            const double hi = h[i];
            if (hi == 0.0) continue;
            for (std::size_t j = i; j < psi; ++j) lambda(i, j) += hi * h[j];
        }
    }
    const double inv = 1.0 / static_cast<double>(data.size());
    for (std::size_t i = 0; i < psi; ++i)
        for (std::size_t j = i; j < psi; ++j) {
            lambda(i, j) *= inv;
            lambda(j, i) = lambda(i, j);
        }
    return lambda;
}

/// Certify identifiability: lambda_min(Lambda_D) must clear a floating-point
/// threshold of 1e-9 * max(lambda_max, 1), since eigenvalues of rank-deficient
/// moments land near +-1e-12 rather than at zero. rank_estimate counts
/// eigenvalues above the same threshold.
inline CertificateReport certify(const Dataset& data,
                                 std::optional<double> centered_m2 = std::nullopt) {
    const Matrix lambda = second_moment(data, centered_m2);
    const SymEigResult eig = sym_eig(lambda);
    CertificateReport report;
    report.psi = psi_dim(data.dim());
    report.lambda_max = eig.values.front();
    report.lambda_min = eig.values.back();
    report.threshold_used = 1e-9 * std::max(report.lambda_max, 1.0);
    report.identifiable = report.lambda_min > report.threshold_used;
    for (double v : eig.values)
        if (v > report.threshold_used) ++report.rank_estimate;
    report.note = "verdict requires realizability or a hypothesis class with H >= d^2";
    return report;
}

/// Worst-case output gap between two eps-approximate empirical risk
/// minimizers on input Z: (eps / lambda_min) * ||Z||_F^6.
inline double error_bound(double epsilon, double lambda_min, const Matrix& z) {
    if (epsilon < 0.0) throw ContractError("error_bound: negative epsilon");
    if (!(lambda_min > 0.0))
        throw DomainError("error_bound: lambda_min must be positive (bound vacuous)");
    const double f = frobenius_norm(z);
    return epsilon / lambda_min * f * f * f * f * f * f;
}

struct MixtureCell {
    double fraction = 0.0;
    double lambda_min = 0.0;
    double recovery_distance = 0.0;
};

/// Certificate-vs-recovery study: for each mixing fraction, compose a dataset
/// from fixed per-seed permutations of the two pools (first ceil(f*N) samples
/// from the degenerate pool, the rest from the identifiable pool), certify
/// it, fit by regression, and report the p-space distance to the ground
/// truth. Nested prefixes keep cells comparable across fractions.
inline std::vector<MixtureCell> mixture_sweep(const Dataset& identifiable,
                                              const Dataset& degenerate,
                                              const MhlaParams& truth,
                                              const std::vector<double>& mix_fractions,
                                              std::uint64_t seed,
                                              const FitOptions& fit_opts = {}) {
    identifiable.validate();
    degenerate.validate();
    if (identifiable.dim() != degenerate.dim())
        throw ContractError("mixture_sweep: datasets have different dimensions");
    if (identifiable.dim() != truth.dim)
        throw ContractError("mixture_sweep: ground truth dimension mismatch");
    for (double f : mix_fractions)
        if (f < 0.0 || f > 1.0) throw ContractError("mixture_sweep: fraction outside [0,1]");

    const std::size_t n = std::min(identifiable.size(), degenerate.size());
    RngStream rng(seed);
    auto permutation = [&](std::size_t count) {
        std::vector<std::size_t> p(count);
        std::iota(p.begin(), p.end(), 0);
        for (std::size_t i = count; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
        return p;
    };
    const std::vector<std::size_t> perm_deg = permutation(degenerate.size());
    const std::vector<std::size_t> perm_id = permutation(identifiable.size());

    std::vector<MixtureCell> cells;
    for (double f : mix_fractions) {
        const std::size_t n_deg = static_cast<std::size_t>(std::ceil(f * n));
        Dataset mixed;
        mixed.samples.reserve(n);
        for (std::size_t i = 0; i < n_deg; ++i)
            mixed.samples.push_back(degenerate.samples[perm_deg[i]]);
        for (std::size_t i = 0; i + n_deg < n; ++i)
            mixed.samples.push_back(identifiable.samples[perm_id[i]]);
        const CertificateReport cert = certify(mixed);
        const FitReport fit = fit_regression(mixed, fit_opts);
        cells.push_back(MixtureCell{f, cert.lambda_min,
                                    param_distance(fit.learned, truth)});
    }
    return cells;
}

}  // namespace mhla
