#include "doctest.h"

#include <cmath>

#include "mhla/certificate.hpp"
#include "mhla/tasks.hpp"

using namespace mhla;

namespace {

Dataset gaussian_realizable(RngStream& rng, const MhlaParams& truth, std::size_t n,
                            std::size_t n_max) {
    Dataset data;
    for (std::size_t i = 0; i < n; ++i) {
        SequenceSample s;
        s.z = rng.normal_matrix(truth.dim, 1 + rng.below(n_max));
        s.y = forward_last(truth, s.z);
        data.samples.push_back(std::move(s));
    }
    return data;
}

MhlaParams random_params(RngStream& rng, std::size_t d, std::size_t heads) {
    MhlaParams p;
    p.dim = d;
    for (std::size_t h = 0; h < heads; ++h)
        p.heads.push_back(Head{rng.normal_matrix(d, d), rng.normal_matrix(d, d)});
    return p;
}

}  // namespace

TEST_CASE("certify: i.i.d. Gaussian contexts are identifiable") {
    RngStream rng(1);
    const MhlaParams truth = random_params(rng, 2, 1);
    Dataset data;
    for (int i = 0; i < 5000; ++i) {
        SequenceSample s;
        s.z = rng.normal_matrix(2, 10);
        s.y = forward_last(truth, s.z);
        data.samples.push_back(std::move(s));
    }
    const CertificateReport report = certify(data);
    CHECK(report.psi == 6);
    CHECK(report.identifiable);
    CHECK(report.lambda_min > report.threshold_used);
    CHECK(report.rank_estimate == report.psi);
    CHECK(report.lambda_min <= report.lambda_max);
}

TEST_CASE("certify: a single sample is rank deficient") {
    RngStream rng(2);
    Dataset data;
    data.samples.push_back(SequenceSample{rng.normal_matrix(2, 4), Vector(2, 0.0)});
    const CertificateReport report = certify(data);
    CHECK(report.rank_estimate <= 1);
    CHECK(report.rank_estimate < report.psi);
    CHECK_FALSE(report.identifiable);
}

TEST_CASE("certify: empty dataset rejected") {
    CHECK_THROWS_AS(certify(Dataset{}), InputError);
}

TEST_CASE("second moment is positive semidefinite and averages over unions") {
    RngStream rng(3);
    const MhlaParams truth = random_params(rng, 3, 1);
    const Dataset a = gaussian_realizable(rng, truth, 40, 5);
    const Dataset b = gaussian_realizable(rng, truth, 20, 5);
    const Matrix la = second_moment(a);
    const Matrix lb = second_moment(b);
    Dataset both = a;
    both.samples.insert(both.samples.end(), b.samples.begin(), b.samples.end());
    const Matrix lu = second_moment(both);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    for (std::size_t i = 0; i < lu.size(); ++i) {
        const double expected = (na * la.data()[i] + nb * lb.data()[i]) / (na + nb);
        CHECK(lu.data()[i] == doctest::Approx(expected).epsilon(1e-12));
    }
    const CertificateReport report = certify(both);
    CHECK(report.lambda_min >= -1e-9 * report.lambda_max);
}

TEST_CASE("certify: scaling the contexts by c scales the spectrum by c^6") {
    RngStream rng(4);
    const MhlaParams truth = random_params(rng, 2, 1);
    const Dataset data = gaussian_realizable(rng, truth, 60, 4);
    const double c = 1.7;
    Dataset scaled = data;
    for (auto& s : scaled.samples) s.z = c * s.z;
    const CertificateReport base = certify(data);
    const CertificateReport big = certify(scaled);
    const double c6 = std::pow(c, 6.0);
    CHECK(big.lambda_min == doctest::Approx(c6 * base.lambda_min).epsilon(1e-9));
    CHECK(big.lambda_max == doctest::Approx(c6 * base.lambda_max).epsilon(1e-9));
}

TEST_CASE("error_bound: formula and domain checks") {
    Matrix z(1, 1, {1.0});
    CHECK(error_bound(0.0, 0.5, z) == 0.0);
    CHECK(error_bound(0.5, 0.5, z) == doctest::Approx(1.0));
    Matrix z2(1, 1, {2.0});  // ||Z||_F = 2 -> 2^6 = 64
    CHECK(error_bound(1.0, 1.0, z2) == doctest::Approx(64.0));
    CHECK_THROWS_AS(error_bound(0.1, 0.0, z), DomainError);
    CHECK_THROWS_AS(error_bound(0.1, -1.0, z), DomainError);
    CHECK_THROWS_AS(error_bound(-0.1, 1.0, z), ContractError);
}

TEST_CASE("error_bound dominates observed gaps between approximate minimizers") {
    RngStream rng(5);
    const MhlaParams truth = random_params(rng, 2, 1);
    Dataset data;
    for (int i = 0; i < 4000; ++i) {
        SequenceSample s;
        s.z = rng.normal_matrix(2, 6);
        s.y = forward_last(truth, s.z);
        for (double& v : s.y) v += 0.1 * rng.normal();
        data.samples.push_back(std::move(s));
    }
    FitOptions exact;
    exact.ridge = 0.0;
    const FitReport fit_a = fit_regression(data, exact);
    const FitReport fit_b = fit_regression(data);  // default ridge
    const double eps = std::max(mse(fit_a.learned, data), mse(fit_b.learned, data));
    const CertificateReport cert = certify(data);
    REQUIRE(cert.identifiable);
    for (int probe = 0; probe < 100; ++probe) {
        const Matrix z = rng.normal_matrix(2, 1 + rng.below(6));
        const Vector ya = forward_last(fit_a.learned, z);
        const Vector yb = forward_last(fit_b.learned, z);
        Vector diff(ya.size());
        for (std::size_t i = 0; i < ya.size(); ++i) diff[i] = ya[i] - yb[i];
        CHECK(norm2(diff) <= error_bound(eps, cert.lambda_min, z));
    }
}

TEST_CASE("mixture_sweep: recovery degrades as the degenerate pool takes over") {
    RngStream rng(6);
    const MhlaParams truth = random_params(rng, 2, 1);
    const Dataset good = gaussian_realizable(rng, truth, 300, 5);
    // degenerate pool: one sample repeated, rank-1 second moment
    Dataset degen;
    {
        SequenceSample s;
        s.z = rng.normal_matrix(2, 5);
        s.y = forward_last(truth, s.z);
        degen.samples.assign(300, s);
    }
    const std::vector<double> fractions{0.0, 0.5, 1.0};
    const auto cells = mixture_sweep(good, degen, truth, fractions, 99);
    REQUIRE(cells.size() == 3);
    CHECK(cells[0].fraction == 0.0);
    CHECK(cells[0].recovery_distance <= 1e-5);
    CHECK(cells[0].lambda_min > 0.0);
    CHECK(cells[1].lambda_min <= cells[0].lambda_min);
    CHECK(cells[2].lambda_min <= 1e-9 * std::max(1.0, cells[0].lambda_min));
    // degenerate-only fit cannot pin down the truth
    CHECK(cells[2].recovery_distance > 1e-2);
}

TEST_CASE("mixture_sweep: argument validation") {
    RngStream rng(7);
    const MhlaParams truth = random_params(rng, 2, 1);
    const Dataset a = gaussian_realizable(rng, truth, 10, 3);
    const MhlaParams other = random_params(rng, 3, 1);
    const Dataset b = gaussian_realizable(rng, other, 10, 3);
    CHECK_THROWS_AS(mixture_sweep(a, b, truth, {0.5}, 1), ContractError);
    CHECK_THROWS_AS(mixture_sweep(a, a, truth, {1.5}, 1), ContractError);
    CHECK_THROWS_AS(mixture_sweep(a, a, other, {0.5}, 1), ContractError);
}

TEST_CASE("certified identifiable realizable data pins the minimizer") {
    RngStream rng(8);
    const MhlaParams truth = random_params(rng, 2, 1);
    const Dataset data = gaussian_realizable(rng, truth, 400, 6);
    REQUIRE(certify(data).identifiable);
    FitOptions exact;
    exact.ridge = 0.0;
    const FitReport a = fit_regression(data, exact);
    const FitReport b = fit_regression(data);
    const double scale = frobenius_norm(param_feature(truth));
    CHECK(param_distance(a.learned, b.learned) <= 1e-6 * scale);
    CHECK(param_distance(a.learned, truth) <= 1e-6 * scale);
}
