#pragma once

#include <cstdint>
#include <random>

#include "mhla/matrix.hpp"

namespace mhla {

/// Deterministic random stream. mt19937_64 is bit-stable across platforms,
/// and the uniform/normal mappings are implemented here rather than with
/// std::*_distribution (whose output is implementation-defined).
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in (0, 1); never returns an endpoint.
    double uniform_open() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; second value of each pair is cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // rejection sampling keeps the draw unbiased
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0) {
        Matrix m(rows, cols);
        for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = stddev * normal();
        return m;
    }

    Vector normal_vector(std::size_t n, double stddev = 1.0) {
        Vector v(n);
        for (double& x : v) x = stddev * normal();
        return v;
    }

    /// Haar-ish random orthogonal matrix: Gram-Schmidt on a Gaussian draw.
    Matrix orthogonal_matrix(std::size_t n) {
        while (true) {
            Matrix g = normal_matrix(n, n);
            if (gram_schmidt_columns(g)) return g;
        }
    }

  private:
    static bool gram_schmidt_columns(Matrix& m) {
        const std::size_t n = m.rows();
        for (std::size_t j = 0; j < n; ++j) {
            Vector v = m.col(j);
            for (std::size_t k = 0; k < j; ++k) {
                const Vector u = m.col(k);
                const double proj = dot(u, v);
                for (std::size_t i = 0; i < n; ++i) v[i] -= proj * u[i];
            }
            const double nv = norm2(v);
            if (nv < 1e-10) return false;  // degenerate draw, resample
            for (double& x : v) x /= nv;
            m.set_col(j, v);
        }
        return true;
    }

    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace mhla
