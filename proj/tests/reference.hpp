#pragma once

// Test-only reference oracles, kept independent of the library's iterative
// kernels: a full-spectrum cyclic Jacobi eigensolver, direct SubsetSum
// enumeration, and random-matrix builders with controlled spectra.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "mixreg/linalg.hpp"
#include "mixreg/rng.hpp"
#include "mixreg/vec.hpp"

namespace testref {

// Full eigendecomposition by cyclic Jacobi rotations; pairs sorted by
// nonincreasing eigenvalue.
inline std::vector<mixreg::EigenPair> jacobi_eigen(const mixreg::SymmetricMatrix& m) {
    const std::size_t n = m.dim();
    std::vector<double> a(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i * n + j] = m(i, j);
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    double frob = 0.0;
    for (double x : a) frob += x * x;
    frob = std::sqrt(frob);
    const double stop = 1e-14 * std::max(frob, 1e-300);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * a[p * n + q] * a[p * n + q];
        if (std::sqrt(off) < stop) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                a[p * n + p] -= t * apq;
                a[q * n + q] += t * apq;
                a[p * n + q] = a[q * n + p] = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (i != p && i != q) {
                        const double aip = a[i * n + p];
                        const double aiq = a[i * n + q];
                        a[i * n + p] = a[p * n + i] = c * aip - s * aiq;
                        a[i * n + q] = a[q * n + i] = s * aip + c * aiq;
                    }
                    const double vip = v[i * n + p];
                    const double viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<mixreg::EigenPair> pairs(n);
    for (std::size_t j = 0; j < n; ++j) {
        pairs[j].value = a[j * n + j];
        pairs[j].vector.resize(n);
        for (std::size_t i = 0; i < n; ++i) pairs[j].vector[i] = v[i * n + j];
    }
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& x, const auto& y) { return x.value > y.value; });
    return pairs;
}

// Direct SubsetSum decision: enumerate all subsets (values are small ints in
// the tests, so an absolute tolerance suffices).
inline bool subset_sum_decidable(const std::vector<double>& values) {
    const std::size_t k = values.size();
    const double total = std::accumulate(values.begin(), values.end(), 0.0);
    for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i)
            if (mask & (std::size_t{1} << i)) s += values[i];
        if (std::abs(2.0 * s - total) < 1e-9) return true;
    }
    return false;
}

inline std::vector<mixreg::Vec> random_orthonormal(std::size_t dim, std::size_t count,
                                                   mixreg::Rng& rng) {
    std::vector<mixreg::Vec> basis;
    while (basis.size() < count) {
        mixreg::Vec v(dim);
        for (double& x : v) x = rng.normal();
        for (const auto& b : basis) mixreg::axpy(-mixreg::dot(v, b), b, v);
        if (mixreg::normalize(v) > 1e-10) basis.push_back(std::move(v));
    }
    return basis;
}

// Q diag(lambda) Q^T for a random orthogonal Q.
inline mixreg::SymmetricMatrix matrix_with_spectrum(const mixreg::Vec& lambda, mixreg::Rng& rng) {
    const std::size_t dim = lambda.size();
    const auto basis = random_orthonormal(dim, dim, rng);
    mixreg::SymmetricMatrix m(dim);
    for (std::size_t t = 0; t < dim; ++t) m.add_outer(basis[t], lambda[t]);
    return m;
}

inline mixreg::SymmetricMatrix random_symmetric(std::size_t dim, mixreg::Rng& rng) {
    mixreg::SymmetricMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i; j < dim; ++j) m.set(i, j, rng.normal());
    return m;
}

}  // namespace testref
