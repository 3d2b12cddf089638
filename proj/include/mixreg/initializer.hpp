#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mixreg/errors.hpp"
#include "mixreg/estimator.hpp"
#include "mixreg/linalg.hpp"
#include "mixreg/model.hpp"
#include "mixreg/rng.hpp"
#include "mixreg/vec.hpp"

namespace mixreg {

// Empirical second-moment matrix M = (1/N) sum y_i^2 x_i x_i^T together with
// its top-2 eigenpairs and the eigenpairs of (M - I)/2. The shifted pairs
// share the eigenvectors of M; only the values move by lambda -> (lambda-1)/2.
struct MomentSpectrum {
    SymmetricMatrix m;
    std::array<EigenPair, 2> pairs;          // of M, values nonincreasing
    std::array<EigenPair, 2> shifted_pairs;  // of (M - I)/2
    bool degenerate_top = false;
};

inline MomentSpectrum moment_matrix(SampleView s, double tol = 1e-10,
                                    std::size_t max_iter = 10000) {
    if (s.size() < 2) throw InputError("moment_matrix: need at least two samples");
    const std::size_t k = s.dim();
    SymmetricMatrix m(k);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double y = s.y(i);
        m.add_outer(s.x(i), y * y);
    }
    m.scale(1.0 / static_cast<double>(s.size()));

    Top2Result top = top2_eig(m, tol, max_iter);
    MomentSpectrum out{std::move(m), {top.first, top.second}, {}, top.degenerate};
    for (int b = 0; b < 2; ++b) {
        out.shifted_pairs[b].vector = out.pairs[b].vector;
        out.shifted_pairs[b].value = 0.5 * (out.pairs[b].value - 1.0);
    }
    return out;
}

// Angular spacing of the candidate points on the unit circle of the
// top-2 eigenspace.
struct GridConfig {
    double delta;
};

enum class InitMethod { grid, proportion, random };

inline const char* to_string(InitMethod m) {
    switch (m) {
        case InitMethod::grid: return "grid";
        case InitMethod::proportion: return "proportion";
        case InitMethod::random: return "random";
    }
    return "?";
}

inline InitMethod init_method_from_string(const std::string& s) {
    if (s == "grid") return InitMethod::grid;
    if (s == "proportion") return InitMethod::proportion;
    if (s == "random") return InitMethod::random;
    throw InputError("unknown init method: " + s);
}

struct InitResult {
    Vec beta1_0, beta2_0;
    InitMethod method;
    bool degenerate_fallback = false;
};

// Grid search over the estimated eigenspace: candidates u_t = v1 cos(delta t) +
// v2 sin(delta t) for t = 0..ceil(2 pi / delta); the returned pair is the
// ordered (t1, t2) pair of lowest empirical loss, lexicographic on ties.
inline InitResult grid_init(const MomentSpectrum& spectrum, GridConfig grid,
                            SampleView loss_samples) {
    constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
    if (!(grid.delta > 0.0) || !(grid.delta < kTwoPi))
        throw InputError("grid_init: delta must lie in (0, 2*pi)");
    if (loss_samples.size() == 0) throw InputError("grid_init: empty loss sample set");

    const Vec& v1 = spectrum.pairs[0].vector;
    const Vec& v2 = spectrum.pairs[1].vector;
    const std::size_t k = v1.size();
    if (loss_samples.dim() != k) throw InputError("grid_init: dimension mismatch");

    const std::size_t steps = static_cast<std::size_t>(std::ceil(kTwoPi / grid.delta));
    const std::size_t n_points = steps + 1;
    std::vector<Vec> points(n_points, Vec(k));
    for (std::size_t t = 0; t < n_points; ++t) {
        const double angle = grid.delta * static_cast<double>(t);
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        for (std::size_t j = 0; j < k; ++j) points[t][j] = c * v1[j] + s * v2[j];
    }

    // Per-point squared residuals; a pair's loss is the per-sample min.
    const std::size_t n = loss_samples.size();
    std::vector<Vec> rsq(n_points, Vec(n));
    for (std::size_t t = 0; t < n_points; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const double r = loss_samples.y(i) - dot(loss_samples.x(i), points[t]);
            rsq[t][i] = r * r;
        }
    }

    double best = std::numeric_limits<double>::infinity();
    std::size_t best_t1 = 0, best_t2 = 0;
    for (std::size_t t1 = 0; t1 < n_points; ++t1) {
        for (std::size_t t2 = 0; t2 < n_points; ++t2) {
            const Vec& a = rsq[t1];
            const Vec& b = rsq[t2];
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) total += std::min(a[i], b[i]);
            if (total < best) {  // strict: first hit wins, (t1, t2) lexicographic
                best = total;
                best_t1 = t1;
                best_t2 = t2;
            }
        }
    }
    return InitResult{points[best_t1], points[best_t2], InitMethod::grid, false};
}

// Sufficient grid resolution c * ||beta1 - beta2|| * min(p1, p2)^(3/2).
inline double default_delta(double norm_gap, double pmin, double c) {
    if (!(norm_gap > 0.0)) throw InputError("default_delta: norm gap must be positive");
    if (!(pmin > 0.0) || pmin > 0.5) throw InputError("default_delta: pmin must lie in (0, 0.5]");
    if (!(c > 0.0)) throw InputError("default_delta: constant must be positive");
    return c * norm_gap * std::pow(pmin, 1.5);
}

// Duplicate-eigenvalue band for the closed-form initializer.
inline double default_gap_tol(const MomentSpectrum& spectrum) {
    const double l1 = spectrum.shifted_pairs[0].value;
    const double l2 = spectrum.shifted_pairs[1].value;
    return 1e-3 * std::max({std::abs(l1), std::abs(l2), 1.0});
}

namespace detail {

// Delta_b = ((l_b - l_-b)^2 + p_b^2 - p_-b^2) / (2 (l_-b - l_b) p_b), clamped
// to [-1, 1] when finite-sample noise pushes it slightly outside.
inline double closed_form_delta(double l_b, double l_other, double p_b, double p_other) {
    const double gap = l_b - l_other;
    const double value = (gap * gap + p_b * p_b - p_other * p_other) / (-2.0 * gap * p_b);
    if (std::abs(value) <= 1.0) return value;
    if (std::abs(value) <= 1.0 + 1e-6) return value > 0.0 ? 1.0 : -1.0;
    throw NumericError("proportion_init: closed-form Delta outside [-1, 1]");
}

}  // namespace detail

// Closed-form initializer from the spectrum of (M - I)/2 when the proportions
// are known. The spectrum identifies the pair only up to reflections of the
// eigenbasis and per-component sign flips, so every candidate in that orbit
// (v-sign flips plus a relative flip of the second component, eight pairs) is
// scored on the loss samples and the best one returned. Near-duplicate top
// eigenvalues fall back to the grid search.
inline InitResult proportion_init(const MomentSpectrum& spectrum, double p1, double p2,
                                  double gap_tol, SampleView loss_samples,
                                  GridConfig fallback_grid = GridConfig{0.3}) {
    if (!(p1 > 0.0) || !(p2 > 0.0) || std::abs(p1 + p2 - 1.0) > 1e-9)
        throw InputError("proportion_init: proportions must be positive and sum to 1");
    if (loss_samples.size() == 0) throw InputError("proportion_init: empty loss sample set");

    const double l1 = spectrum.shifted_pairs[0].value;
    const double l2 = spectrum.shifted_pairs[1].value;
    if (std::abs(l1 - l2) < gap_tol) {
        InitResult fallback = grid_init(spectrum, fallback_grid, loss_samples);
        fallback.degenerate_fallback = true;
        return fallback;
    }

    const Vec& v1 = spectrum.shifted_pairs[0].vector;
    const Vec& v2 = spectrum.shifted_pairs[1].vector;
    const std::size_t k = v1.size();

    const double delta1 = detail::closed_form_delta(l1, l2, p1, p2);
    const double delta2 = detail::closed_form_delta(l2, l1, p2, p1);
    const double c1_own = std::sqrt(0.5 * (1.0 - delta1));
    const double c1_cross = std::sqrt(0.5 * (1.0 + delta1));
    const double c2_own = std::sqrt(0.5 * (1.0 - delta2));
    const double c2_cross = std::sqrt(0.5 * (1.0 + delta2));

    InitResult best{Vec(), Vec(), InitMethod::proportion, false};
    double best_loss = std::numeric_limits<double>::infinity();
    Vec cand1(k), cand2(k);
    for (double s1 : {1.0, -1.0}) {
        for (double s2 : {1.0, -1.0}) {
            for (double rel : {1.0, -1.0}) {
                for (std::size_t j = 0; j < k; ++j) {
                    cand1[j] = c1_own * s1 * v1[j] + c1_cross * s2 * v2[j];
                    cand2[j] = rel * (c2_own * s2 * v2[j] - c2_cross * s1 * v1[j]);
                }
                const double l = loss(EstimatePair{cand1, cand2}, loss_samples);
                if (l < best_loss) {
                    best_loss = l;
                    best.beta1_0 = cand1;
                    best.beta2_0 = cand2;
                }
            }
        }
    }
    return best;
}

inline InitResult proportion_init(const MomentSpectrum& spectrum, double p1, double p2,
                                  SampleView loss_samples,
                                  GridConfig fallback_grid = GridConfig{0.3}) {
    return proportion_init(spectrum, p1, p2, default_gap_tol(spectrum), loss_samples,
                           fallback_grid);
}

// Two independent random directions on the unit sphere.
inline InitResult random_init(std::size_t k, std::uint64_t seed) {
    if (k == 0) throw InputError("random_init: dimension must be positive");
    Rng rng(seed);
    auto draw = [&] {
        Vec v(k);
        do {
            for (double& x : v) x = rng.normal();
        } while (normalize(v) == 0.0);
        return v;
    };
    Vec b1 = draw();
    Vec b2 = draw();
    return InitResult{std::move(b1), std::move(b2), InitMethod::random, false};
}

}  // namespace mixreg
