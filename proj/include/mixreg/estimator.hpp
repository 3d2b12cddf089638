#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "mixreg/errors.hpp"
#include "mixreg/linalg.hpp"
#include "mixreg/model.hpp"
#include "mixreg/vec.hpp"

namespace mixreg {

struct EstimatePair {
    Vec beta1, beta2;
};

// Per-sample loss threshold under which a noiseless fit counts as exact.
inline constexpr double kExactRecoveryLossPerSample = 1e-20;

// L(b1, b2) = sum_i min((y_i - <x_i, b1>)^2, (y_i - <x_i, b2>)^2).
// The per-sample min equals the assignment-minimized loss by separability.
inline double loss(const EstimatePair& est, SampleView s) {
    if (s.size() == 0) throw InputError("loss: empty sample set");
    if (est.beta1.size() != s.dim() || est.beta2.size() != s.dim())
        throw InputError("loss: dimension mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto x = s.x(i);
        const double r1 = s.y(i) - dot(x, est.beta1);
        const double r2 = s.y(i) - dot(x, est.beta2);
        total += std::min(r1 * r1, r2 * r2);
    }
    return total;
}

// Index sets of the current guessed labels, local to the view they were
// computed on.
struct LabelAssignment {
    std::vector<std::uint32_t> j1, j2;
};

// i -> J1 iff |y_i - <x_i, b1>| < |y_i - <x_i, b2>| strictly; ties go to J2.
inline LabelAssignment assign_labels(const EstimatePair& est, SampleView s) {
    if (est.beta1.size() != s.dim() || est.beta2.size() != s.dim())
        throw InputError("assign_labels: dimension mismatch");
    LabelAssignment out;
    out.j1.reserve(s.size());
    out.j2.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto x = s.x(i);
        const double r1 = std::abs(s.y(i) - dot(x, est.beta1));
        const double r2 = std::abs(s.y(i) - dot(x, est.beta2));
        if (r1 < r2)
            out.j1.push_back(static_cast<std::uint32_t>(i));
        else
            out.j2.push_back(static_cast<std::uint32_t>(i));
    }
    return out;
}

struct EmStepResult {
    EstimatePair estimate;
    LabelAssignment labels;
    // An update block was empty or smaller than the dimension; the affected
    // coefficient kept its previous value or used the minimum-norm solve.
    bool degenerate = false;
};

namespace detail {

inline Vec solve_block(SampleView s, const std::vector<std::uint32_t>& idx) {
    const std::size_t k = s.dim();
    Vec rows(idx.size() * k);
    Vec rhs(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto x = s.x(idx[r]);
        std::copy(x.begin(), x.end(), rows.begin() + r * k);
        rhs[r] = s.y(idx[r]);
    }
    return least_squares(rows, idx.size(), k, rhs);
}

}  // namespace detail

// One EM iteration: guess labels, then refit each coefficient by least
// squares on its block.
inline EmStepResult em_step(const EstimatePair& est, SampleView s) {
    EmStepResult out;
    out.labels = assign_labels(est, s);
    out.estimate = est;
    const std::size_t k = s.dim();

    if (out.labels.j1.empty()) {
        out.degenerate = true;
    } else {
        out.estimate.beta1 = detail::solve_block(s, out.labels.j1);
        out.degenerate |= out.labels.j1.size() < k;
    }
    if (out.labels.j2.empty()) {
        out.degenerate = true;
    } else {
        out.estimate.beta2 = detail::solve_block(s, out.labels.j2);
        out.degenerate |= out.labels.j2.size() < k;
    }
    return out;
}

// err = min over the two label pairings of max(||b_a - beta1*||, ||b_b - beta2*||).
// Component order is unidentifiable, so the metric minimizes over the swap.
inline double error_metric(const EstimatePair& est, const MixtureModel& truth) {
    if (est.beta1.size() != truth.k() || est.beta2.size() != truth.k())
        throw InputError("error_metric: dimension mismatch");
    const double direct = std::max(dist(est.beta1, truth.beta1), dist(est.beta2, truth.beta2));
    const double swapped = std::max(dist(est.beta1, truth.beta2), dist(est.beta2, truth.beta1));
    return std::min(direct, swapped);
}

// True iff the estimate fits every noiseless sample to machine precision.
inline bool exact_recovery(const EstimatePair& est, const SampleSet& samples) {
    if (samples.noise_sigma() > 0.0)
        throw InputError("exact_recovery: defined only for noiseless samples");
    return loss(est, samples.view()) <=
           static_cast<double>(samples.size()) * kExactRecoveryLossPerSample;
}

struct EmTraceEntry {
    std::size_t iteration;
    double err;  // NaN when no ground truth was supplied
    double loss;
    std::size_t j1_size, j2_size;
    bool degenerate;
};

struct EmTrace {
    std::vector<EmTraceEntry> entries;  // entry 0 is the initial state
    EstimatePair final;
    bool reached_exact = false;
    std::size_t iterations_used = 0;
};

// Runs t0 EM iterations from the given initialization. resample = false
// reuses the full sample set each iteration; resample = true walks through t0
// disjoint equal blocks (remainder joins the last block). Stops early once
// the noiseless fit is exact.
inline EmTrace run_em(EstimatePair init, const SampleSet& samples, std::size_t t0,
                      bool resample, const MixtureModel* truth = nullptr) {
    const SampleView full = samples.view();
    const std::size_t n = samples.size();
    std::size_t block = 0;
    if (resample && t0 > 0) {
        block = n / t0;
        if (block == 0) throw InputError("run_em: not enough samples for the requested resampling");
    }
    const bool noiseless = samples.noise_sigma() == 0.0;
    const double exact_cap = static_cast<double>(n) * kExactRecoveryLossPerSample;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    EmTrace trace;
    auto record = [&](std::size_t t, const EstimatePair& est, std::size_t j1, std::size_t j2,
                      bool degenerate) {
        const double current_loss = loss(est, full);
        trace.entries.push_back(
            {t, truth ? error_metric(est, *truth) : nan, current_loss, j1, j2, degenerate});
        return noiseless && current_loss <= exact_cap;
    };

    EstimatePair est = std::move(init);
    trace.reached_exact = record(0, est, 0, 0, false);
    if (!trace.reached_exact) {
        for (std::size_t t = 1; t <= t0; ++t) {
            SampleView step_view = full;
            if (resample) {
                const std::size_t offset = (t - 1) * block;
                const std::size_t count = (t == t0) ? n - offset : block;
                step_view = full.slice(offset, count);
            }
            EmStepResult step = em_step(est, step_view);
            est = std::move(step.estimate);
            trace.iterations_used = t;
            if (record(t, est, step.labels.j1.size(), step.labels.j2.size(), step.degenerate)) {
                trace.reached_exact = true;
                break;
            }
        }
    }
    trace.final = std::move(est);
    return trace;
}

}  // namespace mixreg
