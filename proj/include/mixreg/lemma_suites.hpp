#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mixreg/harness.hpp"
#include "mixreg/oracles.hpp"

namespace mixreg::harness {

struct LemmaCheck {
    std::string name;
    bool passed = false;
    double observed = 0.0;
    double bound = 0.0;
    std::string detail;
};

namespace detail {

// Random orthogonal matrix, columns from Gram-Schmidt over Gaussian draws.
inline std::vector<Vec> random_orthonormal(std::size_t dim, std::size_t count, Rng& rng) {
    std::vector<Vec> basis;
    while (basis.size() < count) {
        Vec v(dim);
        for (double& x : v) x = rng.normal();
        for (const Vec& b : basis) axpy(-dot(v, b), b, v);
        if (normalize(v) > 1e-10) basis.push_back(std::move(v));
    }
    return basis;
}

inline SymmetricMatrix from_spectrum(const std::vector<Vec>& basis, const Vec& lambda) {
    const std::size_t dim = basis.front().size();
    SymmetricMatrix m(dim);
    for (std::size_t t = 0; t < basis.size(); ++t) m.add_outer(basis[t], lambda[t]);
    return m;
}

inline SymmetricMatrix random_symmetric_unit_norm(std::size_t dim, Rng& rng) {
    SymmetricMatrix r(dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i; j < dim; ++j) r.set(i, j, rng.normal());
    const double s = spectral_norm(r);
    r.scale(1.0 / s);
    return r;
}

}  // namespace detail

// Conditional-spectrum lemma checks: closed forms for an orthonormal pair at
// full Monte-Carlo budget, plus the probability bounds on random pairs at a
// 5-sigma Monte-Carlo tolerance.
inline std::vector<LemmaCheck> lemma_cone_suite(std::size_t n_mc, std::uint64_t seed,
                                                double closed_form_tol = 0.02,
                                                std::size_t n_pairs = 20,
                                                std::size_t pair_n_mc = 100000) {
    std::vector<LemmaCheck> checks;
    Rng rng(seed);

    {
        const auto basis = detail::random_orthonormal(5, 2, rng);
        const auto rep =
            oracles::cone_spectrum_mc(basis[0], basis[1], n_mc, rng.next_u64());
        const auto [smax, smin] = oracles::cone_sigma_bounds(rep.alpha);
        checks.push_back({"cone.orthonormal.sigma_max", std::abs(rep.sigma_max_mc - smax) <=
                                                            closed_form_tol,
                          rep.sigma_max_mc, smax, "alpha = pi/2"});
        checks.push_back({"cone.orthonormal.sigma_min",
                          std::abs(rep.sigma_min_mc - smin) <= closed_form_tol,
                          rep.sigma_min_mc, smin, "alpha = pi/2"});
        const double se = std::sqrt(0.25 / static_cast<double>(n_mc));
        checks.push_back({"cone.orthonormal.prob", std::abs(rep.prob_mc - 0.5) <= 5.0 * se,
                          rep.prob_mc, 0.5, "5-sigma MC tolerance"});
    }

    {
        Vec u{2.0, 0.0, 0.0};
        Vec v{0.0, 1.0, 0.0};
        const auto rep = oracles::cone_spectrum_mc(u, v, std::max<std::size_t>(n_mc / 10, 10000),
                                                   rng.next_u64());
        checks.push_back({"cone.larger_u.prob_gt_half", rep.prob_mc > 0.5, rep.prob_mc, 0.5,
                          "||u|| > ||v||"});
    }

    for (std::size_t p = 0; p < n_pairs; ++p) {
        const std::size_t dim = 2 + p % 5;
        Vec u(dim), v(dim);
        double nu = 0.0, nv = 0.0;
        do {
            for (double& x : u) x = rng.normal();
            for (double& x : v) x = rng.normal();
            nu = norm(u);
            nv = norm(v);
        } while (nu == 0.0 || nv == 0.0 || std::abs(nu - nv) < 1e-6 * std::max(nu, nv));
        const auto rep = oracles::cone_spectrum_mc(u, v, pair_n_mc, rng.next_u64());
        const double se = std::max(
            std::sqrt(rep.prob_mc * (1.0 - rep.prob_mc) / static_cast<double>(rep.n_mc)),
            1.0 / static_cast<double>(rep.n_mc));
        const std::string tag = "pair " + std::to_string(p);
        if (nu > nv) {
            checks.push_back({"cone.prob_bound.gt_half[" + std::to_string(p) + "]",
                              rep.prob_mc > 0.5 - 5.0 * se, rep.prob_mc, 0.5, tag});
        } else {
            checks.push_back({"cone.prob_bound.ratio[" + std::to_string(p) + "]",
                              rep.prob_mc <= nu / nv + 5.0 * se, rep.prob_mc, nu / nv, tag});
        }
    }
    return checks;
}

// Eigenspace perturbation bounds on random (Sigma, M) pairs that satisfy the
// gap precondition; the lemma admits zero violations.
inline std::vector<LemmaCheck> lemma_matbound_suite(std::size_t n_pairs, std::uint64_t seed) {
    Rng rng(seed);
    std::size_t violations = 0;
    std::size_t checked = 0;
    std::string first_violation;
    for (std::size_t p = 0; p < n_pairs; ++p) {
        const std::size_t dim = 4 + p % 5;
        const auto basis = detail::random_orthonormal(dim, dim, rng);
        Vec lambda(dim);
        lambda[0] = 3.0 + rng.uniform();
        lambda[1] = 2.0 + 0.5 * rng.uniform();
        lambda[2] = 1.0 + 0.4 * rng.uniform();
        for (std::size_t t = 3; t < dim; ++t)
            lambda[t] = lambda[t - 1] - 0.1 - 0.3 * rng.uniform();
        const SymmetricMatrix sigma = detail::from_spectrum(basis, lambda);

        SymmetricMatrix m = sigma;
        const SymmetricMatrix noise = detail::random_symmetric_unit_norm(dim, rng);
        const double eps = (0.05 + 0.93 * rng.uniform()) * 0.5 * (lambda[1] - lambda[2]);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = i; j < dim; ++j)
                m.set(i, j, m(i, j) + eps * noise(i, j));

        const auto rep = oracles::perturbation_check(sigma, m);
        if (!rep.precondition_met) continue;  // spectral-norm margin consumed by rounding
        ++checked;
        if (!rep.all_hold()) {
            ++violations;
            if (first_violation.empty()) first_violation = "pair " + std::to_string(p);
        }
    }
    std::vector<LemmaCheck> checks;
    checks.push_back({"matbound.zero_violations", violations == 0,
                      static_cast<double>(violations), 0.0,
                      std::to_string(checked) + " pairs checked" +
                          (first_violation.empty() ? "" : ", first: " + first_violation)});
    return checks;
}

// Loss sandwich (upper 1.1 err, lower (1/5) sqrt(pmin) min(err, gap/2)) on
// perturbed estimates at the given error levels.
inline std::vector<LemmaCheck> lemma_sandwich_suite(std::size_t n_seeds, std::uint64_t seed,
                                                    const std::vector<double>& errs,
                                                    std::size_t k = 10,
                                                    std::size_t s_plus = 2000,
                                                    double min_rate = 0.95) {
    std::vector<LemmaCheck> checks;
    Rng rng(seed);
    for (double err : errs) {
        std::size_t holds = 0;
        for (std::size_t trial = 0; trial < n_seeds; ++trial) {
            const MixtureModel model = make_trial_model(k, 0.5, 1.0, 0.5, rng);
            const SampleSet samples = generate(model, s_plus, 0.0, rng.next_u64());
            auto perturb = [&](const Vec& b) {
                Vec d(k);
                do {
                    for (double& x : d) x = rng.normal();
                } while (normalize(d) == 0.0);
                Vec out = b;
                axpy(err, d, out);
                return out;
            };
            const EstimatePair est{perturb(model.beta1), perturb(model.beta2)};
            const auto rep = oracles::loss_sandwich_check(est, model, samples.view());
            if (rep.holds()) ++holds;
        }
        const double rate = static_cast<double>(holds) / static_cast<double>(n_seeds);
        checks.push_back({"sandwich.err=" + fmt_double(err), rate >= min_rate, rate, min_rate,
                          std::to_string(holds) + "/" + std::to_string(n_seeds)});
    }
    return checks;
}

struct HardnessReport {
    Vec values;
    bool solvable = false;
    std::vector<std::size_t> subset;      // indices on the half-sum side
    std::vector<std::size_t> complement;
    double subset_sum = 0.0, complement_sum = 0.0;
};

// Builds the reduction gadget for the given values and decides solvability by
// the exhaustive mixed solver; a solution's label pattern reads off the
// equal-sum partition.
inline HardnessReport hardness_demo(const Vec& values) {
    HardnessReport rep;
    rep.values = values;
    const auto sys = oracles::hardness_gadget(oracles::SubsetSumInstance{values});
    const auto solved = oracles::brute_force_mixed_solve(sys);
    rep.solvable = solved.has_value();
    if (!rep.solvable) return rep;
    const std::size_t k = values.size();
    // The block holding the final (all-ones) row carries the half-sum subset.
    const std::uint8_t half_side = solved->assignment[2 * k];
    for (std::size_t i = 0; i < k; ++i) {
        if (solved->assignment[i] == half_side) {
            rep.subset.push_back(i);
            rep.subset_sum += values[i];
        } else {
            rep.complement.push_back(i);
            rep.complement_sum += values[i];
        }
    }
    return rep;
}

}  // namespace mixreg::harness
