// Acceptance suite: one check per release criterion, each printing a single
// PASS/FAIL line. Run with no arguments for the full suite or with a list of
// criterion numbers (1-13). Exit status is nonzero if any executed check
// fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mixreg/harness.hpp"
#include "mixreg/lemma_suites.hpp"
#include "mixreg/oracles.hpp"

using namespace mixreg;
using namespace mixreg::harness;

namespace {

struct Criterion {
    int id;
    const char* title;
    bool (*run)(std::string& detail);
};

double elapsed_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Unit-norm planted pair at the given cosine, axis-aligned.
MixtureModel unit_model(std::size_t k, double cosine, double p1) {
    Vec b1(k, 0.0), b2(k, 0.0);
    b1[0] = 1.0;
    b2[0] = cosine;
    b2[1] = std::sqrt(1.0 - cosine * cosine);
    return MixtureModel(std::move(b1), std::move(b2), p1, 1.0 - p1);
}

Vec perturbed(const Vec& base, double radius, Rng& rng) {
    Vec d(base.size());
    do {
        for (double& x : d) x = rng.normal();
    } while (normalize(d) == 0.0);
    Vec out = base;
    axpy(radius, d, out);
    return out;
}

ExperimentConfig reference_regime() {
    ExperimentConfig cfg;
    cfg.ks = {10};
    cfg.n_over_k = {30.0};  // N = 300
    cfg.trials = 100;
    cfg.delta = 0.3;
    cfg.p1 = 0.5;
    cfg.beta_norm = 1.5;
    cfg.beta_inner = 1.73;
    cfg.noise_sigma = 0.0;
    cfg.resample = false;
    cfg.seed_base = 1;
    return cfg;
}

// 1. Grid init + EM reaches exact recovery fast and reliably in the reference regime.
bool c1_end_to_end(std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    ExperimentConfig cfg = reference_regime();
    cfg.t0 = 15;
    cfg.init = InitMethod::grid;
    const CellEvaluation cell = evaluate_cell(cfg, 10, 300);

    std::vector<std::size_t> iters;
    for (const TrialRecord& r : cell.records)
        if (r.exact) iters.push_back(r.iterations_used);
    std::sort(iters.begin(), iters.end());
    const double median_iters =
        iters.empty() ? 1e9
                      : (iters.size() % 2 ? double(iters[iters.size() / 2])
                                          : 0.5 * double(iters[iters.size() / 2 - 1] +
                                                         iters[iters.size() / 2]));
    const double secs = elapsed_since(start);
    std::ostringstream os;
    os << "recovered " << cell.stats.successes << "/100 within 15 iterations, median "
       << median_iters << " iters, " << secs << " s";
    detail = os.str();
    return cell.stats.successes >= 95 && median_iters <= 10.0 && secs <= 60.0;
}

// 2. Random initialization recovers at most half as often as grid init at the
// same budget.
bool c2_initialization_matters(std::string& detail) {
    ExperimentConfig cfg = reference_regime();
    cfg.t0 = 25;
    cfg.init = InitMethod::grid;
    const CellStats grid = evaluate_cell(cfg, 10, 300).stats;
    cfg.init = InitMethod::random;
    const CellStats random = evaluate_cell(cfg, 10, 300).stats;
    std::ostringstream os;
    os << "grid rate " << grid.rate << ", random rate " << random.rate << " (bound "
       << 0.5 * grid.rate << ")";
    detail = os.str();
    return random.rate <= 0.5 * grid.rate;
}

// 3. Smallest sufficient N grows near-linearly in the dimension.
bool c3_sample_complexity(std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    ExperimentConfig cfg = reference_regime();
    cfg.kind = ExperimentKind::sample_complexity;
    cfg.ks = {5, 10, 20, 40};
    cfg.n_over_k = {6, 8, 10, 12, 16, 20, 24, 28, 32, 40, 48};
    cfg.trials = 200;
    cfg.target_rate = 0.95;
    cfg.t0 = 25;
    cfg.seed_base = 1000;
    const SweepResult sweep = sample_complexity_sweep(cfg);

    bool censored = false;
    Vec ks, ns;
    std::ostringstream os;
    os << "n_star:";
    for (const auto& row : sweep.n_star) {
        censored = censored || row.censored;
        ks.push_back(double(row.k));
        ns.push_back(double(row.n_star));
        os << " (" << row.k << " -> " << row.n_star << (row.censored ? " censored" : "")
           << ")";
    }

    // Least-squares fit n = a k + b and its R^2.
    const double mk = std::accumulate(ks.begin(), ks.end(), 0.0) / ks.size();
    const double mn = std::accumulate(ns.begin(), ns.end(), 0.0) / ns.size();
    double sxx = 0.0, sxy = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        sxx += (ks[i] - mk) * (ks[i] - mk);
        sxy += (ks[i] - mk) * (ns[i] - mn);
        sst += (ns[i] - mn) * (ns[i] - mn);
    }
    const double a = sxy / sxx;
    const double b = mn - a * mk;
    double ssr = 0.0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double resid = ns[i] - (a * ks[i] + b);
        ssr += resid * resid;
    }
    const double r2 = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
    const double growth = ns.back() / ns.front();
    const bool nondecreasing = std::is_sorted(ns.begin(), ns.end());
    const double secs = elapsed_since(start);
    os << ", fit " << a << "*k + " << b << ", R^2 = " << r2 << ", n_star(40)/n_star(5) = "
       << growth << (nondecreasing ? "" : ", NOT nondecreasing") << ", " << secs << " s";
    detail = os.str();
    return !censored && nondecreasing && r2 >= 0.9 && growth <= 16.0 && secs <= 1200.0;
}

// 4. Success curves for k = 10 and k = 20 collapse in N/k past the
// transition. "Above the transition" = shared ratios where both
// curves already exceed 0.9.
bool c4_phase_collapse(std::string& detail) {
    ExperimentConfig cfg = reference_regime();
    cfg.kind = ExperimentKind::phase_transition;
    cfg.ks = {10, 20};
    cfg.n_over_k = {8, 12, 16, 20, 24, 32, 40};
    cfg.trials = 200;
    cfg.t0 = 25;
    cfg.seed_base = 2000;
    const PhaseResult phase = phase_transition(cfg);

    double worst = 0.0;
    std::size_t compared = 0;
    std::ostringstream os;
    for (double ratio : cfg.n_over_k) {
        double r10 = -1.0, r20 = -1.0;
        for (const CellStats& c : phase.cells) {
            if (std::llround(ratio * double(c.k)) != (long long)c.n) continue;
            (c.k == 10 ? r10 : r20) = c.rate;
        }
        os << " [" << ratio << ": " << r10 << "/" << r20 << "]";
        if (r10 >= 0.9 && r20 >= 0.9) {
            ++compared;
            worst = std::max(worst, std::abs(r10 - r20));
        }
    }
    std::ostringstream head;
    head << "post-transition points " << compared << ", max |rate(10) - rate(20)| = " << worst
         << ", curves:" << os.str();
    detail = head.str();
    return compared >= 1 && worst <= 0.15;
}

// 5. Resampled EM halves the error per iteration from a warm start.
bool c5_geometric_decay(std::string& detail) {
    const std::size_t k = 10, t0 = 6;
    const std::size_t block = 40 * k * 2;  // 40 k / min(p1, p2)
    std::size_t halved = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(seed);
        const MixtureModel model = make_trial_model(k, 0.5, 1.0, 0.5, rng);
        const double gap = dist(model.beta1, model.beta2);
        const double err0 = 0.25 * 0.5 * gap;  // inside the initialization error ball
        const EstimatePair init{perturbed(model.beta1, err0, rng),
                                perturbed(model.beta2, err0, rng)};
        const SampleSet samples = generate(model, block * t0, 0.0, rng.next_u64());
        const EmTrace trace = run_em(init, samples, t0, true, &model);
        for (std::size_t t = 1; t < trace.entries.size(); ++t) {
            const double prev = trace.entries[t - 1].err;
            if (prev <= 0.0) break;
            ++total;
            if (trace.entries[t].err <= 0.5 * prev) ++halved;
        }
    }
    std::ostringstream os;
    os << "halving steps " << halved << "/" << total;
    detail = os.str();
    return total > 0 && double(halved) >= 0.9 * double(total);
}

// 6. One fresh Theta(k) block pins the error to zero once it is below the
// trigger threshold.
bool c6_exact_recovery_trigger(std::string& detail) {
    const std::size_t k = 10;
    std::size_t exact = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(seed);
        const MixtureModel model = make_trial_model(k, 0.5, 1.0, 0.5, rng);
        const double gap = dist(model.beta1, model.beta2);
        const double err_prev = 1e-3 / double(k * k) * gap;
        const EstimatePair est{perturbed(model.beta1, err_prev, rng),
                               perturbed(model.beta2, err_prev, rng)};
        const SampleSet fresh = generate(model, 4 * k * 2, 0.0, rng.next_u64());
        const EmStepResult step = em_step(est, fresh.view());
        if (error_metric(step.estimate, model) <= 1e-10) ++exact;
    }
    std::ostringstream os;
    os << "exact after one fresh block in " << exact << "/100 trials";
    detail = os.str();
    return exact >= 90;
}

// 7. Empirical moment matrix concentrates around I + 2p1 b1 b1^T + 2p2 b2
// b2^T, and its shifted spectrum around (1 +/- kappa)/2.
bool c7_moment_structure(std::string& detail) {
    const std::size_t k = 4, n = 200000;
    const double p1 = 0.6, cosine = 0.5;
    const double kappa = std::sqrt(1.0 - 4.0 * (1.0 - cosine * cosine) * p1 * (1.0 - p1));
    std::size_t good = 0;
    double worst_norm = 0.0, worst_eig = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        const MixtureModel model = make_trial_model(k, p1, 1.0, cosine, rng);
        const SampleSet samples = generate(model, n, 0.0, rng.next_u64());
        const MomentSpectrum s = moment_matrix(samples.view());
        SymmetricMatrix expected(k);
        expected.add_scaled_identity(1.0);
        expected.add_outer(model.beta1, 2.0 * p1);
        expected.add_outer(model.beta2, 2.0 * (1.0 - p1));
        const double dev = spectral_norm(SymmetricMatrix::difference(s.m, expected));
        const double eig_dev =
            std::max(std::abs(s.shifted_pairs[0].value - 0.5 * (1.0 + kappa)),
                     std::abs(s.shifted_pairs[1].value - 0.5 * (1.0 - kappa)));
        worst_norm = std::max(worst_norm, dev);
        worst_eig = std::max(worst_eig, eig_dev);
        if (dev <= 0.05 && eig_dev <= 0.02) ++good;
    }
    std::ostringstream os;
    os << good << "/20 seeds within bounds (worst ||M - E|| = " << worst_norm
       << ", worst eigenvalue deviation = " << worst_eig << ")";
    detail = os.str();
    return good >= 19;
}

bool all_checks_pass(const std::vector<LemmaCheck>& checks, std::string& detail) {
    std::size_t passed = 0;
    std::string first_fail;
    for (const LemmaCheck& c : checks) {
        if (c.passed)
            ++passed;
        else if (first_fail.empty())
            first_fail = c.name;
    }
    std::ostringstream os;
    os << passed << "/" << checks.size() << " checks";
    if (!first_fail.empty()) os << ", first failure: " << first_fail;
    detail = os.str();
    return passed == checks.size();
}

// 8. Conditional-spectrum lemma: closed forms at alpha = pi/2 plus the
// probability bounds at 5-sigma Monte-Carlo tolerance.
bool c8_cone_lemma(std::string& detail) {
    return all_checks_pass(lemma_cone_suite(1000000, 81, 0.02, 20, 100000), detail);
}

// 9. Eigenspace perturbation bounds: no violations on 1000 random pairs.
bool c9_matbound_lemma(std::string& detail) {
    return all_checks_pass(lemma_matbound_suite(1000, 82), detail);
}

// 10. Loss sandwich at err in {0.05, 0.2, 0.5}.
bool c10_sandwich_lemma(std::string& detail) {
    return all_checks_pass(lemma_sandwich_suite(100, 83, {0.05, 0.2, 0.5}, 10, 2000, 0.95),
                           detail);
}

// 11. The reduction gadget decides SubsetSum exactly on every multiset with
// up to 8 values in [1, 10].
bool c11_hardness_gadget(std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    std::size_t instances = 0, agreements = 0;
    std::vector<double> values;
    std::string first_mismatch;

    auto direct = [&]() {
        const double total = std::accumulate(values.begin(), values.end(), 0.0);
        const std::size_t m = values.size();
        for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                if (mask & (std::size_t{1} << i)) s += values[i];
            if (std::abs(2.0 * s - total) < 1e-9) return true;
        }
        return false;
    };
    auto recurse = [&](auto&& self, double min_value) -> void {
        if (!values.empty()) {
            ++instances;
            const bool want = direct();
            const bool got =
                oracles::brute_force_mixed_solve(
                    oracles::hardness_gadget(oracles::SubsetSumInstance{values}))
                    .has_value();
            if (want == got) {
                ++agreements;
            } else if (first_mismatch.empty()) {
                std::ostringstream os;
                for (double v : values) os << v << " ";
                first_mismatch = os.str();
            }
        }
        if (values.size() == 8) return;
        for (double v = min_value; v <= 10.0; v += 1.0) {
            values.push_back(v);
            self(self, v);
            values.pop_back();
        }
    };
    recurse(recurse, 1.0);

    std::ostringstream os;
    os << agreements << "/" << instances << " instances agree with direct enumeration, "
       << elapsed_since(start) << " s";
    if (!first_mismatch.empty()) os << ", first mismatch: " << first_mismatch;
    detail = os.str();
    return instances == 43757 && agreements == instances;
}

// 12. Closed-form initializer round-trips the population spectrum; the
// duplicate-eigenvalue configuration takes the documented fallback.
bool c12_closed_form_init(std::string& detail) {
    struct Config {
        double p1, cosine;
    };
    double worst = 0.0;
    bool ok = true;
    for (const Config c : {Config{0.6, 0.5}, Config{0.5, 0.5}, Config{0.55, -0.3},
                           Config{0.7, 0.0}, Config{0.35, 0.8}}) {
        const MixtureModel model = unit_model(5, c.cosine, c.p1);
        SymmetricMatrix pop(5);
        pop.add_scaled_identity(1.0);
        pop.add_outer(model.beta1, 2.0 * c.p1);
        pop.add_outer(model.beta2, 2.0 * (1.0 - c.p1));
        const Top2Result top = top2_eig(pop);
        MomentSpectrum s{pop, {top.first, top.second}, {}, top.degenerate};
        for (int b = 0; b < 2; ++b) {
            s.shifted_pairs[b].vector = s.pairs[b].vector;
            s.shifted_pairs[b].value = 0.5 * (s.pairs[b].value - 1.0);
        }
        const SampleSet samples = generate(model, 1000, 0.0, 7);
        const InitResult r = proportion_init(s, c.p1, 1.0 - c.p1, samples.view());
        const double err = error_metric(EstimatePair{r.beta1_0, r.beta2_0}, model);
        worst = std::max(worst, err);
        ok = ok && !r.degenerate_fallback && err <= 1e-6;
    }

    // p1 = p2 with orthogonal components: spectral structure cannot identify
    // the pair, the grid fallback must engage.
    const MixtureModel dup = unit_model(5, 0.0, 0.5);
    SymmetricMatrix pop(5);
    pop.add_scaled_identity(1.0);
    pop.add_outer(dup.beta1, 1.0);
    pop.add_outer(dup.beta2, 1.0);
    const Top2Result top = top2_eig(pop);
    MomentSpectrum s{pop, {top.first, top.second}, {}, top.degenerate};
    for (int b = 0; b < 2; ++b) {
        s.shifted_pairs[b].vector = s.pairs[b].vector;
        s.shifted_pairs[b].value = 0.5 * (s.pairs[b].value - 1.0);
    }
    const SampleSet samples = generate(dup, 1000, 0.0, 8);
    const InitResult fb = proportion_init(s, 0.5, 0.5, samples.view());
    ok = ok && fb.degenerate_fallback && fb.method == InitMethod::grid;

    std::ostringstream os;
    os << "worst reconstruction error " << worst << ", duplicate fallback "
       << (fb.degenerate_fallback ? "engaged" : "missing");
    detail = os.str();
    return ok;
}

// 13. Identical config and seed produce byte-identical CSV output.
bool c13_determinism(std::string& detail) {
    ExperimentConfig cfg = reference_regime();
    cfg.ks = {5, 8};
    cfg.n_over_k = {4, 12, 24};
    cfg.trials = 15;
    cfg.t0 = 12;
    cfg.seed_base = 77;

    auto render = [&]() {
        std::ostringstream os;
        const PhaseResult phase = phase_transition(cfg);
        write_trials_csv(os, phase.all_records);
        write_cells_csv(os, phase.cells);
        ExperimentConfig sweep_cfg = cfg;
        sweep_cfg.target_rate = 0.8;
        const SweepResult sweep = sample_complexity_sweep(sweep_cfg);
        write_trials_csv(os, sweep.all_records);
        write_nstar_csv(os, sweep);
        ExperimentConfig trace_cfg = cfg;
        trace_cfg.trials = 6;
        trace_cfg.t0 = 6;
        const TraceResult trace = convergence_trace(trace_cfg);
        write_trace_trials_csv(os, trace);
        write_trace_mean_csv(os, trace);
        return os.str();
    };
    const std::string first = render();
    const std::string second = render();
    std::ostringstream os;
    os << first.size() << " bytes compared";
    detail = os.str();
    return !first.empty() && first == second;
}

const Criterion kCriteria[] = {
    {1, "end-to-end recovery, grid init + EM (k=10, N=300, delta=0.3)", c1_end_to_end},
    {2, "random init recovers at most half as often as grid init", c2_initialization_matters},
    {3, "near-linear sample complexity over k in {5,10,20,40}", c3_sample_complexity},
    {4, "phase-transition curves collapse in N/k (k=10 vs k=20)", c4_phase_collapse},
    {5, "resampled EM halves the error per iteration", c5_geometric_decay},
    {6, "fresh Theta(k) block yields exact recovery below the trigger", c6_exact_recovery_trigger},
    {7, "moment matrix structure and shifted spectrum", c7_moment_structure},
    {8, "conditional-spectrum lemma Monte Carlo", c8_cone_lemma},
    {9, "eigenspace perturbation bounds, 1000 random pairs", c9_matbound_lemma},
    {10, "loss sandwich bracket at err in {0.05, 0.2, 0.5}", c10_sandwich_lemma},
    {11, "reduction gadget decides SubsetSum (k <= 8, values 1..10)", c11_hardness_gadget},
    {12, "closed-form initializer population round trip", c12_closed_form_init},
    {13, "byte-identical CSV under identical config and seed", c13_determinism},
};

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

    bool all_ok = true;
    for (const Criterion& c : kCriteria) {
        if (!wanted.empty() &&
            std::find(wanted.begin(), wanted.end(), c.id) == wanted.end())
            continue;
        std::string detail;
        const bool ok = c.run(detail);
        all_ok = all_ok && ok;
        std::printf("C%02d %s  %s  [%s]\n", c.id, ok ? "PASS" : "FAIL", c.title,
                    detail.c_str());
        std::fflush(stdout);
    }
    return all_ok ? 0 : 1;
}
