#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mixreg/errors.hpp"
#include "mixreg/estimator.hpp"
#include "mixreg/initializer.hpp"
#include "mixreg/model.hpp"
#include "mixreg/parallel.hpp"
#include "mixreg/rng.hpp"

namespace mixreg::harness {

enum class ExperimentKind {
    sample_complexity,
    phase_transition,
    convergence,
    lemma_suite,
    hardness_demo,
};

inline const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::sample_complexity: return "sample_complexity";
        case ExperimentKind::phase_transition: return "phase_transition";
        case ExperimentKind::convergence: return "convergence";
        case ExperimentKind::lemma_suite: return "lemma_suite";
        case ExperimentKind::hardness_demo: return "hardness_demo";
    }
    return "?";
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
    if (s == "sample_complexity") return ExperimentKind::sample_complexity;
    if (s == "phase_transition") return ExperimentKind::phase_transition;
    if (s == "convergence") return ExperimentKind::convergence;
    if (s == "lemma_suite") return ExperimentKind::lemma_suite;
    if (s == "hardness_demo") return ExperimentKind::hardness_demo;
    throw InputError("unknown experiment kind: " + s);
}

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::sample_complexity;
    std::vector<std::size_t> ks{5, 10, 20, 40};
    std::vector<double> n_over_k{2, 2.5, 3, 3.5, 4, 4.5, 5, 6, 7, 8, 10, 12, 16};
    std::size_t trials = 200;
    double target_rate = 0.95;
    std::size_t t0 = 25;
    double delta = 0.3;
    InitMethod init = InitMethod::grid;
    bool resample = false;
    std::uint64_t seed_base = 1;
    double p1 = 0.5;
    double beta_norm = 1.5;    // ||beta_i*||; 1.5 with inner 1.73 is the default regime
    double beta_inner = 1.73;  // <beta1*, beta2*>
    double noise_sigma = 0.0;
    std::size_t n_mc = 1000000;   // lemma suites
    std::vector<double> hardness_values;  // hardness demo

    void validate() const {
        if (trials < 1) throw InputError("config: trials must be >= 1");
        if (!(target_rate > 0.0) || target_rate > 1.0)
            throw InputError("config: target_rate must lie in (0, 1]");
        if (!(p1 > 0.0) || !(p1 < 1.0)) throw InputError("config: p1 must lie in (0, 1)");
        if (!(delta > 0.0)) throw InputError("config: delta must be positive");
        if (noise_sigma < 0.0) throw InputError("config: noise_sigma must be nonnegative");
        if (!(beta_norm > 0.0)) throw InputError("config: beta_norm must be positive");
        for (std::size_t k : ks)
            if (k < 2) throw InputError("config: dimensions must be >= 2");
        for (double r : n_over_k)
            if (!(r > 0.0)) throw InputError("config: n_over_k entries must be positive");
    }
};

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    return nlohmann::json{{"kind", to_string(c.kind)},
                          {"ks", c.ks},
                          {"n_over_k", c.n_over_k},
                          {"trials", c.trials},
                          {"target_rate", c.target_rate},
                          {"t0", c.t0},
                          {"delta", c.delta},
                          {"init", mixreg::to_string(c.init)},
                          {"resample", c.resample},
                          {"seed_base", c.seed_base},
                          {"p1", c.p1},
                          {"beta_norm", c.beta_norm},
                          {"beta_inner", c.beta_inner},
                          {"noise_sigma", c.noise_sigma},
                          {"n_mc", c.n_mc},
                          {"hardness_values", c.hardness_values}};
}

// Strict parse: unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    static const char* known[] = {"kind",      "ks",        "n_over_k",  "trials",
                                  "target_rate", "t0",      "delta",     "init",
                                  "resample",  "seed_base", "p1",        "beta_norm",
                                  "beta_inner", "noise_sigma", "n_mc",   "hardness_values"};
    if (!j.is_object()) throw InputError("config: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* key : known) ok = ok || it.key() == key;
        if (!ok) throw InputError("config: unknown key '" + it.key() + "'");
    }
    ExperimentConfig c;
    if (j.contains("kind")) c.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("ks")) c.ks = j.at("ks").get<std::vector<std::size_t>>();
    if (j.contains("n_over_k")) c.n_over_k = j.at("n_over_k").get<std::vector<double>>();
    if (j.contains("trials")) c.trials = j.at("trials").get<std::size_t>();
    if (j.contains("target_rate")) c.target_rate = j.at("target_rate").get<double>();
    if (j.contains("t0")) c.t0 = j.at("t0").get<std::size_t>();
    if (j.contains("delta")) c.delta = j.at("delta").get<double>();
    if (j.contains("init")) c.init = init_method_from_string(j.at("init").get<std::string>());
    if (j.contains("resample")) c.resample = j.at("resample").get<bool>();
    if (j.contains("seed_base")) c.seed_base = j.at("seed_base").get<std::uint64_t>();
    if (j.contains("p1")) c.p1 = j.at("p1").get<double>();
    if (j.contains("beta_norm")) c.beta_norm = j.at("beta_norm").get<double>();
    if (j.contains("beta_inner")) c.beta_inner = j.at("beta_inner").get<double>();
    if (j.contains("noise_sigma")) c.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("n_mc")) c.n_mc = j.at("n_mc").get<std::size_t>();
    if (j.contains("hardness_values"))
        c.hardness_values = j.at("hardness_values").get<std::vector<double>>();
    c.validate();
    return c;
}

// Ground truth for one trial: beta1* uniform on the sphere of radius
// beta_norm, beta2* with the prescribed inner product and the same norm.
inline MixtureModel make_trial_model(std::size_t k, double p1, double beta_norm,
                                     double beta_inner, Rng& rng) {
    if (k < 2) throw InputError("make_trial_model: need dimension >= 2");
    const double r = beta_norm;
    if (std::abs(beta_inner) >= r * r * (1.0 - 1e-12))
        throw InputError("make_trial_model: |beta_inner| must be < beta_norm^2");

    Vec b1(k);
    do {
        for (double& x : b1) x = rng.normal();
    } while (normalize(b1) == 0.0);
    scale_in_place(b1, r);

    Vec w(k);
    double wn = 0.0;
    do {
        for (double& x : w) x = rng.normal();
        axpy(-dot(w, b1) / (r * r), b1, w);
        wn = normalize(w);
    } while (wn < 1e-12);

    const double c = beta_inner / (r * r);
    Vec b2 = scaled(b1, c);
    axpy(std::sqrt(r * r - c * c * r * r), w, b2);
    return MixtureModel(std::move(b1), std::move(b2), p1, 1.0 - p1);
}

struct TrialSetup {
    std::size_t k = 10;
    std::size_t n = 300;
    double p1 = 0.5;
    double delta = 0.3;
    double beta_norm = 1.5;
    double beta_inner = 1.73;
    double noise_sigma = 0.0;
    InitMethod init = InitMethod::grid;
    bool resample = false;
    std::size_t t0 = 25;
    std::uint64_t seed = 1;
};

struct TrialRecord {
    std::uint64_t seed = 0;
    std::size_t k = 0, n = 0;
    double p1 = 0.0, delta = 0.0;
    InitMethod init = InitMethod::grid;
    bool resample = false;
    std::size_t t0 = 0;
    std::size_t iterations_used = 0;
    double final_err = std::numeric_limits<double>::infinity();
    bool exact = false;
    double wall_time = 0.0;  // seconds; never serialized to CSV
    std::string error;       // failure reason when the trial aborted
};

struct TrialOutcome {
    TrialRecord record;
    EmTrace trace;
};

// One end-to-end trial: model -> samples -> initialization -> EM. The seed
// fully determines the outcome. Resampled trials consume half the samples for
// the spectral step, a quarter for the loss selection and the rest for the EM
// blocks (random initialization uses everything for EM).
inline TrialOutcome run_trial_full(const TrialSetup& s) {
    TrialOutcome out;
    TrialRecord& rec = out.record;
    rec.seed = s.seed;
    rec.k = s.k;
    rec.n = s.n;
    rec.p1 = s.p1;
    rec.delta = s.delta;
    rec.init = s.init;
    rec.resample = s.resample;
    rec.t0 = s.t0;

    const auto start = std::chrono::steady_clock::now();
    try {
        Rng rng(s.seed);
        const MixtureModel model = make_trial_model(s.k, s.p1, s.beta_norm, s.beta_inner, rng);
        const std::uint64_t gen_seed = rng.next_u64();
        const std::uint64_t init_seed = rng.next_u64();
        const SampleSet samples = generate(model, s.n, s.noise_sigma, gen_seed);

        InitResult init{Vec(), Vec(), s.init, false};
        const SampleSet* em_samples = &samples;
        std::optional<SampleSet> em_tail;

        if (s.init == InitMethod::random) {
            init = random_init(s.k, init_seed);
        } else if (!s.resample) {
            // Non-resampled variant: one block serves both the spectrum and the loss.
            const MomentSpectrum spectrum = moment_matrix(samples.view());
            init = s.init == InitMethod::grid
                       ? grid_init(spectrum, GridConfig{s.delta}, samples.view())
                       : proportion_init(spectrum, s.p1, 1.0 - s.p1, samples.view(),
                                         GridConfig{s.delta});
        } else {
            const std::size_t n_star = s.n / 2;
            const std::size_t n_plus = s.n / 4;
            if (n_star < 2 || n_plus < 1 || n_star + n_plus >= s.n)
                throw InputError("run_trial: too few samples for resampled initialization");
            const MomentSpectrum spectrum = moment_matrix(samples.view(0, n_star));
            const SampleView plus = samples.view(n_star, n_plus);
            init = s.init == InitMethod::grid
                       ? grid_init(spectrum, GridConfig{s.delta}, plus)
                       : proportion_init(spectrum, s.p1, 1.0 - s.p1, plus, GridConfig{s.delta});
            em_tail = samples.slice(n_star + n_plus, s.n - n_star - n_plus);
            em_samples = &*em_tail;
        }

        out.trace = run_em(EstimatePair{init.beta1_0, init.beta2_0}, *em_samples, s.t0,
                           s.resample, &model);
        rec.iterations_used = out.trace.iterations_used;
        rec.final_err = error_metric(out.trace.final, model);
        const double err_tol = 1e-8 * (1.0 + dist(model.beta1, model.beta2));
        rec.exact = out.trace.reached_exact && rec.final_err <= err_tol;
    } catch (const std::exception& e) {
        rec.error = e.what();
        rec.exact = false;
    }
    rec.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

inline TrialRecord run_trial(const TrialSetup& s) { return run_trial_full(s).record; }

// Wilson score interval at normal quantile z.
inline std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials,
                                                 double z = 1.959963984540054) {
    if (trials == 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    // The interval must bracket the point estimate even after rounding.
    const double lo = std::min(std::max(0.0, center - half), p);
    const double hi = std::max(std::min(1.0, center + half), p);
    return {lo, hi};
}

struct CellStats {
    std::size_t k = 0, n = 0;
    std::size_t trials = 0, successes = 0;
    double rate = 0.0, wilson_lo = 0.0, wilson_hi = 1.0;
    bool low_confidence = false;
};

struct CellEvaluation {
    CellStats stats;
    std::vector<TrialRecord> records;
};

// Runs `trials` independent trials of one (k, N) cell. Per-trial seeds are
// seed_base + trial index, so the result is schedule independent.
inline CellEvaluation evaluate_cell(const ExperimentConfig& cfg, std::size_t k, std::size_t n) {
    CellEvaluation cell;
    cell.records.resize(cfg.trials);
    parallel_for(cfg.trials, [&](std::size_t t) {
        TrialSetup s;
        s.k = k;
        s.n = n;
        s.p1 = cfg.p1;
        s.delta = cfg.delta;
        s.beta_norm = cfg.beta_norm;
        s.beta_inner = cfg.beta_inner;
        s.noise_sigma = cfg.noise_sigma;
        s.init = cfg.init;
        s.resample = cfg.resample;
        s.t0 = cfg.t0;
        s.seed = cfg.seed_base + t;
        cell.records[t] = run_trial(s);
    });
    CellStats& st = cell.stats;
    st.k = k;
    st.n = n;
    st.trials = cfg.trials;
    for (const TrialRecord& r : cell.records) st.successes += r.exact ? 1 : 0;
    st.rate = static_cast<double>(st.successes) / static_cast<double>(st.trials);
    std::tie(st.wilson_lo, st.wilson_hi) = wilson_interval(st.successes, st.trials);
    st.low_confidence = st.trials < 10;
    return cell;
}

struct SweepResult {
    struct NStarRow {
        std::size_t k = 0;
        std::size_t n_star = 0;
        bool censored = false;  // no grid point reached the target rate
    };
    std::vector<NStarRow> n_star;
    std::vector<CellStats> cells;          // every evaluated cell
    std::vector<TrialRecord> all_records;  // raw rows, one per (cell, trial)
};

namespace detail {

inline std::vector<std::size_t> n_grid_for(const ExperimentConfig& cfg, std::size_t k) {
    std::vector<std::size_t> grid;
    for (double r : cfg.n_over_k) {
        const auto n = static_cast<std::size_t>(std::llround(r * static_cast<double>(k)));
        grid.push_back(std::max<std::size_t>(n, 2));
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

}  // namespace detail

// For each k, the smallest grid N whose empirical success rate reaches the
// target. Bisection over the (assumed monotone) grid; the returned N always
// carries a full-trial-count evaluation.
inline SweepResult sample_complexity_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    SweepResult out;
    for (std::size_t k : cfg.ks) {
        const std::vector<std::size_t> grid = detail::n_grid_for(cfg, k);
        std::map<std::size_t, CellStats> seen;
        auto rate_at = [&](std::size_t idx) {
            const std::size_t n = grid[idx];
            auto it = seen.find(n);
            if (it == seen.end()) {
                CellEvaluation cell = evaluate_cell(cfg, k, n);
                out.all_records.insert(out.all_records.end(), cell.records.begin(),
                                       cell.records.end());
                it = seen.emplace(n, cell.stats).first;
            }
            return it->second.rate;
        };

        std::size_t lo = 0, hi = grid.size() - 1;
        while (lo < hi) {
            const std::size_t mid = lo + (hi - lo) / 2;
            if (rate_at(mid) >= cfg.target_rate)
                hi = mid;
            else
                lo = mid + 1;
        }
        const bool reached = rate_at(lo) >= cfg.target_rate;
        out.n_star.push_back({k, reached ? grid[lo] : grid.back(), !reached});
        for (const auto& [n, st] : seen) out.cells.push_back(st);
    }
    return out;
}

struct PhaseResult {
    std::vector<CellStats> cells;
    std::vector<TrialRecord> all_records;
};

// Success-rate curves over the n_over_k grid for every requested k.
inline PhaseResult phase_transition(const ExperimentConfig& cfg) {
    cfg.validate();
    PhaseResult out;
    for (std::size_t k : cfg.ks) {
        for (std::size_t n : detail::n_grid_for(cfg, k)) {
            CellEvaluation cell = evaluate_cell(cfg, k, n);
            out.cells.push_back(cell.stats);
            out.all_records.insert(out.all_records.end(), cell.records.begin(),
                                   cell.records.end());
        }
    }
    return out;
}

struct TraceResult {
    struct Row {
        InitMethod init;
        std::uint64_t seed;
        std::size_t trial, iteration;
        double err, loss;
    };
    struct MeanRow {
        InitMethod init;
        std::size_t iteration;
        double mean_err;
        std::size_t trials;
    };
    std::vector<Row> per_trial;
    std::vector<MeanRow> mean_curve;
};

// Per-iteration error curves, spectral grid initialization vs random
// initialization, averaged over trials. Trials that recover early contribute
// their final (zero) error to later iterations.
inline TraceResult convergence_trace(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.ks.empty()) throw InputError("convergence_trace: need one dimension");
    const std::size_t k = cfg.ks.front();
    const std::size_t n = static_cast<std::size_t>(
        std::llround(cfg.n_over_k.front() * static_cast<double>(k)));

    TraceResult out;
    for (InitMethod init : {InitMethod::grid, InitMethod::random}) {
        std::vector<EmTrace> traces(cfg.trials);
        std::vector<std::uint64_t> seeds(cfg.trials);
        parallel_for(cfg.trials, [&](std::size_t t) {
            TrialSetup s;
            s.k = k;
            s.n = n;
            s.p1 = cfg.p1;
            s.delta = cfg.delta;
            s.beta_norm = cfg.beta_norm;
            s.beta_inner = cfg.beta_inner;
            s.noise_sigma = cfg.noise_sigma;
            s.init = init;
            s.resample = cfg.resample;
            s.t0 = cfg.t0;
            s.seed = cfg.seed_base + t;
            seeds[t] = s.seed;
            traces[t] = run_trial_full(s).trace;
        });
        for (std::size_t t = 0; t < cfg.trials; ++t) {
            for (const EmTraceEntry& e : traces[t].entries)
                out.per_trial.push_back({init, seeds[t], t, e.iteration, e.err, e.loss});
        }
        for (std::size_t it = 0; it <= cfg.t0; ++it) {
            double sum = 0.0;
            for (const EmTrace& tr : traces) {
                const double v = it < tr.entries.size() ? tr.entries[it].err
                                                        : tr.entries.back().err;
                sum += v;
            }
            out.mean_curve.push_back({init, it, sum / static_cast<double>(cfg.trials),
                                      cfg.trials});
        }
    }
    return out;
}

// ---- serialization ----

// 17 significant digits: doubles round-trip exactly.
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// RFC 4180 quoting.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline void csv_row(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os << ',';
        os << csv_field(fields[i]);
    }
    os << "\r\n";
}

inline void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
    csv_row(os, {"k", "n", "p1", "delta", "init", "resample", "t0", "seed", "iterations",
                 "final_err", "exact", "error"});
    for (const TrialRecord& r : records) {
        csv_row(os, {std::to_string(r.k), std::to_string(r.n), fmt_double(r.p1),
                     fmt_double(r.delta), mixreg::to_string(r.init),
                     r.resample ? "1" : "0", std::to_string(r.t0), std::to_string(r.seed),
                     std::to_string(r.iterations_used), fmt_double(r.final_err),
                     r.exact ? "1" : "0", r.error});
    }
}

inline void write_cells_csv(std::ostream& os, const std::vector<CellStats>& cells) {
    csv_row(os, {"k", "n", "n_over_k", "trials", "successes", "rate", "wilson_lo", "wilson_hi",
                 "low_confidence"});
    for (const CellStats& c : cells) {
        csv_row(os, {std::to_string(c.k), std::to_string(c.n),
                     fmt_double(static_cast<double>(c.n) / static_cast<double>(c.k)),
                     std::to_string(c.trials), std::to_string(c.successes), fmt_double(c.rate),
                     fmt_double(c.wilson_lo), fmt_double(c.wilson_hi),
                     c.low_confidence ? "1" : "0"});
    }
}

inline void write_nstar_csv(std::ostream& os, const SweepResult& sweep) {
    csv_row(os, {"k", "n_star", "censored"});
    for (const auto& row : sweep.n_star)
        csv_row(os, {std::to_string(row.k), std::to_string(row.n_star),
                     row.censored ? "1" : "0"});
}

inline void write_trace_trials_csv(std::ostream& os, const TraceResult& tr) {
    csv_row(os, {"init", "seed", "trial", "iteration", "err", "loss"});
    for (const auto& r : tr.per_trial)
        csv_row(os, {mixreg::to_string(r.init), std::to_string(r.seed), std::to_string(r.trial),
                     std::to_string(r.iteration), fmt_double(r.err), fmt_double(r.loss)});
}

inline void write_trace_mean_csv(std::ostream& os, const TraceResult& tr) {
    csv_row(os, {"init", "iteration", "mean_err", "trials"});
    for (const auto& r : tr.mean_curve)
        csv_row(os, {mixreg::to_string(r.init), std::to_string(r.iteration),
                     fmt_double(r.mean_err), std::to_string(r.trials)});
}

}  // namespace mixreg::harness
