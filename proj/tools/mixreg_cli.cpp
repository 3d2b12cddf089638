// Command-line driver: synthetic data generation, single solves, and the
// experiment sweeps behind the sample-complexity / phase-transition /
// convergence figures, plus the lemma and hardness oracles.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixreg/harness.hpp"
#include "mixreg/lemma_suites.hpp"
#include "mixreg/oracles.hpp"

namespace {

using nlohmann::json;
using namespace mixreg;
using namespace mixreg::harness;

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);  // binary keeps CRLF rows byte-stable
    if (!os) throw InputError("cannot open output file: " + path);
    return os;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open config file: " + path);
    json j;
    is >> j;
    return config_from_json(j);
}

json trial_record_json(const TrialRecord& r) {
    json j{{"seed", r.seed},
           {"k", r.k},
           {"n", r.n},
           {"p1", r.p1},
           {"delta", r.delta},
           {"init", to_string(r.init)},
           {"resample", r.resample},
           {"t0", r.t0},
           {"iterations_used", r.iterations_used},
           {"final_err", r.final_err},
           {"exact", r.exact},
           {"wall_time", r.wall_time}};
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

json cells_json(const std::vector<CellStats>& cells) {
    json arr = json::array();
    for (const CellStats& c : cells) {
        arr.push_back({{"k", c.k},
                       {"n", c.n},
                       {"n_over_k", static_cast<double>(c.n) / static_cast<double>(c.k)},
                       {"trials", c.trials},
                       {"successes", c.successes},
                       {"rate", c.rate},
                       {"wilson_lo", c.wilson_lo},
                       {"wilson_hi", c.wilson_hi},
                       {"low_confidence", c.low_confidence}});
    }
    return arr;
}

json summary_shell(const ExperimentConfig& cfg, double seconds) {
    return json{{"config", config_to_json(cfg)},
                {"rng_version", Rng::kVersion},
                {"wall_time_seconds", seconds}};
}

int emit_checks(const std::vector<LemmaCheck>& checks, const std::string& out_base,
                const ExperimentConfig& cfg, double seconds) {
    bool all = true;
    json arr = json::array();
    for (const LemmaCheck& c : checks) {
        all = all && c.passed;
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  observed=" << c.observed
                  << " bound=" << c.bound << (c.detail.empty() ? "" : "  " + c.detail) << "\n";
        arr.push_back({{"name", c.name},
                       {"passed", c.passed},
                       {"observed", c.observed},
                       {"bound", c.bound},
                       {"detail", c.detail}});
    }
    json summary = summary_shell(cfg, seconds);
    summary["checks"] = arr;
    summary["all_passed"] = all;
    if (!out_base.empty()) open_out(out_base + ".json") << summary.dump(2) << "\n";
    std::cout << (all ? "all checks passed" : "some checks FAILED") << "\n";
    return all ? 0 : 1;
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string field;
    while (std::getline(ss, field, ',')) {
        if (field.empty()) continue;
        out.push_back(std::stod(field));
    }
    if (out.empty()) throw InputError("--values: expected a comma-separated list of numbers");
    return out;
}

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixed linear regression: spectral initialization + EM experiments"};
    app.require_subcommand(1);

    // Flags shared by several subcommands; each subcommand registers the ones
    // it honors.
    std::string config_path, out_base, init_name = "grid", resample_name = "off";
    std::size_t k = 10, n = 300, t0 = 25, trials = 100, n_mc = 1000000;
    double p1 = 0.5, delta = 0.3, noise = 0.0, beta_norm = 1.5, beta_inner = 1.73;
    double target = 0.95;
    std::uint64_t seed = 1;
    std::string values_csv, suite = "all";
    std::vector<std::size_t> ks;
    std::vector<double> ratios;

    auto add_model_flags = [&](CLI::App* cmd) {
        cmd->add_option("--k", k, "dimension");
        cmd->add_option("--n", n, "number of samples");
        cmd->add_option("--p1", p1, "mixing proportion of the first component");
        cmd->add_option("--beta-norm", beta_norm, "norm of both coefficient vectors");
        cmd->add_option("--beta-inner", beta_inner, "target inner product <beta1, beta2>");
        cmd->add_option("--noise", noise, "noise standard deviation (default 0)");
        cmd->add_option("--seed", seed, "base seed");
    };
    auto add_solver_flags = [&](CLI::App* cmd) {
        cmd->add_option("--delta", delta, "grid resolution");
        cmd->add_option("--t0", t0, "EM iteration budget");
        cmd->add_option("--init", init_name, "init method: grid|proportion|random");
        cmd->add_option("--resample", resample_name, "resampled variant: on|off");
    };
    auto add_experiment_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON experiment config");
        cmd->add_option("--trials", trials, "trials per cell");
        cmd->add_option("--target", target, "target success rate");
        cmd->add_option("--ks", ks, "dimension grid");
        cmd->add_option("--ratios", ratios, "N/k grid");
    };

    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic sample set (CSV)");
    add_model_flags(gen);
    gen->add_option("--out", out_base, "output CSV path")->required();

    CLI::App* solve = app.add_subcommand("solve", "run one init+EM trial, print JSON");
    add_model_flags(solve);
    add_solver_flags(solve);
    solve->add_option("--out", out_base, "output base path (writes <base>_trace.csv, <base>.json)");

    CLI::App* sweep = app.add_subcommand("sweep", "sample-complexity sweep: smallest N per k");
    add_model_flags(sweep);
    add_solver_flags(sweep);
    add_experiment_flags(sweep);
    sweep->add_option("--out", out_base, "output base path")->required();

    CLI::App* phase = app.add_subcommand("phase", "success-rate curves over N/k");
    add_model_flags(phase);
    add_solver_flags(phase);
    add_experiment_flags(phase);
    phase->add_option("--out", out_base, "output base path")->required();

    CLI::App* trace = app.add_subcommand("trace", "per-iteration error, grid vs random init");
    add_model_flags(trace);
    add_solver_flags(trace);
    add_experiment_flags(trace);
    trace->add_option("--out", out_base, "output base path")->required();

    CLI::App* lemmas = app.add_subcommand("lemmas", "numerical lemma oracles");
    lemmas->add_option("--suite", suite, "cone|matbound|sandwich|all");
    lemmas->add_option("--nmc", n_mc, "Monte-Carlo draws");
    lemmas->add_option("--seed", seed, "base seed");
    lemmas->add_option("--trials", trials, "seeds per sandwich error level / matbound pairs");
    lemmas->add_option("--out", out_base, "output base path");

    CLI::App* hardness = app.add_subcommand("hardness", "SubsetSum reduction gadget demo");
    hardness->add_option("--values", values_csv, "comma-separated instance values")->required();
    hardness->add_option("--out", out_base, "output base path");

    CLI11_PARSE(app, argc, argv);

    try {
        Timer timer;
        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        auto apply_overrides = [&](CLI::App* cmd) {
            if (cmd->count("--trials")) cfg.trials = trials;
            if (cmd->count("--target")) cfg.target_rate = target;
            if (cmd->count("--t0")) cfg.t0 = t0;
            if (cmd->count("--delta")) cfg.delta = delta;
            if (cmd->count("--seed")) cfg.seed_base = seed;
            if (cmd->count("--p1")) cfg.p1 = p1;
            if (cmd->count("--beta-norm")) cfg.beta_norm = beta_norm;
            if (cmd->count("--beta-inner")) cfg.beta_inner = beta_inner;
            if (cmd->count("--noise")) cfg.noise_sigma = noise;
            if (cmd->count("--init")) cfg.init = init_method_from_string(init_name);
            if (cmd->count("--resample")) cfg.resample = resample_name == "on";
            if (cmd->count("--ks")) cfg.ks = ks;
            if (cmd->count("--ratios")) cfg.n_over_k = ratios;
            if (cmd->count("--k")) cfg.ks = {k};
            if (cmd->count("--n") && !cfg.ks.empty())
                cfg.n_over_k = {static_cast<double>(n) / static_cast<double>(cfg.ks.front())};
            cfg.validate();
        };

        if (gen->parsed()) {
            Rng rng(seed);
            const MixtureModel model = make_trial_model(k, p1, beta_norm, beta_inner, rng);
            const SampleSet samples = generate(model, n, noise, rng.next_u64());
            auto os = open_out(out_base);
            std::vector<std::string> header;
            for (std::size_t j = 0; j < k; ++j) header.push_back("x" + std::to_string(j));
            header.push_back("y");
            header.push_back("z");
            csv_row(os, header);
            const auto view = samples.view();
            const auto zs = samples.hidden_labels();
            for (std::size_t i = 0; i < samples.size(); ++i) {
                std::vector<std::string> row;
                for (double xv : view.x(i)) row.push_back(fmt_double(xv));
                row.push_back(fmt_double(view.y(i)));
                row.push_back(std::to_string(static_cast<int>(zs[i])));
                csv_row(os, row);
            }
            json summary{{"k", k},         {"n", n},
                         {"p1", p1},       {"noise_sigma", noise},
                         {"seed", seed},   {"beta1", model.beta1},
                         {"beta2", model.beta2}, {"out", out_base},
                         {"rng_version", Rng::kVersion}};
            std::cout << summary.dump(2) << "\n";
            return 0;
        }

        if (solve->parsed()) {
            TrialSetup s;
            s.k = k;
            s.n = n;
            s.p1 = p1;
            s.delta = delta;
            s.beta_norm = beta_norm;
            s.beta_inner = beta_inner;
            s.noise_sigma = noise;
            s.init = init_method_from_string(init_name);
            s.resample = resample_name == "on";
            s.t0 = t0;
            s.seed = seed;
            const TrialOutcome outcome = run_trial_full(s);
            json summary = trial_record_json(outcome.record);
            summary["rng_version"] = Rng::kVersion;
            std::cout << summary.dump(2) << "\n";
            if (!out_base.empty()) {
                auto os = open_out(out_base + "_trace.csv");
                csv_row(os, {"iteration", "err", "loss", "j1", "j2", "degenerate"});
                for (const EmTraceEntry& e : outcome.trace.entries)
                    csv_row(os, {std::to_string(e.iteration), fmt_double(e.err),
                                 fmt_double(e.loss), std::to_string(e.j1_size),
                                 std::to_string(e.j2_size), e.degenerate ? "1" : "0"});
                open_out(out_base + ".json") << summary.dump(2) << "\n";
            }
            return outcome.record.error.empty() ? 0 : 3;
        }

        if (sweep->parsed()) {
            cfg.kind = ExperimentKind::sample_complexity;
            apply_overrides(sweep);
            const SweepResult result = sample_complexity_sweep(cfg);
            { auto os = open_out(out_base + "_trials.csv"); write_trials_csv(os, result.all_records); }
            { auto os = open_out(out_base + "_cells.csv"); write_cells_csv(os, result.cells); }
            { auto os = open_out(out_base + "_nstar.csv"); write_nstar_csv(os, result); }
            json summary = summary_shell(cfg, timer.seconds());
            json nstar = json::array();
            for (const auto& row : result.n_star)
                nstar.push_back({{"k", row.k}, {"n_star", row.n_star}, {"censored", row.censored}});
            summary["n_star"] = nstar;
            summary["cells"] = cells_json(result.cells);
            open_out(out_base + ".json") << summary.dump(2) << "\n";
            std::cout << summary.dump(2) << "\n";
            return 0;
        }

        if (phase->parsed()) {
            cfg.kind = ExperimentKind::phase_transition;
            apply_overrides(phase);
            const PhaseResult result = phase_transition(cfg);
            { auto os = open_out(out_base + "_trials.csv"); write_trials_csv(os, result.all_records); }
            { auto os = open_out(out_base + "_cells.csv"); write_cells_csv(os, result.cells); }
            json summary = summary_shell(cfg, timer.seconds());
            summary["cells"] = cells_json(result.cells);
            open_out(out_base + ".json") << summary.dump(2) << "\n";
            std::cout << summary.dump(2) << "\n";
            return 0;
        }

        if (trace->parsed()) {
            cfg.kind = ExperimentKind::convergence;
            apply_overrides(trace);
            const TraceResult result = convergence_trace(cfg);
            { auto os = open_out(out_base + "_trials.csv"); write_trace_trials_csv(os, result); }
            { auto os = open_out(out_base + "_mean.csv"); write_trace_mean_csv(os, result); }
            json summary = summary_shell(cfg, timer.seconds());
            json mean = json::array();
            for (const auto& r : result.mean_curve)
                mean.push_back({{"init", to_string(r.init)},
                                {"iteration", r.iteration},
                                {"mean_err", r.mean_err},
                                {"trials", r.trials}});
            summary["mean_curve"] = mean;
            open_out(out_base + ".json") << summary.dump(2) << "\n";
            std::cout << summary.dump(2) << "\n";
            return 0;
        }

        if (lemmas->parsed()) {
            cfg.kind = ExperimentKind::lemma_suite;
            cfg.n_mc = lemmas->count("--nmc") ? n_mc : cfg.n_mc;
            if (lemmas->count("--seed")) cfg.seed_base = seed;
            const std::size_t n_seeds = lemmas->count("--trials") ? trials : 100;
            std::vector<LemmaCheck> checks;
            auto append = [&](std::vector<LemmaCheck> more) {
                checks.insert(checks.end(), more.begin(), more.end());
            };
            if (suite == "cone" || suite == "all")
                append(lemma_cone_suite(cfg.n_mc, cfg.seed_base));
            if (suite == "matbound" || suite == "all")
                append(lemma_matbound_suite(std::max<std::size_t>(n_seeds, 100),
                                            cfg.seed_base + 1));
            if (suite == "sandwich" || suite == "all")
                append(lemma_sandwich_suite(n_seeds, cfg.seed_base + 2, {0.05, 0.2, 0.5}));
            if (checks.empty()) throw InputError("lemmas: unknown suite '" + suite + "'");
            return emit_checks(checks, out_base, cfg, timer.seconds());
        }

        if (hardness->parsed()) {
            const HardnessReport rep = hardness_demo(parse_values(values_csv));
            json summary{{"values", rep.values},
                         {"solvable", rep.solvable},
                         {"subset_indices", rep.subset},
                         {"complement_indices", rep.complement},
                         {"subset_sum", rep.subset_sum},
                         {"complement_sum", rep.complement_sum}};
            if (rep.solvable) {
                std::cout << "solvable, partition {";
                for (std::size_t i = 0; i < rep.subset.size(); ++i)
                    std::cout << (i ? "," : "") << rep.values[rep.subset[i]];
                std::cout << "}|{";
                for (std::size_t i = 0; i < rep.complement.size(); ++i)
                    std::cout << (i ? "," : "") << rep.values[rep.complement[i]];
                std::cout << "}\n";
            } else {
                std::cout << "not solvable: no equal-sum partition exists\n";
            }
            if (!out_base.empty()) open_out(out_base + ".json") << summary.dump(2) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return 3;
    }
    return 0;
}
