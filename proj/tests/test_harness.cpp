#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "mixreg/harness.hpp"
#include "mixreg/lemma_suites.hpp"

using namespace mixreg;
using namespace mixreg::harness;

TEST_CASE("config json round trip and strict keys") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::phase_transition;
    cfg.ks = {10, 20};
    cfg.trials = 50;
    cfg.beta_norm = 1.0;
    cfg.beta_inner = 0.5;
    const ExperimentConfig back = config_from_json(config_to_json(cfg));
    CHECK(back.kind == cfg.kind);
    CHECK(back.ks == cfg.ks);
    CHECK(back.trials == cfg.trials);
    CHECK(back.beta_inner == cfg.beta_inner);

    nlohmann::json bad = config_to_json(cfg);
    bad["n_trials"] = 3;  // unknown key
    CHECK_THROWS_AS(config_from_json(bad), InputError);

    nlohmann::json invalid = config_to_json(cfg);
    invalid["target_rate"] = 0.0;
    CHECK_THROWS_AS(config_from_json(invalid), InputError);
}

TEST_CASE("trial models satisfy the requested geometry") {
    Rng rng(77);
    const MixtureModel m = make_trial_model(10, 0.5, 1.5, 1.73, rng);
    CHECK(norm(m.beta1) == Catch::Approx(1.5).margin(1e-9));
    CHECK(norm(m.beta2) == Catch::Approx(1.5).margin(1e-9));
    CHECK(dot(m.beta1, m.beta2) == Catch::Approx(1.73).margin(1e-9));

    Rng rng2(78);
    CHECK_THROWS_AS(make_trial_model(10, 0.5, 1.0, 1.2, rng2), InputError);
}

TEST_CASE("trials are deterministic in the seed") {
    TrialSetup s;
    s.seed = 42;
    const TrialRecord a = run_trial(s);
    const TrialRecord b = run_trial(s);
    CHECK(a.exact == b.exact);
    CHECK(a.final_err == b.final_err);
    CHECK(a.iterations_used == b.iterations_used);
    CHECK(a.error == b.error);
}

TEST_CASE("the reference regime recovers and undersampled cells do not") {
    TrialSetup s;  // k=10, n=300, delta=0.3, grid init
    s.t0 = 15;
    s.seed = 1;
    const TrialRecord good = run_trial(s);
    CHECK(good.exact);
    CHECK(good.iterations_used <= 15);
    CHECK(good.final_err <= 1e-10);
    CHECK(good.error.empty());

    TrialSetup tiny = s;
    tiny.n = 10;  // N = k: zero-loss fits exist, actual recovery cannot happen
    const TrialRecord bad = run_trial(tiny);
    CHECK_FALSE(bad.exact);
}

TEST_CASE("wilson interval brackets the point estimate") {
    for (auto [succ, trials] : {std::pair<std::size_t, std::size_t>{0, 10},
                                {5, 10},
                                {10, 10},
                                {199, 200}}) {
        const auto [lo, hi] = wilson_interval(succ, trials);
        const double p = double(succ) / double(trials);
        CHECK(lo >= 0.0);
        CHECK(hi <= 1.0);
        CHECK(lo <= p);
        CHECK(p <= hi);
    }
}

TEST_CASE("sweep finds the smallest grid N meeting the target") {
    ExperimentConfig cfg;
    cfg.ks = {4};
    cfg.n_over_k = {2, 4, 8, 30};
    cfg.trials = 10;
    cfg.seed_base = 100;
    cfg.t0 = 15;

    // An (almost) zero target is met by the smallest grid N with any success.
    cfg.target_rate = 1e-9;
    const SweepResult zero_target = sample_complexity_sweep(cfg);
    REQUIRE(zero_target.n_star.size() == 1);
    CHECK_FALSE(zero_target.n_star[0].censored);
    CHECK(zero_target.n_star[0].n_star == 16);

    // target = 0 exactly violates the config contract (rate must be positive).
    nlohmann::json j = config_to_json(cfg);
    j["target_rate"] = 0.0;
    CHECK_THROWS_AS(config_from_json(j), InputError);

    cfg.target_rate = 0.8;
    const SweepResult mid = sample_complexity_sweep(cfg);
    CHECK_FALSE(mid.n_star[0].censored);
    CHECK(mid.n_star[0].n_star == 120);  // N/k = 30 cell is the reliable one
    for (const auto& cell : mid.cells) CHECK(cell.trials == 10);
}

TEST_CASE("unreachable targets are censored") {
    ExperimentConfig cfg;
    cfg.ks = {4};
    cfg.n_over_k = {1.0};  // N = k: recovery is impossible
    cfg.trials = 5;
    cfg.target_rate = 0.9;
    const SweepResult r = sample_complexity_sweep(cfg);
    CHECK(r.n_star[0].censored);
    CHECK(r.cells[0].rate == 0.0);
}

TEST_CASE("single-trial cells carry the low-confidence flag") {
    ExperimentConfig cfg;
    cfg.ks = {4};
    cfg.n_over_k = {20};
    cfg.trials = 1;
    const PhaseResult r = phase_transition(cfg);
    REQUIRE(r.cells.size() == 1);
    CHECK(r.cells[0].low_confidence);
    CHECK((r.cells[0].rate == 0.0 || r.cells[0].rate == 1.0));
}

TEST_CASE("phase curves hit the asymptotes") {
    ExperimentConfig cfg;
    cfg.ks = {6};
    cfg.n_over_k = {1.0, 30.0};
    cfg.trials = 20;
    cfg.seed_base = 300;
    const PhaseResult r = phase_transition(cfg);
    REQUIRE(r.cells.size() == 2);
    CHECK(r.cells[0].rate <= 0.05);  // N < identifiability
    CHECK(r.cells[1].rate >= 0.85);
    for (const auto& c : r.cells) {
        CHECK(c.rate >= 0.0);
        CHECK(c.rate <= 1.0);
        CHECK(c.wilson_lo <= c.rate);
        CHECK(c.rate <= c.wilson_hi);
    }
    CHECK(r.all_records.size() == 40);
}

TEST_CASE("convergence trace separates the two initializations") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::convergence;
    cfg.ks = {10};
    cfg.n_over_k = {30};
    cfg.trials = 8;
    cfg.t0 = 4;  // short budget: random starts are still far
    cfg.seed_base = 1;
    const TraceResult r = convergence_trace(cfg);
    REQUIRE(r.mean_curve.size() == 2 * (cfg.t0 + 1));

    double grid_final = -1.0, random_final = -1.0;
    for (const auto& row : r.mean_curve) {
        if (row.iteration != cfg.t0) continue;
        (row.init == InitMethod::grid ? grid_final : random_final) = row.mean_err;
    }
    CHECK(grid_final >= 0.0);
    CHECK(grid_final < random_final);

    // t0 = 1 produces single-step curves.
    cfg.t0 = 1;
    CHECK(convergence_trace(cfg).mean_curve.size() == 4);
}

TEST_CASE("csv fields are quoted per RFC 4180") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("with,comma") == "\"with,comma\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    std::ostringstream os;
    csv_row(os, {"a", "b,c"});
    CHECK(os.str() == "a,\"b,c\"\r\n");
}

TEST_CASE("doubles are serialized with 17 significant digits") {
    const double pi = 3.14159265358979323846;
    CHECK(std::stod(fmt_double(pi)) == pi);
    CHECK(std::stod(fmt_double(1e-35)) == 1e-35);
}

TEST_CASE("trial CSV output is byte-stable across repeated runs") {
    ExperimentConfig cfg;
    cfg.ks = {5};
    cfg.n_over_k = {6, 20};
    cfg.trials = 6;
    cfg.seed_base = 9;
    std::string first;
    for (int round = 0; round < 2; ++round) {
        const PhaseResult r = phase_transition(cfg);
        std::ostringstream os;
        write_trials_csv(os, r.all_records);
        write_cells_csv(os, r.cells);
        if (round == 0)
            first = os.str();
        else
            CHECK(first == os.str());
    }
}

TEST_CASE("hardness demo reports the partition") {
    const HardnessReport r = hardness_demo(Vec{1.0, 2.0, 3.0});
    CHECK(r.solvable);
    CHECK(r.subset_sum == Catch::Approx(3.0));
    CHECK(r.complement_sum == Catch::Approx(3.0));
    CHECK(r.subset.size() + r.complement.size() == 3);

    CHECK_FALSE(hardness_demo(Vec{1.0, 2.0}).solvable);
}

TEST_CASE("failed trials record their reason") {
    TrialSetup s;
    s.k = 10;
    s.n = 3;  // too few samples for the resampled initializer split
    s.resample = true;
    s.t0 = 5;
    const TrialRecord r = run_trial(s);
    CHECK_FALSE(r.exact);
    CHECK_FALSE(r.error.empty());
}
