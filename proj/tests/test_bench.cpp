// SPDX-License-Identifier: Apache-2.0
//
// sclift - array self-calibration with off-grid direction-of-arrival estimation
// Copyright (C) 2026 The sclift authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "sclift/bench.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

using namespace sclift;

namespace {

// Small, fast scenario: N = 12, L = 3.
const char* tiny_ini = R"(# tiny sweep
snr_db_list = 10, 30
trials_per_snr = 2
method = proposed, ongrid-ablation, single-snapshot-ablation
eta_rule = quantile(0.95)
seed = 7

[geometry]
num_sensors = 8
spacing_ratio = 0.5

[calibration]
num_basis = 2

[grid]
start_deg = -90
stop_deg = 90
step_deg = 15

[scene]
true_doas = 16.0, -31.5
num_snapshots = 3
num_sources = 2
)";

std::string sweep_csv(ExperimentConfig cfg, int threads)
{
    cfg.threads = threads;
    std::ostringstream os;
    write_trials_csv(os, run_sweep(cfg));
    return os.str();
}

bool same_program(const ConicProgram& a, const ConicProgram& b)
{
    if (a.c != b.c || a.b != b.b || a.cones.size() != b.cones.size()) return false;
    for (std::size_t k = 0; k < a.cones.size(); ++k) {
        if (a.cones[k].kind != b.cones[k].kind || a.cones[k].dim != b.cones[k].dim) return false;
    }
    return (RMatrix(a.A) - RMatrix(b.A)).norm() == 0.0;
}

} // namespace

TEST(Config, ParsesEveryField)
{
    const ExperimentConfig cfg = parse_config(R"(snr_db_list = 0, 10
trials_per_snr = 3
method = ongrid-ablation
eta_rule = fixed(1.25)
seed = 99
threads = 2
[geometry]
num_sensors = 6
spacing_ratio = 0.45
[calibration]
num_basis = 2
coefficients = 1:0, 0.5:-0.25
[grid]
start_deg = -60
stop_deg = 60
step_deg = 4
[scene]
true_doas = 10.5
source_powers = 2
num_snapshots = 4
truth_model = exact
[solver]
feas_tol = 1e-6
gap_tol = 1e-6
max_iters = 80
step_fraction = 0.95
group_cone = lifted_entries
[output]
directory = out/x
)");
    EXPECT_EQ(cfg.snr_db_list, (std::vector<double>{0, 10}));
    EXPECT_EQ(cfg.trials_per_snr, 3);
    EXPECT_EQ(cfg.methods, std::vector<Method>{Method::ongrid_ablation});
    EXPECT_EQ(cfg.eta_rule.kind, EtaRule::Kind::fixed);
    EXPECT_EQ(cfg.eta_rule.value, 1.25);
    EXPECT_EQ(cfg.seed, 99u);
    EXPECT_EQ(cfg.threads, 2);
    EXPECT_EQ(cfg.geometry.num_sensors, 6);
    EXPECT_EQ(cfg.geometry.spacing_ratio, 0.45);
    ASSERT_EQ(cfg.coefficients.size(), 2u);
    EXPECT_EQ(cfg.coefficients[1], cplx(0.5, -0.25));
    EXPECT_EQ(cfg.grid().size(), 30);
    EXPECT_EQ(cfg.true_doas_deg, std::vector<double>{10.5});
    EXPECT_EQ(cfg.source_powers, std::vector<double>{2.0});
    EXPECT_EQ(cfg.num_snapshots, 4);
    EXPECT_EQ(cfg.truth_model, TruthModel::exact);
    EXPECT_EQ(cfg.solver.max_iters, 80);
    EXPECT_EQ(cfg.solver.step_fraction, 0.95);
    EXPECT_EQ(cfg.group_cone, GroupCone::lifted_entries);
    EXPECT_EQ(cfg.output_dir, "out/x");
}

TEST(Config, ZeroTrialsRejectedWithLine)
{
    try {
        parse_config("snr_db_list = 10\ntrials_per_snr = 0\n[scene]\ntrue_doas = 1\n", "cfg.ini");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("cfg.ini:2"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("trials_per_snr"), std::string::npos) << e.what();
    }
}

TEST(Config, UnknownKeyRejectedWithLine)
{
    try {
        parse_config("[scene]\ntrue_doas = 1\n\n[grid]\nstep = 3\n", "cfg.ini");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("cfg.ini:5"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("grid.step"), std::string::npos) << e.what();
    }
}

TEST(Config, BadValuesRejected)
{
    EXPECT_THROW(parse_config("method = music\n[scene]\ntrue_doas = 1\n"), ConfigError);
    EXPECT_THROW(parse_config("eta_rule = quantile(1.5)\n[scene]\ntrue_doas = 1\n"), ConfigError);
    EXPECT_THROW(parse_config("eta_rule = median\n[scene]\ntrue_doas = 1\n"), ConfigError);
    EXPECT_THROW(parse_config("seed = abc\n[scene]\ntrue_doas = 1\n"), ConfigError);
    EXPECT_THROW(parse_config("[scene]\ntrue_doas = 1, 1.2\n"), ConfigError); // same bin
    EXPECT_THROW(parse_config("[scene]\ntrue_doas = 95\n"), ConfigError);
    EXPECT_THROW(parse_config("[calibration]\nnum_basis = 8\n[scene]\ntrue_doas = 1\n"), ConfigError);
    EXPECT_THROW(parse_config("[solver]\nstep_fraction = 1\n[scene]\ntrue_doas = 1\n"), ConfigError);
}

TEST(Config, FixedEtaIsUsedVerbatim)
{
    EtaRule fixed{EtaRule::Kind::fixed, 2.5};
    EXPECT_EQ(fixed.eta(123.0, 8, 10), 2.5);
    EtaRule q{EtaRule::Kind::quantile, 0.9};
    EXPECT_EQ(q.eta(0.3, 8, 10), select_eta(0.3, 8, 10, 0.9));
}

TEST(Seeds, DerivedSeedsAreStableAndDistinct)
{
    EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
    EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
    EXPECT_NE(derive_seed(1, 0, 0), derive_seed(2, 0, 0));
    // splitmix64 reference value for input 0.
    EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFULL);
}

TEST(Rmse, AssignmentMatchedByHand)
{
    // Best pairing 10->11, 31->30: sqrt((1 + 1) / 2) = 1.
    EXPECT_DOUBLE_EQ(matched_rmse({10.0, 31.0}, {30.0, 11.0}), 1.0);
    // Three sources: best pairing gives errors 0.5, 1, 2 -> sqrt(5.25 / 3).
    EXPECT_DOUBLE_EQ(matched_rmse({-19.5, 41.0, 2.0}, {0.0, -20.0, 40.0}), std::sqrt(5.25 / 3.0));
    EXPECT_THROW(matched_rmse({1.0}, {1.0, 2.0}), DimensionError);
}

TEST(Summary, MeansRecomputableFromTrials)
{
    std::vector<TrialRecord> recs;
    const double errs[] = {0.5, 1.5, 2.0, 0.25};
    for (int t = 0; t < 4; ++t) recs.push_back({10.0, t, "proposed", errs[t], {}, 0.0, 1, 0.1 * t, "optimal"});
    recs.push_back({10.0, 0, "ongrid-ablation", 3.0, {}, 0.0, 1, 0.0, "optimal"});
    const auto rows = summarize(recs);
    ASSERT_EQ(rows.size(), 2u);
    const double mse = (0.25 + 2.25 + 4.0 + 0.0625) / 4.0;
    EXPECT_NEAR(rows[0].rmse_mean, std::sqrt(mse), 1e-12 * std::sqrt(mse));
    double var = 0.0;
    for (double e : errs) var += (e * e - mse) * (e * e - mse);
    var /= 3.0;
    const double half = 1.959963984540054 * std::sqrt(var / 4.0);
    EXPECT_NEAR(rows[0].rmse_ci_low, std::sqrt(std::max(0.0, mse - half)), 1e-12);
    EXPECT_NEAR(rows[0].rmse_ci_high, std::sqrt(mse + half), 1e-12);
    EXPECT_NEAR(rows[0].mean_runtime, 0.15, 1e-15);
    EXPECT_EQ(rows[1].trials, 1);
    EXPECT_EQ(rows[1].rmse_mean, 3.0);
    EXPECT_EQ(rows[1].rmse_ci_low, 3.0);
}

TEST(Output, TrialsCsvFormat)
{
    std::vector<TrialRecord> recs{{20.0, 3, "proposed", 0.1, {13.25, 28.5}, 1e-3, 17, 0.0, "optimal"}};
    std::ostringstream os;
    write_trials_csv(os, recs);
    EXPECT_EQ(os.str(),
              "snr_db,trial_index,method,rmse_deg,theta_hat,residual,solve_iters,runtime_s,solver_status\n"
              "20,3,proposed,0.1,13.25;28.5,0.001,17,0,optimal\n");
}

TEST(Output, SummaryJsonShape)
{
    const auto j = summary_json({{10.0, "proposed", 4, 1.0, 0.5, 1.5, 0.0}});
    ASSERT_EQ(j.size(), 1u);
    EXPECT_EQ(j[0]["snr"], 10.0);
    EXPECT_EQ(j[0]["method"], "proposed");
    EXPECT_EQ(j[0]["rmse_ci95"][1], 1.5);
    EXPECT_EQ(j[0].begin().key(), "snr");
}

TEST(Peaks, LocalMaximaAboveThreshold)
{
    RVector s(8);
    s << 0.1, 1.0, 0.3, 0.6, 0.6, 0.2, 0.4, 0.45;
    EXPECT_EQ(spectrum_peaks(s, 0.5), (std::vector<int>{1, 3}));
    EXPECT_EQ(spectrum_peaks(s, 0.4), (std::vector<int>{1, 3, 7}));
}

TEST(Ablation, OnGridVariableCount)
{
    ExperimentConfig cfg = parse_config(tiny_ini);
    const AngleGrid g = cfg.grid();
    const Dictionary d = build_dictionary(cfg.geometry, g);
    const CMatrix B = dft_calibration_basis(8, 2);
    const CMatrix Y = CMatrix::Ones(8, 3);
    const auto mp = method_problem(Method::ongrid_ablation, cfg, B, d, g, Y, 0.1);
    const int m = 2, L = 3, N = 12, M = 8;
    EXPECT_EQ(build_method_program(mp, cfg).program.num_variables(), 2 * m * L * N + L * N + N + 1 + 2 * M * L);
}

TEST(Ablation, SingleSnapshotEqualsProposedAtOneSnapshot)
{
    ExperimentConfig cfg = parse_config(tiny_ini);
    const AngleGrid g = cfg.grid();
    const Dictionary d = build_dictionary(cfg.geometry, g);
    const CMatrix B = dft_calibration_basis(8, 2);
    std::mt19937_64 rng(1);
    CMatrix Y(8, 3);
    for (Eigen::Index i = 0; i < Y.size(); ++i) Y(i) = complex_gaussian(rng, 1.0);
    const auto single = method_problem(Method::single_snapshot_ablation, cfg, B, d, g, Y, 0.1);
    const auto proposed = method_problem(Method::proposed, cfg, B, d, g, Y.leftCols(1), 0.1);
    EXPECT_EQ(single.eta, proposed.eta);
    EXPECT_TRUE(same_program(build_method_program(single, cfg).program, build_method_program(proposed, cfg).program));
}

TEST(Ablation, ProposedAtZeroIntervalMatchesOnGrid)
{
    ExperimentConfig cfg = parse_config(tiny_ini);
    const AngleGrid g = cfg.grid();
    const Dictionary d = build_dictionary(cfg.geometry, g);
    const TrialScenario ts = draw_scenario(cfg, g, 0, 0);
    const CMatrix& Y = ts.simulation.snapshots.observations;
    auto proposed = method_problem(Method::proposed, cfg, ts.calibration.basis, d, g, Y,
                                   ts.simulation.snapshots.noise_variance);
    proposed.half_interval = 0.0;
    const auto ongrid = method_problem(Method::ongrid_ablation, cfg, ts.calibration.basis, d, g, Y,
                                       ts.simulation.snapshots.noise_variance);
    const auto a = solve(build_method_program(proposed, cfg).program);
    const auto b = solve(build_method_program(ongrid, cfg).program);
    ASSERT_EQ(a.status, SolverStatus::optimal);
    ASSERT_EQ(b.status, SolverStatus::optimal);
    EXPECT_NEAR(a.primal_objective, b.primal_objective, 1e-6);
}

TEST(Ablation, UnknownMethodName)
{
    EXPECT_THROW(parse_method("mmv-sc"), ConfigError);
    EXPECT_EQ(parse_method(method_name(Method::single_snapshot_ablation)), Method::single_snapshot_ablation);
}

TEST(Sweep, EveryTripleOnceAndDeterministic)
{
    const ExperimentConfig cfg = parse_config(tiny_ini);
    const auto recs = run_sweep(cfg);
    ASSERT_EQ(recs.size(), 2u * 2u * 3u);
    std::set<std::tuple<double, int, std::string>> seen;
    for (const auto& r : recs) {
        EXPECT_TRUE(seen.insert({r.snr_db, r.trial_index, r.method}).second);
        EXPECT_GE(r.rmse_deg, 0.0);
        EXPECT_EQ(r.theta_hat.size(), 2u);
        EXPECT_EQ(r.runtime_s, 0.0);
        EXPECT_NEAR(r.rmse_deg, matched_rmse(r.theta_hat, cfg.true_doas_deg), 0.0);
    }
    const std::string one = sweep_csv(cfg, 1);
    EXPECT_EQ(one, sweep_csv(cfg, 1));
    EXPECT_EQ(one, sweep_csv(cfg, 3));
}

TEST(Sweep, PairedMethodsShareData)
{
    ExperimentConfig cfg = parse_config(tiny_ini);
    const AngleGrid g = cfg.grid();
    const auto a = draw_scenario(cfg, g, 1, 1);
    const auto b = draw_scenario(cfg, g, 1, 1);
    EXPECT_EQ(a.simulation.snapshots.observations, b.simulation.snapshots.observations);
    const auto c = draw_scenario(cfg, g, 1, 0);
    EXPECT_NE(a.calibration.coefficients, c.calibration.coefficients); // h drawn per trial
    cfg.h_seed = 5;
    EXPECT_EQ(draw_scenario(cfg, g, 0, 0).calibration.coefficients, draw_scenario(cfg, g, 1, 1).calibration.coefficients);
}

TEST(Scenario, JsonRoundTrip)
{
    const ExperimentConfig cfg = parse_config(tiny_ini);
    const TrialScenario ts = draw_scenario(cfg, cfg.grid(), 0, 0);
    const Scenario sc = make_scenario(cfg, ts);
    const std::string text = scenario_json(sc).dump();
    const Scenario back = scenario_from_json(nlohmann::ordered_json::parse(text));
    EXPECT_EQ(back.observations, sc.observations);
    EXPECT_EQ(back.basis, sc.basis);
    EXPECT_EQ(back.coefficients, sc.coefficients);
    EXPECT_EQ(back.true_doas_deg, sc.true_doas_deg);
    EXPECT_EQ(back.noise_variance, sc.noise_variance);
    EXPECT_EQ(scenario_json(back).dump(), text);
}

TEST(Scenario, MalformedRejected)
{
    EXPECT_THROW(scenario_from_json(nlohmann::ordered_json::parse("{\"num_sensors\": 8}")), ConfigError);
}
