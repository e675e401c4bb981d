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

// sclift command line: simulate | solve | resolve | sweep.

#include "sclift/bench.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace sclift;

namespace {

struct Options {
    std::string config;
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string method;
    std::optional<int> threads;
    bool dump_program = false;
    bool solver_log = false;
    bool timing = false;
};

ExperimentConfig resolve_config(const Options& o, bool required)
{
    ExperimentConfig cfg;
    if (!o.config.empty()) {
        cfg = load_config(o.config);
    } else if (required) {
        throw ConfigError("--config is required for this command");
    }
    if (o.seed) cfg.seed = *o.seed;
    if (!o.method.empty()) {
        cfg.methods.clear();
        for (const auto& m : detail::split_list(o.method)) cfg.methods.push_back(parse_method(m));
    }
    if (o.threads) cfg.threads = *o.threads;
    if (!o.out.empty()) cfg.output_dir = o.out;
    return cfg;
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

// Writes program.txt and/or solver.log next to the other outputs when asked.
struct Extras {
    std::ostringstream log;
    LiftedProgram program;

    void write(const Options& o, const fs::path& dir) const
    {
        if (o.solver_log) write_text(dir / "solver.log", log.str());
        if (o.dump_program) {
            std::ostringstream os;
            write_program(os, program.program);
            write_text(dir / "program.txt", os.str());
        }
    }
};

void write_result(const fs::path& dir, const RecoveryResult& res, const AngleGrid& grid)
{
    std::ostringstream csv;
    write_spectrum_csv(csv, grid, res.spectrum);
    write_text(dir / "spectrum.csv", csv.str());
    write_text(dir / "result.json", dump(result_json(res, grid)));
}

int cmd_simulate(const Options& o)
{
    const ExperimentConfig cfg = resolve_config(o, true);
    cfg.validate();
    const AngleGrid grid = cfg.grid();
    const TrialScenario ts = draw_scenario(cfg, grid, 0, 0);
    const fs::path dir = cfg.output_dir;
    write_text(dir / "scenario.json", dump(scenario_json(make_scenario(cfg, ts))));
    std::cout << "wrote " << (dir / "scenario.json").string() << "\n";
    return 0;
}

int cmd_solve(const Options& o)
{
    const ExperimentConfig cfg = resolve_config(o, false);
    const Scenario sc = load_scenario(o.scenario);
    Extras ex;
    const RecoveryResult res = solve_scenario(sc, cfg, cfg.methods.front(), o.solver_log ? &ex.log : nullptr,
                                              o.dump_program ? &ex.program : nullptr);
    const fs::path dir = cfg.output_dir;
    write_result(dir, res, build_grid(sc.grid_start_deg, sc.grid_stop_deg, sc.grid_step_deg));
    ex.write(o, dir);
    std::cout << "theta_hat " << join_angles(res.theta_hat) << "  status " << record_status(res) << "\n";
    return 0;
}

int cmd_resolve(const Options& o)
{
    const ExperimentConfig cfg = resolve_config(o, true);
    Extras ex;
    const SingleRun run = run_single(cfg, o.solver_log ? &ex.log : nullptr);
    const AngleGrid grid = cfg.grid();
    const fs::path dir = cfg.output_dir;
    if (o.dump_program) {
        const MethodProblem mp = method_problem(run.method, cfg, run.scenario.calibration.basis,
                                                build_dictionary(cfg.geometry, grid), grid,
                                                run.scenario.simulation.snapshots.observations,
                                                run.scenario.simulation.snapshots.noise_variance);
        ex.program = build_method_program(mp, cfg);
    }
    write_result(dir, run.result, grid);
    ex.write(o, dir);
    const auto peaks = spectrum_peaks(run.result.spectrum, 0.5);
    std::cout << "theta_hat " << join_angles(run.result.theta_hat) << "  peaks>=0.5 " << peaks.size() << "  status "
              << record_status(run.result) << "\n";
    return 0;
}

int cmd_sweep(const Options& o)
{
    const ExperimentConfig cfg = resolve_config(o, true);
    if (o.dump_program || o.solver_log) {
        std::cerr << "note: --dump-program and --solver-log apply to solve and resolve only\n";
    }
    const auto records = run_sweep(cfg, o.timing);
    const auto rows = summarize(records);
    const fs::path dir = cfg.output_dir;
    std::ostringstream csv;
    write_trials_csv(csv, records);
    write_text(dir / "trials.csv", csv.str());
    write_text(dir / "summary.json", dump(summary_json(rows)));
    for (const auto& r : rows) {
        std::cout << r.method << "  snr " << format_shortest(r.snr_db) << " dB  rmse " << format_shortest(r.rmse_mean)
                  << " deg  ci95 [" << format_shortest(r.rmse_ci_low) << ", " << format_shortest(r.rmse_ci_high)
                  << "]\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"sclift: self-calibrating off-grid direction-of-arrival estimation"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "INI experiment config");
        sub->add_option("--seed", o.seed, "override the experiment seed");
        sub->add_option("--out", o.out, "output directory (overrides output.directory)");
        sub->add_option("--method", o.method, "proposed | ongrid-ablation | single-snapshot-ablation (comma list)");
        sub->add_option("--threads", o.threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
        sub->add_flag("--dump-program", o.dump_program, "write the conic program to program.txt");
        sub->add_flag("--solver-log", o.solver_log, "write per-iteration solver output to solver.log");
        sub->add_flag("--timing", o.timing, "record wall-clock runtimes (outputs stop being reproducible)");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "draw one scenario and write scenario.json");
    common(simulate);
    CLI::App* solve = app.add_subcommand("solve", "estimate from a scenario file");
    common(solve);
    solve->add_option("--scenario", o.scenario, "scenario.json from simulate")->required()->check(CLI::ExistingFile);
    CLI::App* resolve = app.add_subcommand("resolve", "one seeded run, spectrum.csv and result.json");
    common(resolve);
    CLI::App* sweep = app.add_subcommand("sweep", "Monte-Carlo RMSE versus SNR, trials.csv and summary.json");
    common(sweep);

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(o);
        if (solve->parsed()) return cmd_solve(o);
        if (resolve->parsed()) return cmd_resolve(o);
        if (sweep->parsed()) return cmd_sweep(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
