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

#pragma once

// Experiment harness: INI configuration, seeded paired trials over SNR and
// method, RMSE with assignment-matched pairing, CSV/JSON output.
//
// Config layout (INI; keys outside a section are experiment-level):
//
//     snr_db_list = 0, 10, 20
//     trials_per_snr = 20
//     method = proposed, ongrid-ablation
//     eta_rule = quantile(0.95)
//     ; or eta_rule = fixed(1.5). Comments take a whole line.
//     seed = 1
//     threads = 1
//     [geometry]     num_sensors, spacing_ratio
//     [calibration]  num_basis, h_seed, coefficients (re:im pairs, comma separated)
//     [grid]         start_deg, stop_deg, step_deg
//     [scene]        true_doas, source_powers, num_snapshots, num_sources, truth_model
//     [solver]       feas_tol, gap_tol, max_iters, step_fraction, group_cone
//     [output]       directory

#include "sclift/array_model.hpp"
#include "sclift/common.hpp"
#include "sclift/conic_solver.hpp"
#include "sclift/grid.hpp"
#include "sclift/lifting.hpp"
#include "sclift/recovery.hpp"
#include "sclift/socp_builder.hpp"

#include "json.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace sclift {

enum class Method { proposed, ongrid_ablation, single_snapshot_ablation };

inline const char* method_name(Method m)
{
    switch (m) {
    case Method::proposed: return "proposed";
    case Method::ongrid_ablation: return "ongrid-ablation";
    case Method::single_snapshot_ablation: return "single-snapshot-ablation";
    }
    return "?";
}

inline Method parse_method(const std::string& s)
{
    if (s == "proposed") return Method::proposed;
    if (s == "ongrid-ablation") return Method::ongrid_ablation;
    if (s == "single-snapshot-ablation") return Method::single_snapshot_ablation;
    throw ConfigError("unknown method '" + s + "' (proposed | ongrid-ablation | single-snapshot-ablation)");
}

struct EtaRule {
    enum class Kind { quantile, fixed } kind = Kind::quantile;
    double value = 0.95; // confidence, or eta itself

    double eta(double sigma2, int M, int L) const
    {
        return kind == Kind::fixed ? value : select_eta(sigma2, M, L, value);
    }
};

struct ExperimentConfig {
    ArrayGeometry geometry;
    int num_basis = 2;
    std::optional<std::uint64_t> h_seed; // fixed h for every trial
    std::vector<cplx> coefficients;      // explicit h; wins over h_seed
    double grid_start_deg = -90.0;
    double grid_stop_deg = 90.0;
    double grid_step_deg = 3.0;
    std::vector<double> true_doas_deg;
    std::vector<double> source_powers; // empty means unit power
    int num_snapshots = 10;
    int num_sources = 0; // 0 means the number of DoAs
    TruthModel truth_model = TruthModel::linearized;
    std::vector<double> snr_db_list{10.0};
    int trials_per_snr = 1;
    std::vector<Method> methods{Method::proposed};
    EtaRule eta_rule;
    SolverSettings solver;
    GroupCone group_cone = GroupCone::column_bounds;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string output_dir = ".";

    int sources() const { return static_cast<int>(true_doas_deg.size()); }

    SourceScene scene(double snr_db) const
    {
        SourceScene sc;
        sc.true_doas_deg = true_doas_deg;
        sc.num_snapshots = num_snapshots;
        sc.source_powers = source_powers.empty() ? std::vector<double>(true_doas_deg.size(), 1.0) : source_powers;
        sc.snr_db = snr_db;
        return sc;
    }

    AngleGrid grid() const { return build_grid(grid_start_deg, grid_stop_deg, grid_step_deg); }

    void validate() const
    {
        geometry.validate();
        if (num_basis < 1 || num_basis >= geometry.num_sensors) throw ConfigError("calibration.num_basis: need 1 <= m < M");
        if (!coefficients.empty() && static_cast<int>(coefficients.size()) != num_basis) {
            throw ConfigError("calibration.coefficients: need exactly num_basis entries");
        }
        if (true_doas_deg.empty()) throw ConfigError("scene.true_doas: need at least one direction");
        if (num_sources != 0 && num_sources != sources()) {
            throw ConfigError("scene.num_sources: must equal the number of true_doas");
        }
        if (!source_powers.empty() && source_powers.size() != true_doas_deg.size()) {
            throw ConfigError("scene.source_powers: one power per direction");
        }
        if (num_snapshots < 1) throw ConfigError("scene.num_snapshots: need at least 1");
        if (snr_db_list.empty()) throw ConfigError("snr_db_list: need at least one SNR");
        if (trials_per_snr < 1) throw ConfigError("trials_per_snr: need at least 1 trial");
        if (methods.empty()) throw ConfigError("method: need at least one method");
        if (threads < 1) throw ConfigError("threads: need at least 1");
        if (eta_rule.kind == EtaRule::Kind::quantile && !(eta_rule.value > 0.0 && eta_rule.value < 1.0)) {
            throw ConfigError("eta_rule: quantile confidence must lie in (0, 1)");
        }
        if (eta_rule.kind == EtaRule::Kind::fixed && !(eta_rule.value > 0.0)) {
            throw ConfigError("eta_rule: fixed eta must be positive");
        }
        try {
            solver.validate();
            const AngleGrid g = grid();
            scene(snr_db_list.front()).validate();
            std::set<int> bins;
            for (double t : true_doas_deg) {
                if (!bins.insert(g.nearest(deg_to_rad(t)).first).second) {
                    throw ConfigError("scene.true_doas: two directions share a grid bin");
                }
            }
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    }
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',')
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Line of every "section.key" so validation errors can point into the file.
inline std::map<std::string, int> key_lines(const std::string& text)
{
    std::map<std::string, int> lines;
    std::istringstream in(text);
    std::string line, section;
    for (int no = 1; std::getline(in, line); ++no) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == ';' || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = trim(t.substr(0, eq));
        lines[section.empty() ? key : section + "." + key] = no;
    }
    return lines;
}

template <class T>
T parse_number(const std::string& text)
{
    T v{};
    const std::string s = trim(text);
    const char* first = s.data();
    if (!s.empty() && s[0] == '+') ++first;
    const auto res = std::from_chars(first, s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
        throw ConfigError("expected a number, got '" + s + "'");
    }
    return v;
}

} // namespace detail

// Parses INI text. `source` names the input in error messages.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "config")
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    {
        std::istringstream in(text);
        try {
            pt::read_ini(in, tree);
        } catch (const pt::ini_parser_error& e) {
            throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
        }
    }
    const auto lines = detail::key_lines(text);
    auto where = [&](const std::string& key) {
        const auto it = lines.find(key);
        return source + (it == lines.end() ? std::string() : ":" + std::to_string(it->second)) + ": " + key + ": ";
    };

    static const std::set<std::string> known = {
        "snr_db_list", "trials_per_snr", "method", "eta_rule", "seed", "threads",
        "geometry.num_sensors", "geometry.spacing_ratio",
        "calibration.num_basis", "calibration.h_seed", "calibration.coefficients",
        "grid.start_deg", "grid.stop_deg", "grid.step_deg",
        "scene.true_doas", "scene.source_powers", "scene.num_snapshots", "scene.num_sources", "scene.truth_model",
        "solver.feas_tol", "solver.gap_tol", "solver.max_iters", "solver.step_fraction", "solver.group_cone",
        "output.directory"};
    for (const auto& [key, line] : lines) {
        if (!known.count(key)) {
            throw ConfigError(source + ":" + std::to_string(line) + ": unknown key '" + key + "'");
        }
    }

    ExperimentConfig cfg;
    auto get = [&](const std::string& key) -> std::optional<std::string> {
        const auto v = tree.get_optional<std::string>(pt::ptree::path_type(key, '.'));
        if (!v) return std::nullopt;
        return detail::trim(*v);
    };
    auto with_context = [&](const std::string& key, auto&& fn) {
        const auto v = get(key);
        if (!v) return;
        try {
            fn(*v);
        } catch (const ConfigError& e) {
            throw ConfigError(where(key) + e.what());
        } catch (const std::exception& e) {
            throw ConfigError(where(key) + e.what());
        }
    };
    auto real_list = [](const std::string& s) {
        std::vector<double> out;
        for (const auto& item : detail::split_list(s)) out.push_back(detail::parse_number<double>(item));
        return out;
    };

    with_context("snr_db_list", [&](const std::string& v) { cfg.snr_db_list = real_list(v); });
    with_context("trials_per_snr", [&](const std::string& v) { cfg.trials_per_snr = detail::parse_number<int>(v); });
    with_context("method", [&](const std::string& v) {
        cfg.methods.clear();
        for (const auto& item : detail::split_list(v)) cfg.methods.push_back(parse_method(item));
    });
    with_context("eta_rule", [&](const std::string& v) {
        const auto open = v.find('(');
        if (open == std::string::npos || v.back() != ')') throw ConfigError("expected quantile(c) or fixed(eta)");
        const std::string kind = detail::trim(v.substr(0, open));
        const double value = detail::parse_number<double>(v.substr(open + 1, v.size() - open - 2));
        if (kind == "quantile") {
            cfg.eta_rule = {EtaRule::Kind::quantile, value};
        } else if (kind == "fixed") {
            cfg.eta_rule = {EtaRule::Kind::fixed, value};
        } else {
            throw ConfigError("expected quantile(c) or fixed(eta)");
        }
    });
    with_context("seed", [&](const std::string& v) { cfg.seed = detail::parse_number<std::uint64_t>(v); });
    with_context("threads", [&](const std::string& v) { cfg.threads = detail::parse_number<int>(v); });
    with_context("geometry.num_sensors",
                 [&](const std::string& v) { cfg.geometry.num_sensors = detail::parse_number<int>(v); });
    with_context("geometry.spacing_ratio",
                 [&](const std::string& v) { cfg.geometry.spacing_ratio = detail::parse_number<double>(v); });
    with_context("calibration.num_basis", [&](const std::string& v) { cfg.num_basis = detail::parse_number<int>(v); });
    with_context("calibration.h_seed",
                 [&](const std::string& v) { cfg.h_seed = detail::parse_number<std::uint64_t>(v); });
    with_context("calibration.coefficients", [&](const std::string& v) {
        cfg.coefficients.clear();
        for (const auto& item : detail::split_list(v)) {
            const auto colon = item.find(':');
            if (colon == std::string::npos) throw ConfigError("expected re:im pairs, got '" + item + "'");
            cfg.coefficients.emplace_back(detail::parse_number<double>(item.substr(0, colon)),
                                          detail::parse_number<double>(item.substr(colon + 1)));
        }
    });
    with_context("grid.start_deg", [&](const std::string& v) { cfg.grid_start_deg = detail::parse_number<double>(v); });
    with_context("grid.stop_deg", [&](const std::string& v) { cfg.grid_stop_deg = detail::parse_number<double>(v); });
    with_context("grid.step_deg", [&](const std::string& v) { cfg.grid_step_deg = detail::parse_number<double>(v); });
    with_context("scene.true_doas", [&](const std::string& v) { cfg.true_doas_deg = real_list(v); });
    with_context("scene.source_powers", [&](const std::string& v) { cfg.source_powers = real_list(v); });
    with_context("scene.num_snapshots", [&](const std::string& v) { cfg.num_snapshots = detail::parse_number<int>(v); });
    with_context("scene.num_sources", [&](const std::string& v) { cfg.num_sources = detail::parse_number<int>(v); });
    with_context("scene.truth_model", [&](const std::string& v) {
        if (v == "linearized") {
            cfg.truth_model = TruthModel::linearized;
        } else if (v == "exact") {
            cfg.truth_model = TruthModel::exact;
        } else {
            throw ConfigError("expected linearized or exact");
        }
    });
    with_context("solver.feas_tol", [&](const std::string& v) { cfg.solver.feas_tol = detail::parse_number<double>(v); });
    with_context("solver.gap_tol", [&](const std::string& v) { cfg.solver.gap_tol = detail::parse_number<double>(v); });
    with_context("solver.max_iters", [&](const std::string& v) { cfg.solver.max_iters = detail::parse_number<int>(v); });
    with_context("solver.step_fraction",
                 [&](const std::string& v) { cfg.solver.step_fraction = detail::parse_number<double>(v); });
    with_context("solver.group_cone", [&](const std::string& v) {
        if (v == "column_bounds") {
            cfg.group_cone = GroupCone::column_bounds;
        } else if (v == "lifted_entries") {
            cfg.group_cone = GroupCone::lifted_entries;
        } else {
            throw ConfigError("expected column_bounds or lifted_entries");
        }
    });
    with_context("output.directory", [&](const std::string& v) { cfg.output_dir = v; });

    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        // Point at the offending key when the message names one.
        const std::string msg = e.what();
        const auto colon = msg.find(':');
        const std::string key = colon == std::string::npos ? std::string() : msg.substr(0, colon);
        const auto it = lines.find(key);
        throw ConfigError(source + (it == lines.end() ? std::string() : ":" + std::to_string(it->second)) + ": " + msg);
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Seeds

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0)
{
    return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0xD1B54A32D192ED03ULL));
}

// ---------------------------------------------------------------------------
// Methods

// Operator, data and constants of one method on one scenario.
struct MethodProblem {
    Method method;
    LiftedOperator op;
    CMatrix Y;
    double eta;
    double half_interval;
};

// On-grid ablation drops B-bar (P = 1); single-snapshot ablation keeps the
// proposed model but solves with the first snapshot only.
inline MethodProblem method_problem(Method method, const ExperimentConfig& cfg, const CMatrix& basis,
                                    const Dictionary& dict, const AngleGrid& grid, const CMatrix& Y,
                                    double sigma2)
{
    const int M = static_cast<int>(Y.rows());
    switch (method) {
    case Method::proposed:
        return {method, LiftedOperator::off_grid(basis, dict, static_cast<int>(Y.cols())), Y,
                cfg.eta_rule.eta(sigma2, M, static_cast<int>(Y.cols())), grid.half_interval};
    case Method::ongrid_ablation:
        return {method, LiftedOperator::on_grid(basis, dict, static_cast<int>(Y.cols())), Y,
                cfg.eta_rule.eta(sigma2, M, static_cast<int>(Y.cols())), 0.0};
    case Method::single_snapshot_ablation:
        return {method, LiftedOperator::off_grid(basis, dict, 1), Y.leftCols(1), cfg.eta_rule.eta(sigma2, M, 1),
                grid.half_interval};
    }
    throw ConfigError("unknown method");
}

// Builders for every method on shared data; seeds are shared by construction.
inline std::vector<MethodProblem> ablation_methods(const ExperimentConfig& cfg, const CMatrix& basis,
                                                   const Dictionary& dict, const AngleGrid& grid,
                                                   const CMatrix& Y, double sigma2)
{
    std::vector<MethodProblem> out;
    for (Method m : cfg.methods) out.push_back(method_problem(m, cfg, basis, dict, grid, Y, sigma2));
    return out;
}

inline LiftedProgram build_method_program(const MethodProblem& mp, const ExperimentConfig& cfg)
{
    BuildOptions opt;
    opt.group = cfg.group_cone;
    return build_program(mp.op, mp.Y, mp.eta, mp.half_interval, opt);
}

// ---------------------------------------------------------------------------
// Metrics

// sqrt((1/K) min over pairings of sum (est - truth)^2), degrees.
inline double matched_rmse(const std::vector<double>& est, const std::vector<double>& truth)
{
    if (est.size() != truth.size() || truth.empty()) {
        throw DimensionError("matched_rmse: estimate and truth must have the same nonzero length");
    }
    if (truth.size() > 10) throw DomainError("matched_rmse: more than 10 sources");
    std::vector<int> perm(truth.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double ss = 0.0;
        for (std::size_t k = 0; k < truth.size(); ++k) {
            const double d = est[perm[k]] - truth[k];
            ss += d * d;
        }
        best = std::min(best, ss);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(best / static_cast<double>(truth.size()));
}

// ---------------------------------------------------------------------------
// Trials

struct TrialRecord {
    double snr_db = 0.0;
    int trial_index = 0;
    std::string method;
    double rmse_deg = 0.0;
    std::vector<double> theta_hat;
    double residual = 0.0;
    int solve_iters = 0;
    double runtime_s = 0.0;
    std::string solver_status;
};

inline constexpr double failed_trial_rmse = 180.0;

struct TrialScenario {
    CalibrationModel calibration;
    Simulation simulation;
};

inline TrialScenario draw_scenario(const ExperimentConfig& cfg, const AngleGrid& grid, int snr_index, int trial_index)
{
    const std::uint64_t trial_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(snr_index),
                                                 static_cast<std::uint64_t>(trial_index));
    CVector h;
    if (!cfg.coefficients.empty()) {
        h = Eigen::Map<const CVector>(cfg.coefficients.data(), static_cast<Eigen::Index>(cfg.coefficients.size()));
    } else {
        h = draw_calibration_coefficients(cfg.num_basis, cfg.h_seed ? *cfg.h_seed : derive_seed(trial_seed, 1));
    }
    TrialScenario sc{make_calibration(dft_calibration_basis(cfg.geometry.num_sensors, cfg.num_basis), h), {}};
    sc.simulation = simulate(cfg.geometry, sc.calibration, cfg.scene(cfg.snr_db_list.at(snr_index)), grid,
                             derive_seed(trial_seed, 2), cfg.truth_model);
    return sc;
}

inline EstimateSettings estimate_settings(const MethodProblem& mp, const ExperimentConfig& cfg)
{
    EstimateSettings st;
    st.eta = mp.eta;
    st.half_interval = mp.half_interval;
    st.build.group = cfg.group_cone;
    st.solver = cfg.solver;
    return st;
}

inline std::string record_status(const RecoveryResult& r)
{
    if (r.degenerate) return "degenerate";
    return status_name(r.solver_status);
}

// Every configured method on one shared scenario.
inline std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, const AngleGrid& grid, const Dictionary& dict,
                                          int snr_index, int trial_index, bool timing = false)
{
    const TrialScenario sc = draw_scenario(cfg, grid, snr_index, trial_index);
    const auto problems = ablation_methods(cfg, sc.calibration.basis, dict, grid, sc.simulation.snapshots.observations,
                                           sc.simulation.snapshots.noise_variance);
    std::vector<TrialRecord> out;
    for (const auto& mp : problems) {
        TrialRecord rec;
        rec.snr_db = cfg.snr_db_list[snr_index];
        rec.trial_index = trial_index;
        rec.method = method_name(mp.method);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const RecoveryResult res = estimate(mp.op, grid, mp.Y, estimate_settings(mp, cfg), cfg.sources());
            rec.theta_hat = res.theta_hat;
            rec.rmse_deg = matched_rmse(res.theta_hat, cfg.true_doas_deg);
            rec.residual = res.residual;
            rec.solve_iters = res.solver_iterations;
            rec.solver_status = record_status(res);
        } catch (const ResourceError&) {
            throw;
        } catch (const std::exception&) {
            // Recorded, not fatal: the sweep keeps going. 180 deg bounds any angular error.
            rec.rmse_deg = failed_trial_rmse;
            rec.residual = mp.Y.norm();
            rec.solver_status = "error";
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rec.runtime_s = timing ? dt : 0.0;
        out.push_back(std::move(rec));
    }
    return out;
}

struct SweepSummary {
    double snr_db = 0.0;
    std::string method;
    int trials = 0;
    double rmse_mean = 0.0; // sqrt of the mean per-trial squared error
    double rmse_ci_low = 0.0;
    double rmse_ci_high = 0.0;
    double mean_runtime = 0.0;
};

// Normal-approximation 95% interval on the mean squared error, mapped
// through the square root.
inline std::vector<SweepSummary> summarize(const std::vector<TrialRecord>& records)
{
    std::vector<SweepSummary> out;
    std::vector<std::pair<double, std::string>> keys;
    for (const auto& r : records) {
        const std::pair<double, std::string> k{r.snr_db, r.method};
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
    for (const auto& [snr, method] : keys) {
        std::vector<double> mse;
        double runtime = 0.0;
        for (const auto& r : records) {
            if (r.snr_db == snr && r.method == method) {
                mse.push_back(r.rmse_deg * r.rmse_deg);
                runtime += r.runtime_s;
            }
        }
        const double n = static_cast<double>(mse.size());
        const double mean = std::accumulate(mse.begin(), mse.end(), 0.0) / n;
        double var = 0.0;
        for (double v : mse) var += (v - mean) * (v - mean);
        var = mse.size() > 1 ? var / (n - 1.0) : 0.0;
        const double half = 1.959963984540054 * std::sqrt(var / n);
        SweepSummary s;
        s.snr_db = snr;
        s.method = method;
        s.trials = static_cast<int>(mse.size());
        s.rmse_mean = std::sqrt(mean);
        s.rmse_ci_low = std::sqrt(std::max(0.0, mean - half));
        s.rmse_ci_high = std::sqrt(mean + half);
        s.mean_runtime = runtime / n;
        out.push_back(s);
    }
    return out;
}

// Runs every (snr, trial) pair, `threads` at a time. Records come back in
// (snr, trial, method) order whatever the scheduling.
inline std::vector<TrialRecord> run_sweep(const ExperimentConfig& cfg, bool timing = false)
{
    cfg.validate();
    const AngleGrid grid = cfg.grid();
    const Dictionary dict = build_dictionary(cfg.geometry, grid);
    const int S = static_cast<int>(cfg.snr_db_list.size());
    const int T = cfg.trials_per_snr;
    std::vector<std::vector<TrialRecord>> slots(static_cast<std::size_t>(S) * T);
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (int job = next++; job < S * T; job = next++) {
            try {
                slots[job] = run_trial(cfg, grid, dict, job / T, job % T, timing);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    const int nthreads = std::min(cfg.threads, S * T);
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
    std::vector<TrialRecord> out;
    for (auto& s : slots) {
        for (auto& r : s) out.push_back(std::move(r));
    }
    return out;
}

struct SingleRun {
    RecoveryResult result;
    TrialScenario scenario;
    Method method;
};

// First SNR, trial 0, first method.
inline SingleRun run_single(const ExperimentConfig& cfg, std::ostream* solver_log = nullptr)
{
    cfg.validate();
    const AngleGrid grid = cfg.grid();
    const Dictionary dict = build_dictionary(cfg.geometry, grid);
    SingleRun run{{}, draw_scenario(cfg, grid, 0, 0), cfg.methods.front()};
    const MethodProblem mp =
        method_problem(run.method, cfg, run.scenario.calibration.basis, dict, grid,
                       run.scenario.simulation.snapshots.observations, run.scenario.simulation.snapshots.noise_variance);
    run.result = estimate(mp.op, grid, mp.Y, estimate_settings(mp, cfg), cfg.sources(), solver_log);
    return run;
}

// Local maxima of the spectrum at or above `threshold` (relative to its max).
// Plateaus count once, at their first bin.
inline std::vector<int> spectrum_peaks(const RVector& spectrum, double threshold = 0.5)
{
    std::vector<int> peaks;
    const Eigen::Index N = spectrum.size();
    if (N == 0) return peaks;
    const double level = threshold * spectrum.maxCoeff();
    for (Eigen::Index i = 0; i < N; ++i) {
        const double v = spectrum(i);
        if (!(v >= level) || !(v > 0.0)) continue;
        const bool left = i == 0 || v > spectrum(i - 1);
        Eigen::Index j = i + 1;
        while (j < N && spectrum(j) == v) ++j;
        const bool right = j == N || v > spectrum(j);
        if (left && right) peaks.push_back(static_cast<int>(i));
    }
    return peaks;
}

// ---------------------------------------------------------------------------
// Output

inline std::string join_angles(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ';';
        s += format_shortest(v[i]);
    }
    return s;
}

inline void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records)
{
    os << "snr_db,trial_index,method,rmse_deg,theta_hat,residual,solve_iters,runtime_s,solver_status\n";
    for (const auto& r : records) {
        os << format_shortest(r.snr_db) << "," << r.trial_index << "," << r.method << "," << format_shortest(r.rmse_deg)
           << "," << join_angles(r.theta_hat) << "," << format_shortest(r.residual) << "," << r.solve_iters << ","
           << format_shortest(r.runtime_s) << "," << r.solver_status << "\n";
    }
}

inline nlohmann::ordered_json summary_json(const std::vector<SweepSummary>& rows)
{
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& s : rows) {
        nlohmann::ordered_json j;
        j["snr"] = s.snr_db;
        j["method"] = s.method;
        j["trials"] = s.trials;
        j["rmse_mean"] = s.rmse_mean;
        j["rmse_ci95"] = {s.rmse_ci_low, s.rmse_ci_high};
        j["mean_runtime"] = s.mean_runtime;
        arr.push_back(j);
    }
    return arr;
}

inline nlohmann::ordered_json complex_matrix_json(const CMatrix& A)
{
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (Eigen::Index j = 0; j < A.cols(); ++j) row.push_back({A(i, j).real(), A(i, j).imag()});
        rows.push_back(row);
    }
    return rows;
}

inline CMatrix complex_matrix_from_json(const nlohmann::ordered_json& j)
{
    if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError("expected a nonempty matrix of [re, im] pairs");
    CMatrix A(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (j[i].size() != j[0].size()) throw ConfigError("ragged matrix");
        for (std::size_t k = 0; k < j[i].size(); ++k) {
            A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = {j[i][k].at(0).get<double>(),
                                                                          j[i][k].at(1).get<double>()};
        }
    }
    return A;
}

inline nlohmann::ordered_json result_json(const RecoveryResult& r, const AngleGrid& grid)
{
    nlohmann::ordered_json j;
    j["theta_hat"] = r.theta_hat;
    std::vector<double> support_deg;
    for (int i : r.support) support_deg.push_back(grid.angle_deg(i));
    j["support"] = r.support;
    j["support_deg"] = support_deg;
    std::vector<double> beta;
    for (int i : r.support) beta.push_back(r.beta_hat(i));
    j["beta_rad"] = beta;
    j["h_hat"] = complex_matrix_json(r.h_hat);
    j["residual"] = r.residual;
    j["objective"] = r.objective;
    j["sigma1_ratio"] = r.sigma1_ratio;
    j["solver_status"] = record_status(r);
    j["solver_iterations"] = r.solver_iterations;
    j["unstable_ratio"] = r.unstable_ratio;
    j["sign_residuals"] = r.sign_residuals;
    return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

// ---------------------------------------------------------------------------
// Scenario files: one simulated draw with everything needed to re-solve it.

struct Scenario {
    ArrayGeometry geometry;
    double grid_start_deg = 0.0;
    double grid_stop_deg = 0.0;
    double grid_step_deg = 0.0;
    int num_sources = 1;
    CMatrix basis;
    CMatrix observations;
    double noise_variance = 0.0;
    // Truth, kept for reference and scoring.
    std::vector<double> true_doas_deg;
    CVector coefficients;
};

inline Scenario make_scenario(const ExperimentConfig& cfg, const TrialScenario& ts)
{
    Scenario sc;
    sc.geometry = cfg.geometry;
    sc.grid_start_deg = cfg.grid_start_deg;
    sc.grid_stop_deg = cfg.grid_stop_deg;
    sc.grid_step_deg = cfg.grid_step_deg;
    sc.num_sources = cfg.sources();
    sc.basis = ts.calibration.basis;
    sc.observations = ts.simulation.snapshots.observations;
    sc.noise_variance = ts.simulation.snapshots.noise_variance;
    sc.true_doas_deg = cfg.true_doas_deg;
    sc.coefficients = ts.calibration.coefficients;
    return sc;
}

inline nlohmann::ordered_json scenario_json(const Scenario& sc)
{
    nlohmann::ordered_json j;
    j["num_sensors"] = sc.geometry.num_sensors;
    j["spacing_ratio"] = sc.geometry.spacing_ratio;
    j["grid"] = {{"start_deg", sc.grid_start_deg}, {"stop_deg", sc.grid_stop_deg}, {"step_deg", sc.grid_step_deg}};
    j["num_sources"] = sc.num_sources;
    j["noise_variance"] = sc.noise_variance;
    j["basis"] = complex_matrix_json(sc.basis);
    j["observations"] = complex_matrix_json(sc.observations);
    j["true_doas_deg"] = sc.true_doas_deg;
    j["coefficients"] = complex_matrix_json(sc.coefficients);
    return j;
}

inline Scenario scenario_from_json(const nlohmann::ordered_json& j)
{
    try {
        Scenario sc;
        sc.geometry.num_sensors = j.at("num_sensors").get<int>();
        sc.geometry.spacing_ratio = j.at("spacing_ratio").get<double>();
        sc.grid_start_deg = j.at("grid").at("start_deg").get<double>();
        sc.grid_stop_deg = j.at("grid").at("stop_deg").get<double>();
        sc.grid_step_deg = j.at("grid").at("step_deg").get<double>();
        sc.num_sources = j.at("num_sources").get<int>();
        sc.noise_variance = j.at("noise_variance").get<double>();
        sc.basis = complex_matrix_from_json(j.at("basis"));
        sc.observations = complex_matrix_from_json(j.at("observations"));
        if (j.contains("true_doas_deg")) sc.true_doas_deg = j.at("true_doas_deg").get<std::vector<double>>();
        if (j.contains("coefficients")) sc.coefficients = complex_matrix_from_json(j.at("coefficients")).col(0);
        sc.geometry.validate();
        if (sc.basis.rows() != sc.geometry.num_sensors || sc.observations.rows() != sc.geometry.num_sensors) {
            throw ConfigError("basis and observations need one row per sensor");
        }
        if (sc.num_sources < 1) throw ConfigError("num_sources must be at least 1");
        return sc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
}

inline Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file " + path);
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return scenario_from_json(j);
}

// Estimate from a stored scenario; method, eta rule and solver come from cfg.
inline RecoveryResult solve_scenario(const Scenario& sc, const ExperimentConfig& cfg, Method method,
                                     std::ostream* solver_log = nullptr, LiftedProgram* program_out = nullptr)
{
    const AngleGrid grid = build_grid(sc.grid_start_deg, sc.grid_stop_deg, sc.grid_step_deg);
    const Dictionary dict = build_dictionary(sc.geometry, grid);
    const MethodProblem mp = method_problem(method, cfg, sc.basis, dict, grid, sc.observations, sc.noise_variance);
    if (program_out) *program_out = build_method_program(mp, cfg);
    return estimate(mp.op, grid, mp.Y, estimate_settings(mp, cfg), sc.num_sources, solver_log);
}

} // namespace sclift
