// SPDX-License-Identifier: Apache-2.0
#include "qmimo/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qmimo/errors.hpp"
#include "qmimo/montecarlo.hpp"
#include "qmimo/parallel.hpp"
#include "qmimo/rng.hpp"

namespace qmimo {

namespace {

double safe_dbm(double mw) {
  return mw > 0.0 ? linear_to_dbm(mw)
                  : -std::numeric_limits<double>::infinity();
}

SolverKind solver_from_string(const std::string& name) {
  if (name == "gradient") {
    return SolverKind::Gradient;
  }
  if (name == "fixed_point" || name == "fixed-point") {
    return SolverKind::FixedPoint;
  }
  if (name == "bcd") {
    return SolverKind::Bcd;
  }
  throw ConfigError("unknown solver '" + name +
                    "' (expected gradient, fixed-point, bcd or all)");
}

}  // namespace

std::vector<SolverKind> parse_solver_selection(const std::string& name) {
  if (name == "all") {
    return {SolverKind::Gradient, SolverKind::FixedPoint, SolverKind::Bcd};
  }
  return {solver_from_string(name)};
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  if (name == "sweep_power") return ExperimentKind::SweepPower;
  if (name == "sweep_distance") return ExperimentKind::SweepDistance;
  if (name == "min_power_vs_target") return ExperimentKind::MinPowerVsTarget;
  if (name == "min_power_vs_distance")
    return ExperimentKind::MinPowerVsDistance;
  if (name == "maxmin_vs_distance") return ExperimentKind::MaxMinVsDistance;
  if (name == "oracle_suite") return ExperimentKind::OracleSuite;
  throw ConfigError("unknown experiment kind '" + name + "'");
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::SweepPower:
      return "sweep_power";
    case ExperimentKind::SweepDistance:
      return "sweep_distance";
    case ExperimentKind::MinPowerVsTarget:
      return "min_power_vs_target";
    case ExperimentKind::MinPowerVsDistance:
      return "min_power_vs_distance";
    case ExperimentKind::MaxMinVsDistance:
      return "maxmin_vs_distance";
    case ExperimentKind::OracleSuite:
      return "oracle_suite";
  }
  return "unknown";
}

std::vector<double> AxisSpec::values() const {
  if (!(step > 0.0)) {
    throw ConfigError("axis: step must be positive");
  }
  if (stop < start) {
    throw ConfigError("axis: stop must be >= start");
  }
  const int count =
      static_cast<int>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    out.push_back(start + i * step);
  }
  return out;
}

PowerControlProblem ExperimentSpec::make_problem(double target,
                                                 int num_ues) const {
  PowerControlProblem problem;
  problem.targets = Eigen::VectorXd::Constant(num_ues, target);
  problem.max_power_mw = dbm_to_linear(rho_ue_dbm);
  problem.epsilon = epsilon;
  problem.delta_rho_db = delta_rho_db;
  problem.step_zeta = step_zeta;
  problem.step_eta = step_eta;
  problem.max_iters = max_iters;
  if (!dither_grid_db.empty()) {
    problem.dither_grid_db = dither_grid_db;
  }
  return problem;
}

ScenarioConfig place_ues_at_distance(const ScenarioConfig& base,
                                     double distance_m, UeLayout layout) {
  if (!(distance_m > 0.0)) {
    throw std::invalid_argument("UE distance must be positive");
  }
  ScenarioConfig placed = base;
  const Position ref = base.bs_positions.at(0);
  double dir_x = 1.0;
  double dir_y = 0.0;
  Position mirror_origin = ref;
  if (base.num_bs() >= 2) {
    const Position other = base.bs_positions.at(1);
    const double span = distance(ref, other);
    dir_x = (other[0] - ref[0]) / span;
    dir_y = (other[1] - ref[1]) / span;
    mirror_origin = other;
  }
  const Position primary{ref[0] + distance_m * dir_x,
                         ref[1] + distance_m * dir_y};
  const Position mirrored{mirror_origin[0] - distance_m * dir_x,
                          mirror_origin[1] - distance_m * dir_y};
  for (int k = 0; k < placed.num_ues(); ++k) {
    const bool mirror = layout == UeLayout::Symmetric &&
                        base.num_bs() >= 2 && (k % 2 == 1);
    placed.ue_positions[k] = mirror ? mirrored : primary;
  }
  return placed;
}

int count_local_maxima(const std::vector<double>& y, double prominence) {
  if (y.empty()) {
    return 0;
  }
  int peaks = 0;
  bool ascending = true;
  double run_max = y.front();
  double run_min = y.front();
  for (std::size_t i = 1; i < y.size(); ++i) {
    const double v = y[i];
    if (ascending) {
      run_max = std::max(run_max, v);
      if (v < run_max - prominence) {
        ++peaks;
        ascending = false;
        run_min = v;
      }
    } else {
      run_min = std::min(run_min, v);
      if (v > run_min + prominence) {
        ascending = true;
        run_max = v;
      }
    }
  }
  if (ascending) {
    ++peaks;  // curve ends on a rise (or stays flat): boundary maximum
  }
  return peaks;
}

// ---------------------------------------------------------------------------
// Spec parsing

namespace {

void reject_unknown_keys(const nlohmann::json& j,
                         const std::set<std::string>& known,
                         const std::string& where) {
  std::vector<std::string> unknown;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (known.find(it.key()) == known.end()) {
      unknown.push_back(it.key());
    }
  }
  if (!unknown.empty()) {
    std::ostringstream msg;
    msg << where << ": unknown keys:";
    for (const auto& key : unknown) {
      msg << " '" << key << "'";
    }
    throw ConfigError(msg.str());
  }
}

std::vector<double> parse_double_list(const nlohmann::json& j,
                                      const std::string& where) {
  if (!j.is_array()) {
    throw ConfigError(where + ": expected an array of numbers");
  }
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) {
      throw ConfigError(where + ": expected an array of numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

ExperimentSpec parse_experiment_spec(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw ConfigError("experiment: expected a JSON object");
  }
  static const std::set<std::string> known = {
      "kind",          "scenario",      "axis",        "targets",
      "powers_dbm",    "solver",        "dither",      "dither_grid_db",
      "rho_ue_dbm",    "epsilon",       "delta_rho_db", "step_zeta",
      "step_eta",      "max_iters",     "ue_layout",   "output",
      "oracle_draws",  "oracle_sizes"};
  reject_unknown_keys(j, known, "experiment");

  ExperimentSpec spec;
  if (!j.contains("kind")) {
    throw ConfigError("experiment: 'kind' is required");
  }
  spec.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
  if (!j.contains("scenario")) {
    throw ConfigError("experiment: 'scenario' is required");
  }
  spec.scenario = parse_scenario_config(j.at("scenario"));

  if (j.contains("axis")) {
    const auto& axis = j.at("axis");
    reject_unknown_keys(axis, {"start", "stop", "step"}, "axis");
    spec.axis.start = axis.value("start", 0.0);
    spec.axis.stop = axis.value("stop", spec.axis.start);
    spec.axis.step = axis.value("step", 1.0);
  }
  if (j.contains("targets")) {
    spec.targets = parse_double_list(j.at("targets"), "targets");
  }
  if (j.contains("powers_dbm")) {
    spec.powers_dbm = parse_double_list(j.at("powers_dbm"), "powers_dbm");
  }
  if (j.contains("solver")) {
    const auto& solver = j.at("solver");
    if (solver.is_array()) {
      spec.solvers.clear();
      for (const auto& name : solver) {
        spec.solvers.push_back(solver_from_string(name.get<std::string>()));
      }
      if (spec.solvers.empty()) {
        throw ConfigError("solver list must not be empty");
      }
    } else {
      spec.solvers = parse_solver_selection(solver.get<std::string>());
    }
  }
  if (j.contains("dither")) {
    const std::string mode = j.at("dither").get<std::string>();
    if (mode == "off") {
      spec.dither = DitherMode::Off;
    } else if (mode == "search") {
      spec.dither = DitherMode::Search;
    } else {
      throw ConfigError("dither must be 'off' or 'search', got '" + mode +
                        "'");
    }
  }
  if (j.contains("dither_grid_db")) {
    spec.dither_grid_db =
        parse_double_list(j.at("dither_grid_db"), "dither_grid_db");
  }
  spec.rho_ue_dbm = j.value("rho_ue_dbm", spec.rho_ue_dbm);
  spec.epsilon = j.value("epsilon", spec.epsilon);
  spec.delta_rho_db = j.value("delta_rho_db", spec.delta_rho_db);
  spec.step_zeta = j.value("step_zeta", spec.step_zeta);
  spec.step_eta = j.value("step_eta", spec.step_eta);
  spec.max_iters = j.value("max_iters", spec.max_iters);
  if (j.contains("ue_layout")) {
    const std::string layout = j.at("ue_layout").get<std::string>();
    if (layout == "colocated") {
      spec.ue_layout = UeLayout::Colocated;
    } else if (layout == "symmetric") {
      spec.ue_layout = UeLayout::Symmetric;
    } else {
      throw ConfigError("ue_layout must be 'colocated' or 'symmetric'");
    }
  }
  spec.output = j.value("output", spec.output);
  spec.oracle_draws = j.value("oracle_draws", spec.oracle_draws);
  if (j.contains("oracle_sizes")) {
    spec.oracle_sizes.clear();
    for (const auto& size : j.at("oracle_sizes")) {
      if (!size.is_array() || size.size() != 3) {
        throw ConfigError("oracle_sizes entries must be [B, M, K] triples");
      }
      spec.oracle_sizes.push_back(
          {size[0].get<int>(), size[1].get<int>(), size[2].get<int>()});
    }
  }
  return spec;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open experiment config '" + path + "'");
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_experiment_spec(j);
}

nlohmann::json experiment_to_json(const ExperimentSpec& spec) {
  nlohmann::json j;
  j["kind"] = to_string(spec.kind);
  j["scenario"] = scenario_to_json(spec.scenario);
  j["axis"] = {{"start", spec.axis.start},
               {"stop", spec.axis.stop},
               {"step", spec.axis.step}};
  j["targets"] = spec.targets;
  j["powers_dbm"] = spec.powers_dbm;
  std::vector<std::string> solver_names;
  for (SolverKind kind : spec.solvers) {
    solver_names.push_back(to_string(kind));
  }
  j["solver"] = solver_names;
  j["dither"] = spec.dither == DitherMode::Search ? "search" : "off";
  j["dither_grid_db"] = spec.dither_grid_db;
  j["rho_ue_dbm"] = spec.rho_ue_dbm;
  j["epsilon"] = spec.epsilon;
  j["delta_rho_db"] = spec.delta_rho_db;
  j["step_zeta"] = spec.step_zeta;
  j["step_eta"] = spec.step_eta;
  j["max_iters"] = spec.max_iters;
  j["ue_layout"] =
      spec.ue_layout == UeLayout::Symmetric ? "symmetric" : "colocated";
  if (spec.kind == ExperimentKind::OracleSuite) {
    j["oracle_draws"] = spec.oracle_draws;
    j["oracle_sizes"] = spec.oracle_sizes;
  }
  return j;
}

std::string experiment_config_hash(const ExperimentSpec& spec) {
  return content_hash_hex(experiment_to_json(spec).dump());
}

// ---------------------------------------------------------------------------
// Experiment runners

namespace {

void attach_common_metadata(ResultTable& table, const ExperimentSpec& spec) {
  table.add_metadata("kind", to_string(spec.kind));
  table.add_metadata("seed", std::to_string(spec.scenario.seed));
  table.add_metadata("realizations",
                     std::to_string(spec.scenario.num_channel_realizations));
  table.add_metadata("config_hash", experiment_config_hash(spec));
}

// Best dither candidate at a fixed operating point: maximizes the worst-UE
// SINDR; near-ties (1e-12 relative) resolve to the lowest total dither.
struct PointDitherChoice {
  Eigen::VectorXd sindr;
  Eigen::VectorXd noise_mw;
};

PointDitherChoice best_dither_at_point(
    const ChannelSet& channels, const Eigen::VectorXd& powers,
    const std::vector<Eigen::VectorXd>& candidates) {
  PointDitherChoice choice;
  double best = -1.0;
  for (const auto& noise : candidates) {
    const SindrReport report = evaluate_sindr(channels, {powers, noise});
    const double objective = report.sindr.minCoeff();
    if (objective > best * (1.0 + 1e-12) || choice.noise_mw.size() == 0) {
      best = objective;
      choice.sindr = report.sindr;
      choice.noise_mw = noise;
    }
  }
  return choice;
}

ResultTable run_sweep_power(const ExperimentSpec& spec) {
  const ScenarioConfig& scenario = spec.scenario;
  const int num_ues = scenario.num_ues();
  const int num_bs = scenario.num_bs();
  const int realizations = scenario.num_channel_realizations;
  const std::vector<double> powers_dbm = spec.axis.values();
  const double floor_mw = scenario.noise_floor_mw();
  const bool search = spec.dither == DitherMode::Search;
  const std::vector<double> grid = !spec.dither_grid_db.empty()
                                       ? spec.dither_grid_db
                                       : PowerControlProblem{}.dither_grid_db;

  std::vector<ChannelSet> channels(realizations);
  for (int r = 0; r < realizations; ++r) {
    channels[r] = draw_channels(scenario, r);
  }

  const std::size_t points = powers_dbm.size();
  // slot layout per (realization, point): K SINDRs then B dither levels (dB)
  const std::size_t slot = num_ues + num_bs;
  std::vector<double> raw(realizations * points * slot, 0.0);

  parallel_for(realizations * points, [&](std::size_t task) {
    const std::size_t r = task / points;
    const std::size_t p = task % points;
    const Eigen::VectorXd powers =
        Eigen::VectorXd::Constant(num_ues, dbm_to_linear(powers_dbm[p]));
    Eigen::VectorXd sindr;
    Eigen::VectorXd noise;
    if (search) {
      const auto candidates =
          dither_noise_candidates(channels[r], grid, floor_mw);
      PointDitherChoice choice =
          best_dither_at_point(channels[r], powers, candidates);
      sindr = choice.sindr;
      noise = choice.noise_mw;
    } else {
      noise = Eigen::VectorXd::Constant(num_bs, floor_mw);
      sindr = evaluate_sindr(channels[r], {powers, noise}).sindr;
    }
    double* out = &raw[task * slot];
    for (int k = 0; k < num_ues; ++k) {
      out[k] = sindr(k);
    }
    for (int b = 0; b < num_bs; ++b) {
      out[num_ues + b] = 10.0 * std::log10(noise(b) / floor_mw);
    }
  });

  ResultTable table;
  table.columns.push_back("rho_dbm");
  for (int k = 0; k < num_ues; ++k) {
    table.columns.push_back("sindr_k" + std::to_string(k));
  }
  if (search) {
    for (int b = 0; b < num_bs; ++b) {
      table.columns.push_back("dither_db_b" + std::to_string(b));
    }
  }
  for (std::size_t p = 0; p < points; ++p) {
    std::vector<double> row{powers_dbm[p]};
    for (std::size_t c = 0; c < slot; ++c) {
      if (!search && c >= static_cast<std::size_t>(num_ues)) {
        continue;
      }
      double sum = 0.0;
      for (int r = 0; r < realizations; ++r) {
        sum += raw[(r * points + p) * slot + c];
      }
      row.push_back(sum / realizations);
    }
    table.add_row(std::move(row));
  }
  attach_common_metadata(table, spec);
  return table;
}

ResultTable run_sweep_distance(const ExperimentSpec& spec) {
  if (spec.powers_dbm.empty()) {
    throw ConfigError("sweep_distance requires powers_dbm");
  }
  const ScenarioConfig& scenario = spec.scenario;
  const int num_ues = scenario.num_ues();
  const int realizations = scenario.num_channel_realizations;
  const std::vector<double> distances = spec.axis.values();
  const double floor_mw = scenario.noise_floor_mw();
  const Eigen::VectorXd noise =
      Eigen::VectorXd::Constant(scenario.num_bs(), floor_mw);

  const std::size_t points = distances.size();
  const std::size_t slot = spec.powers_dbm.size();
  std::vector<double> raw(realizations * points * slot, 0.0);

  parallel_for(realizations * points, [&](std::size_t task) {
    const std::size_t r = task / points;
    const std::size_t p = task % points;
    // Fading substreams depend only on (seed, realization, b, k), so the UE
    // keeps its small-scale realization while moving along the sweep.
    const ScenarioConfig placed =
        place_ues_at_distance(scenario, distances[p], spec.ue_layout);
    const ChannelSet channels = draw_channels(placed, r);
    for (std::size_t pi = 0; pi < slot; ++pi) {
      const Eigen::VectorXd powers = Eigen::VectorXd::Constant(
          num_ues, dbm_to_linear(spec.powers_dbm[pi]));
      raw[(task)*slot + pi] =
          evaluate_sindr(channels, {powers, noise}).sindr.minCoeff();
    }
  });

  ResultTable table;
  table.columns.push_back("distance_m");
  for (std::size_t pi = 0; pi < slot; ++pi) {
    table.columns.push_back("sindr_p" + std::to_string(pi));
  }
  for (std::size_t p = 0; p < points; ++p) {
    std::vector<double> row{distances[p]};
    for (std::size_t pi = 0; pi < slot; ++pi) {
      double sum = 0.0;
      for (int r = 0; r < realizations; ++r) {
        sum += raw[(r * points + p) * slot + pi];
      }
      row.push_back(sum / realizations);
    }
    table.add_row(std::move(row));
  }
  attach_common_metadata(table, spec);
  for (std::size_t pi = 0; pi < slot; ++pi) {
    table.add_metadata("power_p" + std::to_string(pi) + "_dbm",
                       std::to_string(spec.powers_dbm[pi]));
  }
  return table;
}

ResultTable run_min_power_vs_target(const ExperimentSpec& spec) {
  const ScenarioConfig& scenario = spec.scenario;
  const int num_ues = scenario.num_ues();
  const int realizations = scenario.num_channel_realizations;
  const std::vector<double> targets =
      !spec.targets.empty() ? spec.targets : spec.axis.values();
  if (targets.empty()) {
    throw ConfigError("min_power_vs_target requires targets or an axis");
  }
  const double floor_mw = scenario.noise_floor_mw();

  std::vector<ChannelSet> channels(realizations);
  for (int r = 0; r < realizations; ++r) {
    channels[r] = draw_channels(scenario, r);
  }

  struct Cell {
    double total_mw = 0.0;
    double achieved = 0.0;
    double iterations = 0.0;
  };
  const std::size_t num_targets = targets.size();
  const std::size_t num_solvers = spec.solvers.size();
  std::vector<Cell> cells(realizations * num_targets * num_solvers);

  parallel_for(cells.size(), [&](std::size_t task) {
    const std::size_t r = task / (num_targets * num_solvers);
    const std::size_t rest = task % (num_targets * num_solvers);
    const std::size_t t = rest / num_solvers;
    const std::size_t s = rest % num_solvers;
    const PowerControlProblem problem =
        spec.make_problem(targets[t], num_ues);
    SolveResult result;
    if (spec.dither == DitherMode::Search) {
      result =
          dither_search(problem, channels[r], spec.solvers[s], floor_mw);
    } else {
      const Eigen::VectorXd noise =
          Eigen::VectorXd::Constant(scenario.num_bs(), floor_mw);
      result =
          solve_min_power(spec.solvers[s], problem, channels[r], noise);
    }
    Cell& cell = cells[task];
    cell.total_mw = result.total_power_mw();
    cell.achieved = result.status == SolveStatus::Achieved ? 1.0 : 0.0;
    cell.iterations = static_cast<double>(result.trace.size());
  });

  ResultTable table;
  table.columns.push_back("target");
  for (SolverKind kind : spec.solvers) {
    const std::string name = to_string(kind);
    table.columns.push_back(name + "_total_dbm");
    table.columns.push_back(name + "_achieved");
    table.columns.push_back(name + "_iterations");
  }
  for (std::size_t t = 0; t < num_targets; ++t) {
    std::vector<double> row{targets[t]};
    for (std::size_t s = 0; s < num_solvers; ++s) {
      double total = 0.0;
      double achieved = 0.0;
      double iters = 0.0;
      int achieved_count = 0;
      for (int r = 0; r < realizations; ++r) {
        const Cell& cell =
            cells[(r * num_targets + t) * num_solvers + s];
        achieved += cell.achieved;
        iters += cell.iterations;
        if (cell.achieved > 0.0) {
          total += cell.total_mw;
          ++achieved_count;
        }
      }
      row.push_back(achieved_count > 0 ? safe_dbm(total / achieved_count)
                                       : std::numeric_limits<double>::quiet_NaN());
      row.push_back(achieved / realizations);
      row.push_back(iters / realizations);
    }
    table.add_row(std::move(row));
  }
  attach_common_metadata(table, spec);
  return table;
}

ResultTable run_min_power_vs_distance(const ExperimentSpec& spec) {
  if (spec.targets.size() != 1) {
    throw ConfigError("min_power_vs_distance requires exactly one target");
  }
  const ScenarioConfig& scenario = spec.scenario;
  const int num_ues = scenario.num_ues();
  const int num_bs = scenario.num_bs();
  const int realizations = scenario.num_channel_realizations;
  const std::vector<double> distances = spec.axis.values();
  const double floor_mw = scenario.noise_floor_mw();
  const double target = spec.targets.front();
  const SolverKind solver = spec.solvers.front();

  const std::size_t points = distances.size();
  const std::size_t slot = 3 + num_ues + num_bs;
  std::vector<double> raw(realizations * points * slot, 0.0);

  parallel_for(realizations * points, [&](std::size_t task) {
    const std::size_t r = task / points;
    const std::size_t p = task % points;
    const ScenarioConfig placed =
        place_ues_at_distance(scenario, distances[p], spec.ue_layout);
    const ChannelSet channels = draw_channels(placed, r);
    const PowerControlProblem problem = spec.make_problem(target, num_ues);
    SolveResult result;
    if (spec.dither == DitherMode::Search) {
      result = dither_search(problem, channels, solver, floor_mw);
    } else {
      result = solve_min_power(
          solver, problem, channels,
          Eigen::VectorXd::Constant(num_bs, floor_mw));
    }
    double* out = &raw[task * slot];
    out[0] = result.total_power_mw();
    out[1] = result.status == SolveStatus::Achieved ? 1.0 : 0.0;
    out[2] = static_cast<double>(result.trace.size());
    for (int k = 0; k < num_ues; ++k) {
      out[3 + k] = result.powers_mw(k);
    }
    for (int b = 0; b < num_bs; ++b) {
      out[3 + num_ues + b] =
          10.0 * std::log10(result.noise_mw(b) / floor_mw);
    }
  });

  ResultTable table;
  table.columns = {"distance_m", "total_dbm", "achieved", "iterations"};
  for (int k = 0; k < num_ues; ++k) {
    table.columns.push_back("power_dbm_k" + std::to_string(k));
  }
  for (int b = 0; b < num_bs; ++b) {
    table.columns.push_back("dither_db_b" + std::to_string(b));
  }
  for (std::size_t p = 0; p < points; ++p) {
    double total_mw = 0.0;
    double achieved = 0.0;
    double iters = 0.0;
    Eigen::VectorXd powers = Eigen::VectorXd::Zero(num_ues);
    Eigen::VectorXd dither = Eigen::VectorXd::Zero(num_bs);
    for (int r = 0; r < realizations; ++r) {
      const double* in = &raw[(r * points + p) * slot];
      total_mw += in[0];
      achieved += in[1];
      iters += in[2];
      for (int k = 0; k < num_ues; ++k) {
        powers(k) += in[3 + k];
      }
      for (int b = 0; b < num_bs; ++b) {
        dither(b) += in[3 + num_ues + b];
      }
    }
    std::vector<double> row{distances[p], safe_dbm(total_mw / realizations),
                            achieved / realizations, iters / realizations};
    for (int k = 0; k < num_ues; ++k) {
      row.push_back(safe_dbm(powers(k) / realizations));
    }
    for (int b = 0; b < num_bs; ++b) {
      row.push_back(dither(b) / realizations);
    }
    table.add_row(std::move(row));
  }
  attach_common_metadata(table, spec);
  table.add_metadata("target", std::to_string(target));
  return table;
}

ResultTable run_maxmin_vs_distance(const ExperimentSpec& spec) {
  const ScenarioConfig& scenario = spec.scenario;
  const int num_ues = scenario.num_ues();
  const int num_bs = scenario.num_bs();
  const int realizations = scenario.num_channel_realizations;
  const std::vector<double> distances = spec.axis.values();
  const double floor_mw = scenario.noise_floor_mw();

  const std::size_t points = distances.size();
  const std::size_t slot = 2 + num_bs;
  std::vector<double> raw(realizations * points * slot, 0.0);

  parallel_for(realizations * points, [&](std::size_t task) {
    const std::size_t r = task / points;
    const std::size_t p = task % points;
    const ScenarioConfig placed =
        place_ues_at_distance(scenario, distances[p], spec.ue_layout);
    const ChannelSet channels = draw_channels(placed, r);
    // Targets are found by bisection; the problem carries bounds/steps only.
    const PowerControlProblem problem = spec.make_problem(1.0, num_ues);
    MaxMinOptions options;
    options.feasibility_solver = spec.solvers.front();
    SolveResult result;
    if (spec.dither == DitherMode::Search) {
      result = dither_search_max_min(problem, channels, floor_mw, options);
    } else {
      result = solve_max_min(
          problem, channels,
          Eigen::VectorXd::Constant(num_bs, floor_mw), options);
    }
    double* out = &raw[task * slot];
    out[0] = result.max_min_gamma;
    out[1] = result.total_power_mw();
    for (int b = 0; b < num_bs; ++b) {
      out[2 + b] = 10.0 * std::log10(result.noise_mw(b) / floor_mw);
    }
  });

  ResultTable table;
  table.columns = {"distance_m", "gamma_star", "total_dbm"};
  for (int b = 0; b < num_bs; ++b) {
    table.columns.push_back("dither_db_b" + std::to_string(b));
  }
  for (std::size_t p = 0; p < points; ++p) {
    double gamma = 0.0;
    double total_mw = 0.0;
    Eigen::VectorXd dither = Eigen::VectorXd::Zero(num_bs);
    for (int r = 0; r < realizations; ++r) {
      const double* in = &raw[(r * points + p) * slot];
      gamma += in[0];
      total_mw += in[1];
      for (int b = 0; b < num_bs; ++b) {
        dither(b) += in[2 + b];
      }
    }
    std::vector<double> row{distances[p], gamma / realizations,
                            safe_dbm(total_mw / realizations)};
    for (int b = 0; b < num_bs; ++b) {
      row.push_back(dither(b) / realizations);
    }
    table.add_row(std::move(row));
  }
  attach_common_metadata(table, spec);
  table.add_metadata("rho_ue_dbm", std::to_string(spec.rho_ue_dbm));
  return table;
}

}  // namespace

ResultTable run_oracle_suite(const std::vector<std::array<int, 3>>& sizes,
                             long long draws, std::uint64_t seed,
                             bool negative_control) {
  if (draws < 100000) {
    throw std::invalid_argument("oracle suite requires >= 1e5 draws");
  }
  if (sizes.empty()) {
    throw std::invalid_argument("oracle suite requires at least one size");
  }

  ResultTable table;
  table.columns = {"b",    "m",    "k",          "check",
                   "max_err_over_4se", "pass", "expect_pass"};
  table.add_metadata("draws", std::to_string(draws));
  table.add_metadata("seed", std::to_string(seed));

  static const std::vector<Position> kBsSpots = {
      {0.0, 0.0}, {100.0, 0.0}, {50.0, 86.6}, {0.0, 100.0}};
  static const std::vector<Position> kUeSpots = {
      {30.0, 5.0}, {62.0, 12.0}, {41.0, 18.0}, {55.0, 3.0}};

  for (std::size_t index = 0; index < sizes.size(); ++index) {
    const auto [num_bs, antennas, num_ues] = sizes[index];
    if (num_bs < 1 || antennas < 1 || num_ues < 0 ||
        num_bs > static_cast<int>(kBsSpots.size()) ||
        num_ues > static_cast<int>(kUeSpots.size())) {
      throw std::invalid_argument("oracle suite: unsupported size");
    }

    // Distinct noise levels across BSs exercise the block structure; powers
    // sit in the mid-SNR regime where the arcsin law is far from linear.
    ChannelSet channels;
    const double floor_mw = dbm_to_linear(-95.0);
    Eigen::VectorXd noise(num_bs);
    for (int b = 0; b < num_bs; ++b) {
      noise(b) = floor_mw * (1.0 + 0.5 * b);
    }
    if (num_ues > 0) {
      ScenarioConfig scenario;
      scenario.bs_positions.assign(kBsSpots.begin(), kBsSpots.begin() + num_bs);
      scenario.ue_positions.assign(kUeSpots.begin(), kUeSpots.begin() + num_ues);
      scenario.antennas_per_bs = antennas;
      scenario.seed = seed;
      scenario.num_channel_realizations = 1;
      channels = draw_channels(scenario, index);
    } else {
      channels.h.resize(static_cast<Eigen::Index>(num_bs) * antennas, 0);
      channels.delta.resize(num_bs, 0);
      channels.antennas_per_bs = antennas;
      channels.seed_used = seed;
    }
    Eigen::VectorXd powers =
        num_ues > 0 ? (low_snr_power_floor(channels, noise) * 500.0).eval()
                    : Eigen::VectorXd(0);
    const OperatingPoint point{powers, noise};
    const SystemStatistics stats = compute_statistics(channels, point);
    const MonteCarloMoments moments = estimate_quantized_moments(
        channels, point, stats.a_diag, draws, mix64(seed ^ (index + 1)));

    Eigen::MatrixXcd a_cy = stats.c_y;
    for (Eigen::Index i = 0; i < a_cy.rows(); ++i) {
      a_cy.row(i) *= stats.a_diag(i);
    }

    const double r_arcsin = max_error_over_4se(
        moments.e_rr, stats.c_r, moments.se_rr_re, moments.se_rr_im);
    const double r_cross = max_error_over_4se(
        moments.e_ry, a_cy, moments.se_ry_re, moments.se_ry_im);
    const double r_uncorr = max_error_over_4se(
        moments.e_qy, Eigen::MatrixXcd::Zero(a_cy.rows(), a_cy.cols()),
        moments.se_qy_re, moments.se_qy_im);

    const double b = num_bs;
    const double m = antennas;
    const double k = num_ues;
    table.add_row({b, m, k, 0.0, r_arcsin, r_arcsin <= 1.0 ? 1.0 : 0.0, 1.0});
    table.add_row({b, m, k, 1.0, r_cross, r_cross <= 1.0 ? 1.0 : 0.0, 1.0});
    table.add_row({b, m, k, 2.0, r_uncorr, r_uncorr <= 1.0 ? 1.0 : 0.0, 1.0});

    if (negative_control && num_ues > 0 && index + 1 == sizes.size()) {
      // Same draws against a corrupted gain: the cross-correlation match
      // must break, otherwise the check has no power.
      const double r_control =
          max_error_over_4se(moments.e_ry, 1.1 * a_cy, moments.se_ry_re,
                             moments.se_ry_im);
      table.add_row(
          {b, m, k, 3.0, r_control, r_control <= 1.0 ? 1.0 : 0.0, 0.0});
    }
  }
  return table;
}

ResultTable run_experiment(const ExperimentSpec& spec) {
  spec.scenario.validate();
  switch (spec.kind) {
    case ExperimentKind::SweepPower:
      return run_sweep_power(spec);
    case ExperimentKind::SweepDistance:
      return run_sweep_distance(spec);
    case ExperimentKind::MinPowerVsTarget:
      return run_min_power_vs_target(spec);
    case ExperimentKind::MinPowerVsDistance:
      return run_min_power_vs_distance(spec);
    case ExperimentKind::MaxMinVsDistance:
      return run_maxmin_vs_distance(spec);
    case ExperimentKind::OracleSuite: {
      ResultTable table = run_oracle_suite(spec.oracle_sizes,
                                           spec.oracle_draws,
                                           spec.scenario.seed);
      table.add_metadata("kind", to_string(spec.kind));
      table.add_metadata("config_hash", experiment_config_hash(spec));
      return table;
    }
  }
  throw ConfigError("unknown experiment kind");
}

}  // namespace qmimo
