// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qmimo/scenario.hpp"
#include "qmimo/solvers.hpp"
#include "qmimo/table.hpp"

namespace qmimo {

enum class ExperimentKind {
  SweepPower,
  SweepDistance,
  MinPowerVsTarget,
  MinPowerVsDistance,
  MaxMinVsDistance,
  OracleSuite,
};

enum class DitherMode { Off, Search };
enum class UeLayout { Colocated, Symmetric };

ExperimentKind experiment_kind_from_string(const std::string& name);
std::string to_string(ExperimentKind kind);

/// "gradient" | "fixed-point" | "fixed_point" | "bcd" | "all".
std::vector<SolverKind> parse_solver_selection(const std::string& name);

struct AxisSpec {
  double start = 0.0;
  double stop = 0.0;
  double step = 1.0;

  std::vector<double> values() const;  // inclusive, start == stop -> 1 point
};

/// One experiment: a scenario plus sweep/solver/dither configuration.
/// Parsed from JSON; unknown keys anywhere are rejected.
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::SweepPower;
  ScenarioConfig scenario;
  AxisSpec axis;
  std::vector<double> targets;     // min-power kinds (linear SINDR)
  std::vector<double> powers_dbm;  // sweep_distance fixed powers
  std::vector<SolverKind> solvers = {SolverKind::Bcd};
  DitherMode dither = DitherMode::Off;
  std::vector<double> dither_grid_db;  // empty -> solver default grid
  double rho_ue_dbm = 30.0;
  double epsilon = 0.05;
  double delta_rho_db = 0.1;
  double step_zeta = 1e-2;
  double step_eta = 1.0;
  int max_iters = 20000;
  UeLayout ue_layout = UeLayout::Colocated;
  std::string output;
  long long oracle_draws = 1000000;
  std::vector<std::array<int, 3>> oracle_sizes = {
      {1, 1, 0}, {1, 2, 1}, {2, 3, 2}, {2, 4, 4}};

  PowerControlProblem make_problem(double target, int num_ues) const;
};

ExperimentSpec parse_experiment_spec(const nlohmann::json& j);
ExperimentSpec load_experiment_spec(const std::string& path);

/// Canonical JSON of the semantically meaningful fields (the output path is
/// excluded); its content hash fingerprints the run.
nlohmann::json experiment_to_json(const ExperimentSpec& spec);
std::string experiment_config_hash(const ExperimentSpec& spec);

/// Runs the experiment and returns the result table (deterministic for a
/// fixed spec). Infeasible solver runs appear as status columns, not errors.
ResultTable run_experiment(const ExperimentSpec& spec);

/// Monte-Carlo validation of the quantized statistics on small instances:
/// arcsin law (E[r r^H] = c_r), Bussgang cross-correlation (E[r y^H] = A c_y)
/// and distortion uncorrelatedness (E[q y^H] = 0), all at 4 standard errors.
/// A deliberately corrupted-gain control row is expected to fail.
ResultTable run_oracle_suite(const std::vector<std::array<int, 3>>& sizes,
                             long long draws, std::uint64_t seed,
                             bool negative_control = true);

/// Scenario with every UE placed at distance_m from the reference BS along
/// the line toward the second BS (Colocated), or alternating with the
/// mirrored point near the far BS (Symmetric).
ScenarioConfig place_ues_at_distance(const ScenarioConfig& base,
                                     double distance_m, UeLayout layout);

/// Number of local maxima of a sampled curve, with hysteresis `prominence`
/// (in y units) so sub-threshold ripples do not count. Boundary maxima count.
int count_local_maxima(const std::vector<double>& y, double prominence);

}  // namespace qmimo
