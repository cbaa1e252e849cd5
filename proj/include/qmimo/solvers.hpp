// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qmimo/bussgang.hpp"
#include "qmimo/scenario.hpp"

namespace qmimo {

/// Targets, bounds, tolerances and step sizes for one power-control run.
struct PowerControlProblem {
  Eigen::VectorXd targets;            // linear SINDR targets, length K
  Eigen::VectorXd initial_powers_mw;  // empty -> low-SNR floor per UE
  double max_power_mw = 1000.0;       // rho_UE (30 dBm default)
  double epsilon = 0.05;              // SINDR convergence tolerance
  double delta_rho_db = 0.1;          // BCD line-search resolution
  double step_zeta = 1e-2;            // gradient step (powers in mW)
  double step_eta = 1.0;              // dual step
  int max_iters = 20000;
  std::vector<double> dither_grid_db = {0,  3,  6,  9,  12, 15, 18, 21,
                                        24, 27, 30, 33, 36, 39, 42, 45};

  void validate(int num_ues) const;
};

enum class SolveStatus { Achieved, Infeasible, MaxIterations };
enum class SolverKind { Gradient, FixedPoint, Bcd };

std::string to_string(SolveStatus status);
std::string to_string(SolverKind kind);

struct IterationRecord {
  int iteration = 0;
  Eigen::VectorXd powers_mw;
  double min_sindr = 0.0;
};

struct SolveResult {
  Eigen::VectorXd powers_mw;
  Eigen::VectorXd noise_mw;
  Eigen::VectorXd achieved_sindr;
  Eigen::VectorXd duals;  // gradient method only
  SolveStatus status = SolveStatus::MaxIterations;
  std::vector<IterationRecord> trace;
  int infeasible_ue = -1;       // UE whose line search / update broke
  double max_min_gamma = 0.0;   // solve_max_min only
  long long stat_evaluations = 0;

  double total_power_mw() const { return powers_mw.sum(); }
};

/// Per-UE power at which the isolated low-SNR constraint value reaches
/// x_target (default 1e-3): the "smallest possible" initialization.
Eigen::VectorXd low_snr_power_floor(const ChannelSet& channels,
                                    const Eigen::VectorXd& noise_mw,
                                    double x_target = 1e-3);

/// Primal-dual gradient method on the simplified min-power program:
/// projected power step along -dL/drho, dual step mu <- max(0, mu - eta (x - t)).
/// The step zeta backs off geometrically whenever the Lagrangian increases
/// and grows again on success.
SolveResult solve_gradient(const PowerControlProblem& problem,
                           const ChannelSet& channels,
                           const Eigen::VectorXd& noise_mw);

/// Parallel multiplicative updates rho_k <- (target_k / sindr_k) rho_k,
/// terminating as infeasible when any UE's SINDR stops increasing.
SolveResult solve_fixed_point(const PowerControlProblem& problem,
                              const ChannelSet& channels,
                              const Eigen::VectorXd& noise_mw);

/// Cyclic per-UE line search on a delta_rho_db grid, stopping per UE at the
/// target band, at a SINDR decrease (unimodal peak passed), or at the cap.
SolveResult solve_bcd(const PowerControlProblem& problem,
                      const ChannelSet& channels,
                      const Eigen::VectorXd& noise_mw);

SolveResult solve_min_power(SolverKind kind, const PowerControlProblem& problem,
                            const ChannelSet& channels,
                            const Eigen::VectorXd& noise_mw);

/// Per-BS noise-level candidates from the dither grid (Cartesian product);
/// the BS with the least total received gain is pinned at the floor.
/// Candidates are ordered by total dither power, ascending.
std::vector<Eigen::VectorXd> dither_noise_candidates(
    const ChannelSet& channels, const std::vector<double>& grid_db,
    double noise_floor_mw);

/// Runs the base solver for every dither candidate and keeps the best
/// objective (lowest total power); near-ties resolve toward the smallest
/// total dither power, i.e. the first peak.
SolveResult dither_search(const PowerControlProblem& problem,
                          const ChannelSet& channels, SolverKind base,
                          double noise_floor_mw);

struct MaxMinOptions {
  double bisect_tol = 0.01;        // linear, on gamma
  double gamma_lo_hint = 0.0;      // known-feasible start (verified anyway)
  double gamma_hi = 0.0;           // 0 -> automatic bracket
  SolverKind feasibility_solver = SolverKind::Bcd;
};

/// Bisection on the common target gamma; each probe is a min-power solve
/// with the rho_UE cap. Returns the largest feasible gamma within tolerance.
SolveResult solve_max_min(const PowerControlProblem& problem,
                          const ChannelSet& channels,
                          const Eigen::VectorXd& noise_mw,
                          const MaxMinOptions& options = {});

/// Max-min over the dither grid; objective is the achieved gamma.
SolveResult dither_search_max_min(const PowerControlProblem& problem,
                                  const ChannelSet& channels,
                                  double noise_floor_mw,
                                  const MaxMinOptions& options = {});

}  // namespace qmimo
