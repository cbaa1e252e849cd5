// SPDX-License-Identifier: Apache-2.0
#include "qmimo/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qmimo/errors.hpp"
#include "qmimo/gradients.hpp"
#include "qmimo/parallel.hpp"

namespace qmimo {

namespace {

constexpr double kTwoOverPi = 2.0 / M_PI;

// SINDR targets enter the simplified program through t = gamma / (gamma + 1).
Eigen::VectorXd simplified_targets(const Eigen::VectorXd& gamma) {
  return gamma.array() / (gamma.array() + 1.0);
}

bool all_within_band(const Eigen::VectorXd& sindr,
                     const Eigen::VectorXd& targets, double epsilon) {
  for (Eigen::Index k = 0; k < sindr.size(); ++k) {
    if (std::abs(sindr(k) - targets(k)) > epsilon) {
      return false;
    }
  }
  return true;
}

// One-sided reading used by the BCD line search, which can only move powers
// upward: the target counts as met once the scan reaches the band from
// below. Equal to the two-sided band whenever the dB grid resolves it, and
// robust on steep SINDR branches where a grid step can jump across it.
bool all_targets_reached(const Eigen::VectorXd& sindr,
                         const Eigen::VectorXd& targets, double epsilon) {
  for (Eigen::Index k = 0; k < sindr.size(); ++k) {
    if (sindr(k) < targets(k) - epsilon) {
      return false;
    }
  }
  return true;
}

double min_or_zero(const Eigen::VectorXd& v) {
  return v.size() > 0 ? v.minCoeff() : 0.0;
}

struct Evaluator {
  const ChannelSet& channels;
  Eigen::VectorXd noise_mw;
  long long evaluations = 0;

  SindrReport all(const Eigen::VectorXd& powers) {
    ++evaluations;
    return evaluate_sindr(channels, {powers, noise_mw});
  }

  double single(const Eigen::VectorXd& powers, int k) {
    ++evaluations;
    return evaluate_sindr_single(channels, {powers, noise_mw}, k);
  }
};

SolveResult finalize(Evaluator& eval, const Eigen::VectorXd& powers,
                     SolveStatus status, std::vector<IterationRecord> trace) {
  SolveResult result;
  result.powers_mw = powers;
  result.noise_mw = eval.noise_mw;
  const SindrReport report = eval.all(powers);
  result.achieved_sindr = report.sindr;
  result.status = status;
  result.trace = std::move(trace);
  result.stat_evaluations = eval.evaluations;
  return result;
}

}  // namespace

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Achieved:
      return "achieved";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::MaxIterations:
      return "max_iterations";
  }
  return "unknown";
}

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::Gradient:
      return "gradient";
    case SolverKind::FixedPoint:
      return "fixed_point";
    case SolverKind::Bcd:
      return "bcd";
  }
  return "unknown";
}

void PowerControlProblem::validate(int num_ues) const {
  if (targets.size() != num_ues) {
    throw std::invalid_argument("problem: target count " +
                                std::to_string(targets.size()) +
                                " does not match UE count " +
                                std::to_string(num_ues));
  }
  for (Eigen::Index k = 0; k < targets.size(); ++k) {
    if (!(targets(k) >= 0.0) || !std::isfinite(targets(k))) {
      throw std::invalid_argument("problem: targets must be >= 0 and finite");
    }
  }
  if (!(epsilon > 0.0) || !(delta_rho_db > 0.0) || !(max_power_mw > 0.0)) {
    throw std::invalid_argument(
        "problem: epsilon, delta_rho_db and max_power_mw must be positive");
  }
  if (initial_powers_mw.size() != 0) {
    if (initial_powers_mw.size() != num_ues) {
      throw std::invalid_argument("problem: initial power count mismatch");
    }
    if (initial_powers_mw.maxCoeff() > max_power_mw * (1.0 + 1e-12)) {
      throw std::invalid_argument(
          "problem: initial powers exceed max_power_mw");
    }
  }
  if (max_iters < 1) {
    throw std::invalid_argument("problem: max_iters must be >= 1");
  }
}

Eigen::VectorXd low_snr_power_floor(const ChannelSet& channels,
                                    const Eigen::VectorXd& noise_mw,
                                    double x_target) {
  const int m = channels.antennas_per_bs;
  Eigen::VectorXd floor(channels.num_ues());
  for (int k = 0; k < channels.num_ues(); ++k) {
    double slope = 0.0;  // d x_k / d rho_k at rho = 0, interference-free
    for (int i = 0; i < channels.total_antennas(); ++i) {
      slope += kTwoOverPi * std::norm(channels.h(i, k)) / noise_mw(i / m);
    }
    floor(k) = slope > 0.0 ? x_target / slope : 0.0;
  }
  return floor;
}

namespace {

Eigen::VectorXd initial_powers(const PowerControlProblem& problem,
                               const ChannelSet& channels,
                               const Eigen::VectorXd& noise_mw) {
  Eigen::VectorXd powers = problem.initial_powers_mw.size() != 0
                               ? problem.initial_powers_mw
                               : low_snr_power_floor(channels, noise_mw);
  for (Eigen::Index k = 0; k < powers.size(); ++k) {
    if (problem.targets(k) == 0.0) {
      powers(k) = 0.0;  // degenerate target: transmit nothing
    }
  }
  return powers.cwiseMin(problem.max_power_mw).cwiseMax(0.0);
}

// Reassembles dL/drho from bundle pieces for duals that changed after the
// bundle was computed.
Eigen::VectorXd lagrangian_gradient_from(const GradientBundle& bundle,
                                         const Eigen::VectorXd& duals,
                                         const OperatingPoint& point) {
  const Eigen::Index num_ues = duals.size();
  Eigen::VectorXd dl(num_ues);
  for (Eigen::Index k = 0; k < num_ues; ++k) {
    double coupled = 0.0;
    for (Eigen::Index kb = 0; kb < num_ues; ++kb) {
      coupled += duals(kb) * point.powers_mw(kb) * bundle.dconstraint(kb, k);
    }
    dl(k) = 1.0 - duals(k) * bundle.constraint_values(k) - coupled;
  }
  return dl;
}

}  // namespace

SolveResult solve_gradient(const PowerControlProblem& problem,
                           const ChannelSet& channels,
                           const Eigen::VectorXd& noise_mw) {
  problem.validate(channels.num_ues());
  const int num_ues = channels.num_ues();
  const Eigen::VectorXd t = simplified_targets(problem.targets);

  Evaluator eval{channels, noise_mw};
  Eigen::VectorXd powers = initial_powers(problem, channels, noise_mw);
  Eigen::VectorXd duals = Eigen::VectorXd::Zero(num_ues);

  double zeta = problem.step_zeta;
  const double zeta_min = problem.step_zeta * 1e-12;
  const double zeta_max = problem.step_zeta * 1e9;
  // Per-UE dual step scaling: grow while a constraint violation keeps its
  // sign, halve when it flips. Plain equal-step dual ascent oscillates for
  // thousands of iterations on saturated instances.
  Eigen::VectorXd eta_scale = Eigen::VectorXd::Ones(num_ues);
  Eigen::VectorXd prev_violation = Eigen::VectorXd::Zero(num_ues);
  bool duals_primed = false;

  auto lagrangian = [&](const Eigen::VectorXd& rho, const Eigen::VectorXd& x) {
    return rho.sum() - (duals.array() * (x.array() - t.array())).sum();
  };

  std::vector<IterationRecord> trace;
  Eigen::VectorXd x(num_ues);
  Eigen::VectorXd sindr(num_ues);
  int at_bounds_streak = 0;
  SolveStatus status = SolveStatus::MaxIterations;

  for (int it = 0; it < problem.max_iters; ++it) {
    const OperatingPoint point{powers, noise_mw};
    const SystemStatistics stats = compute_statistics(channels, point);
    ++eval.evaluations;
    const GradientBundle bundle =
        compute_gradient_bundle(channels, point, stats, duals);
    x = powers.cwiseProduct(bundle.constraint_values);
    for (int k = 0; k < num_ues; ++k) {
      sindr(k) = sindr_from_x(x(k));
    }
    trace.push_back({it, powers, min_or_zero(sindr)});

    if (!sindr.allFinite()) {
      break;
    }
    if (all_within_band(sindr, problem.targets, problem.epsilon)) {
      status = SolveStatus::Achieved;
      break;
    }

    if (!duals_primed) {
      // Start each dual at the low-power shadow price 1/f_k so the ascent
      // begins at the right order of magnitude.
      for (int k = 0; k < num_ues; ++k) {
        const double f = bundle.constraint_values(k);
        duals(k) = (problem.targets(k) > 0.0 && f > 0.0) ? 1.0 / f : 0.0;
      }
      duals_primed = true;
    }

    // Projected primal step with geometric backoff on Lagrangian increase.
    const Eigen::VectorXd dl =
        lagrangian_gradient_from(bundle, duals, point);
    const double l_current = lagrangian(powers, x);
    const Eigen::VectorXd trial =
        (powers - zeta * dl).cwiseMax(0.0).cwiseMin(problem.max_power_mw);
    const SindrReport trial_report = eval.all(trial);
    const double l_trial = lagrangian(trial, trial_report.x);
    if (l_trial <= l_current + 1e-12 * (1.0 + std::abs(l_current))) {
      powers = trial;
      zeta = std::min(zeta * 1.25, zeta_max);
    } else {
      zeta = std::max(zeta * 0.5, zeta_min);
    }

    // Dual ascent mu <- max(0, mu - eta (x - t)), projected onto mu >= 0.
    for (int k = 0; k < num_ues; ++k) {
      const double violation = t(k) - x(k);
      if (violation * prev_violation(k) > 0.0) {
        eta_scale(k) = std::min(eta_scale(k) * 1.2, 1e9);
      } else if (violation * prev_violation(k) < 0.0) {
        eta_scale(k) = std::max(eta_scale(k) * 0.5, 1e-6);
      }
      prev_violation(k) = violation;
      duals(k) = std::max(
          0.0, duals(k) + problem.step_eta * eta_scale(k) * violation);
    }

    bool at_bounds = true;
    for (int k = 0; k < num_ues; ++k) {
      if (powers(k) > 0.0 && powers(k) < problem.max_power_mw) {
        at_bounds = false;
        break;
      }
    }
    at_bounds_streak = at_bounds ? at_bounds_streak + 1 : 0;
    if (at_bounds_streak >= 100) {
      break;
    }
  }

  SolveResult result = finalize(eval, powers, status, std::move(trace));
  result.duals = duals;
  if (status == SolveStatus::Achieved &&
      !all_within_band(result.achieved_sindr, problem.targets,
                       problem.epsilon)) {
    // finalize() re-evaluated at the same powers, so this cannot drift.
    throw InternalConsistencyError("gradient solver: achieved band mismatch");
  }
  return result;
}

SolveResult solve_fixed_point(const PowerControlProblem& problem,
                              const ChannelSet& channels,
                              const Eigen::VectorXd& noise_mw) {
  problem.validate(channels.num_ues());
  const int num_ues = channels.num_ues();

  Evaluator eval{channels, noise_mw};
  Eigen::VectorXd powers = initial_powers(problem, channels, noise_mw);

  std::vector<IterationRecord> trace;
  SindrReport report = eval.all(powers);
  trace.push_back({0, powers, min_or_zero(report.sindr)});

  if (all_within_band(report.sindr, problem.targets, problem.epsilon)) {
    return finalize(eval, powers, SolveStatus::Achieved, std::move(trace));
  }

  SolveStatus status = SolveStatus::MaxIterations;
  int infeasible_ue = -1;
  for (int it = 1; it <= problem.max_iters; ++it) {
    Eigen::VectorXd updated = powers;
    bool dead_channel = false;
    for (int k = 0; k < num_ues; ++k) {
      if (problem.targets(k) == 0.0) {
        continue;
      }
      if (!(report.sindr(k) > 0.0)) {
        dead_channel = true;  // zero SINDR at positive power: unreachable
        infeasible_ue = k;
        break;
      }
      updated(k) = std::min(problem.targets(k) / report.sindr(k) * powers(k),
                            problem.max_power_mw);
    }
    if (dead_channel) {
      status = SolveStatus::Infeasible;
      break;
    }

    powers = updated;
    const SindrReport next = eval.all(powers);
    trace.push_back({it, powers, min_or_zero(next.sindr)});

    if (all_within_band(next.sindr, problem.targets, problem.epsilon)) {
      report = next;
      status = SolveStatus::Achieved;
      break;
    }
    // Algorithm break: SINDR no longer increasing with increasing power
    // means the target is not achievable.
    double worst_gain = std::numeric_limits<double>::infinity();
    int worst_ue = -1;
    for (int k = 0; k < num_ues; ++k) {
      if (problem.targets(k) == 0.0) {
        continue;
      }
      const double gain = next.sindr(k) - report.sindr(k);
      if (gain < worst_gain) {
        worst_gain = gain;
        worst_ue = k;
      }
    }
    if (worst_ue >= 0 && worst_gain <= 0.0) {
      report = next;
      status = SolveStatus::Infeasible;
      infeasible_ue = worst_ue;
      break;
    }
    report = next;
  }

  SolveResult result = finalize(eval, powers, status, std::move(trace));
  result.infeasible_ue = infeasible_ue;
  return result;
}

SolveResult solve_bcd(const PowerControlProblem& problem,
                      const ChannelSet& channels,
                      const Eigen::VectorXd& noise_mw) {
  problem.validate(channels.num_ues());
  const int num_ues = channels.num_ues();
  const double step_mult = std::pow(10.0, problem.delta_rho_db / 10.0);
  const double cap = problem.max_power_mw * (1.0 + 1e-12);

  Evaluator eval{channels, noise_mw};
  const Eigen::VectorXd floor = low_snr_power_floor(channels, noise_mw);
  Eigen::VectorXd powers = initial_powers(problem, channels, noise_mw);

  std::vector<IterationRecord> trace;
  SindrReport report = eval.all(powers);
  trace.push_back({0, powers, min_or_zero(report.sindr)});
  if (all_targets_reached(report.sindr, problem.targets, problem.epsilon)) {
    return finalize(eval, powers, SolveStatus::Achieved, std::move(trace));
  }

  for (int sweep = 1; sweep <= problem.max_iters; ++sweep) {
    for (int k = 0; k < num_ues; ++k) {
      if (problem.targets(k) == 0.0) {
        continue;  // stays silent; its zero SINDR meets the zero target
      }
      double probe = powers(k) > 0.0 ? powers(k)
                                     : std::min(floor(k), problem.max_power_mw);
      double prev_sindr = 0.0;
      double last_probe = probe;
      bool met = false;
      while (probe <= cap) {
        last_probe = probe;
        Eigen::VectorXd candidate = powers;
        candidate(k) = probe;
        const double s = eval.single(candidate, k);
        if (s >= problem.targets(k) - problem.epsilon) {
          met = true;
          break;
        }
        if (s <= prev_sindr) {
          break;  // unimodal peak passed (or no growth at all)
        }
        prev_sindr = s;
        probe *= step_mult;
      }
      powers(k) = std::min(last_probe, problem.max_power_mw);
      if (!met) {
        SolveResult result = finalize(eval, powers, SolveStatus::Infeasible,
                                      std::move(trace));
        result.infeasible_ue = k;
        return result;
      }
    }
    report = eval.all(powers);
    trace.push_back({sweep, powers, min_or_zero(report.sindr)});
    if (all_targets_reached(report.sindr, problem.targets, problem.epsilon)) {
      return finalize(eval, powers, SolveStatus::Achieved, std::move(trace));
    }
  }
  return finalize(eval, powers, SolveStatus::MaxIterations, std::move(trace));
}

SolveResult solve_min_power(SolverKind kind, const PowerControlProblem& problem,
                            const ChannelSet& channels,
                            const Eigen::VectorXd& noise_mw) {
  switch (kind) {
    case SolverKind::Gradient:
      return solve_gradient(problem, channels, noise_mw);
    case SolverKind::FixedPoint:
      return solve_fixed_point(problem, channels, noise_mw);
    case SolverKind::Bcd:
      return solve_bcd(problem, channels, noise_mw);
  }
  throw std::invalid_argument("unknown solver kind");
}

std::vector<Eigen::VectorXd> dither_noise_candidates(
    const ChannelSet& channels, const std::vector<double>& grid_db,
    double noise_floor_mw) {
  if (grid_db.empty()) {
    throw std::invalid_argument("dither grid must not be empty");
  }
  const int num_bs = channels.num_bs();
  if (num_bs == 1) {
    return {Eigen::VectorXd::Constant(1, noise_floor_mw)};
  }

  // The BS with the least total received gain keeps the bare AWGN floor.
  int pinned = 0;
  double least_gain = std::numeric_limits<double>::infinity();
  for (int b = 0; b < num_bs; ++b) {
    const double gain = channels.delta.row(b).sum();
    if (gain < least_gain) {
      least_gain = gain;
      pinned = b;
    }
  }

  const int free_count = num_bs - 1;
  const std::size_t grid_size = grid_db.size();
  std::size_t combos = 1;
  for (int i = 0; i < free_count; ++i) {
    combos *= grid_size;
  }

  std::vector<Eigen::VectorXd> candidates;
  candidates.reserve(combos);
  for (std::size_t index = 0; index < combos; ++index) {
    Eigen::VectorXd noise = Eigen::VectorXd::Constant(num_bs, noise_floor_mw);
    std::size_t rest = index;
    for (int b = 0; b < num_bs; ++b) {
      if (b == pinned) {
        continue;
      }
      const double level_db = grid_db[rest % grid_size];
      rest /= grid_size;
      noise(b) = noise_floor_mw * std::pow(10.0, level_db / 10.0);
    }
    candidates.push_back(std::move(noise));
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
                     return a.sum() < b.sum();
                   });
  return candidates;
}

SolveResult dither_search(const PowerControlProblem& problem,
                          const ChannelSet& channels, SolverKind base,
                          double noise_floor_mw) {
  const std::vector<Eigen::VectorXd> candidates =
      dither_noise_candidates(channels, problem.dither_grid_db, noise_floor_mw);
  std::vector<SolveResult> results(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t i) {
    results[i] = solve_min_power(base, problem, channels, candidates[i]);
  });

  // Lowest achieved total power wins; candidates are ordered by total dither
  // power, so picking the first near-tie realizes the first-peak rule.
  const double tie_factor = std::pow(10.0, 0.001);  // 0.01 dB
  int best = -1;
  double best_power = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].status != SolveStatus::Achieved) {
      continue;
    }
    const double total = results[i].total_power_mw();
    if (total < best_power / tie_factor) {
      best_power = total;
      best = static_cast<int>(i);
    }
  }
  if (best < 0) {
    // Nothing achieved: report the candidate that came closest.
    double best_sindr = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < results.size(); ++i) {
      const double worst_ue = min_or_zero(results[i].achieved_sindr);
      if (worst_ue > best_sindr) {
        best_sindr = worst_ue;
        best = static_cast<int>(i);
      }
    }
  }
  return results[static_cast<std::size_t>(best)];
}

namespace {

// Coarse isolated single-UE sweep used to bracket the bisection from above.
double best_isolated_sindr(const PowerControlProblem& problem,
                           const ChannelSet& channels,
                           const Eigen::VectorXd& noise_mw,
                           Evaluator& eval) {
  const Eigen::VectorXd floor = low_snr_power_floor(channels, noise_mw);
  double best = 0.0;
  for (int k = 0; k < channels.num_ues(); ++k) {
    if (floor(k) <= 0.0) {
      continue;
    }
    double prev = 0.0;
    for (double rho = floor(k); rho <= problem.max_power_mw * (1.0 + 1e-12);
         rho *= std::pow(10.0, 0.1)) {  // 1 dB bracket grid
      Eigen::VectorXd powers = Eigen::VectorXd::Zero(channels.num_ues());
      powers(k) = std::min(rho, problem.max_power_mw);
      const double s = eval.single(powers, k);
      best = std::max(best, s);
      if (s < prev * 0.5) {
        break;  // far past the peak
      }
      prev = std::max(prev, s);
    }
  }
  return best;
}

}  // namespace

SolveResult solve_max_min(const PowerControlProblem& problem,
                          const ChannelSet& channels,
                          const Eigen::VectorXd& noise_mw,
                          const MaxMinOptions& options) {
  const int num_ues = channels.num_ues();
  Evaluator eval{channels, noise_mw};

  PowerControlProblem feasibility = problem;
  Eigen::VectorXd warm;  // powers of the best feasible solve so far
  SolveResult best;
  bool have_best = false;

  auto probe = [&](double gamma) -> const SolveResult* {
    feasibility.targets = Eigen::VectorXd::Constant(num_ues, gamma);
    feasibility.initial_powers_mw = warm;
    SolveResult result = solve_min_power(options.feasibility_solver,
                                         feasibility, channels, noise_mw);
    eval.evaluations += result.stat_evaluations;
    if (result.status == SolveStatus::Achieved) {
      best = std::move(result);
      have_best = true;
      warm = best.powers_mw;
      return &best;
    }
    return nullptr;
  };

  double lo = 0.0;
  if (options.gamma_lo_hint > 0.0) {
    if (probe(options.gamma_lo_hint) == nullptr) {
      // The hint is not feasible here; the caller only needs to know that
      // this configuration cannot beat it.
      SolveResult result;
      result.powers_mw = Eigen::VectorXd::Zero(num_ues);
      result.noise_mw = noise_mw;
      result.achieved_sindr = Eigen::VectorXd::Zero(num_ues);
      result.status = SolveStatus::Infeasible;
      result.stat_evaluations = eval.evaluations;
      return result;
    }
    lo = options.gamma_lo_hint;
  }

  double hi = options.gamma_hi;
  if (hi <= 0.0) {
    hi = 2.0 * best_isolated_sindr(problem, channels, noise_mw, eval);
    if (hi <= 0.0) {
      hi = 1.0;
    }
  }
  hi = std::max(hi, lo + options.bisect_tol);

  int widenings = 0;
  while (probe(hi) != nullptr) {
    lo = hi;
    hi *= 2.0;
    if (++widenings > 10) {
      throw InternalConsistencyError(
          "max-min bisection failed to bracket after 2^10 widening");
    }
  }

  while (hi - lo > options.bisect_tol) {
    const double mid = 0.5 * (lo + hi);
    if (probe(mid) != nullptr) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  SolveResult result;
  if (have_best) {
    result = best;
  } else {
    // Even tiny targets failed: the cap forces (near-)zero power.
    result.powers_mw = Eigen::VectorXd::Zero(num_ues);
    result.noise_mw = noise_mw;
    result.achieved_sindr = Eigen::VectorXd::Zero(num_ues);
  }
  result.status = SolveStatus::Achieved;
  result.max_min_gamma = lo;
  result.stat_evaluations = eval.evaluations;
  return result;
}

SolveResult dither_search_max_min(const PowerControlProblem& problem,
                                  const ChannelSet& channels,
                                  double noise_floor_mw,
                                  const MaxMinOptions& options) {
  const std::vector<Eigen::VectorXd> candidates =
      dither_noise_candidates(channels, problem.dither_grid_db, noise_floor_mw);

  // The least-dither candidate is solved first; its gamma* seeds the others
  // so combinations that cannot beat it exit after one feasibility probe.
  std::vector<SolveResult> results(candidates.size());
  results[0] = solve_max_min(problem, channels, candidates[0], options);

  MaxMinOptions seeded = options;
  seeded.gamma_lo_hint =
      std::max(options.gamma_lo_hint, results[0].max_min_gamma);
  parallel_for(candidates.size() - 1, [&](std::size_t i) {
    results[i + 1] =
        solve_max_min(problem, channels, candidates[i + 1], seeded);
  });

  int best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].status != SolveStatus::Achieved) {
      continue;
    }
    if (results[i].max_min_gamma >
        results[best].max_min_gamma + options.bisect_tol) {
      best = static_cast<int>(i);
    }
  }
  return results[static_cast<std::size_t>(best)];
}

}  // namespace qmimo
