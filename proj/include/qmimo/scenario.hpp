// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace qmimo {

using Position = std::array<double, 2>;  // meters

/// Network geometry and radio parameters; the single source of experiment
/// truth. Ingested from JSON with exactly these snake_case field names.
struct ScenarioConfig {
  std::vector<Position> bs_positions;
  int antennas_per_bs = 128;
  std::vector<Position> ue_positions;
  double pathloss_exponent = 3.0;
  double pathloss_intercept_db = -61.0;
  double noise_floor_dbm = -95.0;
  double max_ue_power_dbm = 30.0;
  std::uint64_t seed = 1;
  int num_channel_realizations = 50;

  int num_bs() const { return static_cast<int>(bs_positions.size()); }
  int num_ues() const { return static_cast<int>(ue_positions.size()); }

  double noise_floor_mw() const;

  /// Throws std::invalid_argument on violated invariants (co-located UE/BS,
  /// non-positive counts, ...).
  void validate() const;
};

/// Per-(BS, UE) channel vectors and large-scale fading coefficients.
struct ChannelSet {
  /// (B*M) x K; column k stacks [h_{1,k}; ...; h_{B,k}] in BS-index order.
  Eigen::MatrixXcd h;
  /// B x K linear power gains delta_{b,k}.
  Eigen::MatrixXd delta;
  std::uint64_t seed_used = 0;
  int antennas_per_bs = 0;

  int num_bs() const { return static_cast<int>(delta.rows()); }
  int num_ues() const { return static_cast<int>(h.cols()); }
  int total_antennas() const { return static_cast<int>(h.rows()); }
};

double dbm_to_linear(double dbm);
double linear_to_dbm(double mw);

/// Distance-dependent large-scale gain in dB:
/// intercept - 10 * exponent * log10(d). Throws on d <= 0.
double pathloss_db(double distance_m, const ScenarioConfig& config);

double distance(const Position& a, const Position& b);

/// B x K matrix of linear gains derived from the configured geometry.
Eigen::MatrixXd large_scale_gains(const ScenarioConfig& config);

/// One (b, k) block of unit-variance small-scale fading for the given
/// realization substream. Deterministic in (config.seed, realization, b, k)
/// regardless of how many BSs/UEs the scenario holds or in which order
/// blocks are generated.
Eigen::VectorXcd draw_fading_block(const ScenarioConfig& config,
                                   std::uint64_t realization, int bs, int ue);

/// i.i.d. Rayleigh-fading channels: entry of block (b,k) ~ CN(0, delta_{b,k}).
ChannelSet draw_channels(const ScenarioConfig& config,
                         std::uint64_t realization);

/// As above but with the large-scale gains supplied by the caller (used by
/// distance sweeps that move a UE while keeping its fading realization).
ChannelSet draw_channels_with_gains(const ScenarioConfig& config,
                                    std::uint64_t realization,
                                    const Eigen::MatrixXd& gains);

/// Parses a scenario from JSON. Unknown keys are rejected with a ConfigError
/// that lists them.
ScenarioConfig parse_scenario_config(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& config);

}  // namespace qmimo
