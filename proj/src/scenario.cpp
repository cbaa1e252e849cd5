// SPDX-License-Identifier: Apache-2.0
#include "qmimo/scenario.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qmimo/errors.hpp"
#include "qmimo/rng.hpp"

namespace qmimo {

namespace {
// Substream domain tags keep channel draws disjoint from other consumers of
// the same master seed (Monte-Carlo draws, synthetic test streams, ...).
constexpr std::uint64_t kDomainChannel = 0xC4A1ULL;
}  // namespace

double dbm_to_linear(double dbm) { return std::pow(10.0, dbm / 10.0); }

double linear_to_dbm(double mw) {
  if (!(mw > 0.0)) {
    throw std::invalid_argument("linear_to_dbm: value must be positive, got " +
                                std::to_string(mw));
  }
  return 10.0 * std::log10(mw);
}

double ScenarioConfig::noise_floor_mw() const {
  return dbm_to_linear(noise_floor_dbm);
}

double distance(const Position& a, const Position& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return std::hypot(dx, dy);
}

double pathloss_db(double distance_m, const ScenarioConfig& config) {
  if (!(distance_m > 0.0)) {
    throw std::invalid_argument("pathloss_db: distance must be positive, got " +
                                std::to_string(distance_m));
  }
  return config.pathloss_intercept_db -
         10.0 * config.pathloss_exponent * std::log10(distance_m);
}

void ScenarioConfig::validate() const {
  if (bs_positions.empty()) {
    throw std::invalid_argument("scenario: at least one BS is required");
  }
  if (ue_positions.empty()) {
    throw std::invalid_argument("scenario: at least one UE is required");
  }
  if (antennas_per_bs < 1) {
    throw std::invalid_argument("scenario: antennas_per_bs must be >= 1");
  }
  if (num_channel_realizations < 1) {
    throw std::invalid_argument(
        "scenario: num_channel_realizations must be >= 1");
  }
  if (!(noise_floor_mw() > 0.0) || !std::isfinite(noise_floor_mw())) {
    throw std::invalid_argument("scenario: noise floor must be finite");
  }
  for (int b = 0; b < num_bs(); ++b) {
    for (int k = 0; k < num_ues(); ++k) {
      if (distance(bs_positions[b], ue_positions[k]) <= 0.0) {
        throw std::invalid_argument(
            "scenario: UE " + std::to_string(k) +
            " is co-located with BS " + std::to_string(b));
      }
    }
  }
}

Eigen::MatrixXd large_scale_gains(const ScenarioConfig& config) {
  Eigen::MatrixXd gains(config.num_bs(), config.num_ues());
  for (int b = 0; b < config.num_bs(); ++b) {
    for (int k = 0; k < config.num_ues(); ++k) {
      const double d = distance(config.bs_positions[b], config.ue_positions[k]);
      gains(b, k) = dbm_to_linear(pathloss_db(d, config));
    }
  }
  return gains;
}

Eigen::VectorXcd draw_fading_block(const ScenarioConfig& config,
                                   std::uint64_t realization, int bs, int ue) {
  SplitRng rng(config.seed, {kDomainChannel, realization,
                             static_cast<std::uint64_t>(bs),
                             static_cast<std::uint64_t>(ue)});
  Eigen::VectorXcd block(config.antennas_per_bs);
  for (int m = 0; m < config.antennas_per_bs; ++m) {
    block(m) = rng.next_cgaussian(1.0);
  }
  return block;
}

ChannelSet draw_channels_with_gains(const ScenarioConfig& config,
                                    std::uint64_t realization,
                                    const Eigen::MatrixXd& gains) {
  config.validate();
  const int num_bs = config.num_bs();
  const int num_ues = config.num_ues();
  const int m = config.antennas_per_bs;

  ChannelSet channels;
  channels.h.resize(static_cast<Eigen::Index>(num_bs) * m, num_ues);
  channels.delta = gains;
  channels.seed_used = config.seed;
  channels.antennas_per_bs = m;
  for (int b = 0; b < num_bs; ++b) {
    for (int k = 0; k < num_ues; ++k) {
      const double scale = std::sqrt(gains(b, k));
      channels.h.block(static_cast<Eigen::Index>(b) * m, k, m, 1) =
          scale * draw_fading_block(config, realization, b, k);
    }
  }
  return channels;
}

ChannelSet draw_channels(const ScenarioConfig& config,
                         std::uint64_t realization) {
  return draw_channels_with_gains(config, realization,
                                  large_scale_gains(config));
}

namespace {

Position parse_position(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() ||
      !j[1].is_number()) {
    throw ConfigError(where + ": positions must be [x, y] arrays of numbers");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<Position> parse_positions(const nlohmann::json& j,
                                      const std::string& where) {
  if (!j.is_array()) {
    throw ConfigError(where + ": expected an array of [x, y] positions");
  }
  std::vector<Position> out;
  out.reserve(j.size());
  for (const auto& item : j) {
    out.push_back(parse_position(item, where));
  }
  return out;
}

}  // namespace

ScenarioConfig parse_scenario_config(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw ConfigError("scenario: expected a JSON object");
  }
  static const std::set<std::string> known = {
      "bs_positions",     "antennas_per_bs",
      "ue_positions",     "pathloss_exponent",
      "pathloss_intercept_db", "noise_floor_dbm",
      "max_ue_power_dbm", "seed",
      "num_channel_realizations"};
  std::vector<std::string> unknown;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (known.find(it.key()) == known.end()) {
      unknown.push_back(it.key());
    }
  }
  if (!unknown.empty()) {
    std::ostringstream msg;
    msg << "scenario: unknown keys:";
    for (const auto& key : unknown) {
      msg << " '" << key << "'";
    }
    throw ConfigError(msg.str());
  }

  ScenarioConfig config;
  if (!j.contains("bs_positions") || !j.contains("ue_positions")) {
    throw ConfigError("scenario: bs_positions and ue_positions are required");
  }
  config.bs_positions = parse_positions(j.at("bs_positions"), "bs_positions");
  config.ue_positions = parse_positions(j.at("ue_positions"), "ue_positions");
  config.antennas_per_bs = j.value("antennas_per_bs", config.antennas_per_bs);
  config.pathloss_exponent =
      j.value("pathloss_exponent", config.pathloss_exponent);
  config.pathloss_intercept_db =
      j.value("pathloss_intercept_db", config.pathloss_intercept_db);
  config.noise_floor_dbm = j.value("noise_floor_dbm", config.noise_floor_dbm);
  config.max_ue_power_dbm =
      j.value("max_ue_power_dbm", config.max_ue_power_dbm);
  config.seed = j.value("seed", config.seed);
  config.num_channel_realizations =
      j.value("num_channel_realizations", config.num_channel_realizations);
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return config;
}

nlohmann::json scenario_to_json(const ScenarioConfig& config) {
  nlohmann::json j;
  j["bs_positions"] = config.bs_positions;
  j["antennas_per_bs"] = config.antennas_per_bs;
  j["ue_positions"] = config.ue_positions;
  j["pathloss_exponent"] = config.pathloss_exponent;
  j["pathloss_intercept_db"] = config.pathloss_intercept_db;
  j["noise_floor_dbm"] = config.noise_floor_dbm;
  j["max_ue_power_dbm"] = config.max_ue_power_dbm;
  j["seed"] = config.seed;
  j["num_channel_realizations"] = config.num_channel_realizations;
  return j;
}

}  // namespace qmimo
