// SPDX-License-Identifier: Apache-2.0
//
// qmimo: 1-bit quantized distributed massive MIMO uplink simulator.
//
// Subcommands select the experiment family; the JSON config supplies the
// scenario and sweep definition, and the flags below override its seed /
// output / solver / dither / realization-count fields.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qmimo/errors.hpp"
#include "qmimo/experiment.hpp"
#include "qmimo/table.hpp"

namespace {

struct CliOverrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> solver;
  std::optional<std::string> dither;
  std::optional<int> realizations;
};

void add_common_flags(CLI::App* cmd, CliOverrides& overrides) {
  cmd->add_option("--config", overrides.config_path,
                  "experiment JSON config path")
      ->required();
  cmd->add_option("--seed", overrides.seed, "override scenario seed");
  cmd->add_option("--out", overrides.out, "override output CSV path");
  cmd->add_option("--solver", overrides.solver,
                  "gradient | fixed-point | bcd | all");
  cmd->add_option("--dither", overrides.dither, "off | search");
  cmd->add_option("--realizations", overrides.realizations,
                  "override channel realization count");
}

int run(const std::vector<qmimo::ExperimentKind>& accepted,
        const CliOverrides& overrides) {
  qmimo::ExperimentSpec spec =
      qmimo::load_experiment_spec(overrides.config_path);
  bool kind_ok = false;
  for (qmimo::ExperimentKind kind : accepted) {
    kind_ok = kind_ok || spec.kind == kind;
  }
  if (!kind_ok) {
    throw qmimo::ConfigError("config kind '" + qmimo::to_string(spec.kind) +
                             "' does not belong to this subcommand");
  }
  if (overrides.seed) {
    spec.scenario.seed = *overrides.seed;
  }
  if (overrides.out) {
    spec.output = *overrides.out;
  }
  if (overrides.realizations) {
    spec.scenario.num_channel_realizations = *overrides.realizations;
  }
  if (overrides.solver) {
    spec.solvers = qmimo::parse_solver_selection(*overrides.solver);
  }
  if (overrides.dither) {
    if (*overrides.dither == "off") {
      spec.dither = qmimo::DitherMode::Off;
    } else if (*overrides.dither == "search") {
      spec.dither = qmimo::DitherMode::Search;
    } else {
      throw qmimo::ConfigError("--dither must be 'off' or 'search'");
    }
  }
  if (spec.output.empty()) {
    throw qmimo::ConfigError(
        "no output path: set 'output' in the config or pass --out");
  }

  const qmimo::ResultTable table = qmimo::run_experiment(spec);
  qmimo::emit_csv(table, spec.output);
  std::cout << "wrote " << spec.output << " (" << table.rows.size()
            << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"1-bit quantized distributed massive MIMO uplink simulator"};
  app.require_subcommand(1);

  using Kind = qmimo::ExperimentKind;
  struct Sub {
    const char* name;
    const char* help;
    std::vector<Kind> kinds;
  };
  const std::vector<Sub> subs = {
      {"sweep-power", "SINDR vs UE transmit power", {Kind::SweepPower}},
      {"sweep-distance",
       "SINDR vs UE distance at fixed powers",
       {Kind::SweepDistance}},
      {"min-power",
       "min-power vs target SINDR or vs distance",
       {Kind::MinPowerVsTarget, Kind::MinPowerVsDistance}},
      {"max-min", "max-min SINDR vs distance", {Kind::MaxMinVsDistance}},
      {"oracle",
       "Monte-Carlo statistics validation suite",
       {Kind::OracleSuite}},
  };

  CliOverrides overrides;
  std::vector<Kind> selected;
  for (const Sub& sub : subs) {
    CLI::App* cmd = app.add_subcommand(sub.name, sub.help);
    add_common_flags(cmd, overrides);
    cmd->callback([&selected, kinds = sub.kinds]() { selected = kinds; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    return run(selected, overrides);
  } catch (const qmimo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const qmimo::InternalConsistencyError& e) {
    std::cerr << "internal consistency error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
