#pragma once

#include <stdexcept>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "remest/simulator.hpp"

namespace remest {

/// Configuration error carrying the first offending field.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string f, const std::string& what)
      : std::runtime_error("config field '" + f + "': " + what), field(std::move(f)) {}
};

struct Scenario {
  std::string name;
  SystemModel model;
  ChannelParams channel;
  SolverConfig solver;
  SimConfig sim;
};

/// Matrix exponential by scaling-and-squaring over a truncated Taylor series.
Matrix expm(const Matrix& M, double tol = 1e-14);

/// Two identical double-integrator drones reporting positions over the shared
/// channel (T = 0.1 s sampling).
Scenario two_drones(int levels = 4, Receiver receiver = Receiver::Sic);

/// Two inverted pendulum-on-a-cart systems, exact discretization of the
/// linearized dynamics at T = 0.01 s.
Scenario two_pendulums(int levels = 4, Receiver receiver = Receiver::Sic);

nlohmann::json scenario_to_json(const Scenario& sc);
Scenario scenario_from_json(const nlohmann::json& j);

/// Accepts a preset name (two_drones, two_pendulums) or a JSON file path.
Scenario load_scenario(const std::string& name_or_path);

}  // namespace remest
