#include "remest/scenario.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace remest {

using nlohmann::json;

Matrix expm(const Matrix& M, double tol) {
  const int n = static_cast<int>(M.rows());
  int squarings = 0;
  double norm = M.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.5) {
    norm *= 0.5;
    ++squarings;
  }
  const Matrix S = M / std::pow(2.0, squarings);
  Matrix term = Matrix::Identity(n, n);
  Matrix sum = term;
  for (int k = 1; k < 64; ++k) {
    term = (term * S) / k;
    sum += term;
    if (term.cwiseAbs().maxCoeff() < tol) break;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

namespace {

std::vector<double> power_levels(int levels, double pmax) {
  std::vector<double> ps(levels);
  for (int k = 0; k < levels; ++k) ps[k] = pmax * k / (levels - 1);
  return ps;
}

Scenario two_subsystems(const std::string& name, const Matrix& Ai, int levels,
                        Receiver receiver) {
  Scenario sc;
  sc.name = name;
  const int nb = static_cast<int>(Ai.rows());
  sc.model.A = Matrix::Zero(2 * nb, 2 * nb);
  sc.model.A.topLeftCorner(nb, nb) = Ai;
  sc.model.A.bottomRightCorner(nb, nb) = Ai;
  sc.model.Q = 0.1 * Matrix::Identity(2 * nb, 2 * nb);
  Matrix C1 = Matrix::Zero(1, 2 * nb);
  Matrix C2 = Matrix::Zero(1, 2 * nb);
  C1(0, 0) = 1.0;
  C2(0, nb) = 1.0;
  const Matrix R = Matrix::Identity(1, 1);
  sc.model.sensors = {{C1, R}, {C2, R}};
  sc.model.blocks = {nb, nb};

  sc.channel.gain = {1.0, 1.0};
  sc.channel.power_sets = {power_levels(levels, 1.0), power_levels(levels, 1.0)};
  sc.channel.sigma2 = 0.1;
  sc.channel.alpha = 0.75;
  sc.channel.receiver = receiver;

  sc.solver.beta = 0.9;
  sc.solver.mu = 0.1;

  sc.sim.beta = sc.solver.beta;
  sc.model.validate();
  sc.channel.validate();
  return sc;
}

}  // namespace

Scenario two_drones(int levels, Receiver receiver) {
  const double T = 0.1;
  Matrix Ai(2, 2);
  Ai << 1.0, T, 0.0, 1.0;
  return two_subsystems("two_drones", Ai, levels, receiver);
}

Scenario two_pendulums(int levels, Receiver receiver) {
  const double T = 0.01, g = 9.81, ell = 0.2;
  Matrix Ac(2, 2);
  Ac << 0.0, 1.0, g / ell, 0.0;
  return two_subsystems("two_pendulums", expm(Ac * T), levels, receiver);
}

namespace {

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError(field, "expected a 2-D array");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols) throw ConfigError(field, "ragged rows");
    for (int c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) throw ConfigError(field, "non-numeric entry");
      M(i, c) = j[i][c].get<double>();
    }
  }
  return M;
}

template <typename T>
T get_field(const json& j, const std::string& key, const T& fallback,
            const std::string& display = "") {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(display.empty() ? key : display, "wrong type");
  }
}

template <typename T>
T require_field(const json& j, const std::string& key, const std::string& display = "") {
  const std::string name = display.empty() ? key : display;
  if (!j.contains(key)) throw ConfigError(name, "missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(name, "wrong type");
  }
}

}  // namespace

json scenario_to_json(const Scenario& sc) {
  json j;
  j["name"] = sc.name;
  json model;
  model["A"] = matrix_to_json(sc.model.A);
  model["Q"] = matrix_to_json(sc.model.Q);
  json sensors = json::array();
  for (const auto& s : sc.model.sensors)
    sensors.push_back({{"C", matrix_to_json(s.C)}, {"R", matrix_to_json(s.R)}});
  model["sensors"] = sensors;
  if (!sc.model.blocks.empty()) model["blocks"] = sc.model.blocks;
  j["model"] = model;

  json ch;
  ch["gain"] = sc.channel.gain;
  ch["power_sets"] = sc.channel.power_sets;
  ch["sigma2"] = sc.channel.sigma2;
  ch["alpha"] = sc.channel.alpha;
  ch["receiver"] = sc.channel.receiver == Receiver::Sic ? "sic" : "simple";
  j["channel"] = ch;

  json so;
  so["beta"] = sc.solver.beta;
  so["mu"] = sc.solver.mu;
  so["n_centroids"] = sc.solver.n_centroids;
  so["vi_tol"] = sc.solver.vi_tol;
  so["vi_max_iters"] = sc.solver.vi_max_iters;
  so["n_paths"] = sc.solver.n_paths;
  so["path_length"] = sc.solver.path_length;
  so["seed"] = sc.solver.seed;
  so["mc_samples"] = sc.solver.mc_samples;
  j["solver"] = so;

  json si;
  si["horizon"] = sc.sim.horizon;
  si["n_runs"] = sc.sim.n_runs;
  si["seed"] = sc.sim.seed;
  si["burn_in"] = sc.sim.burn_in;
  si["record_trace"] = sc.sim.record_trace;
  si["beta"] = sc.sim.beta;
  j["sim"] = si;
  return j;
}

Scenario scenario_from_json(const json& j) {
  Scenario sc;
  sc.name = get_field<std::string>(j, "name", "custom");
  if (!j.contains("model")) throw ConfigError("model", "missing");
  const json& model = j.at("model");
  sc.model.A = matrix_from_json(require_field<json>(model, "A", "model.A"), "model.A");
  sc.model.Q = matrix_from_json(require_field<json>(model, "Q", "model.Q"), "model.Q");
  if (!model.contains("sensors") || !model.at("sensors").is_array() ||
      model.at("sensors").empty())
    throw ConfigError("model.sensors", "missing or empty");
  for (const auto& s : model.at("sensors"))
    sc.model.sensors.push_back({matrix_from_json(require_field<json>(s, "C", "model.sensors.C"), "model.sensors.C"),
                                matrix_from_json(require_field<json>(s, "R", "model.sensors.R"), "model.sensors.R")});
  sc.model.blocks = get_field<std::vector<int>>(model, "blocks", {});

  if (!j.contains("channel")) throw ConfigError("channel", "missing");
  const json& ch = j.at("channel");
  sc.channel.gain = require_field<std::vector<double>>(ch, "gain", "channel.gain");
  sc.channel.power_sets = require_field<std::vector<std::vector<double>>>(ch, "power_sets", "channel.power_sets");
  sc.channel.sigma2 = get_field<double>(ch, "sigma2", 0.0);
  sc.channel.alpha = require_field<double>(ch, "alpha", "channel.alpha");
  const std::string rcv = get_field<std::string>(ch, "receiver", std::string("simple"), "channel.receiver");
  if (rcv != "simple" && rcv != "sic") throw ConfigError("channel.receiver", "must be 'simple' or 'sic'");
  sc.channel.receiver = rcv == "sic" ? Receiver::Sic : Receiver::Simple;

  const json so = get_field<json>(j, "solver", json::object());
  sc.solver.beta = get_field<double>(so, "beta", 0.9);
  sc.solver.mu = get_field<double>(so, "mu", 0.1);
  sc.solver.n_centroids = get_field<int>(so, "n_centroids", 200);
  sc.solver.vi_tol = get_field<double>(so, "vi_tol", -1.0);
  sc.solver.vi_max_iters = get_field<int>(so, "vi_max_iters", 20000);
  sc.solver.n_paths = get_field<int>(so, "n_paths", 50);
  sc.solver.path_length = get_field<int>(so, "path_length", 400);
  sc.solver.seed = get_field<std::uint64_t>(so, "seed", 1);
  sc.solver.mc_samples = get_field<std::size_t>(so, "mc_samples", 1000000);

  const json si = get_field<json>(j, "sim", json::object());
  sc.sim.horizon = get_field<int>(si, "horizon", 100000);
  sc.sim.n_runs = get_field<int>(si, "n_runs", 10);
  sc.sim.seed = get_field<std::uint64_t>(si, "seed", 1);
  sc.sim.burn_in = get_field<double>(si, "burn_in", 0.1);
  sc.sim.record_trace = get_field<bool>(si, "record_trace", false);
  sc.sim.beta = get_field<double>(si, "beta", sc.solver.beta);

  try {
    sc.model.validate();
  } catch (const std::exception& e) {
    throw ConfigError("model", e.what());
  }
  try {
    sc.channel.validate();
  } catch (const std::exception& e) {
    throw ConfigError("channel", e.what());
  }
  if (static_cast<int>(sc.channel.power_sets.size()) != sc.model.n_sensors())
    throw ConfigError("channel.power_sets", "sensor count differs from the model");
  try {
    sc.sim.validate();
  } catch (const std::exception& e) {
    throw ConfigError("sim", e.what());
  }
  return sc;
}

namespace {

// Preset constants are asserted on load so a drifting preset fails loudly.
void assert_close(double a, double b, const char* what) {
  if (std::abs(a - b) > 1e-12)
    throw std::logic_error(std::string("preset self-check failed: ") + what);
}

void check_preset(const Scenario& sc) {
  assert_close(sc.channel.alpha, 0.75, "alpha");
  assert_close(sc.channel.sigma2, 0.1, "sigma2");
  assert_close(sc.channel.gain[0], 1.0, "gain");
  assert_close(sc.channel.power_sets[0].back(), 1.0, "max power");
  assert_close(sc.solver.beta, 0.9, "beta");
  assert_close(sc.model.Q(0, 0), 0.1, "Q");
  if (sc.name == "two_drones") {
    assert_close(sc.model.A(0, 1), 0.1, "drone T");
    assert_close(sc.model.A(0, 0), 1.0, "drone A diagonal");
  }
}

}  // namespace

Scenario load_scenario(const std::string& name_or_path) {
  if (name_or_path == "two_drones" || name_or_path == "two_pendulums") {
    Scenario sc =
        name_or_path == "two_drones" ? two_drones() : two_pendulums();
    check_preset(sc);
    return sc;
  }
  std::ifstream is(name_or_path);
  if (!is) throw ConfigError("config", "cannot open " + name_or_path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace remest
