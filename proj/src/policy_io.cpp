#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "remest/policy.hpp"

namespace remest {

namespace {

constexpr const char* kMagic = "remest-policy";
constexpr int kVersion = 1;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string expect_key(std::istream& is, const std::string& key) {
  std::string k, v;
  if (!(is >> k) || k != key || !(is >> v))
    throw std::runtime_error("policy file: expected field '" + key + "'");
  return v;
}

}  // namespace

void save_policy(std::ostream& os, const PolicyTable& table, const ActionSet& as) {
  const int D = static_cast<int>(table.centroids.size());
  const int n = D > 0 ? static_cast<int>(table.centroids[0].rows()) : 0;
  const int N = as.channel.n_sensors();
  os << kMagic << ' ' << kVersion << '\n';
  os << "n " << n << '\n';
  os << "sensors " << N << '\n';
  os << "D " << D << '\n';
  os << "beta " << fmt(table.config.beta) << '\n';
  os << "mu " << fmt(table.config.mu) << '\n';
  os << "receiver " << (table.receiver == Receiver::Sic ? "sic" : "simple") << '\n';
  os << "seed " << table.config.seed << '\n';
  os << "iterations " << table.iterations << '\n';
  os << "final_delta " << fmt(table.final_delta) << '\n';
  os << "converged " << (table.converged ? 1 : 0) << '\n';
  for (int c = 0; c < D; ++c) {
    os << "centroid";
    const Matrix& P = table.centroids[c];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) os << ' ' << fmt(P(i, j));
    os << '\n';
    os << "action";
    for (int i : as.power_index[table.action_index[c]]) os << ' ' << i;
    os << '\n';
    os << "value " << fmt(table.value[c]) << '\n';
  }
}

void save_policy_file(const std::string& path, const PolicyTable& table, const ActionSet& as) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open policy file for writing: " + path);
  save_policy(os, table, as);
}

PolicyTable load_policy(std::istream& is, const ActionSet& as) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kMagic || version != kVersion)
    throw std::runtime_error("policy file: bad header");
  PolicyTable table;
  const int n = std::stoi(expect_key(is, "n"));
  const int N = std::stoi(expect_key(is, "sensors"));
  const int D = std::stoi(expect_key(is, "D"));
  table.config.beta = std::stod(expect_key(is, "beta"));
  table.config.mu = std::stod(expect_key(is, "mu"));
  const std::string rcv = expect_key(is, "receiver");
  table.receiver = rcv == "sic" ? Receiver::Sic : Receiver::Simple;
  table.config.seed = std::stoull(expect_key(is, "seed"));
  table.iterations = std::stoi(expect_key(is, "iterations"));
  table.final_delta = std::stod(expect_key(is, "final_delta"));
  table.converged = std::stoi(expect_key(is, "converged")) != 0;

  if (N != as.channel.n_sensors())
    throw std::runtime_error("policy file: sensor count differs from the action set");
  if ((table.receiver == Receiver::Sic) != (as.channel.receiver == Receiver::Sic))
    throw std::runtime_error("policy file: receiver kind differs from the action set");

  table.centroids.reserve(D);
  table.action_index.reserve(D);
  table.value.reserve(D);
  for (int c = 0; c < D; ++c) {
    std::string tag;
    if (!(is >> tag) || tag != "centroid") throw std::runtime_error("policy file: truncated");
    Matrix P(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (!(is >> P(i, j))) throw std::runtime_error("policy file: bad centroid entry");
    table.centroids.push_back(P);
    if (!(is >> tag) || tag != "action") throw std::runtime_error("policy file: truncated");
    std::vector<int> idx(N);
    for (int i = 0; i < N; ++i)
      if (!(is >> idx[i])) throw std::runtime_error("policy file: bad action index");
    int found = -1;
    for (int a = 0; a < as.size(); ++a)
      if (as.power_index[a] == idx) {
        found = a;
        break;
      }
    if (found < 0) throw std::runtime_error("policy file: action not present in the action set");
    table.action_index.push_back(found);
    table.value.push_back(std::stod(expect_key(is, "value")));
  }
  return table;
}

PolicyTable load_policy_file(const std::string& path, const ActionSet& as) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open policy file: " + path);
  return load_policy(is, as);
}

}  // namespace remest
