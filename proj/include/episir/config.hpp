#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "episir/allocator.hpp"
#include "episir/errors.hpp"
#include "episir/graph.hpp"
#include "episir/params.hpp"
#include "episir/rng.hpp"

namespace episir {

/// Where the contact graph comes from: an edge-list file, or one of the
/// built-in generators ("erdos_renyi", "synthetic", "path", "star",
/// "complete", "empty").
struct GraphSpec {
  std::string path;
  std::string generator;
  std::size_t n = 0;
  double p = 0.0;    // erdos_renyi edge probability
  double rho = 0.0;  // synthetic target spectral radius
  std::uint64_t seed = 0;
  friend bool operator==(const GraphSpec&, const GraphSpec&) = default;
};

/// Initially infected nodes: an explicit list, or `random_count` distinct nodes drawn with `random_seed`.
struct InfectedSpec {
  std::vector<std::size_t> nodes;
  std::size_t random_count = 0;
  std::uint64_t random_seed = 0;
  friend bool operator==(const InfectedSpec&, const InfectedSpec&) = default;
};

struct ExperimentConfig {
  GraphSpec graph;
  InfectedSpec infected;
  Mode mode = Mode::plain;
  // Rates for simulate / bound / validate; one entry means the same value on every node.
  std::vector<double> beta{0.2};
  std::vector<double> delta{0.5};
  std::vector<double> isolation_mean{1.0};
  std::size_t phases = 2;
  // Allocation inputs
  gp::Box beta_box{0.00266, 0.0133};
  gp::Box delta_box{0.05, 0.1};
  gp::Box gamma_box{2.0, 20.0};
  std::optional<std::array<double, 6>> cost_constants;  // c1..c6; normalized costs when absent
  double budget = 1.0;
  double fixed_delta = 0.1;
  std::vector<double> budget_sweep;
  double solver_tol = 1e-8;
  std::size_t max_newton = 500;
  double epsilon = 1e-6;
  // Monte Carlo
  std::size_t replicas = 10000;
  std::uint64_t seed = 1;
  std::string out = "out";
  // Directory that relative paths are resolved against; not serialized.
  std::filesystem::path base_dir;

  bool operator==(const ExperimentConfig& o) const {
    return graph == o.graph && infected == o.infected && mode == o.mode && beta == o.beta && delta == o.delta &&
           isolation_mean == o.isolation_mean && phases == o.phases && beta_box.lo == o.beta_box.lo && beta_box.hi == o.beta_box.hi &&
           delta_box.lo == o.delta_box.lo && delta_box.hi == o.delta_box.hi && gamma_box.lo == o.gamma_box.lo &&
           gamma_box.hi == o.gamma_box.hi && cost_constants == o.cost_constants && budget == o.budget && fixed_delta == o.fixed_delta &&
           budget_sweep == o.budget_sweep && solver_tol == o.solver_tol && max_newton == o.max_newton && epsilon == o.epsilon &&
           replicas == o.replicas && seed == o.seed && out == o.out;
  }

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  }

  std::filesystem::path out_dir() const { return resolve(out); }

  void validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
    if (graph.path.empty() == graph.generator.empty()) fail("graph needs exactly one of a file path or a generator");
    if (!graph.path.empty() && !std::filesystem::exists(resolve(graph.path)))
      fail("graph file not found: " + resolve(graph.path).string());
    if (!graph.generator.empty()) {
      static const std::array<const char*, 6> kinds{"erdos_renyi", "synthetic", "path", "star", "complete", "empty"};
      if (std::find(kinds.begin(), kinds.end(), graph.generator) == kinds.end()) fail("unknown graph generator '" + graph.generator + "'");
      if (graph.n == 0) fail("generated graph needs n >= 1");
      if (graph.generator == "erdos_renyi" && !(graph.p >= 0 && graph.p <= 1)) fail("erdos_renyi p must lie in [0, 1]");
      if (graph.generator == "synthetic" && !(graph.rho > 0)) fail("synthetic graph needs rho > 0");
    }
    if (infected.nodes.empty() == (infected.random_count == 0)) fail("infected needs exactly one of a node list or a random count");
    auto positive = [&](const std::vector<double>& v, const char* name) {
      if (v.empty()) fail(std::string(name) + " must not be empty");
      for (double x : v)
        if (!(x > 0) || !std::isfinite(x)) fail(std::string(name) + " entries must be positive and finite");
    };
    positive(beta, "beta");
    positive(delta, "delta");
    positive(isolation_mean, "isolation_mean");
    if (phases == 0) fail("phases must be >= 1");
    for (auto [name, b] : {std::pair{"beta_box", beta_box}, {"delta_box", delta_box}, {"gamma_box", gamma_box}})
      if (!(b.lo > 0) || !(b.hi >= b.lo) || !std::isfinite(b.hi)) fail(std::string(name) + " must satisfy 0 < lo <= hi");
    if (!(budget >= 0) || !std::isfinite(budget)) fail("budget must be non-negative");
    for (double b : budget_sweep)
      if (!(b >= 0) || !std::isfinite(b)) fail("budget_sweep entries must be non-negative");
    if (!(fixed_delta > 0)) fail("fixed_delta must be positive");
    if (!(solver_tol > 0) || !(solver_tol < 1)) fail("solver tol must lie in (0, 1)");
    if (max_newton == 0) fail("solver max_newton must be >= 1");
    if (!(epsilon > 0) || !(epsilon < 0.5)) fail("solver epsilon must lie in (0, 0.5)");
    if (replicas == 0) fail("replicas must be >= 1");
    if (out.empty()) fail("out must not be empty");
  }
};

inline void to_json(nlohmann::json& j, const GraphSpec& g) {
  if (!g.path.empty()) {
    j = g.path;
    return;
  }
  j = {{"generator", g.generator}, {"n", g.n}, {"seed", g.seed}};
  if (g.generator == "erdos_renyi") j["p"] = g.p;
  if (g.generator == "synthetic") j["rho"] = g.rho;
}

inline void from_json(const nlohmann::json& j, GraphSpec& g) {
  g = GraphSpec{};
  if (j.is_string()) {
    g.path = j.get<std::string>();
    return;
  }
  g.generator = j.at("generator").get<std::string>();
  g.n = j.at("n").get<std::size_t>();
  g.p = j.value("p", 0.0);
  g.rho = j.value("rho", 0.0);
  g.seed = j.value("seed", std::uint64_t{0});
}

inline void to_json(nlohmann::json& j, const InfectedSpec& s) {
  if (s.random_count > 0)
    j = {{"random", s.random_count}, {"seed", s.random_seed}};
  else
    j = s.nodes;
}

inline void from_json(const nlohmann::json& j, InfectedSpec& s) {
  s = InfectedSpec{};
  if (j.is_array()) {
    s.nodes = j.get<std::vector<std::size_t>>();
    return;
  }
  s.random_count = j.at("random").get<std::size_t>();
  s.random_seed = j.value("seed", std::uint64_t{0});
}

namespace detail {

inline std::vector<double> scalar_or_list(const nlohmann::json& j) {
  if (j.is_number()) return {j.get<double>()};
  return j.get<std::vector<double>>();
}

inline nlohmann::json scalar_or_list(const std::vector<double>& v) {
  if (v.size() == 1) return v.front();
  return v;
}

inline gp::Box box_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw ConfigError("config: boxes are [lo, hi] pairs");
  return {v[0], v[1]};
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json::object();
  j["graph"] = c.graph;
  j["infected"] = c.infected;
  j["mode"] = to_string(c.mode);
  j["rates"] = {{"beta", detail::scalar_or_list(c.beta)},
                {"delta", detail::scalar_or_list(c.delta)},
                {"isolation_mean", detail::scalar_or_list(c.isolation_mean)}};
  j["phases"] = c.phases;
  j["boxes"] = {{"beta", {c.beta_box.lo, c.beta_box.hi}}, {"delta", {c.delta_box.lo, c.delta_box.hi}}, {"gamma", {c.gamma_box.lo, c.gamma_box.hi}}};
  if (c.cost_constants) j["costs"] = *c.cost_constants;
  j["budget"] = c.budget;
  j["fixed_delta"] = c.fixed_delta;
  j["budget_sweep"] = c.budget_sweep;
  j["solver"] = {{"tol", c.solver_tol}, {"max_newton", c.max_newton}, {"epsilon", c.epsilon}};
  j["monte_carlo"] = {{"replicas", c.replicas}, {"seed", c.seed}};
  j["out"] = c.out;
}

/// Missing keys keep their defaults; unknown keys are rejected so typos surface.
inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  static const std::array<const char*, 13> known{"graph", "infected", "mode", "rates", "phases", "boxes", "costs",
                                                 "budget", "fixed_delta", "budget_sweep", "solver", "monte_carlo", "out"};
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) throw ConfigError("config: unknown key '" + it.key() + "'");
  try {
    const auto base = c.base_dir;
    c = ExperimentConfig{};
    c.base_dir = base;
    c.graph = j.at("graph").get<GraphSpec>();
    c.infected = j.at("infected").get<InfectedSpec>();
    if (j.contains("mode")) {
      const auto m = j["mode"].get<std::string>();
      if (m != "plain" && m != "isolation") throw ConfigError("config: mode must be plain or isolation");
      c.mode = m == "plain" ? Mode::plain : Mode::isolation;
    }
    if (j.contains("rates")) {
      const auto& r = j["rates"];
      if (r.contains("beta")) c.beta = detail::scalar_or_list(r["beta"]);
      if (r.contains("delta")) c.delta = detail::scalar_or_list(r["delta"]);
      if (r.contains("isolation_mean")) c.isolation_mean = detail::scalar_or_list(r["isolation_mean"]);
    }
    c.phases = j.value("phases", c.phases);
    if (j.contains("boxes")) {
      const auto& b = j["boxes"];
      if (b.contains("beta")) c.beta_box = detail::box_from(b["beta"]);
      if (b.contains("delta")) c.delta_box = detail::box_from(b["delta"]);
      if (b.contains("gamma")) c.gamma_box = detail::box_from(b["gamma"]);
    }
    if (j.contains("costs")) c.cost_constants = j["costs"].get<std::array<double, 6>>();
    c.budget = j.value("budget", c.budget);
    c.fixed_delta = j.value("fixed_delta", c.fixed_delta);
    c.budget_sweep = j.value("budget_sweep", c.budget_sweep);
    if (j.contains("solver")) {
      const auto& s = j["solver"];
      c.solver_tol = s.value("tol", c.solver_tol);
      c.max_newton = s.value("max_newton", c.max_newton);
      c.epsilon = s.value("epsilon", c.epsilon);
    }
    if (j.contains("monte_carlo")) {
      const auto& m = j["monte_carlo"];
      c.replicas = m.value("replicas", c.replicas);
      c.seed = m.value("seed", c.seed);
    }
    c.out = j.value("out", c.out);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

/// Reads a config file; relative paths inside it resolve against its directory.
inline ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + file.string() + ": " + e.what());
  }
  ExperimentConfig c;
  c.base_dir = file.parent_path();
  from_json(j, c);
  return c;
}

inline Graph load_graph(const ExperimentConfig& c) {
  const auto& s = c.graph;
  if (!s.path.empty()) {
    const auto file = c.resolve(s.path);
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open graph file " + file.string());
    try {
      return load_edge_list(in);
    } catch (const ParseError& e) {
      throw ConfigError(file.string() + ": " + e.what());
    }
  }
  if (s.generator == "erdos_renyi") return graphs::erdos_renyi(s.n, s.p, s.seed);
  if (s.generator == "synthetic") return graphs::synthetic_contact_graph(s.n, s.rho, s.seed);
  if (s.generator == "path") return graphs::path(s.n);
  if (s.generator == "star") return graphs::star(s.n - 1);
  if (s.generator == "complete") return graphs::complete(s.n);
  if (s.generator == "empty") return graphs::empty(s.n);
  throw ConfigError("config: unknown graph generator '" + s.generator + "'");
}

/// Sorted infected node list; a random spec draws distinct nodes by partial Fisher-Yates.
inline std::vector<std::size_t> resolve_infected(const ExperimentConfig& c, std::size_t n) {
  std::vector<std::size_t> nodes;
  if (c.infected.random_count > 0) {
    if (c.infected.random_count > n) throw ConfigError("config: cannot infect more nodes than the graph has");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    Stream rng(c.infected.random_seed);
    for (std::size_t k = 0; k < c.infected.random_count; ++k) std::swap(pool[k], pool[k + rng() % (n - k)]);
    nodes.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(c.infected.random_count));
  } else {
    nodes = c.infected.nodes;
  }
  std::sort(nodes.begin(), nodes.end());
  if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) throw ConfigError("config: infected nodes repeat");
  if (!nodes.empty() && nodes.back() >= n) throw ConfigError("config: infected node " + std::to_string(nodes.back()) + " is out of range");
  return nodes;
}

/// Epidemic parameters from the configured rates (isolation laws are Erlang with `phases` phases).
inline EpidemicParams make_params(const ExperimentConfig& c, std::size_t n, const std::vector<std::size_t>& infected) {
  auto expand = [&](const std::vector<double>& v, const char* name) {
    if (v.size() == 1) return std::vector<double>(n, v.front());
    if (v.size() != n) throw ConfigError(std::string("config: ") + name + " needs 1 or " + std::to_string(n) + " entries");
    return v;
  };
  EpidemicParams p{expand(c.beta, "beta"), expand(c.delta, "delta"), std::nullopt, infected};
  if (c.mode == Mode::isolation) {
    std::vector<PhaseType> laws;
    for (double m : expand(c.isolation_mean, "isolation_mean")) laws.push_back(erlang({c.phases, m}));
    p.isolation = std::move(laws);
  }
  return p;
}

inline CostModel make_costs(const ExperimentConfig& c) {
  if (!c.cost_constants) return CostModel::normalized(c.beta_box, c.delta_box, c.gamma_box, c.budget, c.fixed_delta);
  CostModel m;
  m.beta_box = c.beta_box;
  m.delta_box = c.delta_box;
  m.gamma_box = c.gamma_box;
  const auto& k = *c.cost_constants;
  m.c1 = k[0], m.c2 = k[1], m.c3 = k[2], m.c4 = k[3], m.c5 = k[4], m.c6 = k[5];
  m.budget = c.budget;
  m.fixed_delta = c.fixed_delta;
  m.validate();
  return m;
}

}  // namespace episir
