#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "episir/allocator.hpp"
#include "episir/bound.hpp"
#include "episir/config.hpp"
#include "episir/exact_oracle.hpp"
#include "episir/simulator.hpp"

namespace episir {

namespace detail {

// Shortest text that reads back to the same double; fixed so re-runs are byte-identical.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline nlohmann::json number_or_null(std::optional<double> x) {
  return x && std::isfinite(*x) ? nlohmann::json(*x) : nlohmann::json(nullptr);
}

inline std::filesystem::path prepare_out(const ExperimentConfig& c) {
  const auto dir = c.out_dir();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

inline std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  return out;
}

inline void write_json(const std::filesystem::path& file, const nlohmann::json& j) {
  auto out = open_out(file);
  out << j.dump(2) << '\n';
  if (!out) throw ConfigError("write failed: " + file.string());
}

struct Instance {
  Graph graph;
  std::vector<std::size_t> infected;
};

inline Instance load_instance(const ExperimentConfig& c) {
  c.validate();
  Graph g = load_graph(c);
  auto infected = resolve_infected(c, g.node_count());
  return {std::move(g), std::move(infected)};
}

inline ComparisonSystem system_for(const Graph& g, const EpidemicParams& p) {
  return p.has_isolation() ? build_isolation_system(g, p) : build_sir_system(g, p);
}

inline SolveOptions solve_options(const ExperimentConfig& c) {
  SolveOptions o;
  o.solver.tol = c.solver_tol;
  o.solver.max_newton = c.max_newton;
  return o;
}

inline AllocationProblem build_for(const ExperimentConfig& c, const Graph& g, const std::vector<std::size_t>& infected,
                                   const CostModel& costs) {
  AllocatorOptions opt;
  opt.epsilon = c.epsilon;
  if (c.mode == Mode::plain) return build_problem1(g, infected, costs, LambdaTarget::minimize(), opt);
  return build_problem2(g, infected, costs, fit_erlang_bounds(g.node_count(), c.phases, costs), c.phases, LambdaTarget::minimize(), opt);
}

}  // namespace detail

// ---- simulate -------------------------------------------------------------

struct SimulateReport {
  LambdaEstimate estimate;
  std::size_t trajectory_rows = 0;
};

/// One recorded trajectory (replica 0 of the seed) to counts.csv and the
/// Monte Carlo estimate of lambda over all replicas to lambda.json.
inline SimulateReport cmd_simulate(const ExperimentConfig& c) {
  const auto inst = detail::load_instance(c);
  const auto params = make_params(c, inst.graph.node_count(), inst.infected);
  params.validate(inst.graph);
  const auto dir = detail::prepare_out(c);

  Stream rng(c.seed, 0);
  const SimOutcome traj = params.has_isolation() ? simulate_sir_isolation(inst.graph, params, rng) : simulate_sir(inst.graph, params, rng);
  {
    auto out = detail::open_out(dir / "counts.csv");
    out << "t,sigma_S,sigma_I,sigma_R\n";
    for (const auto& row : traj.counts_series)
      out << detail::fmt(row.t) << ',' << row.susceptible << ',' << row.infected << ',' << row.removed << '\n';
  }
  SimulateReport r;
  r.trajectory_rows = traj.counts_series.size();
  r.estimate = estimate_lambda(inst.graph, params, c.replicas, c.seed);
  detail::write_json(dir / "lambda.json", {{"mode", to_string(c.mode)},
                                           {"mean", r.estimate.mean},
                                           {"stderr", r.estimate.std_error},
                                           {"replicas", r.estimate.replicas},
                                           {"seed", r.estimate.seed},
                                           {"sigma_I0", inst.infected.size()}});
  return r;
}

// ---- bound ----------------------------------------------------------------

struct BoundReport {
  bool hurwitz = false;
  std::optional<double> bound;
  double certified = std::numeric_limits<double>::infinity();
  bool certificate_verified = false;
};

/// Comparison-system bound for the configured rates, with a certificate
/// checked independently of the solve that produced it.
inline BoundReport cmd_bound(const ExperimentConfig& c) {
  const auto inst = detail::load_instance(c);
  const auto params = make_params(c, inst.graph.node_count(), inst.infected);
  params.validate(inst.graph);
  const auto sys = detail::system_for(inst.graph, params);
  BoundReport r;
  r.hurwitz = is_hurwitz_metzler(sys.matrix);
  r.bound = lambda_bound(sys);
  nlohmann::json cert = nullptr;
  if (r.bound) {
    if (auto v = certificate_for(sys, c.epsilon / 2.0)) {
      r.certified = v->dot(sys.initial) / (1.0 - c.epsilon) - static_cast<double>(sys.sigma_I0);
      r.certificate_verified = verify_certificate(sys, *v, r.certified, c.epsilon / 2.0);
      cert = std::vector<double>(v->data(), v->data() + v->size());
    }
  }
  const auto dir = detail::prepare_out(c);
  detail::write_json(dir / "bound.json", {{"mode", to_string(c.mode)},
                                          {"hurwitz", r.hurwitz},
                                          {"lambda_bound", detail::number_or_null(r.bound)},
                                          {"lambda_bar", detail::number_or_null(r.certified)},
                                          {"certificate_verified", r.certificate_verified},
                                          {"certificate_v", cert},
                                          {"sigma_I0", sys.sigma_I0}});
  return r;
}

// ---- optimize -------------------------------------------------------------

struct SweepPoint {
  double budget = 0;
  std::optional<double> lambda_bar;  // empty when infeasible at this budget
};

struct OptimizeReport {
  Allocation allocation;
  std::vector<SweepPoint> sweep;
};

/// Optimal allocation for the configured budget (allocation.json,
/// allocation.csv, investment.csv) and, when configured, lambda_bar over a
/// budget sweep (budget_sweep.csv). Throws ModelError / InfeasibleError when
/// the main budget admits no certified allocation.
inline OptimizeReport cmd_optimize(const ExperimentConfig& c) {
  const auto inst = detail::load_instance(c);
  const CostModel costs = make_costs(c);
  OptimizeReport r;
  r.allocation = solve_allocation(inst.graph, detail::build_for(c, inst.graph, inst.infected, costs), detail::solve_options(c));
  const auto dir = detail::prepare_out(c);
  auto j = to_json(r.allocation, costs);
  j["infected"] = inst.infected;
  j["certificate_verified"] = true;
  detail::write_json(dir / "allocation.json", j);
  {
    auto out = detail::open_out(dir / "allocation.csv");
    write_allocation_csv(out, inst.graph, r.allocation, costs);
  }
  {
    const auto deg = degrees(inst.graph);
    auto out = detail::open_out(dir / "investment.csv");
    out << "node,degree,investment\n";
    for (std::size_t i = 0; i < deg.size(); ++i) {
      const auto& a = r.allocation;
      const double spend = costs.prevention(a.beta[i]) + (a.mode == Mode::plain ? costs.correction(a.delta[i]) : costs.isolation(a.gamma[i]));
      out << i << ',' << deg[i] << ',' << detail::fmt(spend) << '\n';
    }
  }
  if (!c.budget_sweep.empty()) {
    auto out = detail::open_out(dir / "budget_sweep.csv");
    out << "budget,lambda_bar,status\n";
    for (double b : c.budget_sweep) {
      CostModel cb = costs;
      cb.budget = b;
      SweepPoint pt{b, std::nullopt};
      try {
        pt.lambda_bar = solve_allocation(inst.graph, detail::build_for(c, inst.graph, inst.infected, cb), detail::solve_options(c)).lambda_bar;
      } catch (const ModelError&) {
      }
      r.sweep.push_back(pt);
      out << detail::fmt(b) << ',' << (pt.lambda_bar ? detail::fmt(*pt.lambda_bar) : "") << ',' << (pt.lambda_bar ? "optimal" : "infeasible")
          << '\n';
    }
  }
  return r;
}

// ---- validate -------------------------------------------------------------

struct ValidateReport {
  double exact = 0;
  LambdaEstimate monte_carlo;
  std::optional<double> bound;
  bool dominance = false;  // exact <= bound (vacuous when no bound exists)
  bool agreement = false;  // |exact - MC| <= 4 stderr
  bool pass() const { return dominance && agreement; }
};

/// Exact lambda, Monte Carlo lambda and the certified bound on one small instance.
inline ValidateReport cmd_validate(const ExperimentConfig& c) {
  const auto inst = detail::load_instance(c);
  const auto params = make_params(c, inst.graph.node_count(), inst.infected);
  params.validate(inst.graph);
  ValidateReport r;
  r.exact = exact_lambda(inst.graph, params);
  r.monte_carlo = estimate_lambda(inst.graph, params, c.replicas, c.seed);
  r.bound = lambda_bound(detail::system_for(inst.graph, params));
  r.dominance = !r.bound || r.exact <= *r.bound + 1e-10 * std::max(1.0, *r.bound);
  r.agreement = std::abs(r.exact - r.monte_carlo.mean) <= 4.0 * r.monte_carlo.std_error + 1e-12;

  const auto dir = detail::prepare_out(c);
  {
    auto out = detail::open_out(dir / "validation.csv");
    out << "exact_lambda,mc_mean,mc_stderr,lambda_bound,dominance,agreement,result\n";
    out << detail::fmt(r.exact) << ',' << detail::fmt(r.monte_carlo.mean) << ',' << detail::fmt(r.monte_carlo.std_error) << ','
        << (r.bound ? detail::fmt(*r.bound) : "inf") << ',' << (r.dominance ? "pass" : "fail") << ',' << (r.agreement ? "pass" : "fail") << ','
        << (r.pass() ? "pass" : "fail") << '\n';
  }
  detail::write_json(dir / "validation.json", {{"exact_lambda", r.exact},
                                               {"mc_mean", r.monte_carlo.mean},
                                               {"mc_stderr", r.monte_carlo.std_error},
                                               {"replicas", r.monte_carlo.replicas},
                                               {"seed", r.monte_carlo.seed},
                                               {"lambda_bound", detail::number_or_null(r.bound)},
                                               {"dominance", r.dominance},
                                               {"agreement", r.agreement},
                                               {"pass", r.pass()}});
  return r;
}

// ---- compare --------------------------------------------------------------

struct CompareRow {
  Allocation allocation;
  LambdaEstimate estimate;
};

struct CompareReport {
  std::vector<CompareRow> rows;  // optimized first
};

/// Scores the optimized allocation against the uniform split and (plain mode)
/// the SIS-spectral allocation by Monte Carlo at the same seed.
inline CompareReport cmd_compare(const ExperimentConfig& c) {
  const auto inst = detail::load_instance(c);
  const CostModel costs = make_costs(c);
  std::vector<Allocation> allocs;
  allocs.push_back(solve_allocation(inst.graph, detail::build_for(c, inst.graph, inst.infected, costs), detail::solve_options(c)));
  allocs.push_back(baseline_uniform(inst.graph, inst.infected, costs, c.mode, c.phases, c.epsilon));
  if (c.mode == Mode::plain) allocs.push_back(baseline_sis_spectral(inst.graph, inst.infected, costs, detail::solve_options(c), c.epsilon));

  CompareReport r;
  for (auto& a : allocs) r.rows.push_back({a, estimate_lambda(inst.graph, a.params(inst.infected), c.replicas, c.seed)});

  const auto dir = detail::prepare_out(c);
  {
    auto out = detail::open_out(dir / "comparison.csv");
    out << "strategy,lambda_mean,lambda_stderr\n";
    for (const auto& row : r.rows)
      out << row.allocation.strategy << ',' << detail::fmt(row.estimate.mean) << ',' << detail::fmt(row.estimate.std_error) << '\n';
  }
  nlohmann::json strategies = nlohmann::json::array();
  const double best = r.rows.front().estimate.mean;
  for (const auto& row : r.rows) {
    const double m = row.estimate.mean;
    strategies.push_back({{"strategy", row.allocation.strategy},
                          {"lambda_mean", m},
                          {"lambda_stderr", row.estimate.std_error},
                          {"lambda_bar", detail::number_or_null(row.allocation.lambda_bar)},
                          {"lambda_bound", detail::number_or_null(row.allocation.bound)},
                          {"total_cost", row.allocation.total_cost},
                          // relative reduction of the optimized mean against this strategy
                          {"improvement", m > 0 ? nlohmann::json(1.0 - best / m) : nlohmann::json(nullptr)}});
  }
  detail::write_json(dir / "comparison.json", {{"mode", to_string(c.mode)},
                                               {"replicas", c.replicas},
                                               {"seed", c.seed},
                                               {"budget", c.budget},
                                               {"infected", inst.infected},
                                               {"strategies", strategies}});
  return r;
}

}  // namespace episir
