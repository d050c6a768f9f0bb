#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "episir/bound.hpp"
#include "episir/errors.hpp"
#include "episir/gp.hpp"
#include "episir/graph.hpp"
#include "episir/params.hpp"
#include "episir/phase_type.hpp"

namespace episir {

enum class Mode { plain, isolation };

inline const char* to_string(Mode m) { return m == Mode::plain ? "plain" : "isolation"; }

/// Per-node resource costs, identical for every node:
///   prevention  f(beta)  = c1 / beta  + c2
///   correction  g(delta) = c3 * delta + c4
///   isolation   h(gamma) = c5 / gamma + c6   (gamma = mean isolation delay)
/// `fixed_delta` is the natural recovery rate used in isolation mode.
struct CostModel {
  gp::Box beta_box{0.00266, 0.0133};
  gp::Box delta_box{0.05, 0.1};
  gp::Box gamma_box{2.0, 20.0};
  double c1 = 0, c2 = 0, c3 = 0, c4 = 0, c5 = 0, c6 = 0;
  double budget = 0;
  double fixed_delta = 0.1;

  /// Each resource costs 1 at its strongest setting and 0 at its cheapest:
  /// f(beta_lo) = 1, f(beta_hi) = 0; g(delta_hi) = 1, g(delta_lo) = 0;
  /// h(gamma_lo) = 1, h(gamma_hi) = 0. Degenerate boxes get zero cost.
  static CostModel normalized(gp::Box beta, gp::Box delta, gp::Box gamma, double budget, double fixed_delta = 0.1) {
    CostModel c;
    c.beta_box = beta;
    c.delta_box = delta;
    c.gamma_box = gamma;
    c.budget = budget;
    c.fixed_delta = fixed_delta;
    if (beta.hi > beta.lo) {
      c.c1 = 1.0 / (1.0 / beta.lo - 1.0 / beta.hi);
      c.c2 = -c.c1 / beta.hi;
    }
    if (delta.hi > delta.lo) {
      c.c3 = 1.0 / (delta.hi - delta.lo);
      c.c4 = -c.c3 * delta.lo;
    }
    if (gamma.hi > gamma.lo) {
      c.c5 = 1.0 / (1.0 / gamma.lo - 1.0 / gamma.hi);
      c.c6 = -c.c5 / gamma.hi;
    }
    c.validate();
    return c;
  }

  double prevention(double beta) const { return c1 / beta + c2; }
  double correction(double delta) const { return c3 * delta + c4; }
  double isolation(double gamma) const { return c5 / gamma + c6; }

  void validate() const {
    for (auto b : {beta_box, delta_box, gamma_box})
      if (!(b.lo > 0) || !(b.hi >= b.lo)) throw ValidationError("cost model: boxes must satisfy 0 < lo <= hi");
    if (c1 < 0 || c3 < 0 || c5 < 0) throw ValidationError("cost model: variable cost coefficients must be non-negative");
    if (!(fixed_delta > 0)) throw ValidationError("cost model: fixed_delta must be positive");
  }
};

struct Allocation {
  Mode mode = Mode::plain;
  std::vector<double> beta;
  std::vector<double> delta;
  std::vector<double> gamma;  // isolation mode only
  std::size_t phases = 1;
  double total_cost = 0;
  double lambda_bar = std::numeric_limits<double>::infinity();  // certified bound; inf if none
  std::optional<double> bound;                                  // lambda_bound of the induced system
  Eigen::VectorXd certificate_v;
  std::string strategy;

  /// Epidemic parameters realized by this allocation.
  EpidemicParams params(const std::vector<std::size_t>& infected) const {
    EpidemicParams p{beta, delta, std::nullopt, infected};
    if (mode == Mode::isolation) {
      std::vector<PhaseType> laws;
      for (double gm : gamma) laws.push_back(erlang({phases, gm}));
      p.isolation = std::move(laws);
    }
    return p;
  }
};

/// kappa * x^alpha <= x + delta on [x_lo, x_hi].
struct MonomialBound {
  double kappa = 1.0;
  double alpha = 1.0;
  double x_lo = 0.0;
  double x_hi = 0.0;
  double max_gap = 0.0;  // max over the range of (x + delta) - kappa x^alpha
};

namespace detail {

inline double monomial_gap(double kappa, double alpha, double delta, double x) { return x + delta - kappa * std::pow(x, alpha); }

// Largest kappa with kappa x^alpha <= x + delta on the range: (x + delta) x^-alpha
// is minimized at x = alpha delta / (1 - alpha), clamped to the range.
inline double tightest_kappa(double alpha, double delta, double lo, double hi) {
  const double x = alpha >= 1.0 ? hi : std::clamp(alpha * delta / (1.0 - alpha), lo, hi);
  return (x + delta) * std::pow(x, -alpha);
}

// x + delta - kappa x^alpha is convex in x, so its maximum sits at an endpoint.
inline double endpoint_gap(double alpha, double delta, double lo, double hi) {
  const double kappa = tightest_kappa(alpha, delta, lo, hi);
  return std::max(monomial_gap(kappa, alpha, delta, lo), monomial_gap(kappa, alpha, delta, hi));
}

}  // namespace detail

/// Monomial under-estimate of x + delta on [x_lo, x_hi] minimizing the largest
/// gap: coarse scan over alpha in (0, 1], golden-section refinement around the
/// best cell, then a grid check of the inequality.
inline MonomialBound fit_monomial_bound(double delta, double x_lo, double x_hi, std::size_t grid_size = 10000) {
  if (!(delta > 0) || !(x_lo > 0) || !(x_hi >= x_lo)) throw ValidationError("fit_monomial_bound: need delta > 0 and 0 < x_lo <= x_hi");
  MonomialBound fit{1.0, 1.0, x_lo, x_hi, 0.0};
  if (x_hi == x_lo) {
    fit.kappa = (x_lo + delta) / x_lo;
  } else {
    constexpr int kScan = 400;
    double best_alpha = 1.0, best_gap = detail::endpoint_gap(1.0, delta, x_lo, x_hi);
    for (int k = 1; k < kScan; ++k) {
      const double a = static_cast<double>(k) / kScan;
      const double gap = detail::endpoint_gap(a, delta, x_lo, x_hi);
      if (gap < best_gap) {
        best_gap = gap;
        best_alpha = a;
      }
    }
    double a = std::max(1e-9, best_alpha - 1.0 / kScan), b = std::min(1.0, best_alpha + 1.0 / kScan);
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = detail::endpoint_gap(c, delta, x_lo, x_hi), fd = detail::endpoint_gap(d, delta, x_lo, x_hi);
    for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
      if (fc < fd) {
        b = d, d = c, fd = fc;
        c = b - phi * (b - a);
        fc = detail::endpoint_gap(c, delta, x_lo, x_hi);
      } else {
        a = c, c = d, fc = fd;
        d = a + phi * (b - a);
        fd = detail::endpoint_gap(d, delta, x_lo, x_hi);
      }
    }
    const double refined = 0.5 * (a + b);
    if (detail::endpoint_gap(refined, delta, x_lo, x_hi) < best_gap) best_alpha = refined;
    fit.alpha = best_alpha;
    fit.kappa = detail::tightest_kappa(best_alpha, delta, x_lo, x_hi);
  }
  fit.kappa *= 1.0 - 1e-12;  // round-off margin for the inequality at the touching point
  const std::size_t grid = std::max<std::size_t>(grid_size, 2);
  for (std::size_t k = 0; k < grid; ++k) {
    const double x = x_hi == x_lo ? x_lo : x_lo + (x_hi - x_lo) * static_cast<double>(k) / static_cast<double>(grid - 1);
    const double gap = detail::monomial_gap(fit.kappa, fit.alpha, delta, x);
    if (gap < 0) throw std::logic_error("fit_monomial_bound: fitted monomial exceeds x + delta on the grid");
    fit.max_gap = std::max(fit.max_gap, gap);
  }
  return fit;
}

/// One bound per (node, phase) for Erlang isolation with shape p and mean in
/// the gamma box: -Pi_ll = p / gamma ranges over [p / gamma_hi, p / gamma_lo].
inline std::vector<MonomialBound> fit_erlang_bounds(std::size_t n, std::size_t p, const CostModel& costs, std::size_t grid_size = 10000) {
  const double x_lo = static_cast<double>(p) / costs.gamma_box.hi;
  const double x_hi = static_cast<double>(p) / costs.gamma_box.lo;
  const MonomialBound fit = fit_monomial_bound(costs.fixed_delta, x_lo, x_hi, grid_size);
  return std::vector<MonomialBound>(n * p, fit);
}

struct LambdaTarget {
  enum class Kind { minimize, cap } kind = Kind::minimize;
  double lambda_bar = 0.0;  // used when kind == cap

  static LambdaTarget minimize() { return {}; }
  static LambdaTarget cap(double value) { return {Kind::cap, value}; }
};

/// GP together with the meaning of its variables.
struct AllocationProblem {
  gp::GpProblem gp;
  Mode mode = Mode::plain;
  std::size_t nodes = 0;
  std::size_t phases = 1;
  std::vector<std::size_t> infected;
  CostModel costs;
  LambdaTarget target;
  double epsilon = 1e-6;
  std::vector<gp::VarId> v, beta, delta, gamma;  // v has nodes * phases entries
  std::vector<MonomialBound> fits;               // isolation mode only
  std::optional<gp::VarId> t;                     // t = lambda_bar + sigma_I0 when minimizing
};

struct AllocatorOptions {
  double epsilon = 1e-6;
  gp::Box v_box{1e-6, 1e6};
  gp::Box t_box{1e-6, 1e9};
};

namespace detail {

inline void check_infected(const Graph& g, const std::vector<std::size_t>& infected) {
  if (infected.empty()) throw ValidationError("at least one node must be initially infected");
  for (auto i : infected)
    if (i >= g.node_count()) throw ValidationError("initially infected node out of range");
}

inline double absorbed_budget(const CostModel& costs, std::size_t n, Mode mode) {
  const double fixed = static_cast<double>(n) * (costs.c2 + (mode == Mode::plain ? costs.c4 : costs.c6));
  const double rest = costs.budget - fixed;
  if (!(rest > 0))
    throw ModelError("budget " + std::to_string(costs.budget) + " does not cover the fixed cost constants (" + std::to_string(fixed) + ")");
  return rest;
}

// Target constraint: v^T I(0) <= (1 - eps) (lambda_bar + sigma_I0).
inline void add_target(AllocationProblem& ap, const std::vector<gp::VarId>& entry_vars, const AllocatorOptions& opt) {
  gp::Posynomial sum;
  for (auto k : entry_vars) sum += gp::Monomial::var(k);
  const double scale = 1.0 / (1.0 - ap.epsilon);
  if (ap.target.kind == LambdaTarget::Kind::minimize) {
    ap.t = ap.gp.add_variable("t", opt.t_box.lo, opt.t_box.hi);
    ap.gp.objective = gp::Monomial::var(*ap.t);
    ap.gp.add_constraint(scale * (sum * gp::Monomial::var(*ap.t, -1.0)), "target");
  } else {
    if (!(ap.target.lambda_bar > 0)) throw ValidationError("lambda_bar cap must be positive");
    const double denom = ap.target.lambda_bar + static_cast<double>(ap.infected.size());
    ap.gp.add_constraint((scale / denom) * sum, "target");
  }
}

}  // namespace detail

/// Problem 1 as a GP over v, beta, delta (and t when minimizing lambda_bar).
/// Per column j:  (sum_{i ~ j, i susceptible} v_i beta_i + delta_j) / (v_j delta_j) <= 1 - eps,
/// plus the target constraint and the budget with constants absorbed.
inline AllocationProblem build_problem1(const Graph& g, const std::vector<std::size_t>& infected, const CostModel& costs,
                                        LambdaTarget target = LambdaTarget::minimize(), const AllocatorOptions& opt = {}) {
  costs.validate();
  detail::check_infected(g, infected);
  const std::size_t n = g.node_count();
  AllocationProblem ap;
  ap.mode = Mode::plain;
  ap.nodes = n;
  ap.infected = infected;
  ap.costs = costs;
  ap.target = target;
  ap.epsilon = opt.epsilon;
  const double remaining = detail::absorbed_budget(costs, n, Mode::plain);
  std::vector<bool> is_infected(n, false);
  for (auto i : infected) is_infected[i] = true;

  for (std::size_t i = 0; i < n; ++i) ap.v.push_back(ap.gp.add_variable("v" + std::to_string(i), opt.v_box.lo, opt.v_box.hi));
  for (std::size_t i = 0; i < n; ++i) ap.beta.push_back(ap.gp.add_variable("beta" + std::to_string(i), costs.beta_box.lo, costs.beta_box.hi));
  for (std::size_t i = 0; i < n; ++i) ap.delta.push_back(ap.gp.add_variable("delta" + std::to_string(i), costs.delta_box.lo, costs.delta_box.hi));

  const double scale = 1.0 / (1.0 - ap.epsilon);
  for (std::size_t j = 0; j < n; ++j) {
    const gp::Monomial denom_inv = (gp::Monomial::var(ap.v[j]) * gp::Monomial::var(ap.delta[j])).inverse();
    gp::Posynomial lhs = gp::Monomial::var(ap.delta[j]);
    for (auto i : g.neighbors(j))
      if (!is_infected[i]) lhs += gp::Monomial::var(ap.v[i]) * gp::Monomial::var(ap.beta[i]);
    ap.gp.add_constraint(scale * (lhs * denom_inv), "decay" + std::to_string(j));
  }
  std::vector<gp::VarId> entry;
  for (auto i : infected) entry.push_back(ap.v[i]);
  detail::add_target(ap, entry, opt);

  gp::Posynomial spend;
  for (std::size_t i = 0; i < n; ++i) {
    if (costs.c1 > 0) spend += gp::Monomial(costs.c1 / remaining) * gp::Monomial::var(ap.beta[i], -1.0);
    if (costs.c3 > 0) spend += gp::Monomial(costs.c3 / remaining) * gp::Monomial::var(ap.delta[i]);
  }
  if (!spend.terms.empty()) ap.gp.add_constraint(spend, "budget");
  if (target.kind == LambdaTarget::Kind::cap) ap.gp.objective = spend.terms.empty() ? gp::Posynomial(gp::Monomial(1.0)) : spend;
  return ap;
}

/// Problem 2 (Erlang isolation with shape p, natural recovery fixed at
/// costs.fixed_delta) as a GP over v (n*p entries), beta, gamma and t. Column
/// (i, l) reads
///   (sum_{k ~ i, k susceptible} v_{k,0} beta_k + [l < p-1] v_{i,l+1} p/gamma_i
///    + [l = p-1] p/gamma_i + delta_i) / (kappa_il (p/gamma_i)^alpha_il v_il) <= 1 - eps.
inline AllocationProblem build_problem2(const Graph& g, const std::vector<std::size_t>& infected, const CostModel& costs,
                                        const std::vector<MonomialBound>& fits, std::size_t p,
                                        LambdaTarget target = LambdaTarget::minimize(), const AllocatorOptions& opt = {}) {
  costs.validate();
  detail::check_infected(g, infected);
  if (p < 1) throw ValidationError("phase count must be >= 1");
  const std::size_t n = g.node_count();
  if (fits.size() != n * p) throw ModelError("build_problem2: need one monomial bound per (node, phase)");
  AllocationProblem ap;
  ap.mode = Mode::isolation;
  ap.nodes = n;
  ap.phases = p;
  ap.fits = fits;
  ap.infected = infected;
  ap.costs = costs;
  ap.target = target;
  ap.epsilon = opt.epsilon;
  const double remaining = detail::absorbed_budget(costs, n, Mode::isolation);
  std::vector<bool> is_infected(n, false);
  for (auto i : infected) is_infected[i] = true;

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < p; ++l)
      ap.v.push_back(ap.gp.add_variable("v" + std::to_string(i) + "_" + std::to_string(l), opt.v_box.lo, opt.v_box.hi));
  for (std::size_t i = 0; i < n; ++i) ap.beta.push_back(ap.gp.add_variable("beta" + std::to_string(i), costs.beta_box.lo, costs.beta_box.hi));
  for (std::size_t i = 0; i < n; ++i) ap.gamma.push_back(ap.gp.add_variable("gamma" + std::to_string(i), costs.gamma_box.lo, costs.gamma_box.hi));

  const double pd = static_cast<double>(p);
  const double scale = 1.0 / (1.0 - ap.epsilon);
  for (std::size_t i = 0; i < n; ++i) {
    const gp::Monomial rate = pd * gp::Monomial::var(ap.gamma[i], -1.0);  // -Pi_ll = p / gamma_i
    gp::Posynomial infection;
    for (auto k : g.neighbors(i))
      if (!is_infected[k]) infection += gp::Monomial::var(ap.v[k * p]) * gp::Monomial::var(ap.beta[k]);
    for (std::size_t l = 0; l < p; ++l) {
      const MonomialBound& fit = fits[i * p + l];
      if (!(fit.kappa > 0) || !(fit.alpha > 0)) throw ModelError("build_problem2: invalid monomial bound");
      gp::Posynomial lhs = infection + gp::Monomial(costs.fixed_delta);
      if (l + 1 < p)
        lhs += gp::Monomial::var(ap.v[i * p + l + 1]) * rate;
      else
        lhs += rate;
      const gp::Monomial rhs = fit.kappa * (gp::Monomial(std::pow(pd, fit.alpha)) * gp::Monomial::var(ap.gamma[i], -fit.alpha)) *
                               gp::Monomial::var(ap.v[i * p + l]);
      ap.gp.add_constraint(scale * (lhs * rhs.inverse()), "decay" + std::to_string(i) + "_" + std::to_string(l));
    }
  }
  std::vector<gp::VarId> entry;
  for (auto i : infected) entry.push_back(ap.v[i * p]);
  detail::add_target(ap, entry, opt);

  gp::Posynomial spend;
  for (std::size_t i = 0; i < n; ++i) {
    if (costs.c1 > 0) spend += gp::Monomial(costs.c1 / remaining) * gp::Monomial::var(ap.beta[i], -1.0);
    if (costs.c5 > 0) spend += gp::Monomial(costs.c5 / remaining) * gp::Monomial::var(ap.gamma[i], -1.0);
  }
  if (!spend.terms.empty()) ap.gp.add_constraint(spend, "budget");
  if (target.kind == LambdaTarget::Kind::cap) ap.gp.objective = spend.terms.empty() ? gp::Posynomial(gp::Monomial(1.0)) : spend;
  return ap;
}

inline double total_cost(const CostModel& costs, const Allocation& a) {
  double c = 0.0;
  for (double b : a.beta) c += costs.prevention(b);
  if (a.mode == Mode::plain)
    for (double d : a.delta) c += costs.correction(d);
  else
    for (double gm : a.gamma) c += costs.isolation(gm);
  return c;
}

inline ComparisonSystem comparison_system(const Graph& g, const Allocation& a, const std::vector<std::size_t>& infected) {
  const auto params = a.params(infected);
  return a.mode == Mode::plain ? build_sir_system(g, params) : build_isolation_system(g, params);
}

/// A certificate for a Hurwitz system with relative margin `slack`: solves
/// v^T (offdiag(M) + (1 - 2 slack) diag(M)) = -w. Returns nullopt when that
/// shifted matrix is not Hurwitz.
inline std::optional<Eigen::VectorXd> certificate_for(const ComparisonSystem& sys, double slack) {
  Eigen::MatrixXd shifted = sys.matrix;
  shifted.diagonal() *= (1.0 - 2.0 * slack);
  if (!is_hurwitz_metzler(shifted)) return std::nullopt;
  Eigen::VectorXd v = shifted.transpose().partialPivLu().solve(-sys.weight_row.transpose());
  if (!v.allFinite() || (v.array() <= 0).any()) return std::nullopt;
  return v;
}

struct SolveOptions {
  gp::SolverOptions solver;
};

/// Solves an allocation GP, then re-derives the epidemic parameters and checks
/// the returned certificate against the comparison system they induce.
inline Allocation solve_allocation(const Graph& g, const AllocationProblem& ap, const SolveOptions& opt = {}) {
  const gp::GpSolution sol = gp::solve(ap.gp, opt.solver);
  if (sol.status == gp::Status::infeasible) {
    if (ap.target.kind == LambdaTarget::Kind::cap)
      throw InfeasibleError("budget insufficient for requested lambda_bar = " + std::to_string(ap.target.lambda_bar));
    throw InfeasibleError("budget insufficient: no allocation within the budget certifies a finite bound");
  }
  if (sol.status != gp::Status::optimal)
    throw NumericError(std::string("GP solver did not converge (status ") + gp::to_string(sol.status) + ", " +
                       std::to_string(sol.newton_steps) + " Newton steps)");

  Allocation a;
  a.mode = ap.mode;
  a.phases = ap.phases;
  a.strategy = "optimized";
  for (auto k : ap.beta) a.beta.push_back(sol.point[k]);
  if (ap.mode == Mode::plain) {
    for (auto k : ap.delta) a.delta.push_back(sol.point[k]);
  } else {
    a.delta.assign(ap.nodes, ap.costs.fixed_delta);
    for (auto k : ap.gamma) a.gamma.push_back(sol.point[k]);
  }
  a.certificate_v.resize(static_cast<Eigen::Index>(ap.v.size()));
  for (std::size_t k = 0; k < ap.v.size(); ++k) a.certificate_v[static_cast<Eigen::Index>(k)] = sol.point[ap.v[k]];
  const double sigma = static_cast<double>(ap.infected.size());
  a.lambda_bar = ap.t ? sol.point[*ap.t] - sigma : ap.target.lambda_bar;
  a.total_cost = total_cost(ap.costs, a);

  const ComparisonSystem sys = comparison_system(g, a, ap.infected);
  if (!verify_certificate(sys, a.certificate_v, a.lambda_bar, ap.epsilon / 2.0))
    throw std::logic_error("solve_allocation: solver certificate fails verification");
  a.bound = lambda_bound(sys);
  if (!a.bound || *a.bound > a.lambda_bar + 1e-9 * std::max(1.0, a.lambda_bar))
    throw std::logic_error("solve_allocation: certified bound below the comparison-system bound");
  return a;
}

namespace detail {

inline void finish_baseline(const Graph& g, Allocation& a, const CostModel& costs, const std::vector<std::size_t>& infected, double eps) {
  a.total_cost = total_cost(costs, a);
  const ComparisonSystem sys = comparison_system(g, a, infected);
  a.bound = lambda_bound(sys);
  a.lambda_bar = std::numeric_limits<double>::infinity();
  a.certificate_v.resize(0);
  if (a.bound) {
    if (auto v = certificate_for(sys, eps / 2.0)) {
      a.certificate_v = *v;
      a.lambda_bar = a.certificate_v.dot(sys.initial) / (1.0 - eps) - static_cast<double>(sys.sigma_I0);
    }
  }
}

// Rate whose cost equals `spend`, clamped to the box. cost(x) = c / x + c0
// (decreasing) or c * x + c0 (increasing).
inline double rate_for_cost(double spend, double c, double c0, bool inverse, gp::Box box) {
  if (c <= 0) return inverse ? box.hi : box.lo;
  const double x = inverse ? c / std::max(spend - c0, 1e-300) : (spend - c0) / c;
  return std::clamp(x, box.lo, box.hi);
}

}  // namespace detail

/// Equal spending per node, split evenly between the two resources of the mode.
inline Allocation baseline_uniform(const Graph& g, const std::vector<std::size_t>& infected, const CostModel& costs, Mode mode,
                                   std::size_t phases = 1, double epsilon = 1e-6) {
  costs.validate();
  detail::check_infected(g, infected);
  const std::size_t n = g.node_count();
  const double per_resource = costs.budget / (2.0 * static_cast<double>(n));
  Allocation a;
  a.mode = mode;
  a.phases = phases;
  a.strategy = "uniform";
  const double b = detail::rate_for_cost(per_resource, costs.c1, costs.c2, true, costs.beta_box);
  a.beta.assign(n, b);
  if (mode == Mode::plain) {
    a.delta.assign(n, detail::rate_for_cost(per_resource, costs.c3, costs.c4, false, costs.delta_box));
  } else {
    a.delta.assign(n, costs.fixed_delta);
    a.gamma.assign(n, detail::rate_for_cost(per_resource, costs.c5, costs.c6, true, costs.gamma_box));
  }
  detail::finish_baseline(g, a, costs, infected, epsilon);
  return a;
}

/// SIS-style allocation: maximize the decay rate s of v^T (B A - D) <= -s v^T
/// over the same budget and boxes, ignoring which nodes start infected. The
/// result is then scored under the SIR bound with the actual initial condition.
inline Allocation baseline_sis_spectral(const Graph& g, const std::vector<std::size_t>& infected, const CostModel& costs,
                                        const SolveOptions& opt = {}, double epsilon = 1e-6) {
  costs.validate();
  detail::check_infected(g, infected);
  const std::size_t n = g.node_count();
  Allocation a;
  a.mode = Mode::plain;
  a.strategy = "sis_spectral";
  if (g.edge_count() == 0) {
    a.beta.assign(n, costs.beta_box.hi);
    a.delta.assign(n, costs.delta_box.lo);
    detail::finish_baseline(g, a, costs, infected, epsilon);
    return a;
  }
  const double remaining = detail::absorbed_budget(costs, n, Mode::plain);
  gp::GpProblem prob;
  std::vector<gp::VarId> v, beta, delta;
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = i == 0 ? 1.0 : 1e-6, hi = i == 0 ? 1.0 : 1e6;  // v is scale-free; pin v_0
    v.push_back(prob.add_variable("v" + std::to_string(i), lo, hi));
  }
  for (std::size_t i = 0; i < n; ++i) beta.push_back(prob.add_variable("beta" + std::to_string(i), costs.beta_box.lo, costs.beta_box.hi));
  for (std::size_t i = 0; i < n; ++i) delta.push_back(prob.add_variable("delta" + std::to_string(i), costs.delta_box.lo, costs.delta_box.hi));
  const gp::VarId s = prob.add_variable("s", 1e-9, costs.delta_box.hi);
  for (std::size_t j = 0; j < n; ++j) {
    gp::Posynomial lhs = gp::Monomial::var(s) * gp::Monomial::var(v[j]);
    for (auto i : g.neighbors(j)) lhs += gp::Monomial::var(v[i]) * gp::Monomial::var(beta[i]);
    prob.add_constraint(lhs * (gp::Monomial::var(v[j]) * gp::Monomial::var(delta[j])).inverse(), "sis" + std::to_string(j));
  }
  gp::Posynomial spend;
  for (std::size_t i = 0; i < n; ++i) {
    if (costs.c1 > 0) spend += gp::Monomial(costs.c1 / remaining) * gp::Monomial::var(beta[i], -1.0);
    if (costs.c3 > 0) spend += gp::Monomial(costs.c3 / remaining) * gp::Monomial::var(delta[i]);
  }
  if (!spend.terms.empty()) prob.add_constraint(spend, "budget");
  prob.objective = gp::Monomial::var(s, -1.0);
  const auto sol = gp::solve(prob, opt.solver);
  if (sol.status == gp::Status::infeasible) throw InfeasibleError("SIS baseline: budget cannot make B A - D Hurwitz");
  if (sol.status != gp::Status::optimal) throw NumericError("SIS baseline: GP solver did not converge");
  for (auto k : beta) a.beta.push_back(sol.point[k]);
  for (auto k : delta) a.delta.push_back(sol.point[k]);
  detail::finish_baseline(g, a, costs, infected, epsilon);
  return a;
}

// ---- serialization -------------------------------------------------------

inline nlohmann::json to_json(const Allocation& a, const CostModel& costs) {
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < a.beta.size(); ++i) {
    nlohmann::json node{{"node", i}, {"beta", a.beta[i]}, {"delta", a.delta[i]}, {"prevention_cost", costs.prevention(a.beta[i])}};
    if (a.mode == Mode::plain) {
      node["correction_cost"] = costs.correction(a.delta[i]);
    } else {
      node["gamma"] = a.gamma[i];
      node["isolation_cost"] = costs.isolation(a.gamma[i]);
    }
    nodes.push_back(std::move(node));
  }
  nlohmann::json j{{"strategy", a.strategy}, {"mode", to_string(a.mode)}, {"phases", a.phases}, {"total_cost", a.total_cost},
                   {"budget", costs.budget}, {"nodes", nodes}};
  j["lambda_bar"] = std::isfinite(a.lambda_bar) ? nlohmann::json(a.lambda_bar) : nlohmann::json(nullptr);
  j["lambda_bound"] = a.bound ? nlohmann::json(*a.bound) : nlohmann::json(nullptr);
  j["certificate_v"] = std::vector<double>(a.certificate_v.data(), a.certificate_v.data() + a.certificate_v.size());
  return j;
}

/// node,degree,prevention_cost,correction_cost (isolation cost in the last
/// column for isolation-mode allocations).
inline void write_allocation_csv(std::ostream& out, const Graph& g, const Allocation& a, const CostModel& costs) {
  const auto deg = degrees(g);
  out << "node,degree,prevention_cost,correction_cost\n";
  out.precision(17);
  for (std::size_t i = 0; i < a.beta.size(); ++i) {
    const double second = a.mode == Mode::plain ? costs.correction(a.delta[i]) : costs.isolation(a.gamma[i]);
    out << i << ',' << deg[i] << ',' << costs.prevention(a.beta[i]) << ',' << second << '\n';
  }
}

}  // namespace episir
