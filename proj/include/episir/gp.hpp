#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "episir/errors.hpp"

namespace episir::gp {

using VarId = std::size_t;

/// c * prod_k x_k^{a_k} with c > 0.
struct Monomial {
  double coeff = 1.0;
  std::map<VarId, double> exponents;

  Monomial() = default;
  explicit Monomial(double c) : coeff(c) {
    if (!(c > 0)) throw ValidationError("monomial coefficient must be positive");
  }
  Monomial(double c, std::map<VarId, double> exps) : Monomial(c) {
    for (auto& [k, a] : exps)
      if (a != 0.0) exponents.emplace(k, a);
  }

  static Monomial var(VarId k, double power = 1.0) { return Monomial(1.0, {{k, power}}); }

  Monomial inverse() const {
    Monomial m(1.0 / coeff);
    for (auto& [k, a] : exponents) m.exponents.emplace(k, -a);
    return m;
  }

  friend Monomial operator*(const Monomial& x, const Monomial& y) {
    Monomial m(x.coeff * y.coeff);
    m.exponents = x.exponents;
    for (auto& [k, a] : y.exponents) {
      const double e = (m.exponents[k] += a);
      if (e == 0.0) m.exponents.erase(k);
    }
    return m;
  }
  friend Monomial operator*(double c, const Monomial& x) { return Monomial(c) * x; }
  friend Monomial operator/(const Monomial& x, const Monomial& y) { return x * y.inverse(); }
};

/// Sum of monomials.
struct Posynomial {
  std::vector<Monomial> terms;

  Posynomial() = default;
  Posynomial(Monomial m) : terms{std::move(m)} {}  // NOLINT: implicit by design of the algebra

  Posynomial& operator+=(const Posynomial& o) {
    terms.insert(terms.end(), o.terms.begin(), o.terms.end());
    return *this;
  }
  friend Posynomial operator+(Posynomial x, const Posynomial& y) { return x += y; }
  friend Posynomial operator*(const Posynomial& x, const Monomial& m) {
    Posynomial out;
    for (auto& t : x.terms) out.terms.push_back(t * m);
    return out;
  }
  friend Posynomial operator*(double c, const Posynomial& x) { return x * Monomial(c); }
};

inline Posynomial operator+(const Monomial& x, const Monomial& y) { return Posynomial(x) + y; }

inline double evaluate(const Monomial& m, std::span<const double> x) {
  double v = m.coeff;
  for (auto& [k, a] : m.exponents) {
    if (k >= x.size()) throw std::domain_error("evaluate: variable " + std::to_string(k) + " has no value");
    if (!(x[k] > 0)) throw std::domain_error("evaluate: variable " + std::to_string(k) + " must be positive");
    v *= std::pow(x[k], a);
  }
  return v;
}

inline double evaluate(const Posynomial& p, std::span<const double> x) {
  if (p.terms.empty()) throw std::domain_error("evaluate: empty posynomial");
  double v = 0.0;
  for (auto& t : p.terms) v += evaluate(t, x);
  return v;
}

struct Box {
  double lo;
  double hi;
};

/// minimize objective(x) s.t. ineq_k(x) <= 1, eq_k(x) = 1, lo <= x <= hi.
struct GpProblem {
  std::vector<std::string> names;
  std::vector<Box> box;
  Posynomial objective;
  std::vector<Posynomial> ineq_constraints;
  std::vector<Monomial> eq_constraints;
  std::vector<std::string> ineq_labels;

  VarId add_variable(std::string name, double lo, double hi) {
    if (!(lo > 0) || !(hi >= lo) || !std::isfinite(hi)) throw ValidationError("variable '" + name + "': box must satisfy 0 < lo <= hi < inf");
    names.push_back(std::move(name));
    box.push_back({lo, hi});
    return names.size() - 1;
  }

  void add_constraint(Posynomial p, std::string label = {}) {
    ineq_constraints.push_back(std::move(p));
    ineq_labels.push_back(std::move(label));
  }

  std::size_t variable_count() const noexcept { return names.size(); }

  void validate() const {
    auto check = [&](const Monomial& m) {
      if (!(m.coeff > 0)) throw ValidationError("GP: non-positive coefficient");
      for (auto& [k, a] : m.exponents) {
        if (k >= names.size()) throw ValidationError("GP: constraint references undeclared variable " + std::to_string(k));
        if (!std::isfinite(a)) throw ValidationError("GP: non-finite exponent");
      }
    };
    if (objective.terms.empty()) throw ValidationError("GP: empty objective");
    for (auto& t : objective.terms) check(t);
    for (auto& p : ineq_constraints) {
      if (p.terms.empty()) throw ValidationError("GP: empty constraint");
      for (auto& t : p.terms) check(t);
    }
    for (auto& m : eq_constraints) check(m);
    for (auto& b : box)
      if (!(b.lo > 0) || !(b.hi >= b.lo)) throw ValidationError("GP: invalid box");
  }
};

/// One affine form a^T y + b of a log-sum-exp function.
struct AffineTerm {
  std::vector<std::pair<std::size_t, double>> a;
  double b = 0.0;
};

/// F(y) = log sum_k exp(a_k^T y + b_k), convex in y.
struct LogSumExp {
  std::vector<AffineTerm> terms;

  double value(const Eigen::VectorXd& y) const {
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> s(terms.size());
    for (std::size_t k = 0; k < terms.size(); ++k) {
      s[k] = affine(terms[k], y);
      mx = std::max(mx, s[k]);
    }
    double sum = 0.0;
    for (double sk : s) sum += std::exp(sk - mx);
    return mx + std::log(sum);
  }

  /// Value, gradient (dense), and optionally the Hessian accumulated into `hess` scaled by `hess_scale`.
  double value_gradient(const Eigen::VectorXd& y, Eigen::VectorXd& grad, Eigen::MatrixXd* hess = nullptr, double hess_scale = 1.0) const {
    const std::size_t nt = terms.size();
    std::vector<double> s(nt);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nt; ++k) {
      s[k] = affine(terms[k], y);
      mx = std::max(mx, s[k]);
    }
    double sum = 0.0;
    for (auto& sk : s) sum += (sk = std::exp(sk - mx));
    grad.setZero(y.size());
    for (std::size_t k = 0; k < nt; ++k) {
      const double w = s[k] / sum;
      for (auto [i, a] : terms[k].a) grad[static_cast<Eigen::Index>(i)] += w * a;
      if (hess && nt > 1)
        for (auto [i, ai] : terms[k].a)
          for (auto [j, aj] : terms[k].a) (*hess)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += hess_scale * w * ai * aj;
    }
    if (hess && nt > 1) {
      const auto idx = support();
      for (auto i : idx)
        for (auto j : idx) (*hess)(i, j) -= hess_scale * grad[i] * grad[j];
    }
    return mx + std::log(sum);
  }

  std::vector<Eigen::Index> support() const {
    std::vector<Eigen::Index> idx;
    for (auto& t : terms)
      for (auto [i, a] : t.a) idx.push_back(static_cast<Eigen::Index>(i));
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
  }

 private:
  static double affine(const AffineTerm& t, const Eigen::VectorXd& y) {
    double v = t.b;
    for (auto [i, a] : t.a) v += a * y[static_cast<Eigen::Index>(i)];
    return v;
  }
};

/// The problem after the substitution x = exp(y): posynomials become
/// log-sum-exp functions (constraints read F(y) <= 0), monomial equalities
/// become affine equalities, boxes become bounds on y.
struct LogConvexProblem {
  std::vector<std::string> names;
  LogSumExp objective;
  std::vector<LogSumExp> ineq;
  std::vector<AffineTerm> eq;  // a^T y + b = 0
  std::vector<Box> log_box;
};

inline AffineTerm to_affine(const Monomial& m) {
  AffineTerm t;
  t.b = std::log(m.coeff);
  for (auto& [k, a] : m.exponents) t.a.emplace_back(k, a);
  return t;
}

inline LogSumExp to_log_sum_exp(const Posynomial& p) {
  LogSumExp f;
  for (auto& m : p.terms) f.terms.push_back(to_affine(m));
  return f;
}

inline LogConvexProblem to_log_convex(const GpProblem& p) {
  p.validate();
  LogConvexProblem out;
  out.names = p.names;
  out.objective = to_log_sum_exp(p.objective);
  for (auto& c : p.ineq_constraints) out.ineq.push_back(to_log_sum_exp(c));
  for (auto& m : p.eq_constraints) out.eq.push_back(to_affine(m));
  for (auto& b : p.box) out.log_box.push_back({std::log(b.lo), std::log(b.hi)});
  return out;
}

inline nlohmann::json to_json(const LogConvexProblem& p) {
  auto term_json = [&](const AffineTerm& t) {
    nlohmann::json exps = nlohmann::json::object();
    for (auto [k, a] : t.a) exps[p.names[k]] = a;
    return nlohmann::json{{"log_coeff", t.b}, {"exponents", exps}};
  };
  auto lse_json = [&](const LogSumExp& f) {
    nlohmann::json terms = nlohmann::json::array();
    for (auto& t : f.terms) terms.push_back(term_json(t));
    return terms;
  };
  nlohmann::json vars = nlohmann::json::array();
  for (std::size_t k = 0; k < p.names.size(); ++k)
    vars.push_back({{"name", p.names[k]}, {"log_lo", p.log_box[k].lo}, {"log_hi", p.log_box[k].hi}});
  nlohmann::json ineq = nlohmann::json::array();
  for (auto& f : p.ineq) ineq.push_back(lse_json(f));
  nlohmann::json eq = nlohmann::json::array();
  for (auto& t : p.eq) eq.push_back(term_json(t));
  return {{"variables", vars}, {"objective", lse_json(p.objective)}, {"inequalities", ineq}, {"equalities", eq}};
}

enum class Status { optimal, infeasible, max_iter };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::max_iter: return "max_iter";
  }
  return "?";
}

struct GpSolution {
  std::vector<double> point;
  double objective_value = std::numeric_limits<double>::quiet_NaN();
  Status status = Status::max_iter;
  double kkt_residual = std::numeric_limits<double>::infinity();
  double min_violation = 0.0;  // phase-I optimum: log of the smallest achievable max constraint value
  std::size_t newton_steps = 0;
};

struct SolverOptions {
  double tol = 1e-8;
  std::size_t max_newton = 500;
  double mu = 20.0;
};

namespace detail {

// Convex problem in reduced coordinates z: minimize F0(z) s.t. F_i(z) <= 0.
struct Reduced {
  std::size_t dim = 0;
  LogSumExp objective;
  std::vector<LogSumExp> cons;  // user constraints first, then boxes
  std::size_t user_count = 0;
  Eigen::VectorXd y0;            // full y = y0 + N z
  Eigen::MatrixXd null_basis;    // n_vars x dim
};

inline LogSumExp map_to_reduced(const LogSumExp& f, const Eigen::VectorXd& y0, const Eigen::MatrixXd& basis) {
  LogSumExp out;
  for (auto& t : f.terms) {
    AffineTerm r;
    r.b = t.b;
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(basis.cols());
    for (auto [k, a] : t.a) {
      r.b += a * y0[static_cast<Eigen::Index>(k)];
      coeff += a * basis.row(static_cast<Eigen::Index>(k)).transpose();
    }
    for (Eigen::Index j = 0; j < coeff.size(); ++j)
      if (std::abs(coeff[j]) > 1e-14) r.a.emplace_back(static_cast<std::size_t>(j), coeff[j]);
    out.terms.push_back(std::move(r));
  }
  return out;
}

// Fixed variables (lo == hi) and monomial equalities are eliminated; the
// remaining directions are spanned by the columns of null_basis. Returns false
// when the equalities are inconsistent with each other or the fixed values.
inline bool reduce(const LogConvexProblem& p, Reduced& r) {
  const std::size_t nv = p.names.size();
  std::vector<std::size_t> free_vars;
  Eigen::VectorXd y_fixed = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nv));
  for (std::size_t k = 0; k < nv; ++k) {
    if (p.log_box[k].hi > p.log_box[k].lo)
      free_vars.push_back(k);
    else
      y_fixed[static_cast<Eigen::Index>(k)] = p.log_box[k].lo;
  }
  const auto nf = static_cast<Eigen::Index>(free_vars.size());
  Eigen::MatrixXd select = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nv), nf);
  for (Eigen::Index j = 0; j < nf; ++j) select(static_cast<Eigen::Index>(free_vars[j]), j) = 1.0;

  if (p.eq.empty()) {
    r.y0 = y_fixed;
    r.null_basis = select;
  } else {
    const auto q = static_cast<Eigen::Index>(p.eq.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(q, static_cast<Eigen::Index>(nv));
    Eigen::VectorXd rhs(q);
    for (Eigen::Index i = 0; i < q; ++i) {
      rhs[i] = -p.eq[i].b;
      for (auto [k, c] : p.eq[i].a) a(i, static_cast<Eigen::Index>(k)) += c;
    }
    rhs -= a * y_fixed;
    const Eigen::MatrixXd af = a * select;
    Eigen::VectorXd zf = Eigen::VectorXd::Zero(nf);
    Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(nf, nf);
    if (nf > 0) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(af, Eigen::ComputeFullU | Eigen::ComputeFullV);
      svd.setThreshold(1e-12);
      zf = svd.solve(rhs);
      const auto rank = svd.rank();
      basis = svd.matrixV().rightCols(nf - rank);
    }
    if ((af * zf - rhs).norm() > 1e-9 * std::max(1.0, rhs.norm())) return false;
    r.y0 = y_fixed + select * zf;
    r.null_basis = select * basis;
  }
  r.dim = static_cast<std::size_t>(r.null_basis.cols());
  r.objective = map_to_reduced(p.objective, r.y0, r.null_basis);
  for (auto& f : p.ineq) r.cons.push_back(map_to_reduced(f, r.y0, r.null_basis));
  r.user_count = r.cons.size();
  for (std::size_t k = 0; k < nv; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    if (r.null_basis.row(row).cwiseAbs().maxCoeff() == 0.0 && r.dim > 0) continue;  // fixed: nothing to bound
    if (r.dim == 0) continue;
    LogSumExp upper, lower;
    AffineTerm tu, tl;
    tu.b = r.y0[row] - p.log_box[k].hi;
    tl.b = p.log_box[k].lo - r.y0[row];
    for (Eigen::Index j = 0; j < r.null_basis.cols(); ++j) {
      const double c = r.null_basis(row, j);
      if (std::abs(c) > 1e-14) {
        tu.a.emplace_back(static_cast<std::size_t>(j), c);
        tl.a.emplace_back(static_cast<std::size_t>(j), -c);
      }
    }
    upper.terms.push_back(std::move(tu));
    lower.terms.push_back(std::move(tl));
    r.cons.push_back(std::move(upper));
    r.cons.push_back(std::move(lower));
  }
  return true;
}

// Barrier function t*f0(z) - sum log(-F_i(z)) where f0 is either the problem
// objective or, in phase I, the slack variable s stored at z[dim] with F_i - s
// for user constraints.
class Barrier {
 public:
  Barrier(const Reduced& r, bool phase_one) : r_(r), phase_one_(phase_one) {}

  std::size_t dim() const { return r_.dim + (phase_one_ ? 1 : 0); }

  // Constraint values; in phase I user constraints are shifted by the slack.
  bool constraint_values(const Eigen::VectorXd& z, std::vector<double>& vals) const {
    vals.resize(r_.cons.size());
    const Eigen::VectorXd zz = z.head(static_cast<Eigen::Index>(r_.dim));
    for (std::size_t i = 0; i < r_.cons.size(); ++i) {
      vals[i] = r_.cons[i].value(zz);
      if (phase_one_ && i < r_.user_count) vals[i] -= z[static_cast<Eigen::Index>(r_.dim)];
      if (!(vals[i] < 0)) return false;
    }
    return true;
  }

  double objective(const Eigen::VectorXd& z) const {
    if (phase_one_) return z[static_cast<Eigen::Index>(r_.dim)];
    return r_.objective.value(z);
  }

  // Returns +inf outside the domain.
  double value(const Eigen::VectorXd& z, double t) const {
    std::vector<double> vals;
    if (!constraint_values(z, vals)) return std::numeric_limits<double>::infinity();
    double v = t * objective(z);
    for (double f : vals) v -= std::log(-f);
    return v;
  }

  void derivatives(const Eigen::VectorXd& z, double t, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
    const auto d = static_cast<Eigen::Index>(dim());
    const auto nd = static_cast<Eigen::Index>(r_.dim);
    const Eigen::VectorXd zz = z.head(nd);
    grad = Eigen::VectorXd::Zero(d);
    hess = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd g(nd);
    if (phase_one_) {
      grad[nd] = t;
    } else {
      Eigen::MatrixXd h0 = Eigen::MatrixXd::Zero(nd, nd);
      r_.objective.value_gradient(zz, g, &h0, 1.0);
      grad.head(nd) += t * g;
      hess.topLeftCorner(nd, nd) += t * h0;
    }
    for (std::size_t i = 0; i < r_.cons.size(); ++i) {
      const bool shifted = phase_one_ && i < r_.user_count;
      Eigen::MatrixXd& h = hess;
      double f = r_.cons[i].value_gradient(zz, g, nullptr);
      if (shifted) f -= z[nd];
      const double inv = 1.0 / (-f);
      if (r_.cons[i].terms.size() > 1) r_.cons[i].value_gradient(zz, g, &h, inv);
      const auto idx = r_.cons[i].support();
      for (auto a : idx) grad[a] += inv * g[a];
      if (shifted) grad[nd] -= inv;
      const double inv2 = inv * inv;
      for (auto a : idx)
        for (auto b : idx) h(a, b) += inv2 * g[a] * g[b];
      if (shifted) {
        for (auto a : idx) {
          h(a, nd) -= inv2 * g[a];
          h(nd, a) -= inv2 * g[a];
        }
        h(nd, nd) += inv2;
      }
    }
  }

 private:
  const Reduced& r_;
  bool phase_one_;
};

struct CenteringResult {
  bool ok = true;          // false: step budget exhausted
  bool stalled = false;    // per-call cap reached before convergence
  bool stopped_early = false;
  double decrement = 0.0;  // last Newton decrement^2 / 2
};

// Damped Newton on the barrier at fixed t; `early_stop` is polled before each
// step. The Newton system is Jacobi-equilibrated. Once the decrement is small
// the full step is taken without a line search, since the barrier value can no
// longer resolve the decrease. Converged when the decrement reaches 1e-11 or
// the round-off floor of the barrier value, whichever is larger.
template <class Stop>
CenteringResult center(const Barrier& bar, Eigen::VectorXd& z, double t, std::size_t& steps, std::size_t max_steps, Stop early_stop,
                       std::size_t local_cap = 400) {
  CenteringResult res;
  const std::size_t first = steps;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  for (;;) {
    if (early_stop(z)) {
      res.stopped_early = true;
      return res;
    }
    if (steps >= max_steps) {
      res.ok = false;
      return res;
    }
    if (steps - first >= local_cap) {
      res.stalled = true;
      return res;
    }
    bar.derivatives(z, t, grad, hess);
    const Eigen::VectorXd scale = hess.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd scaled = scale.asDiagonal() * hess * scale.asDiagonal();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(scaled);
    Eigen::VectorXd dz = -(scale.asDiagonal() * ldlt.solve(scale.asDiagonal() * grad));
    if (ldlt.info() != Eigen::Success || !dz.allFinite()) {
      const Eigen::MatrixXd reg = scaled + 1e-12 * Eigen::MatrixXd::Identity(hess.rows(), hess.cols());
      dz = -(scale.asDiagonal() * reg.ldlt().solve(scale.asDiagonal() * grad));
    }
    const double dec = -grad.dot(dz) / 2.0;
    res.decrement = dec;
    ++steps;
    const double f0 = bar.value(z, t);
    const double floor = std::max(1e-11, 1e3 * std::numeric_limits<double>::epsilon() * std::abs(f0));
    if (!(dec > 1e-20)) return res;
    Eigen::VectorXd trial = z + dz;
    if (dec < 1e-4 && std::isfinite(bar.value(trial, t))) {
      z = trial;
      if (dec <= floor) return res;
      continue;
    }
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 80; ++ls) {
      trial = z + step * dz;
      const double ft = bar.value(trial, t);
      if (ft <= f0 - 0.01 * step * 2.0 * dec) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) return res;  // numerically centered
    z = trial;
  }
}

}  // namespace detail

/// Interior-point barrier method on the log-transformed problem. A phase-I
/// problem (minimize s subject to F_i(z) <= s inside the boxes) either finds a
/// strictly feasible start or certifies infeasibility with s* > 0.
inline GpSolution solve(const GpProblem& problem, const SolverOptions& opt = {}) {
  const LogConvexProblem lp = to_log_convex(problem);
  GpSolution sol;
  detail::Reduced red;
  if (!detail::reduce(lp, red)) {
    sol.status = Status::infeasible;
    sol.min_violation = std::numeric_limits<double>::infinity();
    return sol;
  }
  const auto nd = static_cast<Eigen::Index>(red.dim);
  const std::size_t nv = lp.names.size();

  // Start at the log-center of the boxes, projected onto the equality subspace.
  Eigen::VectorXd center_y(static_cast<Eigen::Index>(nv));
  for (std::size_t k = 0; k < nv; ++k) center_y[static_cast<Eigen::Index>(k)] = 0.5 * (lp.log_box[k].lo + lp.log_box[k].hi);
  Eigen::VectorXd z = nd > 0 ? Eigen::VectorXd(red.null_basis.colPivHouseholderQr().solve(center_y - red.y0)) : Eigen::VectorXd(0);

  auto user_max = [&](const Eigen::VectorXd& zz) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < red.user_count; ++i) m = std::max(m, red.cons[i].value(zz.head(nd)));
    return m;
  };
  auto boxes_ok = [&](const Eigen::VectorXd& zz) {
    for (std::size_t i = red.user_count; i < red.cons.size(); ++i)
      if (!(red.cons[i].value(zz.head(nd)) < 0)) return false;
    return true;
  };
  if (!boxes_ok(z)) {
    // Equalities pushed the center onto a box face; find an interior point of the boxes by phase I with no user constraints.
    sol.status = Status::infeasible;
    sol.min_violation = std::numeric_limits<double>::infinity();
    return sol;
  }

  const double m_total = static_cast<double>(red.cons.size());
  std::size_t steps = 0;

  if (red.user_count > 0 && user_max(z) >= 0) {
    detail::Barrier phase1(red, true);
    Eigen::VectorXd zs(nd + 1);
    zs.head(nd) = z;
    zs[nd] = user_max(z) + 1.0;
    double t = 1.0;
    bool found = false;
    for (;;) {
      auto feasible_now = [&](const Eigen::VectorXd& v) { return user_max(v) < -1e-3; };
      auto res = detail::center(phase1, zs, t, steps, opt.max_newton, feasible_now);
      if (res.stopped_early || user_max(zs) < 0) {
        found = true;
        break;
      }
      if (!res.ok) {
        sol.status = Status::max_iter;
        sol.newton_steps = steps;
        return sol;
      }
      if (m_total / t < opt.tol) break;
      t *= opt.mu;
    }
    sol.min_violation = zs[nd];
    if (!found) {
      sol.status = Status::infeasible;
      sol.newton_steps = steps;
      sol.min_violation = user_max(zs);
      return sol;
    }
    z = zs.head(nd);
  }

  // Stationarity of the Lagrangian. Two multiplier estimates are tried: the
  // barrier-implied 1/(t * -F_i), and least-squares fits on the constraints
  // those mark as active; the smallest valid residual is reported.
  auto kkt_residual = [&](const Eigen::VectorXd& z, double t) {
    double kkt = 0.0;
    Eigen::VectorXd g0, gi;
    red.objective.value_gradient(z, g0);
    const auto m = static_cast<Eigen::Index>(red.cons.size());
    Eigen::MatrixXd grads(nd, m);
    Eigen::VectorXd vals(m), lambda(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      vals[i] = red.cons[static_cast<std::size_t>(i)].value_gradient(z, gi);
      grads.col(i) = gi;
      lambda[i] = 1.0 / (t * -vals[i]);
    }
    auto residual = [&](const Eigen::VectorXd& lam) {
      const double stat = (g0 + grads * lam).lpNorm<Eigen::Infinity>();
      return std::max(stat, lam.dot(-vals));
    };
    kkt = residual(lambda);
    // nested active sets: weakly active constraints can carry tiny but necessary multipliers
    const double top = m > 0 ? lambda.maxCoeff() : 0.0;
    for (double thr = 1e-3; thr >= 1e-12; thr *= 0.1) {
      std::vector<Eigen::Index> active;
      for (Eigen::Index i = 0; i < m; ++i)
        if (lambda[i] > thr * top) active.push_back(i);
      if (active.empty()) continue;
      Eigen::MatrixXd ga(nd, static_cast<Eigen::Index>(active.size()));
      for (std::size_t k = 0; k < active.size(); ++k) ga.col(static_cast<Eigen::Index>(k)) = grads.col(active[k]);
      const Eigen::VectorXd la = ga.completeOrthogonalDecomposition().solve(-g0);
      if (!la.allFinite() || (la.array() < 0).any()) continue;
      Eigen::VectorXd full = Eigen::VectorXd::Zero(m);
      for (std::size_t k = 0; k < active.size(); ++k) full[active[k]] = la[static_cast<Eigen::Index>(k)];
      kkt = std::min(kkt, residual(full));
    }
    return kkt;
  };

  detail::Barrier phase2(red, false);
  double t = 1.0;
  bool ok = true;
  double kkt = 0.0;
  if (nd > 0) {
    for (;;) {
      auto never = [](const Eigen::VectorXd&) { return false; };
      auto res = detail::center(phase2, z, t, steps, opt.max_newton, never);
      if (!res.ok) {
        ok = false;
        break;
      }
      if (res.stalled || m_total / t < opt.tol) {
        kkt = kkt_residual(z, t);
        if (res.stalled || kkt <= opt.tol || m_total / t < 1e-4 * opt.tol) break;
      }
      t *= opt.mu;
    }
  }

  const Eigen::VectorXd y = red.y0 + red.null_basis * z;
  sol.point.resize(nv);
  for (std::size_t k = 0; k < nv; ++k)
    sol.point[k] = std::clamp(std::exp(y[static_cast<Eigen::Index>(k)]), problem.box[k].lo, problem.box[k].hi);
  sol.objective_value = evaluate(problem.objective, sol.point);
  sol.kkt_residual = kkt;
  sol.newton_steps = steps;
  bool feasible = true;
  for (auto& c : problem.ineq_constraints)
    if (evaluate(c, sol.point) > 1.0 + opt.tol) feasible = false;
  for (auto& e : problem.eq_constraints)
    if (std::abs(evaluate(e, sol.point) - 1.0) > opt.tol) feasible = false;
  if (!ok)
    sol.status = Status::max_iter;
  else
    sol.status = (feasible && kkt <= opt.tol) ? Status::optimal : Status::max_iter;
  return sol;
}

}  // namespace episir::gp
