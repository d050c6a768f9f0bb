#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "episir/errors.hpp"
#include "episir/graph.hpp"
#include "episir/params.hpp"

namespace episir {

/// Linear system dx/dt = matrix * x that dominates the expected infection
/// vector, with lambda <= weight_row * integral(x) - sigma_I0.
struct ComparisonSystem {
  Eigen::MatrixXd matrix;
  Eigen::RowVectorXd weight_row;
  Eigen::VectorXd initial;
  std::size_t sigma_I0 = 0;
  std::size_t phases = 1;
};

inline constexpr double kDefaultSlack = 1e-6;

/// M = J B A - D, where J masks initially susceptible nodes.
inline ComparisonSystem build_sir_system(const Graph& g, const EpidemicParams& params) {
  params.validate(g);
  if (params.has_isolation()) throw ValidationError("build_sir_system: params carry isolation laws");
  const auto n = static_cast<Eigen::Index>(g.node_count());
  const auto infected = params.infected_mask(g.node_count());
  ComparisonSystem sys;
  sys.matrix = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sys.matrix(i, i) = -params.delta[i];
    if (infected[i]) continue;
    for (auto j : g.neighbors(i)) sys.matrix(i, static_cast<Eigen::Index>(j)) += params.beta[i];
  }
  sys.weight_row = Eigen::Map<const Eigen::RowVectorXd>(params.delta.data(), n);
  sys.initial = Eigen::VectorXd::Zero(n);
  for (auto i : params.initially_infected) sys.initial(static_cast<Eigen::Index>(i)) = 1.0;
  sys.sigma_I0 = params.sigma_I0();
  return sys;
}

/// Phase-expanded system of dimension n*p. Node i's block is the transpose of
/// its removal generator Pi_i - delta_i I; infections of node i enter its
/// initial phase from every phase of an infected neighbor. Index (i, l) -> i*p + l.
inline ComparisonSystem build_isolation_system(const Graph& g, const EpidemicParams& params) {
  params.validate(g);
  if (!params.has_isolation()) throw ValidationError("build_isolation_system: isolation laws required");
  const std::size_t n = g.node_count();
  const auto p = static_cast<Eigen::Index>(params.phase_count());
  const auto np = static_cast<Eigen::Index>(n) * p;
  const auto infected = params.infected_mask(n);
  ComparisonSystem sys;
  sys.phases = static_cast<std::size_t>(p);
  sys.matrix = Eigen::MatrixXd::Zero(np, np);
  sys.weight_row = Eigen::RowVectorXd::Zero(np);
  sys.initial = Eigen::VectorXd::Zero(np);
  for (std::size_t i = 0; i < n; ++i) {
    const PhaseType z = params.removal_law(i);
    const auto base = static_cast<Eigen::Index>(i) * p;
    sys.matrix.block(base, base, p, p) += z.generator().transpose();
    sys.weight_row.segment(base, p) = z.exit_rates().transpose();
    if (infected[i]) {
      sys.initial.segment(base, p) = z.initial().transpose();
      continue;
    }
    const Eigen::MatrixXd entry = params.beta[i] * z.initial().transpose() * Eigen::RowVectorXd::Ones(p);
    for (auto j : g.neighbors(i)) sys.matrix.block(base, static_cast<Eigen::Index>(j) * p, p, p) += entry;
  }
  sys.sigma_I0 = params.sigma_I0();
  return sys;
}

inline bool is_metzler(const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j && m(i, j) < 0) return false;
  return true;
}

/// Spectral abscissa test for a Metzler matrix. The rightmost eigenvalue of a
/// Metzler m is real and equals rho(m + cI) - c; rho is bracketed by
/// Collatz-Wielandt bounds along the power iteration of m + cI. The lower
/// bound is taken over the principal block where the iterate concentrates, so
/// reducible matrices are decided too.
inline bool is_hurwitz_metzler(const Eigen::MatrixXd& m, double tol = 1e-12, std::size_t max_iter = 100000) {
  if (m.rows() != m.cols() || m.rows() == 0) throw ValidationError("is_hurwitz_metzler: matrix must be square and non-empty");
  if (!is_metzler(m)) throw ValidationError("is_hurwitz_metzler: matrix is not Metzler");
  const Eigen::Index n = m.rows();
  const double c = 1.0 + m.diagonal().cwiseAbs().maxCoeff();
  const Eigen::MatrixXd shifted = m + c * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
  double hi = 0.0, lo = 0.0;
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd y = shifted * x;
    hi = (y.array() / x.array()).maxCoeff();
    if (hi < c - tol) return true;
    const double top = x.maxCoeff();
    for (double threshold : {1e-8, 1e-3, 0.5}) {
      std::vector<Eigen::Index> support;
      for (Eigen::Index i = 0; i < n; ++i)
        if (x(i) >= threshold * top) support.push_back(i);
      double block_lo = INFINITY;
      for (auto i : support) {
        double acc = 0.0;
        for (auto j : support) acc += shifted(i, j) * x(j);
        block_lo = std::min(block_lo, acc / x(i));
      }
      lo = std::max(lo, block_lo);
    }
    if (lo >= c - tol) return false;
    x = y / y.maxCoeff();
  }
  throw ConvergenceError("is_hurwitz_metzler: Perron bracket did not separate from the stability threshold",
                         std::vector<double>(x.data(), x.data() + n), 0.5 * (lo + hi) - c);
}

/// -weight * matrix^{-1} * initial - sigma_I0 when the matrix is Hurwitz;
/// nullopt ("unbounded") otherwise.
inline std::optional<double> lambda_bound(const ComparisonSystem& sys) {
  if (!is_hurwitz_metzler(sys.matrix)) return std::nullopt;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.matrix);
  const Eigen::VectorXd integral = -lu.solve(sys.initial);
  if (!integral.allFinite()) throw NumericError("lambda_bound: singular comparison matrix");
  const double bound = sys.weight_row.dot(integral) - static_cast<double>(sys.sigma_I0);
  return std::max(0.0, bound);
}

/// Checks the positive-vector certificate of the bound with a relative margin:
///   (v^T offdiag(M))_j + w_j < (1 - slack) * v_j * (-M_jj)   for every j,
///   v^T initial < (1 - slack) * (lambda_bar + sigma_I0).
/// Passing implies M is Hurwitz and lambda_bound(sys) <= lambda_bar.
inline bool verify_certificate(const ComparisonSystem& sys, const Eigen::VectorXd& v, double lambda_bar, double slack = kDefaultSlack) {
  if (v.size() != sys.matrix.rows()) throw ValidationError("verify_certificate: certificate dimension mismatch");
  if ((v.array() <= 0).any()) return false;
  const Eigen::Index n = sys.matrix.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    double flow = sys.weight_row(j);
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != j) flow += v(i) * sys.matrix(i, j);
    const double decay = -v(j) * sys.matrix(j, j);
    if (!(flow < (1.0 - slack) * decay)) return false;
  }
  return v.dot(sys.initial) < (1.0 - slack) * (lambda_bar + static_cast<double>(sys.sigma_I0));
}

}  // namespace episir
