#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "episir/errors.hpp"
#include "episir/rng.hpp"

namespace episir {

/// Law of the absorption time of a CTMC with transient generator `Pi` (p x p)
/// and initial phase distribution `phi`. Exit rates are w = -Pi * 1.
class PhaseType {
 public:
  PhaseType(Eigen::MatrixXd generator, Eigen::RowVectorXd initial)
      : pi_(std::move(generator)), phi_(std::move(initial)) {
    validate();
  }

  /// Initial phase fixed to the first one.
  explicit PhaseType(Eigen::MatrixXd generator) : pi_(std::move(generator)) {
    phi_ = Eigen::RowVectorXd::Zero(pi_.rows());
    if (pi_.rows() > 0) phi_(0) = 1.0;
    validate();
  }

  std::size_t phases() const noexcept { return static_cast<std::size_t>(pi_.rows()); }
  const Eigen::MatrixXd& generator() const noexcept { return pi_; }
  const Eigen::RowVectorXd& initial() const noexcept { return phi_; }

  Eigen::VectorXd exit_rates() const { return -(pi_ * Eigen::VectorXd::Ones(pi_.rows())); }

  Eigen::MatrixXd diagonal_part() const { return Eigen::MatrixXd(pi_.diagonal().asDiagonal()); }
  Eigen::MatrixXd off_diagonal_part() const { return pi_ - diagonal_part(); }

  double mean() const {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(pi_.rows());
    return -(phi_ * pi_.partialPivLu().solve(ones))(0);
  }

  double variance() const {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(pi_.rows());
    const auto lu = pi_.partialPivLu();
    const Eigen::VectorXd once = lu.solve(ones);
    const double second = 2.0 * (phi_ * lu.solve(once))(0);
    const double m = mean();
    return second - m * m;
  }

 private:
  void validate() const {
    const auto p = pi_.rows();
    if (p == 0 || pi_.cols() != p) throw ValidationError("phase-type generator must be square and non-empty");
    if (phi_.size() != p) throw ValidationError("initial distribution size mismatch");
    const double scale = pi_.cwiseAbs().maxCoeff();
    const double eps = 1e-12 * std::max(1.0, scale);
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j < p; ++j)
        if (i != j && pi_(i, j) < 0) throw ValidationError("phase-type generator is not Metzler");
      if (pi_.row(i).sum() > eps) throw ValidationError("phase-type generator has a positive row sum");
    }
    if ((phi_.array() < 0).any() || std::abs(phi_.sum() - 1.0) > 1e-12)
      throw ValidationError("initial phase distribution must be a probability vector");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(pi_);
    if (!lu.isInvertible()) throw ValidationError("phase-type generator is singular (some phase never absorbs)");
  }

  Eigen::MatrixXd pi_;
  Eigen::RowVectorXd phi_;
};

struct ErlangSpec {
  std::size_t shape = 1;
  double mean = 1.0;
};

/// Sum of `shape` i.i.d. exponentials with total mean `mean`: bidiagonal
/// generator with -p/mean on the diagonal and p/mean above it.
inline PhaseType erlang(const ErlangSpec& spec) {
  if (spec.shape < 1) throw ValidationError("Erlang shape must be >= 1");
  if (!(spec.mean > 0)) throw ValidationError("Erlang mean must be positive");
  const auto p = static_cast<Eigen::Index>(spec.shape);
  const double rate = static_cast<double>(spec.shape) / spec.mean;
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index l = 0; l < p; ++l) {
    pi(l, l) = -rate;
    if (l + 1 < p) pi(l, l + 1) = rate;
  }
  return PhaseType(std::move(pi));
}

inline PhaseType exponential_law(double rate) {
  if (!(rate > 0)) throw ValidationError("exponential rate must be positive");
  return PhaseType(Eigen::MatrixXd::Constant(1, 1, -rate));
}

/// Law of min(Y, X) for Y ~ y and independent X ~ Exp(delta): the generator
/// shifts to Pi - delta * I with the same initial distribution.
inline PhaseType min_with_exponential(const PhaseType& y, double delta) {
  if (!(delta > 0)) throw ValidationError("min_with_exponential: delta must be positive");
  const auto p = y.generator().rows();
  return PhaseType(y.generator() - delta * Eigen::MatrixXd::Identity(p, p), y.initial());
}

inline Eigen::VectorXd exit_rates(const PhaseType& d) { return d.exit_rates(); }

inline double cdf(const PhaseType& d, double t) {
  if (t < 0) throw ValidationError("cdf: t must be non-negative");
  if (t == 0) return 0.0;
  const Eigen::MatrixXd e = (t * d.generator()).exp();
  const double survival = (d.initial() * e * Eigen::VectorXd::Ones(e.rows()))(0);
  return std::clamp(1.0 - survival, 0.0, 1.0);
}

/// Runs the absorbing chain from a phase drawn from the initial distribution.
inline double sample(const PhaseType& d, Stream& rng) {
  const auto& pi = d.generator();
  const auto p = pi.rows();
  auto pick_initial = [&]() -> Eigen::Index {
    double u = rng.uniform();
    for (Eigen::Index l = 0; l < p; ++l) {
      u -= d.initial()(l);
      if (u <= 0) return l;
    }
    return p - 1;
  };
  Eigen::Index phase = pick_initial();
  double t = 0.0;
  for (;;) {
    const double out = -pi(phase, phase);
    t += rng.exponential(out);
    double u = rng.uniform() * out;
    Eigen::Index next = -1;
    for (Eigen::Index m = 0; m < p; ++m) {
      if (m == phase) continue;
      u -= pi(phase, m);
      if (u <= 0) {
        next = m;
        break;
      }
    }
    if (next < 0) return t;  // remaining mass is the exit rate
    phase = next;
  }
}

}  // namespace episir
