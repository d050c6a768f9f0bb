#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "episir/gp.hpp"

using namespace episir;
using namespace episir::gp;

namespace {

Eigen::VectorXd random_y(std::mt19937_64& gen, std::size_t n, double spread = 2.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (auto& v : y) v = u(gen);
  return y;
}

GpProblem mixed_problem() {
  GpProblem p;
  const auto x = p.add_variable("x", 0.1, 10), y = p.add_variable("y", 0.1, 10), z = p.add_variable("z", 0.1, 10);
  p.objective = Monomial(2.0) * Monomial::var(x, -1) * Monomial::var(y, 0.5) + Monomial::var(z);
  p.add_constraint(Monomial(0.3) * Monomial::var(x) * Monomial::var(y, 2.0) + Monomial(0.1) * Monomial::var(z, -1.5) +
                   Monomial(0.2) * Monomial::var(x, -1) * Monomial::var(z));
  p.add_constraint(Monomial(0.5) * Monomial::var(x, 1.0) + Monomial(0.5) * Monomial::var(y, -1));
  return p;
}

}  // namespace

TEST(Evaluate, MonomialAndPosynomial) {
  const std::vector<double> x2{2.0};
  EXPECT_DOUBLE_EQ(evaluate(Monomial(3.0) * Monomial::var(0, 2.0), x2), 12.0);
  const std::vector<double> x1{1.0};
  EXPECT_DOUBLE_EQ(evaluate(Posynomial(Monomial::var(0)) + Monomial::var(0, -1.0), x1), 2.0);
}

TEST(Evaluate, CostFormAtCheapEnd) {
  const double lo = 0.00266, hi = 0.0133;
  const double c1 = 1.0 / (1.0 / lo - 1.0 / hi), c2 = -c1 / hi;
  const std::vector<double> b{hi};
  // the positive part of c1/beta + c2; c2 is absorbed into the budget
  EXPECT_NEAR(evaluate(Monomial(c1) * Monomial::var(0, -1.0), b) + c2, 0.0, 1e-15);
  const std::vector<double> bl{lo};
  EXPECT_NEAR(evaluate(Monomial(c1) * Monomial::var(0, -1.0), bl) + c2, 1.0, 1e-12);
}

TEST(Evaluate, MissingOrNonPositiveVariable) {
  const std::vector<double> x{1.0};
  EXPECT_THROW(evaluate(Monomial::var(3), x), std::domain_error);
  const std::vector<double> bad{-1.0};
  EXPECT_THROW(evaluate(Monomial::var(0), bad), std::domain_error);
}

TEST(MonomialAlgebra, ProductCancelsExponents) {
  const Monomial m = Monomial(2.0) * Monomial::var(0, 1.5) * Monomial::var(0, -1.5);
  EXPECT_TRUE(m.exponents.empty());
  EXPECT_DOUBLE_EQ(m.coeff, 2.0);
  EXPECT_THROW(Monomial(0.0), ValidationError);
  EXPECT_THROW(Monomial(-1.0), ValidationError);
}

TEST(LogConvex, MonomialBecomesAffine) {
  GpProblem p;
  p.add_variable("x", 0.1, 10);
  p.objective = Monomial(3.0) * Monomial::var(0, 2.5);
  const auto lp = to_log_convex(p);
  ASSERT_EQ(lp.objective.terms.size(), 1u);
  Eigen::VectorXd y(1);
  y << 0.7;
  EXPECT_NEAR(lp.objective.value(y), std::log(3.0) + 2.5 * 0.7, 1e-14);
}

TEST(LogConvex, XPlusInverseMinimizedAtZero) {
  GpProblem p;
  p.add_variable("x", 0.1, 10);
  p.objective = Posynomial(Monomial::var(0)) + Monomial::var(0, -1.0);
  const auto lp = to_log_convex(p);
  Eigen::VectorXd y0 = Eigen::VectorXd::Zero(1), g;
  lp.objective.value_gradient(y0, g);
  EXPECT_NEAR(g[0], 0.0, 1e-15);
  for (double d : {-0.3, 0.1, 0.5}) {
    Eigen::VectorXd y(1);
    y << d;
    EXPECT_GT(lp.objective.value(y), lp.objective.value(y0));
  }
}

TEST(LogConvex, TransformMatchesEvaluate) {
  const GpProblem p = mixed_problem();
  const auto lp = to_log_convex(p);
  std::mt19937_64 gen(7);
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd y = random_y(gen, 3);
    const std::vector<double> x{std::exp(y[0]), std::exp(y[1]), std::exp(y[2])};
    EXPECT_NEAR(std::exp(lp.objective.value(y)) / evaluate(p.objective, x), 1.0, 1e-10);
    for (std::size_t c = 0; c < p.ineq_constraints.size(); ++c)
      EXPECT_NEAR(std::exp(lp.ineq[c].value(y)) / evaluate(p.ineq_constraints[c], x), 1.0, 1e-10);
  }
}

TEST(LogConvex, GradientMatchesFiniteDifferences) {
  const auto lp = to_log_convex(mixed_problem());
  std::mt19937_64 gen(11);
  for (int k = 0; k < 10; ++k) {
    const Eigen::VectorXd y = random_y(gen, 3);
    for (const LogSumExp* f : {&lp.objective, &lp.ineq[0], &lp.ineq[1]}) {
      Eigen::VectorXd g;
      f->value_gradient(y, g);
      for (Eigen::Index i = 0; i < 3; ++i) {
        const double h = 1e-6;
        Eigen::VectorXd yp = y, ym = y;
        yp[i] += h;
        ym[i] -= h;
        const double fd = (f->value(yp) - f->value(ym)) / (2 * h);
        EXPECT_LE(std::abs(fd - g[i]), 1e-6 * std::max(1.0, std::abs(g[i])));
      }
    }
  }
}

TEST(LogConvex, HessianMatchesFiniteDifferences) {
  const auto lp = to_log_convex(mixed_problem());
  std::mt19937_64 gen(5);
  const Eigen::VectorXd y = random_y(gen, 3);
  Eigen::VectorXd g;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3, 3);
  lp.ineq[0].value_gradient(y, g, &h);
  for (Eigen::Index i = 0; i < 3; ++i) {
    Eigen::VectorXd yp = y, ym = y, gp, gm;
    yp[i] += 1e-6;
    ym[i] -= 1e-6;
    lp.ineq[0].value_gradient(yp, gp);
    lp.ineq[0].value_gradient(ym, gm);
    const Eigen::VectorXd col = (gp - gm) / 2e-6;
    for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(h(j, i), col[j], 1e-6);
  }
}

TEST(LogConvex, MidpointConvexity) {
  const auto lp = to_log_convex(mixed_problem());
  std::mt19937_64 gen(3);
  for (int k = 0; k < 200; ++k) {
    const Eigen::VectorXd a = random_y(gen, 3, 4.0), b = random_y(gen, 3, 4.0);
    for (auto& f : lp.ineq) EXPECT_LE(f.value(0.5 * (a + b)), 0.5 * (f.value(a) + f.value(b)) + 1e-12);
  }
}

TEST(LogConvex, LargeExponentsDoNotOverflow) {
  GpProblem p;
  p.add_variable("x", 1e-3, 1e3);
  p.objective = Posynomial(Monomial(1e300) * Monomial::var(0, 50)) + Monomial::var(0, -50);
  const auto lp = to_log_convex(p);
  Eigen::VectorXd y(1);
  y << 6.0;
  EXPECT_TRUE(std::isfinite(lp.objective.value(y)));
}

TEST(LogConvex, JsonDumpNamesVariables) {
  const auto j = to_json(to_log_convex(mixed_problem()));
  ASSERT_EQ(j["variables"].size(), 3u);
  EXPECT_EQ(j["variables"][0]["name"], "x");
  EXPECT_EQ(j["inequalities"].size(), 2u);
  EXPECT_EQ(j["objective"].size(), 2u);
}

TEST(Solve, SimpleLowerBound) {
  GpProblem p;
  const auto x = p.add_variable("x", 0.1, 10);
  p.objective = Monomial::var(x);
  p.add_constraint(Monomial::var(x, -1.0));
  const auto s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.point[x], 1.0, 1e-6);
  EXPECT_NEAR(s.objective_value, 1.0, 1e-6);
}

TEST(Solve, AmGm) {
  GpProblem p;
  const auto x = p.add_variable("x", 1e-3, 1e3), y = p.add_variable("y", 1e-3, 1e3);
  p.objective = Posynomial(Monomial::var(x)) + Monomial::var(y);
  p.add_constraint(Monomial::var(x, -1) * Monomial::var(y, -1));
  const auto s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.objective_value, 2.0, 1e-6);
  EXPECT_NEAR(s.point[x], 1.0, 1e-4);
  EXPECT_NEAR(s.point[y], 1.0, 1e-4);
  EXPECT_LE(s.kkt_residual, 1e-6);
}

TEST(Solve, EmptyFeasibleSetIsInfeasible) {
  GpProblem p;
  const auto x = p.add_variable("x", 0.1, 1.0);
  p.objective = Monomial::var(x);
  p.add_constraint(Monomial(2.0) * Monomial::var(x, -1.0));
  const auto s = solve(p);
  EXPECT_EQ(s.status, Status::infeasible);
  EXPECT_GT(s.min_violation, 1e-8);
}

TEST(Solve, EqualityConstraint) {
  GpProblem p;
  const auto x = p.add_variable("x", 1e-2, 1e2), y = p.add_variable("y", 1e-2, 1e2);
  p.objective = Posynomial(Monomial::var(x)) + Monomial(4.0) * Monomial::var(y);
  p.eq_constraints.push_back(Monomial::var(x) * Monomial::var(y, -1.0) * Monomial(0.5));  // x = 2y
  p.add_constraint(Monomial::var(x, -1.0) * Monomial::var(y, -1.0));                     // x y >= 1
  const auto s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  // x = 2y, x y = 1 -> y = 1/sqrt(2), objective 6/sqrt(2)
  EXPECT_NEAR(s.point[y], 1.0 / std::sqrt(2.0), 1e-5);
  EXPECT_NEAR(s.objective_value, 6.0 / std::sqrt(2.0), 1e-6);
}

TEST(Solve, FixedVariableByDegenerateBox) {
  GpProblem p;
  const auto x = p.add_variable("x", 3.0, 3.0), y = p.add_variable("y", 1e-2, 1e2);
  p.objective = Posynomial(Monomial::var(y)) + Monomial::var(x);
  p.add_constraint(Monomial::var(x) * Monomial::var(y, -1.0) * Monomial(1.0 / 6.0));  // y >= x / 6
  const auto s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_DOUBLE_EQ(s.point[x], 3.0);
  EXPECT_NEAR(s.point[y], 0.5, 1e-6);
}

TEST(Solve, OptimalBeatsRandomFeasiblePoints) {
  const GpProblem p = mixed_problem();
  const auto s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  for (auto& c : p.ineq_constraints) EXPECT_LE(evaluate(c, s.point), 1.0 + 1e-8);
  for (std::size_t k = 0; k < p.box.size(); ++k) {
    EXPECT_GE(s.point[k], p.box[k].lo);
    EXPECT_LE(s.point[k], p.box[k].hi);
  }
  std::mt19937_64 gen(99);
  int accepted = 0;
  for (int trial = 0; accepted < 1000 && trial < 1000000; ++trial) {
    std::vector<double> z(3);
    for (std::size_t k = 0; k < 3; ++k) z[k] = std::exp(std::uniform_real_distribution<double>(std::log(p.box[k].lo), std::log(p.box[k].hi))(gen));
    bool ok = true;
    for (auto& c : p.ineq_constraints) ok = ok && evaluate(c, z) <= 1.0;
    if (!ok) continue;
    ++accepted;
    EXPECT_LE(s.objective_value, evaluate(p.objective, z) + 1e-8);
  }
  EXPECT_EQ(accepted, 1000);
}

TEST(Solve, ObjectiveOnBoxBoundary) {
  GpProblem p;
  const auto x = p.add_variable("x", 0.5, 4.0);
  p.objective = Monomial::var(x, -1.0);
  const auto s = solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.point[x], 4.0, 1e-6);
  EXPECT_LE(s.point[x], 4.0);
}

TEST(Solve, IterationCapReportsMaxIter) {
  const GpProblem p = mixed_problem();
  SolverOptions opt;
  opt.max_newton = 2;
  EXPECT_EQ(solve(p, opt).status, Status::max_iter);
}
