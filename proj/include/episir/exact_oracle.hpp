#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <unordered_map>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "episir/errors.hpp"
#include "episir/graph.hpp"
#include "episir/params.hpp"

namespace episir {

/// Mixed-radix encoding of a joint nodal state. Digit i is node i's tag:
/// 0 = S, 1..p = infected in phase l, p + 1 = R.
class ChainState {
 public:
  ChainState(std::size_t nodes, std::size_t phases) : n_(nodes), radix_(phases + 2) {}

  std::size_t radix() const noexcept { return radix_; }
  std::size_t removed_tag() const noexcept { return radix_ - 1; }

  /// radix^n, or 0 when that overflows 64 bits.
  std::uint64_t state_count() const noexcept {
    std::uint64_t count = 1;
    for (std::size_t i = 0; i < n_; ++i) {
      if (count > UINT64_MAX / radix_) return 0;
      count *= radix_;
    }
    return count;
  }

  std::uint64_t encode(const std::vector<std::size_t>& tags) const {
    std::uint64_t code = 0;
    for (std::size_t i = n_; i-- > 0;) code = code * radix_ + tags[i];
    return code;
  }

  std::vector<std::size_t> decode(std::uint64_t code) const {
    std::vector<std::size_t> tags(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      tags[i] = static_cast<std::size_t>(code % radix_);
      code /= radix_;
    }
    return tags;
  }

 private:
  std::size_t n_;
  std::size_t radix_;
};

struct OracleOptions {
  std::uint64_t max_states = 1'000'000;
};

namespace detail {

// Reachable part of the product chain, generator stored as transition lists.
struct ProductChain {
  std::vector<std::uint64_t> codes;
  std::vector<std::vector<std::pair<std::size_t, double>>> out;  // (target index, rate)
  std::vector<double> exit_total;
  std::vector<bool> absorbing;
  std::vector<double> removed;  // number of R nodes in each state
  std::vector<double> initial;  // initial probability per state
};

inline ProductChain build_product_chain(const Graph& g, const EpidemicParams& params, const OracleOptions& opt) {
  params.validate(g);
  const std::size_t n = g.node_count();
  const std::size_t p = params.phase_count();
  ChainState coder(n, p);
  const std::uint64_t total = coder.state_count();
  if (total == 0 || total > opt.max_states)
    throw SizeError("exact oracle: state space " + std::to_string(coder.radix()) + "^" + std::to_string(n) +
                    " exceeds the cap of " + std::to_string(opt.max_states) + " states");

  std::vector<Eigen::MatrixXd> law(n);
  std::vector<Eigen::RowVectorXd> phi(n);
  for (std::size_t i = 0; i < n; ++i) {
    const PhaseType z = params.removal_law(i);
    law[i] = z.generator();
    phi[i] = z.initial();
  }

  ProductChain chain;
  std::unordered_map<std::uint64_t, std::size_t> index;
  std::deque<std::size_t> frontier;
  auto intern = [&](std::uint64_t code) -> std::size_t {
    auto [it, fresh] = index.emplace(code, chain.codes.size());
    if (fresh) {
      chain.codes.push_back(code);
      chain.initial.push_back(0.0);
      frontier.push_back(it->second);
    }
    return it->second;
  };

  // Initial distribution: each initially infected node starts in a phase drawn from phi.
  std::vector<std::pair<std::vector<std::size_t>, double>> starts{{std::vector<std::size_t>(n, 0), 1.0}};
  for (auto i : params.initially_infected) {
    std::vector<std::pair<std::vector<std::size_t>, double>> next;
    for (auto& [tags, prob] : starts)
      for (Eigen::Index l = 0; l < phi[i].size(); ++l) {
        if (phi[i](l) <= 0) continue;
        auto t = tags;
        t[i] = static_cast<std::size_t>(l) + 1;
        next.emplace_back(std::move(t), prob * phi[i](l));
      }
    starts = std::move(next);
  }
  for (auto& [tags, prob] : starts) chain.initial[intern(coder.encode(tags))] += prob;

  while (!frontier.empty()) {
    const std::size_t s = frontier.front();
    frontier.pop_front();
    const auto tags = coder.decode(chain.codes[s]);
    std::vector<std::pair<std::size_t, double>> moves;
    std::size_t removed = 0;
    bool any_infected = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t tag = tags[i];
      if (tag == coder.removed_tag()) {
        ++removed;
      } else if (tag == 0) {
        std::size_t k = 0;
        for (auto j : g.neighbors(i))
          if (tags[j] != 0 && tags[j] != coder.removed_tag()) ++k;
        if (k == 0) continue;
        const double rate = params.beta[i] * static_cast<double>(k);
        for (Eigen::Index l = 0; l < phi[i].size(); ++l) {
          if (phi[i](l) <= 0) continue;
          auto t = tags;
          t[i] = static_cast<std::size_t>(l) + 1;
          moves.emplace_back(coder.encode(t), rate * phi[i](l));
        }
      } else {
        any_infected = true;
        const auto l = static_cast<Eigen::Index>(tag - 1);
        double exit = 0.0;
        for (Eigen::Index m = 0; m < law[i].cols(); ++m) {
          exit -= law[i](l, m);
          if (m == l || law[i](l, m) <= 0) continue;
          auto t = tags;
          t[i] = static_cast<std::size_t>(m) + 1;
          moves.emplace_back(coder.encode(t), law[i](l, m));
        }
        if (exit > 0) {
          auto t = tags;
          t[i] = coder.removed_tag();
          moves.emplace_back(coder.encode(t), exit);
        }
      }
    }
    std::vector<std::pair<std::size_t, double>> resolved;
    double out_rate = 0.0;
    for (auto& [code, rate] : moves) {
      resolved.emplace_back(intern(code), rate);
      out_rate += rate;
    }
    if (chain.out.size() <= s) {
      chain.out.resize(s + 1);
      chain.exit_total.resize(s + 1);
      chain.absorbing.resize(s + 1);
      chain.removed.resize(s + 1);
    }
    chain.out[s] = std::move(resolved);
    chain.exit_total[s] = out_rate;
    chain.absorbing[s] = !any_infected;
    chain.removed[s] = static_cast<double>(removed);
  }
  return chain;
}

}  // namespace detail

/// Expected number of infections after t = 0, by solving the hitting system of
/// the full product chain restricted to states reachable from the start.
inline double exact_lambda(const Graph& g, const EpidemicParams& params, const OracleOptions& opt = {}) {
  const auto chain = detail::build_product_chain(g, params, opt);
  const std::size_t m = chain.codes.size();
  std::vector<std::size_t> transient_index(m, SIZE_MAX);
  std::size_t nt = 0;
  for (std::size_t s = 0; s < m; ++s)
    if (!chain.absorbing[s]) transient_index[s] = nt++;

  std::vector<double> h(m, 0.0);
  for (std::size_t s = 0; s < m; ++s)
    if (chain.absorbing[s]) h[s] = chain.removed[s];

  if (nt > 0) {
    // -Q_TT h_T = Q_TA h_A
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nt));
    for (std::size_t s = 0; s < m; ++s) {
      if (chain.absorbing[s]) continue;
      const auto row = static_cast<Eigen::Index>(transient_index[s]);
      trip.emplace_back(row, row, chain.exit_total[s]);
      for (auto [target, rate] : chain.out[s]) {
        if (chain.absorbing[target])
          rhs[row] += rate * h[target];
        else
          trip.emplace_back(row, static_cast<Eigen::Index>(transient_index[target]), -rate);
      }
    }
    Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nt));
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw NumericError("exact oracle: singular hitting system");
    const Eigen::VectorXd ht = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw NumericError("exact oracle: hitting solve failed");
    for (std::size_t s = 0; s < m; ++s)
      if (!chain.absorbing[s]) h[s] = ht[static_cast<Eigen::Index>(transient_index[s])];
  }
  double expected_removed = 0.0;
  for (std::size_t s = 0; s < m; ++s) expected_removed += chain.initial[s] * h[s];
  return std::max(0.0, expected_removed - static_cast<double>(params.sigma_I0()));
}

/// E[sigma_R(t)] on an increasing time grid, by uniformization of the
/// reachable product chain.
inline std::vector<double> exact_removed_series(const Graph& g, const EpidemicParams& params, const std::vector<double>& t_grid,
                                                const OracleOptions& opt = {}) {
  for (std::size_t k = 0; k < t_grid.size(); ++k)
    if (t_grid[k] < 0 || (k > 0 && t_grid[k] < t_grid[k - 1])) throw ValidationError("time grid must be non-negative and increasing");
  const auto chain = detail::build_product_chain(g, params, opt);
  const std::size_t m = chain.codes.size();
  double q = 0.0;
  for (double r : chain.exit_total) q = std::max(q, r);

  std::vector<double> dist = chain.initial;
  auto propagate = [&](double dt) {
    if (q == 0.0 || dt == 0.0) return;
    const double chunk = 30.0 / q;
    while (dt > 0) {
      const double step = std::min(dt, chunk);
      dt -= step;
      const double qt = q * step;
      std::vector<double> term = dist, acc(m, 0.0), next(m);
      double weight = std::exp(-qt), mass = 0.0;
      for (std::size_t k = 0;; ++k) {
        for (std::size_t s = 0; s < m; ++s) acc[s] += weight * term[s];
        mass += weight;
        if (1.0 - mass < 1e-15 || k > 10000) break;
        // term <- term * (I + Q / q)
        for (std::size_t s = 0; s < m; ++s) next[s] = term[s] * (1.0 - chain.exit_total[s] / q);
        for (std::size_t s = 0; s < m; ++s)
          for (auto [target, rate] : chain.out[s]) next[target] += term[s] * rate / q;
        term.swap(next);
        weight *= qt / static_cast<double>(k + 1);
      }
      dist.swap(acc);
    }
  };

  std::vector<double> series;
  double now = 0.0;
  for (double t : t_grid) {
    propagate(t - now);
    now = t;
    double e = 0.0;
    for (std::size_t s = 0; s < m; ++s) e += dist[s] * chain.removed[s];
    series.push_back(e);
  }
  return series;
}

}  // namespace episir
