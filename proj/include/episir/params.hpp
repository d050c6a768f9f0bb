#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "episir/errors.hpp"
#include "episir/graph.hpp"
#include "episir/phase_type.hpp"

namespace episir {

/// Per-node rates of the networked SIR process. `beta[i]` is the rate at which
/// susceptible node i is infected per infected neighbor; `delta[i]` the natural
/// recovery rate. When `isolation` is set, node i is additionally removed after
/// a phase-type delay isolation[i], so its total infectious period is
/// min(Exp(delta[i]), isolation[i]).
struct EpidemicParams {
  std::vector<double> beta;
  std::vector<double> delta;
  std::optional<std::vector<PhaseType>> isolation;
  std::vector<std::size_t> initially_infected;

  static EpidemicParams uniform(std::size_t n, double beta, double delta, std::vector<std::size_t> infected) {
    return EpidemicParams{std::vector<double>(n, beta), std::vector<double>(n, delta), std::nullopt, std::move(infected)};
  }

  bool has_isolation() const noexcept { return isolation.has_value(); }

  std::size_t phase_count() const noexcept { return isolation ? isolation->front().phases() : 1; }

  std::size_t sigma_I0() const noexcept { return initially_infected.size(); }

  std::vector<bool> infected_mask(std::size_t n) const {
    std::vector<bool> mask(n, false);
    for (auto i : initially_infected) mask.at(i) = true;
    return mask;
  }

  /// Law of node i's infectious period (the exponential recovery clock folded
  /// into the isolation law when present).
  PhaseType removal_law(std::size_t i) const {
    if (isolation) return min_with_exponential((*isolation)[i], delta[i]);
    return exponential_law(delta[i]);
  }

  void validate(const Graph& g) const {
    const std::size_t n = g.node_count();
    if (beta.size() != n || delta.size() != n) throw ValidationError("rate vectors must have one entry per node");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(beta[i] > 0)) throw ValidationError("beta[" + std::to_string(i) + "] must be positive");
      if (!(delta[i] > 0)) throw ValidationError("delta[" + std::to_string(i) + "] must be positive");
    }
    if (initially_infected.empty()) throw ValidationError("at least one node must be initially infected");
    auto sorted = initially_infected;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ValidationError("initially infected set has duplicates");
    if (sorted.back() >= n) throw ValidationError("initially infected node out of range");
    if (isolation) {
      if (isolation->size() != n) throw ValidationError("isolation law required for every node");
      const std::size_t p = isolation->front().phases();
      for (const auto& law : *isolation)
        if (law.phases() != p) throw ValidationError("isolation laws must share one phase count");
    }
  }
};

}  // namespace episir
