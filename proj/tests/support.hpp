#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "episir/graph.hpp"
#include "episir/params.hpp"
#include "episir/phase_type.hpp"

namespace testing_support {

/// sup_t |F_n(t) - F(t)| over the sample points.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double f = cdf(samples[k]);
    d = std::max({d, std::abs(static_cast<double>(k + 1) / n - f), std::abs(f - static_cast<double>(k) / n)});
  }
  return d;
}

/// Two-sample KS statistic on integer-valued (or any) data.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(a.size()) - static_cast<double>(j) / static_cast<double>(b.size())));
  }
  return d;
}

struct Instance {
  episir::Graph graph;
  episir::EpidemicParams params;
};

/// Random connected-or-not small instance: each pair is an edge with
/// probability 0.6, rates uniform in [0.05, 1], random non-empty infected set
/// leaving at least one susceptible node when n > 1. `phases` > 0 adds Erlang
/// isolation with means uniform in [0.5, 5].
inline Instance random_instance(std::mt19937_64& gen, std::size_t n, std::size_t phases = 0) {
  std::uniform_real_distribution<double> rate(0.05, 1.0), coin(0.0, 1.0), mean(0.5, 5.0);
  std::vector<episir::Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (coin(gen) < 0.6) edges.emplace_back(i, j);
  episir::Graph g(n, edges);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), gen);
  const std::size_t k = n == 1 ? 1 : 1 + static_cast<std::size_t>(coin(gen) * static_cast<double>(n - 1)) % (n - 1);
  std::vector<std::size_t> infected(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(infected.begin(), infected.end());
  episir::EpidemicParams p;
  for (std::size_t i = 0; i < n; ++i) {
    p.beta.push_back(rate(gen));
    p.delta.push_back(rate(gen));
  }
  p.initially_infected = infected;
  if (phases > 0) {
    std::vector<episir::PhaseType> laws;
    for (std::size_t i = 0; i < n; ++i) laws.push_back(episir::erlang({phases, mean(gen)}));
    p.isolation = laws;
  }
  return {g, p};
}

}  // namespace testing_support
