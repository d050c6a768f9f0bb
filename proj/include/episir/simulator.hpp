#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <thread>
#include <vector>

#include "episir/errors.hpp"
#include "episir/graph.hpp"
#include "episir/params.hpp"
#include "episir/rng.hpp"

namespace episir {

enum class EventKind { infect, recover, isolate };

struct Event {
  double time;
  std::size_t node;
  EventKind kind;
  friend bool operator==(const Event&, const Event&) = default;
};

struct CountsRow {
  double t;
  std::size_t susceptible;
  std::size_t infected;
  std::size_t removed;
};

struct SimOutcome {
  std::size_t final_removed = 0;
  std::size_t infections_after_t0 = 0;
  std::vector<Event> event_log;
  std::vector<CountsRow> counts_series;
};

struct SimOptions {
  bool record = true;
  std::uint64_t max_events = 100'000'000;
};

struct LambdaEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t replicas = 0;
  std::uint64_t seed = 0;
};

namespace detail {

struct CompiledModel {
  const Graph& g;
  const EpidemicParams& params;
  std::vector<Eigen::MatrixXd> law;       // removal-law generator per node
  std::vector<Eigen::VectorXd> iso_exit;  // exit rates of the isolation law alone

  CompiledModel(const Graph& graph, const EpidemicParams& p) : g(graph), params(p) {
    const std::size_t n = g.node_count();
    law.resize(n);
    iso_exit.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      law[i] = params.removal_law(i).generator();
      iso_exit[i] = params.isolation ? (*params.isolation)[i].exit_rates() : Eigen::VectorXd::Zero(1);
    }
  }
};

// Gillespie direct method. Node states: 0 = S, 1..p = infected in that phase,
// p + 1 = R. Each infected node evolves under its removal law (phase moves,
// recovery at delta, isolation at the remaining exit rate).
inline SimOutcome run_gillespie(const CompiledModel& model, Stream& rng, const SimOptions& opt) {
  const Graph& g = model.g;
  const EpidemicParams& params = model.params;
  const auto& law = model.law;
  const auto& iso_exit = model.iso_exit;
  const std::size_t n = g.node_count();
  const std::size_t p = params.phase_count();
  const std::size_t removed_tag = p + 1;

  std::vector<std::size_t> state(n, 0);
  std::vector<std::size_t> infected_nbrs(n, 0);
  std::vector<double> rate(n, 0.0);
  std::size_t n_s = n, n_i = 0, n_r = 0;

  auto node_rate = [&](std::size_t i) -> double {
    const std::size_t s = state[i];
    if (s == 0) return params.beta[i] * static_cast<double>(infected_nbrs[i]);
    if (s == removed_tag) return 0.0;
    return -law[i](s - 1, s - 1);
  };
  auto start_phase = [&](std::size_t i) -> std::size_t {
    const auto& phi = params.isolation ? (*params.isolation)[i].initial() : Eigen::RowVectorXd::Ones(1).eval();
    double u = rng.uniform();
    for (Eigen::Index l = 0; l < phi.size(); ++l) {
      u -= phi(l);
      if (u <= 0) return static_cast<std::size_t>(l) + 1;
    }
    return static_cast<std::size_t>(phi.size());
  };
  auto become_infected = [&](std::size_t i) {
    state[i] = start_phase(i);
    --n_s;
    ++n_i;
    rate[i] = node_rate(i);
    for (auto j : g.neighbors(i)) {
      ++infected_nbrs[j];
      rate[j] = node_rate(j);
    }
  };
  auto become_removed = [&](std::size_t i) {
    state[i] = removed_tag;
    --n_i;
    ++n_r;
    rate[i] = 0.0;
    for (auto j : g.neighbors(i)) {
      --infected_nbrs[j];
      rate[j] = node_rate(j);
    }
  };

  SimOutcome out;
  for (auto i : params.initially_infected) become_infected(i);
  double t = 0.0;
  if (opt.record) out.counts_series.push_back({t, n_s, n_i, n_r});

  std::uint64_t events = 0;
  while (n_i > 0) {
    if (++events > opt.max_events)
      throw ConvergenceError("simulate: event cap exceeded", std::vector<double>(rate.begin(), rate.end()), t);
    double total = 0.0;
    for (double r : rate) total += r;
    t += rng.exponential(total);
    double u = rng.uniform() * total;
    std::size_t i = 0;
    for (; i + 1 < n; ++i) {
      u -= rate[i];
      if (u <= 0) break;
    }
    while (rate[i] == 0.0) --i;  // guard against round-off past the last active node

    const std::size_t s = state[i];
    if (s == 0) {
      become_infected(i);
      if (opt.record) out.event_log.push_back({t, i, EventKind::infect});
    } else {
      const auto l = static_cast<Eigen::Index>(s - 1);
      double v = rng.uniform() * rate[i];
      if ((v -= params.delta[i]) <= 0) {
        become_removed(i);
        if (opt.record) out.event_log.push_back({t, i, EventKind::recover});
      } else if (params.isolation && (v -= iso_exit[i](l)) <= 0) {
        become_removed(i);
        if (opt.record) out.event_log.push_back({t, i, EventKind::isolate});
      } else {
        Eigen::Index next = -1;
        for (Eigen::Index m = 0; m < law[i].cols(); ++m) {
          if (m == l || law[i](l, m) <= 0) continue;
          next = m;
          if ((v -= law[i](l, m)) <= 0) break;
        }
        if (next < 0) {
          become_removed(i);
          if (opt.record) out.event_log.push_back({t, i, params.isolation ? EventKind::isolate : EventKind::recover});
        } else {
          state[i] = static_cast<std::size_t>(next) + 1;
          rate[i] = node_rate(i);
          continue;  // phase move: counts unchanged
        }
      }
    }
    if (opt.record) out.counts_series.push_back({t, n_s, n_i, n_r});
  }
  out.final_removed = n_r;
  out.infections_after_t0 = n_r - params.sigma_I0();
  return out;
}

}  // namespace detail

/// One exact realization of the plain SIR process; runs until no node is infected.
inline SimOutcome simulate_sir(const Graph& g, const EpidemicParams& params, Stream& rng, const SimOptions& opt = {}) {
  params.validate(g);
  if (params.has_isolation()) throw ValidationError("simulate_sir: params carry isolation laws; use simulate_sir_isolation");
  return detail::run_gillespie(detail::CompiledModel(g, params), rng, opt);
}

/// Realization of the SIR process with phase-type isolation. Each infected
/// node tracks its isolation phase; removal happens at rate delta (recovery) or
/// through the isolation law's exit rates.
inline SimOutcome simulate_sir_isolation(const Graph& g, const EpidemicParams& params, Stream& rng, const SimOptions& opt = {}) {
  params.validate(g);
  if (!params.has_isolation()) throw ValidationError("simulate_sir_isolation: isolation laws required");
  return detail::run_gillespie(detail::CompiledModel(g, params), rng, opt);
}

/// Per-replica infections after t = 0; replica r draws from Stream(seed, r),
/// so the result does not depend on `threads`.
inline std::vector<double> replica_infections(const Graph& g, const EpidemicParams& params, std::size_t replicas,
                                              std::uint64_t seed, unsigned threads = 0) {
  params.validate(g);
  if (replicas == 0) throw ValidationError("replicas must be >= 1");
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, replicas));
  std::vector<double> values(replicas);
  const SimOptions opt{.record = false};
  const detail::CompiledModel model(g, params);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      Stream rng(seed, r);
      values[r] = static_cast<double>(detail::run_gillespie(model, rng, opt).infections_after_t0);
    }
  };
  if (threads == 1) {
    work(0, replicas);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (replicas + threads - 1) / threads;
    for (std::size_t b = 0; b < replicas; b += chunk) pool.emplace_back(work, b, std::min(replicas, b + chunk));
  }
  return values;
}

inline LambdaEstimate estimate_lambda(const Graph& g, const EpidemicParams& params, std::size_t replicas,
                                      std::uint64_t seed, unsigned threads = 0) {
  const auto values = replica_infections(g, params, replicas, seed, threads);
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(replicas);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double se = replicas > 1 ? std::sqrt(ss / static_cast<double>(replicas - 1) / static_cast<double>(replicas)) : 0.0;
  return {mean, se, replicas, seed};
}

}  // namespace episir
