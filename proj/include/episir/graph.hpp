#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "episir/errors.hpp"
#include "episir/rng.hpp"

namespace episir {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected simple graph on nodes [0, n). Immutable once built.
class Graph {
 public:
  /// Edges are symmetrized and deduplicated; self-loops and out-of-range
  /// endpoints are rejected.
  Graph(std::size_t node_count, const std::vector<Edge>& edges) : n_(node_count), adjacency_(node_count) {
    if (node_count == 0) throw ValidationError("graph must have at least one node");
    std::set<Edge> unique;
    for (auto [a, b] : edges) {
      if (a == b) throw ValidationError("self-loop at node " + std::to_string(a));
      if (a >= n_ || b >= n_) throw ValidationError("edge endpoint out of range");
      unique.emplace(std::min(a, b), std::max(a, b));
    }
    edges_.assign(unique.begin(), unique.end());
    for (auto [a, b] : edges_) {
      adjacency_[a].push_back(b);
      adjacency_[b].push_back(a);
    }
    for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
  }

  std::size_t node_count() const noexcept { return n_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_.at(i); }

  bool adjacent(std::size_t i, std::size_t j) const {
    const auto& nbrs = adjacency_.at(i);
    return std::binary_search(nbrs.begin(), nbrs.end(), j);
  }

  Eigen::MatrixXd adjacency_matrix() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_, n_);
    for (auto [i, j] : edges_) a(i, j) = a(j, i) = 1.0;
    return a;
  }

  friend bool operator==(const Graph& x, const Graph& y) { return x.n_ == y.n_ && x.edges_ == y.edges_; }

 private:
  std::size_t n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

/// Reads "i j" lines; '#' starts a comment; an optional "n <count>" line fixes
/// the node count so that isolated trailing nodes survive.
inline Graph load_edge_list(std::istream& in) {
  std::vector<Edge> edges;
  std::size_t declared = 0;
  bool has_header = false;
  std::size_t max_index = 0;
  bool any_edge = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string first;
    if (!(fields >> first)) continue;
    auto parse_index = [&](const std::string& tok) -> std::size_t {
      if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); }))
        throw ParseError(line_no, "expected a non-negative integer, got '" + tok + "'");
      try {
        return static_cast<std::size_t>(std::stoull(tok));
      } catch (const std::exception&) {
        throw ParseError(line_no, "integer out of range: '" + tok + "'");
      }
    };
    std::string second, extra;
    if (!(fields >> second)) throw ParseError(line_no, "expected two fields");
    if (fields >> extra) throw ParseError(line_no, "unexpected trailing field '" + extra + "'");
    if (first == "n") {
      if (has_header) throw ParseError(line_no, "duplicate node-count header");
      declared = parse_index(second);
      if (declared == 0) throw ParseError(line_no, "node count must be positive");
      has_header = true;
      continue;
    }
    const std::size_t a = parse_index(first);
    const std::size_t b = parse_index(second);
    if (a == b) throw ValidationError("line " + std::to_string(line_no) + ": self-loop at node " + first);
    edges.emplace_back(a, b);
    max_index = std::max({max_index, a, b});
    any_edge = true;
  }
  std::size_t n = any_edge ? max_index + 1 : 0;
  if (has_header) {
    if (declared < n) throw ValidationError("header declares " + std::to_string(declared) + " nodes but edges reference node " + std::to_string(max_index));
    n = declared;
  }
  if (n == 0) throw ValidationError("edge list defines no nodes");
  return Graph(n, edges);
}

inline Graph parse_edge_list(const std::string& text) {
  std::istringstream in(text);
  return load_edge_list(in);
}

inline void write_edge_list(std::ostream& out, const Graph& g) {
  out << "n " << g.node_count() << '\n';
  for (auto [a, b] : g.edges()) out << a << ' ' << b << '\n';
}

inline std::vector<std::size_t> degrees(const Graph& g) {
  std::vector<std::size_t> d(g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) d[i] = g.neighbors(i).size();
  return d;
}

/// Largest adjacency eigenvalue by power iteration on A + I. The shift makes
/// the Perron root strictly dominant in modulus, so bipartite graphs converge.
/// Stops once the eigen-residual drops below tol (a bound on the eigenvalue
/// error for a symmetric matrix).
inline double spectral_radius(const Graph& g, double tol = 1e-10, std::size_t max_iter = 100000) {
  if (tol <= 0) throw ValidationError("tolerance must be positive");
  const std::size_t n = g.node_count();
  if (g.edge_count() == 0) return 0.0;
  Eigen::VectorXd x = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  Eigen::VectorXd y(n);
  double theta = 0.0;
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = x[i];
      for (auto j : g.neighbors(i)) acc += x[j];
      y[i] = acc;
    }
    theta = x.dot(y);  // Rayleigh quotient of A + I, ||x|| = 1
    const double residual = (y - theta * x).norm();
    if (residual <= tol) return theta - 1.0;
    x = y / y.norm();
  }
  throw ConvergenceError("spectral_radius: power iteration did not converge", std::vector<double>(x.data(), x.data() + n), theta - 1.0);
}

namespace graphs {

inline Graph path(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return Graph(n, e);
}

// Hub is node 0.
inline Graph star(std::size_t leaves) {
  std::vector<Edge> e;
  for (std::size_t i = 1; i <= leaves; ++i) e.emplace_back(0, i);
  return Graph(leaves + 1, e);
}

inline Graph complete(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return Graph(n, e);
}

inline Graph empty(std::size_t n) { return Graph(n, {}); }

inline Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  Stream rng(seed);
  std::vector<Edge> e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < p) e.emplace_back(i, j);
  return Graph(n, e);
}

/// Heterogeneous contact network with a prescribed spectral radius. Starts
/// from a Chung-Lu graph with heavy-tailed expected degrees, then toggles
/// single edges while that moves the spectral radius toward the target.
inline Graph synthetic_contact_graph(std::size_t n, double target_rho, std::uint64_t seed, double rho_tol = 5e-3) {
  Stream rng(seed);
  std::vector<double> weight(n);
  for (std::size_t i = 0; i < n; ++i) weight[i] = std::pow(static_cast<double>(i + 1), -0.5);
  double total = 0.0;
  for (double w : weight) total += w;
  const double mean_degree = 0.6 * target_rho;
  std::set<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double pij = std::min(1.0, mean_degree * n * weight[i] * weight[j] / (total * total));
      if (rng.uniform() < pij) edges.emplace(i, j);
    }
  // Keep the graph connected: chain any node without neighbors to a random earlier node.
  for (std::size_t i = 1; i < n; ++i) {
    bool has = false;
    for (auto& [a, b] : edges)
      if (a == i || b == i) { has = true; break; }
    if (!has) edges.emplace(rng() % i, i);
  }
  auto rho_of = [&](const std::set<Edge>& es) { return spectral_radius(Graph(n, {es.begin(), es.end()}), 1e-9); };
  double rho = rho_of(edges);
  for (int step = 0; step < 20000 && std::abs(rho - target_rho) > rho_tol; ++step) {
    std::size_t a = rng() % n, b = rng() % n;
    if (a == b) continue;
    Edge e{std::min(a, b), std::max(a, b)};
    auto trial = edges;
    if (rho < target_rho) {
      if (!trial.insert(e).second) continue;
    } else {
      if (trial.erase(e) == 0) continue;
    }
    const double trial_rho = rho_of(trial);
    if (std::abs(trial_rho - target_rho) < std::abs(rho - target_rho)) {
      edges = std::move(trial);
      rho = trial_rho;
    }
  }
  return Graph(n, {edges.begin(), edges.end()});
}

}  // namespace graphs

}  // namespace episir
