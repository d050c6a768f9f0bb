// epictl: run epidemic simulation, bounding and allocation experiments from a JSON config.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "episir/commands.hpp"

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kInfeasible = 2, kValidationFailed = 3, kConfigError = 4 };

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
  std::optional<std::string> out;
  std::optional<std::string> mode;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment config (JSON)")->required();
  cmd->add_option("--seed", o.seed, "Monte Carlo seed");
  cmd->add_option("--replicas", o.replicas, "Monte Carlo replicas");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--mode", o.mode, "plain or isolation")->check(CLI::IsMember({"plain", "isolation"}));
}

episir::ExperimentConfig load(const Overrides& o) {
  auto c = episir::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.replicas) c.replicas = *o.replicas;
  if (o.out) {
    c.out = *o.out;
    if (!std::filesystem::path(c.out).is_absolute()) c.out = std::filesystem::absolute(c.out).string();
  }
  if (o.mode) c.mode = *o.mode == "plain" ? episir::Mode::plain : episir::Mode::isolation;
  c.validate();
  return c;
}

int run(const std::string& command, const Overrides& o) {
  using namespace episir;
  const ExperimentConfig c = load(o);
  if (command == "simulate") {
    const auto r = cmd_simulate(c);
    std::printf("lambda = %.6g +- %.3g (%zu replicas)\n", r.estimate.mean, r.estimate.std_error, r.estimate.replicas);
  } else if (command == "bound") {
    const auto r = cmd_bound(c);
    if (r.bound)
      std::printf("lambda_bound = %.6g, certified lambda_bar = %.6g (%s)\n", *r.bound, r.certified,
                  r.certificate_verified ? "verified" : "not verified");
    else
      std::printf("comparison matrix is not Hurwitz: no bound\n");
  } else if (command == "optimize") {
    const auto r = cmd_optimize(c);
    std::printf("lambda_bar = %.6g, total cost %.6g of %.6g\n", r.allocation.lambda_bar, r.allocation.total_cost, c.budget);
    for (const auto& pt : r.sweep)
      std::printf("  budget %.6g: %s\n", pt.budget, pt.lambda_bar ? std::to_string(*pt.lambda_bar).c_str() : "infeasible");
  } else if (command == "validate") {
    const auto r = cmd_validate(c);
    std::printf("exact %.6g  mc %.6g +- %.3g  bound %s  %s\n", r.exact, r.monte_carlo.mean, r.monte_carlo.std_error,
                r.bound ? std::to_string(*r.bound).c_str() : "none", r.pass() ? "pass" : "FAIL");
    if (!r.pass()) return kValidationFailed;
  } else if (command == "compare") {
    const auto r = cmd_compare(c);
    for (const auto& row : r.rows)
      std::printf("%-14s %.6g +- %.3g\n", row.allocation.strategy.c_str(), row.estimate.mean, row.estimate.std_error);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Networked SIR experiments: simulation, bounds and resource allocation"};
  app.require_subcommand(1);
  Overrides o;
  for (const char* name : {"simulate", "bound", "optimize", "validate", "compare"}) add_common(app.add_subcommand(name), o);

  auto* synth = app.add_subcommand("synth-graph", "write a heterogeneous contact graph with a target spectral radius");
  std::size_t nodes = 68;
  double rho = 10.61;
  std::uint64_t graph_seed = 2024;
  std::string output;
  synth->add_option("--nodes", nodes)->check(CLI::PositiveNumber);
  synth->add_option("--rho", rho)->check(CLI::PositiveNumber);
  synth->add_option("--seed", graph_seed);
  synth->add_option("--output", output)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (synth->parsed()) {
      const auto g = episir::graphs::synthetic_contact_graph(nodes, rho, graph_seed);
      std::ofstream out(output);
      if (!out) throw episir::ConfigError("cannot write " + output);
      out << "# synthetic contact graph: " << nodes << " nodes, spectral radius " << episir::spectral_radius(g) << ", seed "
          << graph_seed << '\n';
      episir::write_edge_list(out, g);
      return kOk;
    }
    return run(app.get_subcommands().front()->get_name(), o);
  } catch (const episir::ModelError& e) {  // includes InfeasibleError
    std::cerr << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const episir::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const episir::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const episir::SizeError& e) {
    std::cerr << "instance too large: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}
