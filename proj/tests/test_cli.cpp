#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "episir/commands.hpp"
#include "support.hpp"

using namespace episir;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("epictl_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

ExperimentConfig config_in(const TempDir& dir, nlohmann::json j) {
  if (!j.contains("out")) j["out"] = "out";
  std::ofstream(dir.path() / "config.json") << j.dump(2);
  return load_config(dir.path() / "config.json");
}

nlohmann::json two_node_json() {
  return {{"graph", {{"generator", "path"}, {"n", 2}}}, {"infected", {0}}, {"rates", {{"beta", 0.2}, {"delta", 0.5}}},
          {"monte_carlo", {{"replicas", 100000}, {"seed", 1}}}};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EPICTL_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> csv_column(const fs::path& p, std::size_t col) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> out;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t k = 0; k <= col; ++k) std::getline(ss, cell, ',');
    out.push_back(cell);
  }
  return out;
}

}  // namespace

TEST(ExperimentConfig, RoundTripsThroughJson) {
  ExperimentConfig c;
  c.graph.generator = "erdos_renyi";
  c.graph.n = 12;
  c.graph.p = 0.3;
  c.graph.seed = 9;
  c.infected.random_count = 3;
  c.infected.random_seed = 4;
  c.mode = Mode::isolation;
  c.beta = {0.1, 0.2};
  c.isolation_mean = {2.5};
  c.phases = 4;
  c.cost_constants = std::array<double, 6>{1, -0.5, 2, -0.1, 3, -0.3};
  c.budget = 12.25;
  c.budget_sweep = {1, 2, 3.5};
  c.solver_tol = 1e-9;
  c.replicas = 77;
  c.seed = 123456789012345ULL;
  c.out = "somewhere";
  const nlohmann::json j = c;
  EXPECT_EQ(j.get<ExperimentConfig>(), c);
  EXPECT_EQ(nlohmann::json::parse(j.dump()).get<ExperimentConfig>(), c);

  ExperimentConfig d;
  d.graph.path = "g.txt";
  d.infected.nodes = {3, 1};
  d.beta_box = {0.001, 0.1 / 3.0};
  EXPECT_EQ(nlohmann::json::parse(nlohmann::json(d).dump()).get<ExperimentConfig>(), d);
}

TEST(ExperimentConfig, RejectsBadInput) {
  TempDir dir;
  auto j = two_node_json();
  j["typo"] = 1;
  EXPECT_THROW(config_in(dir, j), ConfigError);
  auto bad = two_node_json();
  bad["mode"] = "sideways";
  EXPECT_THROW(config_in(dir, bad), ConfigError);
  bad = two_node_json();
  bad["boxes"] = {{"beta", {0.2, 0.1}}};
  EXPECT_THROW(config_in(dir, bad).validate(), ConfigError);
  bad = two_node_json();
  bad["graph"] = "does_not_exist.txt";
  EXPECT_THROW(config_in(dir, bad).validate(), ConfigError);
  bad = two_node_json();
  bad["monte_carlo"]["replicas"] = 0;
  EXPECT_THROW(config_in(dir, bad).validate(), ConfigError);
  bad = two_node_json();
  bad["infected"] = {5};
  EXPECT_THROW(cmd_bound(config_in(dir, bad)), ConfigError);
  std::ofstream(dir.path() / "broken.json") << "{ not json";
  EXPECT_THROW(load_config(dir.path() / "broken.json"), ConfigError);
}

TEST(ExperimentConfig, RandomInfectedIsDeterministicAndDistinct) {
  ExperimentConfig c;
  c.infected.random_count = 4;
  c.infected.random_seed = 7;
  const auto a = resolve_infected(c, 68), b = resolve_infected(c, 68);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t k = 1; k < a.size(); ++k) EXPECT_LT(a[k - 1], a[k]);
  EXPECT_LT(a.back(), 68u);
  c.infected.random_seed = 8;
  EXPECT_NE(resolve_infected(c, 68), a);
  c.infected.random_count = 69;
  EXPECT_THROW(resolve_infected(c, 68), ConfigError);
}

TEST(ExperimentConfig, GraphFileResolvesAgainstConfigDirectory) {
  TempDir dir;
  std::ofstream(dir.path() / "tri.txt") << "# triangle\n0 1\n1 2\n0 2\n";
  auto j = two_node_json();
  j["graph"] = "tri.txt";
  const auto c = config_in(dir, j);
  EXPECT_EQ(load_graph(c), graphs::complete(3));
  std::ofstream(dir.path() / "bad.txt") << "0 1\n1 x\n";
  j["graph"] = "bad.txt";
  EXPECT_THROW(load_graph(config_in(dir, j)), ConfigError);
}

TEST(CmdSimulate, EdgelessMeanIsZero) {
  TempDir dir;
  auto j = two_node_json();
  j["graph"] = {{"generator", "empty"}, {"n", 3}};
  j["monte_carlo"]["replicas"] = 500;
  const auto c = config_in(dir, j);
  cmd_simulate(c);
  const auto lam = read_json(c.out_dir() / "lambda.json");
  EXPECT_EQ(lam["mean"].get<double>(), 0.0);
  const std::string counts = slurp(c.out_dir() / "counts.csv");
  EXPECT_EQ(counts.substr(0, counts.find('\n')), "t,sigma_S,sigma_I,sigma_R");
  EXPECT_NE(counts.find("\n0,2,1,0\n"), std::string::npos);
}

TEST(CmdSimulate, TwoNodeRaceAndDeterminism) {
  TempDir dir;
  const auto c = config_in(dir, two_node_json());
  const auto r = cmd_simulate(c);
  EXPECT_NEAR(r.estimate.mean, 2.0 / 7.0, 4.0 * r.estimate.std_error);
  const std::string counts = slurp(c.out_dir() / "counts.csv"), lam = slurp(c.out_dir() / "lambda.json");
  cmd_simulate(c);
  EXPECT_EQ(slurp(c.out_dir() / "counts.csv"), counts);
  EXPECT_EQ(slurp(c.out_dir() / "lambda.json"), lam);
}

TEST(CmdSimulate, OnePhaseIsolationMatchesMergedRate) {
  TempDir dir;
  nlohmann::json iso{{"graph", {{"generator", "erdos_renyi"}, {"n", 10}, {"p", 0.4}, {"seed", 3}}},
                     {"infected", {0}},
                     {"mode", "isolation"},
                     {"phases", 1},
                     {"rates", {{"beta", 0.5}, {"delta", 0.2}, {"isolation_mean", 4.0}}},
                     {"monte_carlo", {{"replicas", 10000}, {"seed", 1}}}};
  const auto ci = config_in(dir, iso);
  auto plain = iso;
  plain.erase("mode");
  plain["rates"]["delta"] = 0.2 + 1.0 / 4.0;
  plain["out"] = "out_plain";
  plain["monte_carlo"]["seed"] = 2;
  const auto cp = config_in(dir, plain);
  const auto ri = cmd_simulate(ci), rp = cmd_simulate(cp);
  EXPECT_LE(std::abs(ri.estimate.mean - rp.estimate.mean), 4.0 * std::hypot(ri.estimate.std_error, rp.estimate.std_error));
  const Graph g = load_graph(ci);
  const auto a = replica_infections(g, make_params(ci, 10, {0}), 10000, 1);
  const auto b = replica_infections(g, make_params(cp, 10, {0}), 10000, 2);
  EXPECT_LT(testing_support::ks_two_sample(a, b), 0.0276);
}

TEST(CmdBound, TwoNodeBoundAndCertificate) {
  TempDir dir;
  const auto c = config_in(dir, two_node_json());
  const auto r = cmd_bound(c);
  ASSERT_TRUE(r.bound.has_value());
  EXPECT_NEAR(*r.bound, 0.4, 1e-12);
  EXPECT_TRUE(r.certificate_verified);
  EXPECT_GE(r.certified, 0.4);
  const auto j = read_json(c.out_dir() / "bound.json");
  EXPECT_TRUE(j["hurwitz"].get<bool>());
  auto hot = two_node_json();
  hot["graph"] = {{"generator", "complete"}, {"n", 5}};
  hot["rates"] = {{"beta", 1.0}, {"delta", 0.5}};
  const auto rh = cmd_bound(config_in(dir, hot));
  EXPECT_FALSE(rh.hurwitz);
  EXPECT_FALSE(rh.bound.has_value());
  EXPECT_TRUE(read_json(c.out_dir() / "bound.json")["lambda_bound"].is_null());
}

TEST(CmdValidate, TwoNodeRow) {
  TempDir dir;
  const auto r = cmd_validate(config_in(dir, two_node_json()));
  EXPECT_NEAR(r.exact, 2.0 / 7.0, 1e-12);
  EXPECT_NEAR(r.bound.value(), 0.4, 1e-12);
  EXPECT_TRUE(r.pass());
}

TEST(CmdValidate, EdgelessRow) {
  TempDir dir;
  auto j = two_node_json();
  j["graph"] = {{"generator", "empty"}, {"n", 3}};
  j["monte_carlo"]["replicas"] = 1000;
  const auto c = config_in(dir, j);
  const auto r = cmd_validate(c);
  EXPECT_EQ(r.exact, 0.0);
  EXPECT_EQ(r.monte_carlo.mean, 0.0);
  EXPECT_EQ(r.bound.value(), 0.0);
  EXPECT_TRUE(r.pass());
  EXPECT_EQ(csv_column(c.out_dir() / "validation.csv", 6), std::vector<std::string>{"pass"});
}

TEST(CmdValidate, RandomFourNodeInstancesAllPass) {
  TempDir dir;
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> rate(0.05, 1.0);
  for (int s = 0; s < 20; ++s) {
    nlohmann::json j{{"graph", {{"generator", "erdos_renyi"}, {"n", 4}, {"p", 0.6}, {"seed", s}}},
                     {"infected", {{"random", 1 + s % 3}, {"seed", s}}},
                     {"rates", {{"beta", {rate(gen), rate(gen), rate(gen), rate(gen)}}, {"delta", {rate(gen), rate(gen), rate(gen), rate(gen)}}}},
                     {"monte_carlo", {{"replicas", 20000}, {"seed", 100 + s}}}};
    const auto r = cmd_validate(config_in(dir, j));
    EXPECT_TRUE(r.pass()) << "seed " << s << ": exact " << r.exact << " mc " << r.monte_carlo.mean << " +- " << r.monte_carlo.std_error;
  }
}

TEST(CmdOptimize, BudgetBelowFixedConstantsIsModelError) {
  TempDir dir;
  auto j = two_node_json();
  j["costs"] = {1.0, 5.0, 1.0, 5.0, 1.0, 5.0};
  j["budget"] = 1.0;
  EXPECT_THROW(cmd_optimize(config_in(dir, j)), ModelError);
}

TEST(CmdOptimize, WritesFilesAndMonotoneSweep) {
  TempDir dir;
  nlohmann::json j{{"graph", {{"generator", "erdos_renyi"}, {"n", 20}, {"p", 0.2}, {"seed", 11}}},
                   {"infected", {{"random", 2}, {"seed", 5}}},
                   {"budget", 10},
                   {"budget_sweep", {4, 7, 10, 13, 16}}};
  const auto c = config_in(dir, j);
  const auto r = cmd_optimize(c);
  const auto alloc = read_json(c.out_dir() / "allocation.json");
  EXPECT_EQ(alloc["nodes"].size(), 20u);
  EXPECT_TRUE(alloc["certificate_verified"].get<bool>());
  EXPECT_NEAR(alloc["lambda_bar"].get<double>(), r.allocation.lambda_bar, 0.0);
  EXPECT_EQ(slurp(c.out_dir() / "allocation.csv").substr(0, 40), "node,degree,prevention_cost,correction_c");
  EXPECT_EQ(csv_column(c.out_dir() / "investment.csv", 0).size(), 20u);
  const auto col = csv_column(c.out_dir() / "budget_sweep.csv", 1);
  ASSERT_EQ(col.size(), 5u);
  for (std::size_t k = 1; k < col.size(); ++k) EXPECT_LE(std::stod(col[k]), std::stod(col[k - 1]) + 10 * c.solver_tol);
  const std::string before = slurp(c.out_dir() / "budget_sweep.csv");
  cmd_optimize(c);
  EXPECT_EQ(slurp(c.out_dir() / "budget_sweep.csv"), before);
}

TEST(CmdOptimize, IsolationModeColumns) {
  TempDir dir;
  nlohmann::json j{{"graph", {{"generator", "erdos_renyi"}, {"n", 12}, {"p", 0.3}, {"seed", 2}}},
                   {"infected", {0}},
                   {"mode", "isolation"},
                   {"phases", 2},
                   {"budget", 12}};
  const auto c = config_in(dir, j);
  const auto r = cmd_optimize(c);
  EXPECT_EQ(r.allocation.gamma.size(), 12u);
  const auto alloc = read_json(c.out_dir() / "allocation.json");
  EXPECT_TRUE(alloc["nodes"][0].contains("isolation_cost"));
}

TEST(CmdCompare, EdgelessAllTie) {
  TempDir dir;
  nlohmann::json j{{"graph", {{"generator", "empty"}, {"n", 4}}}, {"infected", {1}}, {"budget", 2}, {"monte_carlo", {{"replicas", 500}}}};
  const auto c = config_in(dir, j);
  const auto r = cmd_compare(c);
  ASSERT_EQ(r.rows.size(), 3u);
  for (const auto& row : r.rows) EXPECT_EQ(row.estimate.mean, 0.0);
  EXPECT_EQ(csv_column(c.out_dir() / "comparison.csv", 0), (std::vector<std::string>{"optimized", "uniform", "sis_spectral"}));
}

TEST(CmdCompare, StarOptimizedNoWorseThanUniform) {
  TempDir dir;
  nlohmann::json j{{"graph", {{"generator", "star"}, {"n", 9}}},
                   {"infected", {0}},
                   {"boxes", {{"beta", {0.05, 0.5}}, {"delta", {0.1, 0.4}}}},
                   {"budget", 6},
                   {"monte_carlo", {{"replicas", 20000}, {"seed", 3}}}};
  const auto c = config_in(dir, j);
  const auto r = cmd_compare(c);
  const auto& opt = r.rows[0].estimate;
  for (std::size_t k = 1; k < r.rows.size(); ++k)
    EXPECT_LE(opt.mean, r.rows[k].estimate.mean + 3.0 * std::hypot(opt.std_error, r.rows[k].estimate.std_error));
  const auto j2 = read_json(c.out_dir() / "comparison.json");
  EXPECT_EQ(j2["strategies"].size(), 3u);
  EXPECT_TRUE(j2["strategies"][1]["improvement"].is_number());
}

TEST(Epictl, ExitCodesAndOverrides) {
  TempDir dir;
  config_in(dir, two_node_json());
  const std::string cfg = "--config " + (dir.path() / "config.json").string();
  const fs::path out = dir.path() / "override";
  EXPECT_EQ(run_cli("simulate " + cfg + " --replicas 200 --seed 4 --out " + out.string()), 0);
  const auto lam = read_json(out / "lambda.json");
  EXPECT_EQ(lam["replicas"].get<int>(), 200);
  EXPECT_EQ(lam["seed"].get<int>(), 4);
  EXPECT_EQ(run_cli("bound " + cfg + " --mode isolation --out " + out.string()), 0);
  EXPECT_EQ(read_json(out / "bound.json")["mode"], "isolation");
  // a single replica has zero standard error, so it cannot agree with the exact value
  EXPECT_EQ(run_cli("validate " + cfg + " --replicas 1 --out " + out.string()), 3);
  EXPECT_EQ(run_cli("validate " + cfg + " --replicas 20000 --out " + out.string()), 0);
  EXPECT_EQ(run_cli("simulate --config " + (dir.path() / "missing.json").string()), 4);
  EXPECT_EQ(run_cli("simulate " + cfg + " --mode sideways"), 4);
  EXPECT_EQ(run_cli("frobnicate"), 4);

  auto poor = two_node_json();
  poor["costs"] = {1.0, 5.0, 1.0, 5.0, 1.0, 5.0};
  poor["budget"] = 1.0;
  std::ofstream(dir.path() / "poor.json") << poor.dump();
  EXPECT_EQ(run_cli("optimize --config " + (dir.path() / "poor.json").string()), 2);
  nlohmann::json hot{{"graph", {{"generator", "complete"}, {"n", 6}}}, {"infected", {0}}, {"boxes", {{"beta", {0.5, 1.0}}}}, {"budget", 1}};
  std::ofstream(dir.path() / "hot.json") << hot.dump();
  EXPECT_EQ(run_cli("optimize --config " + (dir.path() / "hot.json").string() + " --out " + out.string()), 2);
}

TEST(Epictl, ShippedConfigsParse) {
  for (const char* name : {"paper68.json", "paper68_isolation.json", "two_node.json", "two_node_isolation.json", "star.json", "sweep20.json"}) {
    const auto c = load_config(fs::path(DATA_DIR) / name);
    EXPECT_NO_THROW(c.validate()) << name;
    EXPECT_NO_THROW(load_graph(c)) << name;
  }
  const auto c = load_config(fs::path(DATA_DIR) / "paper68.json");
  const Graph g = load_graph(c);
  EXPECT_EQ(g.node_count(), 68u);
  EXPECT_NEAR(spectral_radius(g), 10.61, 5e-3);
}
