#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "dcd/h2.hpp"
#include "dcd/runner.hpp"

using namespace dcd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "dcd_runner_test" / name;
  fs::remove_all(p);
  return p;
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

ExperimentConfig small(RunMode mode) {
  ExperimentConfig c;
  c.mode = mode;
  c.seed = 3;
  c.plant.n = c.plant.m = 3;
  c.topology.cn_count = 2;
  c.spectral_N = 6;
  c.case_a_iterations = 3;
  c.gamma_points = 2;
  c.rounds = 1;
  c.admm.max_iter = 5;
  return c;
}

}  // namespace

TEST(Config, DefaultsAndRoundTrip) {
  const ExperimentConfig c = parse_config(R"({"schema": 1})");
  EXPECT_EQ(c.mode, RunMode::kAlgorithm1);
  EXPECT_EQ(c.gamma_points, 40);
  EXPECT_EQ(c.admm.max_iter, 20);
  const ExperimentConfig back = parse_config(config_to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  ExperimentConfig d = c;
  d.seed = 99;
  EXPECT_NE(config_hash(d), config_hash(c));
}

TEST(Config, ModesParse) {
  for (const char* m :
       {"case_a", "algorithm1", "constant_delay", "topology_redesign", "block_sparse_baseline"})
    EXPECT_EQ(mode_name(parse_mode(m)), m);
  EXPECT_NE(error_of(R"({"schema":1,"mode":"fast"})").find("'mode'"), std::string::npos);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_NE(error_of(R"({"schema":1,"plant":{"n":3,"colour":1}})").find("plant.colour"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"schema":1,"seed":"x"})").find("'seed'"), std::string::npos);
  EXPECT_NE(error_of(R"({"schema":1,"initial":{"c":1.5}})").find("initial.c"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"schema":2})").find("schema"), std::string::npos);
  EXPECT_NE(error_of(R"({"schema":1,"admm":{"rho":-1}})").find("admm.rho"), std::string::npos);
}

TEST(Config, ParseErrorReportsLine) {
  const std::string e = error_of("{\"schema\": 1,\n \"seed\": 2,\n \"plant\": {\"n\" 3}}");
  EXPECT_NE(e.find("line 3"), std::string::npos) << e;
}

TEST(Config, InlineMatricesAndRaggedRows) {
  const ExperimentConfig c = parse_config(R"({"schema":1,
    "plant":{"source":"file","A":[[-1,0],[0,-2]],"B":[[1],[0]]},
    "topology":{"kind":"explicit","X_order":[1,0],"U_order":[0],"n_sizes":[2],"m_sizes":[1],
                "link_lengths":[[0]]}})");
  const PlantModel p = build_plant(c);
  EXPECT_EQ(p.n(), 2);
  EXPECT_EQ(p.m(), 1);
  EXPECT_TRUE(p.R.isApprox(MatrixXd::Identity(1, 1)));
  const Topology T = build_topology(c, 1, 2);
  EXPECT_EQ(T.X_order, (std::vector<int>{1, 0}));
  EXPECT_EQ(T.link_lengths.rows(), 1);
  const std::string e =
      error_of(R"({"schema":1,"plant":{"source":"file","A":[[1,2],[3]],"B":[[1],[0]]}})");
  EXPECT_NE(e.find("plant.A' row 1"), std::string::npos) << e;
}

TEST(Config, MatrixFileResolvedAgainstConfigDir) {
  const fs::path dir = scratch("matfile");
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "A.txt");
    write_matrix(os, MatrixXd::Identity(2, 2) * -1.0);
    std::ofstream cf(dir / "cfg.json");
    cf << R"({"schema":1,"plant":{"source":"file","A":"A.txt","B":[[1,0],[0,1]]}})";
  }
  const ExperimentConfig c = load_config(dir / "cfg.json");
  EXPECT_TRUE(c.plant.A.isApprox(-MatrixXd::Identity(2, 2)));
}

TEST(MatrixIo, RoundTripIsExact) {
  MatrixXd M(2, 3);
  M << 1.0 / 3.0, -2.5e-17, 7.0, 0.0, 1e300, -M_PI;
  std::stringstream ss;
  write_matrix(ss, M);
  EXPECT_EQ(read_matrix(ss), M);
  std::stringstream bad("2 2\n1 2 3");
  EXPECT_THROW(read_matrix(bad), std::runtime_error);
}

TEST(Topology, BuildersAndRange) {
  ExperimentConfig c;
  c.topology.cn_count = 3;
  const Topology T = build_topology(c, 7, 8);
  EXPECT_EQ(T.n_sizes, (std::vector<int>{3, 3, 2}));
  EXPECT_EQ(T.m_sizes, (std::vector<int>{3, 2, 2}));
  c.topology.kind = "singletons";
  c.topology.shuffle = true;
  EXPECT_EQ(build_topology(c, 4, 4).X_order, build_topology(c, 4, 4).X_order);
  EXPECT_EQ(build_topology(c, 4, 4).N_cn(), 4);
  c.topology.kind = "blocks";
  c.topology.cn_count = 9;
  EXPECT_THROW(build_topology(c, 4, 4), ConfigError);
}

TEST(Run, CaseAIsDeterministicAndRecordsManifest) {
  const ExperimentConfig c = small(RunMode::kCaseA);
  const fs::path a = scratch("ca1"), b = scratch("ca2");
  const RunSummary s = run_experiment(c, a);
  run_experiment(c, b);
  for (const auto& f : s.files) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  const auto m = nlohmann::json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(m["seed"], 3);
  EXPECT_EQ(m["config_hash"], config_hash(c));
  EXPECT_EQ(m["library"], kLibraryVersion);
  EXPECT_EQ(m["mode"], "case_a");
  ASSERT_EQ(s.J_trace.size(), 4u);
  for (std::size_t k = 1; k < s.J_trace.size(); ++k) EXPECT_LE(s.J_trace[k], s.J_trace[k - 1]);
}

TEST(Run, ConstantDelayKeepsRatioAndDesignReloads) {
  const ExperimentConfig c = small(RunMode::kConstantDelay);
  const fs::path dir = scratch("cd");
  const RunSummary s = run_experiment(c, dir);
  EXPECT_EQ(s.J_trace.size(), 2u);
  EXPECT_DOUBLE_EQ(s.c_change, 0.0);
  const auto d = nlohmann::json::parse(slurp(dir / "design.json"));
  const MatrixXd K = read_matrix_file(dir / "K.txt");
  const DesignReport r = analyze_design(c, K, d["tau_o"], d["c"]);
  EXPECT_LT(r.abscissa, 0.0);
  EXPECT_NEAR(r.J, s.J, 1e-9 * s.J);
  EXPECT_THROW(analyze_design(c, 1e3 * K - 1e3 * MatrixXd::Identity(3, 3), 5.0, 0.5),
               StabilityError);
}

TEST(Run, SweepMatchesSingleRuns) {
  ExperimentConfig c = small(RunMode::kCaseA);
  c.case_a_iterations = 2;
  const fs::path dir = scratch("sweep");
  const auto items = run_sweep(c, {4, 5}, dir, 2);
  ASSERT_EQ(items.size(), 2u);
  for (const auto& it : items) {
    ASSERT_TRUE(it.error.empty()) << it.error;
    ExperimentConfig one = c;
    one.seed = it.seed;
    const RunSummary s = run_experiment(one, scratch("single"));
    EXPECT_EQ(s.J, it.summary.J);
    EXPECT_TRUE(fs::exists(it.dir / "manifest.json"));
  }
}

TEST(Run, TopologyRedesignNeverWorsensJ) {
  ExperimentConfig c = small(RunMode::kTopologyRedesign);
  c.plant.n = c.plant.m = 4;
  c.topology.kind = "singletons";
  const fs::path dir = scratch("topo");
  run_experiment(c, dir);
  const auto s = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_LE(s["selected"]["J_normalized"].get<double>(), 1.0 + 1e-12);
  EXPECT_LE(s["selected"]["S_CN_normalized"].get<double>(), 1.0 + 1e-12);
  EXPECT_TRUE(fs::exists(dir / "topology.csv"));
}
