#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dcd/fixtures.hpp"
#include "dcd/h2.hpp"
#include "dcd/runner.hpp"

namespace {

using nlohmann::json;

struct Common {
  std::string config;
  std::int64_t seed = -1;
  std::string out = "out";
  bool trace = false;
};

void add_common(CLI::App* app, Common& c, bool with_out = true) {
  app->add_option("--config", c.config, "experiment config (JSON)");
  app->add_option("--seed", c.seed, "overrides the config seed");
  if (with_out) app->add_option("--out", c.out, "output directory");
  app->add_flag("--trace", c.trace, "echo trace rows to stdout");
}

dcd::ExperimentConfig load(const Common& c) {
  dcd::ExperimentConfig cfg;
  if (!c.config.empty()) cfg = dcd::load_config(c.config);
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  cfg.trace = cfg.trace || c.trace;
  return cfg;
}

void print_summary(const dcd::RunSummary& s, const std::string& out) {
  std::cout << "wrote " << s.files.size() << " files to " << out << "\n";
  std::cout << "J " << s.J << "  S_BW " << s.S_BW << "  nnz " << s.nnz << "\n";
}

int run_design(const Common& c, const std::string& mode, const std::vector<std::uint64_t>& seeds,
               unsigned threads) {
  dcd::ExperimentConfig cfg = load(c);
  if (!mode.empty()) cfg.mode = dcd::parse_mode(mode);
  if (cfg.mode != dcd::RunMode::kAlgorithm1 && cfg.mode != dcd::RunMode::kConstantDelay &&
      cfg.mode != dcd::RunMode::kCaseA) {
    throw dcd::ConfigError("design takes --mode algorithm1, constant_delay or case_a");
  }
  if (seeds.empty()) {
    print_summary(dcd::run_experiment(cfg, c.out), c.out);
    return 0;
  }
  int failures = 0;
  for (const auto& it : dcd::run_sweep(cfg, seeds, c.out, threads)) {
    if (!it.error.empty()) {
      std::cerr << "seed " << it.seed << ": " << it.error << "\n";
      ++failures;
    } else {
      std::cout << "seed " << it.seed << "  J " << it.summary.J << "  c change "
                << it.summary.c_change << "\n";
    }
  }
  return failures ? 1 : 0;
}

int run_topology(const Common& c, bool baseline) {
  dcd::ExperimentConfig cfg = load(c);
  cfg.mode = baseline ? dcd::RunMode::kBlockSparse : dcd::RunMode::kTopologyRedesign;
  print_summary(dcd::run_experiment(cfg, c.out), c.out);
  return 0;
}

int run_analyze(const Common& c, const std::string& design_dir) {
  dcd::ExperimentConfig cfg = load(c);
  const std::filesystem::path dir = design_dir;
  std::ifstream is(dir / "design.json");
  if (!is) throw std::runtime_error("cannot open " + (dir / "design.json").string());
  const json d = json::parse(is);
  const json& t = d.at("topology");
  cfg.topology.kind = "explicit";
  cfg.topology.X_order = t.at("X_order").get<std::vector<int>>();
  cfg.topology.U_order = t.at("U_order").get<std::vector<int>>();
  cfg.topology.n_sizes = t.at("n_sizes").get<std::vector<int>>();
  cfg.topology.m_sizes = t.at("m_sizes").get<std::vector<int>>();
  const dcd::MatrixXd K = dcd::read_matrix_file(dir / "K.txt");
  const dcd::DesignReport r =
      dcd::analyze_design(cfg, K, d.at("tau_o").get<double>(), d.at("c").get<double>());
  const json out = {{"abscissa", r.abscissa},   {"stable", r.abscissa < 0.0},
                    {"J", r.J},                 {"dJ_dtau_o", r.dJ_dtau_o},
                    {"dJ_dc", r.dJ_dc},         {"grad_K_norm", r.grad_K_norm},
                    {"nnz", r.nnz},             {"n_cp", r.counts.n_cp},
                    {"n_cc", r.counts.n_cc},    {"S_BW", r.S_BW}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_fixtures(const std::string& name) {
  if (name.empty()) {
    for (const auto& n : dcd::fixture_names()) std::cout << n << "\n";
    return 0;
  }
  const dcd::Fixture f = dcd::fixture_loader(name);
  std::cout << "# " << f.name << "\nK\n";
  dcd::write_matrix(std::cout, f.K);
  auto list = [](const char* label, const std::vector<int>& v) {
    std::cout << label;
    for (int x : v) std::cout << ' ' << x;
    std::cout << "\n";
  };
  list("X_order", f.topology.X_order);
  list("U_order", f.topology.U_order);
  list("n_sizes", f.topology.n_sizes);
  list("m_sizes", f.topology.m_sizes);
  list("n_off", f.n_off);
  if (!f.X_init.empty()) list("X_init", f.X_init);
  if (!f.U_init.empty()) list("U_init", f.U_init);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delay and sparsity co-design experiments"};
  app.require_subcommand(1);

  Common design_opts, topo_opts, analyze_opts;
  std::string mode, design_dir, fixture;
  std::vector<std::uint64_t> seeds;
  unsigned threads = 0;
  bool baseline = false;

  auto* design = app.add_subcommand("design", "co-design loop, constant-delay ablation or case_a");
  add_common(design, design_opts);
  design->add_option("--mode", mode, "algorithm1 | constant_delay | case_a");
  design->add_option("--seeds", seeds, "run one experiment per seed under --out");
  design->add_option("--threads", threads, "worker threads for --seeds (0: all cores)");

  auto* topo = app.add_subcommand("topology", "CN topology redesign");
  add_common(topo, topo_opts);
  topo->add_flag("--block-sparse", baseline, "also run the block-shrinkage baseline");

  auto* analyze = app.add_subcommand("analyze", "stability, H2 and gradient report");
  add_common(analyze, analyze_opts, false);
  analyze->add_option("design", design_dir, "directory holding design.json and K.txt")
      ->required();

  auto* fixtures = app.add_subcommand("fixtures", "list or dump bundled fixtures");
  fixtures->add_option("name", fixture, "fixture to dump; lists names when omitted");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*design) return run_design(design_opts, mode, seeds, threads);
    if (*topo) return run_topology(topo_opts, baseline);
    if (*analyze) return run_analyze(analyze_opts, design_dir);
    if (*fixtures) return run_fixtures(fixture);
  } catch (const dcd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
