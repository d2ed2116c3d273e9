#include "dcd/runner.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <thread>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dcd/experiment.hpp"
#include "dcd/h2.hpp"
#include "dcd/topo.hpp"

namespace dcd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Mode {
  RunMode mode;
  const char* name;
};

constexpr Mode kModes[] = {
    {RunMode::kCaseA, "case_a"},
    {RunMode::kAlgorithm1, "algorithm1"},
    {RunMode::kConstantDelay, "constant_delay"},
    {RunMode::kTopologyRedesign, "topology_redesign"},
    {RunMode::kBlockSparse, "block_sparse_baseline"},
};

void only_keys(const json& j, const std::string& where, std::set<std::string> keys) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw ConfigError("unknown field '" + where + k + "'");
  }
}

template <class T>
void read(const json& j, const std::string& where, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field '" + where + key + "' has the wrong type");
  }
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError("field '" + field + "' " + what);
}

MatrixXd matrix_field(const json& v, const std::string& field, const fs::path& base) {
  if (v.is_string()) {
    fs::path p = v.get<std::string>();
    if (p.is_relative() && !base.empty()) p = base / p;
    try {
      return read_matrix_file(p);
    } catch (const std::exception& e) {
      throw ConfigError("field '" + field + "': " + e.what());
    }
  }
  if (!v.is_array()) throw ConfigError("field '" + field + "' must be a nested array or a path");
  const auto rows = static_cast<long>(v.size());
  const long cols = rows ? static_cast<long>(v[0].size()) : 0;
  MatrixXd M(rows, cols);
  for (long i = 0; i < rows; ++i) {
    if (!v[i].is_array() || static_cast<long>(v[i].size()) != cols) {
      throw ConfigError("field '" + field + "' row " + std::to_string(i) +
                        " is not an array of length " + std::to_string(cols));
    }
    for (long j = 0; j < cols; ++j) {
      if (!v[i][j].is_number()) {
        throw ConfigError("field '" + field + "' entry (" + std::to_string(i) + ", " +
                          std::to_string(j) + ") is not a number");
      }
      M(i, j) = v[i][j].get<double>();
    }
  }
  return M;
}

json matrix_json(const MatrixXd& M) {
  json rows = json::array();
  for (long i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (long j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(r);
  }
  return rows;
}

std::string line_of(const std::string& text, std::size_t byte) {
  const auto upto = text.substr(0, std::min(byte, text.size()));
  const auto line = std::count(upto.begin(), upto.end(), '\n') + 1;
  return std::to_string(line);
}

json topology_json(const Topology& T) {
  return {{"X_order", T.X_order},
          {"U_order", T.U_order},
          {"n_sizes", T.n_sizes},
          {"m_sizes", T.m_sizes}};
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << s;
}

double ratio(double a, double b) { return b != 0.0 ? a / b : 0.0; }

struct Files {
  fs::path dir;
  std::vector<std::string> names;
  void put(const std::string& name, const std::string& body) {
    write_text(dir / name, body);
    names.push_back(name);
  }
};

std::string matrix_text(const MatrixXd& M) {
  std::ostringstream os;
  write_matrix(os, M);
  return os.str();
}

// Shared setup of every mode.
struct Setup {
  PlantModel plant;
  Topology T;
  SpectralBasis basis;
  InitialTuple init;
};

Setup make_setup(const ExperimentConfig& cfg) {
  Setup s;
  s.plant = build_plant(cfg);
  s.T = build_topology(cfg, s.plant.m(), s.plant.n());
  s.basis = make_basis(cfg.spectral_N, s.plant.n());
  s.init = initial_tuple(s.plant, build_masks(s.T), s.basis, cfg.tau_o, cfg.c);
  return s;
}

Algorithm1Config algorithm1_config(const ExperimentConfig& cfg, OuterMode mode) {
  Algorithm1Config a;
  a.mode = mode;
  a.gammas = gamma_path(cfg.gamma_points, cfg.gamma_lo, cfg.gamma_hi);
  a.rounds = cfg.rounds;
  a.k_c = cfg.k_c;
  a.admm = cfg.admm;
  a.ktau.ladder = cfg.ladder;
  a.kc.ladder = cfg.ladder;
  return a;
}

std::string trace_csv(const DesignTrace& tr) {
  std::string s = trace_header() + "\n";
  for (const auto& r : tr.rows) s += trace_line(r) + "\n";
  return s;
}

json design_json(const MatrixXd& K, double tau_o, double c, const Topology& T) {
  return {{"tau_o", tau_o}, {"c", c}, {"nnz", count_nonzero(K)}, {"topology", topology_json(T)}};
}

}  // namespace

RunMode parse_mode(const std::string& s) {
  for (const auto& m : kModes)
    if (s == m.name) return m.mode;
  throw ConfigError("field 'mode' has unknown value '" + s + "'");
}

std::string mode_name(RunMode mode) {
  for (const auto& m : kModes)
    if (m.mode == mode) return m.name;
  return "?";
}

ExperimentConfig parse_config(const std::string& text, const fs::path& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error at line " + line_of(text, e.byte) + ": " +
                      e.what());
  }
  only_keys(j, "", {"schema", "mode", "seed", "plant", "topology", "spectral_N", "initial",
                    "bandwidth", "admm", "algorithm1", "case_a", "redesign", "trace"});
  ExperimentConfig c;
  read(j, "", "schema", c.schema);
  require(c.schema == kConfigSchema, "schema", "must be " + std::to_string(kConfigSchema));
  std::string mode = mode_name(c.mode);
  read(j, "", "mode", mode);
  c.mode = parse_mode(mode);
  read(j, "", "seed", c.seed);
  read(j, "", "spectral_N", c.spectral_N);
  read(j, "", "trace", c.trace);
  require(c.spectral_N >= 2, "spectral_N", "must be >= 2");

  if (j.contains("plant")) {
    const json& p = j["plant"];
    only_keys(p, "plant.", {"source", "n", "m", "spectral_radius", "A", "B", "B_w", "Q", "R"});
    std::string src = "random";
    read(p, "plant.", "source", src);
    require(src == "random" || src == "file", "plant.source", "must be random or file");
    c.plant.random = src == "random";
    read(p, "plant.", "n", c.plant.n);
    read(p, "plant.", "m", c.plant.m);
    read(p, "plant.", "spectral_radius", c.plant.spectral_radius);
    for (auto [key, dst] : {std::pair{"A", &c.plant.A}, {"B", &c.plant.B},
                            {"B_w", &c.plant.B_w}, {"Q", &c.plant.Q}, {"R", &c.plant.R}})
      if (p.contains(key)) *dst = matrix_field(p[key], std::string("plant.") + key, base);
    require(c.plant.n >= 1, "plant.n", "must be >= 1");
    require(c.plant.m >= 1, "plant.m", "must be >= 1");
    require(c.plant.random || c.plant.A.size() > 0, "plant.A", "is required for file plants");
    require(c.plant.random || c.plant.B.size() > 0, "plant.B", "is required for file plants");
  }
  if (j.contains("topology")) {
    const json& t = j["topology"];
    only_keys(t, "topology.", {"kind", "cn_count", "shuffle", "X_order", "U_order",
                               "n_sizes", "m_sizes", "link_lengths"});
    read(t, "topology.", "kind", c.topology.kind);
    read(t, "topology.", "cn_count", c.topology.cn_count);
    read(t, "topology.", "shuffle", c.topology.shuffle);
    read(t, "topology.", "X_order", c.topology.X_order);
    read(t, "topology.", "U_order", c.topology.U_order);
    read(t, "topology.", "n_sizes", c.topology.n_sizes);
    read(t, "topology.", "m_sizes", c.topology.m_sizes);
    if (t.contains("link_lengths"))
      c.topology.link_lengths = matrix_field(t["link_lengths"], "topology.link_lengths", base);
    const auto& k = c.topology.kind;
    require(k == "blocks" || k == "singletons" || k == "explicit", "topology.kind",
            "must be blocks, singletons or explicit");
    require(k != "blocks" || c.topology.cn_count >= 1, "topology.cn_count", "must be >= 1");
  }
  if (j.contains("initial")) {
    const json& t = j["initial"];
    only_keys(t, "initial.", {"tau_o", "c"});
    read(t, "initial.", "tau_o", c.tau_o);
    read(t, "initial.", "c", c.c);
  }
  require(c.tau_o > 0.0, "initial.tau_o", "must be > 0");
  require(c.c > 0.0 && c.c < 1.0, "initial.c", "must lie in (0, 1)");
  if (j.contains("bandwidth")) {
    const json& b = j["bandwidth"];
    only_keys(b, "bandwidth.", {"m_cp", "m_cc", "kappa", "tau_dpr", "tau_cpr", "S_b"});
    read(b, "bandwidth.", "m_cp", c.bw.m_cp);
    read(b, "bandwidth.", "m_cc", c.bw.m_cc);
    read(b, "bandwidth.", "kappa", c.bw.kappa);
    read(b, "bandwidth.", "tau_dpr", c.bw.tau_dpr);
    read(b, "bandwidth.", "tau_cpr", c.bw.tau_cpr);
    read(b, "bandwidth.", "S_b", c.bw.S_b);
    require(c.bw.kappa > 0.0, "bandwidth.kappa", "must be > 0");
    require(c.bw.tau_dpr >= 0.0 && c.bw.tau_cpr >= 0.0, "bandwidth.tau_dpr",
            "propagation delays must be >= 0");
  }
  c.admm.max_iter = 20;
  if (j.contains("admm")) {
    const json& a = j["admm"];
    only_keys(a, "admm.", {"rho", "epsilon_w", "eps_scale", "max_iter", "kmin_max_iter"});
    read(a, "admm.", "rho", c.admm.rho);
    read(a, "admm.", "epsilon_w", c.admm.epsilon_w);
    read(a, "admm.", "eps_scale", c.admm.eps_scale);
    read(a, "admm.", "max_iter", c.admm.max_iter);
    read(a, "admm.", "kmin_max_iter", c.admm.kmin_max_iter);
    require(c.admm.rho > 0.0, "admm.rho", "must be > 0");
    require(c.admm.epsilon_w > 0.0, "admm.epsilon_w", "must be > 0");
    require(c.admm.eps_scale > 0.0, "admm.eps_scale", "must be > 0");
    require(c.admm.max_iter >= 1, "admm.max_iter", "must be >= 1");
  }
  if (j.contains("algorithm1")) {
    const json& a = j["algorithm1"];
    only_keys(a, "algorithm1.",
              {"gamma_points", "gamma_lo", "gamma_hi", "rounds", "k_c", "ladder"});
    read(a, "algorithm1.", "gamma_points", c.gamma_points);
    read(a, "algorithm1.", "gamma_lo", c.gamma_lo);
    read(a, "algorithm1.", "gamma_hi", c.gamma_hi);
    read(a, "algorithm1.", "rounds", c.rounds);
    read(a, "algorithm1.", "k_c", c.k_c);
    read(a, "algorithm1.", "ladder", c.ladder);
    require(c.gamma_points >= 1, "algorithm1.gamma_points", "must be >= 1");
    require(c.gamma_lo > 0.0 && c.gamma_hi >= c.gamma_lo, "algorithm1.gamma_lo",
            "must satisfy 0 < gamma_lo <= gamma_hi");
    require(c.rounds >= 1, "algorithm1.rounds", "must be >= 1");
    require(c.k_c >= 1, "algorithm1.k_c", "must be >= 1");
    require(c.ladder >= 1, "algorithm1.ladder", "must be >= 1");
  }
  if (j.contains("case_a")) {
    const json& a = j["case_a"];
    only_keys(a, "case_a.", {"iterations", "epsilon", "ladder"});
    read(a, "case_a.", "ladder", c.case_a_ladder);
    require(c.case_a_ladder >= 1, "case_a.ladder", "must be >= 1");
    read(a, "case_a.", "iterations", c.case_a_iterations);
    read(a, "case_a.", "epsilon", c.case_a_epsilon);
    require(c.case_a_iterations >= 1, "case_a.iterations", "must be >= 1");
    require(c.case_a_epsilon >= 0.0, "case_a.epsilon", "must be >= 0");
  }
  if (j.contains("redesign")) {
    const json& r = j["redesign"];
    only_keys(r, "redesign.", {"geometry", "max_propagation", "block_gamma", "design_K",
                               "design_tau_o", "design_c"});
    read(r, "redesign.", "geometry", c.geometry);
    read(r, "redesign.", "max_propagation", c.max_propagation);
    read(r, "redesign.", "block_gamma", c.block_gamma);
    read(r, "redesign.", "design_K", c.design_K);
    if (!c.design_K.empty() && fs::path(c.design_K).is_relative() && !base.empty())
      c.design_K = (base / c.design_K).string();
    read(r, "redesign.", "design_tau_o", c.design_tau_o);
    read(r, "redesign.", "design_c", c.design_c);
    require(c.max_propagation > 0.0, "redesign.max_propagation", "must be > 0");
    require(c.design_K.empty() || (c.design_tau_o > 0.0 && c.design_c > 0.0 &&
                                   c.design_c < 1.0),
            "redesign.design_tau_o", "and design_c are required with design_K");
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["schema"] = c.schema;
  j["mode"] = mode_name(c.mode);
  j["seed"] = c.seed;
  j["spectral_N"] = c.spectral_N;
  j["trace"] = c.trace;
  j["plant"] = {{"source", c.plant.random ? "random" : "file"},
                {"n", c.plant.n},
                {"m", c.plant.m},
                {"spectral_radius", c.plant.spectral_radius},
                {"A", matrix_json(c.plant.A)},
                {"B", matrix_json(c.plant.B)},
                {"B_w", matrix_json(c.plant.B_w)},
                {"Q", matrix_json(c.plant.Q)},
                {"R", matrix_json(c.plant.R)}};
  j["topology"] = {{"kind", c.topology.kind},       {"cn_count", c.topology.cn_count},
                   {"shuffle", c.topology.shuffle}, {"X_order", c.topology.X_order},
                   {"U_order", c.topology.U_order}, {"n_sizes", c.topology.n_sizes},
                   {"m_sizes", c.topology.m_sizes},
                   {"link_lengths", matrix_json(c.topology.link_lengths)}};
  j["initial"] = {{"tau_o", c.tau_o}, {"c", c.c}};
  j["bandwidth"] = {{"m_cp", c.bw.m_cp},       {"m_cc", c.bw.m_cc},
                    {"kappa", c.bw.kappa},     {"tau_dpr", c.bw.tau_dpr},
                    {"tau_cpr", c.bw.tau_cpr}, {"S_b", c.bw.S_b}};
  j["admm"] = {{"rho", c.admm.rho},
               {"epsilon_w", c.admm.epsilon_w},
               {"eps_scale", c.admm.eps_scale},
               {"max_iter", c.admm.max_iter},
               {"kmin_max_iter", c.admm.kmin_max_iter}};
  j["algorithm1"] = {{"gamma_points", c.gamma_points}, {"gamma_lo", c.gamma_lo},
                     {"gamma_hi", c.gamma_hi},         {"rounds", c.rounds},
                     {"k_c", c.k_c},                   {"ladder", c.ladder}};
  j["case_a"] = {{"iterations", c.case_a_iterations}, {"epsilon", c.case_a_epsilon},
                    {"ladder", c.case_a_ladder}};
  j["redesign"] = {{"geometry", c.geometry},         {"max_propagation", c.max_propagation},
                   {"block_gamma", c.block_gamma},   {"design_K", c.design_K},
                   {"design_tau_o", c.design_tau_o}, {"design_c", c.design_c}};
  return j.dump(2);
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : config_to_json(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void write_matrix(std::ostream& os, const MatrixXd& M) {
  os << M.rows() << ' ' << M.cols() << '\n' << std::setprecision(17);
  for (int i = 0; i < M.rows(); ++i) {
    for (int j = 0; j < M.cols(); ++j) os << (j ? " " : "") << M(i, j);
    os << '\n';
  }
}

MatrixXd read_matrix(std::istream& is) {
  long r = 0, c = 0;
  if (!(is >> r >> c) || r < 0 || c < 0) {
    throw std::runtime_error("matrix file: bad 'rows cols' header");
  }
  MatrixXd M(r, c);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j)
      if (!(is >> M(i, j))) {
        throw std::runtime_error("matrix file: missing entry (" + std::to_string(i) + ", " +
                                 std::to_string(j) + ")");
      }
  return M;
}

MatrixXd read_matrix_file(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot open matrix file " + p.string());
  return read_matrix(is);
}

PlantModel build_plant(const ExperimentConfig& cfg) {
  if (cfg.plant.random) {
    RandomPlantOptions o;
    o.n = cfg.plant.n;
    o.m = cfg.plant.m;
    o.seed = cfg.seed;
    o.spectral_radius = cfg.plant.spectral_radius;
    return generate_random_plant(o);
  }
  const MatrixXd& A = cfg.plant.A;
  const MatrixXd& B = cfg.plant.B;
  const long n = A.rows(), m = B.cols();
  auto opt = [](const MatrixXd& M, long k) {
    return M.size() == 0 ? MatrixXd(MatrixXd::Identity(k, k)) : M;
  };
  try {
    return PlantModel(A, B, opt(cfg.plant.B_w, n), opt(cfg.plant.Q, n), opt(cfg.plant.R, m));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("plant: ") + e.what());
  }
}

Topology build_topology(const ExperimentConfig& cfg, int m, int n) {
  const TopologySource& s = cfg.topology;
  std::vector<int> X(n), U(m);
  std::iota(X.begin(), X.end(), 0);
  std::iota(U.begin(), U.end(), 0);
  Topology T;
  if (s.kind == "explicit") {
    T = make_topology(s.X_order, s.U_order, s.n_sizes, s.m_sizes);
  } else {
    const int N = s.kind == "singletons" ? std::min(m, n) : s.cn_count;
    if (N < 1 || N > std::min(m, n)) {
      throw ConfigError("field 'topology.cn_count' must lie in [1, min(m, n)]");
    }
    if (s.shuffle) {
      std::mt19937_64 rng(cfg.seed);
      std::shuffle(X.begin(), X.end(), rng);
      std::shuffle(U.begin(), U.end(), rng);
    }
    std::vector<int> ns(N, n / N), ms(N, m / N);
    for (int q = 0; q < n % N; ++q) ++ns[q];
    for (int q = 0; q < m % N; ++q) ++ms[q];
    T = make_topology(X, U, ns, ms);
  }
  T.link_lengths = s.link_lengths;
  try {
    T.validate(true);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("topology: ") + e.what());
  }
  return T;
}

std::vector<SweepItem> run_sweep(const ExperimentConfig& cfg,
                                 const std::vector<std::uint64_t>& seeds,
                                 const fs::path& out_dir, unsigned threads) {
  std::vector<SweepItem> items(seeds.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, std::max<std::size_t>(1, seeds.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < seeds.size();) {
      SweepItem& it = items[i];
      it.seed = seeds[i];
      it.dir = out_dir / ("seed_" + std::to_string(seeds[i]));
      ExperimentConfig c = cfg;
      c.seed = seeds[i];
      try {
        it.summary = run_experiment(c, it.dir);
      } catch (const std::exception& e) {
        it.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return items;
}

DesignReport analyze_design(const ExperimentConfig& cfg, const MatrixXd& K, double tau_o,
                            double c) {
  const PlantModel plant = build_plant(cfg);
  const Topology T = build_topology(cfg, plant.m(), plant.n());
  const SpectralBasis basis = make_basis(cfg.spectral_N, plant.n());
  const GainMasks masks = build_masks(T);
  const DesignEval e = evaluate_design(plant, K, masks, tau_o, c, basis);
  const GradientBundle g = gradients(e.loop, plant, e.sol, basis, masks);
  DesignReport r;
  r.abscissa = e.sol.abscissa;
  r.J = e.sol.J;
  r.dJ_dtau_o = g.dJ_dtau_o;
  r.dJ_dc = g.dJ_dc;
  r.grad_K_norm = g.dJ_dK.norm();
  r.nnz = count_nonzero(K);
  r.counts = channel_counts(K, T);
  r.S_BW = sbw(c * tau_o, tau_o, r.counts, cfg.bw);
  return r;
}

RunSummary run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  Files files{out_dir, {}};
  RunSummary sum;
  const Setup s = make_setup(cfg);
  json summary;
  summary["initial"] = {{"tau_o", s.init.tau_o}, {"c", s.init.c},
                        {"abscissa", s.init.abscissa}, {"nnz", count_nonzero(s.init.K)}};

  auto run_alg1 = [&](OuterMode mode, const Topology& T) {
    CodesignContext ctx = CodesignContext::make(s.plant, s.basis, T, cfg.bw);
    ctx.rho = cfg.admm.rho;
    return algorithm1(ctx, s.init.K, s.init.tau_o, s.init.c, algorithm1_config(cfg, mode));
  };

  switch (cfg.mode) {
    case RunMode::kAlgorithm1:
    case RunMode::kConstantDelay: {
      const OuterMode om = cfg.mode == RunMode::kAlgorithm1 ? OuterMode::kDelayDesign
                                                            : OuterMode::kConstantDelay;
      const DesignTrace tr = run_alg1(om, s.T);
      files.put("trace.csv", trace_csv(tr));
      if (cfg.trace)
        for (const auto& r : tr.rows) std::cout << trace_line(r) << '\n';
      const OuterState& f = tr.final_state;
      for (const auto& r : tr.rows) sum.J_trace.push_back(r.J);
      sum.c_change = f.c - s.init.c;
      files.put("K.txt", matrix_text(f.K));
      files.put("design.json", design_json(f.K, f.tau_o, f.c, s.T).dump(2) + "\n");
      const double J0 = make_outer_state(CodesignContext::make(s.plant, s.basis, s.T, cfg.bw),
                                         s.init.K, s.init.tau_o, s.init.c).J;
      const double S0 = sbw(s.init.c * s.init.tau_o, s.init.tau_o,
                            channel_counts(s.init.K, s.T), cfg.bw);
      summary["final"] = {{"J", f.J}, {"S_BW", f.S_BW}, {"nnz", count_nonzero(f.K)},
                          {"tau_o", f.tau_o}, {"c", f.c},
                          {"J_normalized", ratio(f.J, J0)},
                          {"S_BW_normalized", ratio(f.S_BW, S0)}};
      sum.J = f.J;
      sum.S_BW = f.S_BW;
      sum.nnz = count_nonzero(f.K);
      break;
    }
    case RunMode::kCaseA: {
      CodesignContext ctx = CodesignContext::make(s.plant, s.basis, s.T, cfg.bw);
      ctx.rho = cfg.admm.rho;
      CaseAConfig ca;
      ca.iterations = cfg.case_a_iterations;
      ca.epsilon = cfg.case_a_epsilon;
      ca.k_c = cfg.k_c;
      ca.ktau.ladder = cfg.case_a_ladder;
      ca.kc.ladder = cfg.case_a_ladder;
      const CaseATrace tr = case_a_mode(ctx, s.init.K, s.init.tau_o, s.init.c, ca);
      std::ostringstream os;
      os << "iteration,J,total_delay,tau_o,c,constraint,status\n" << std::setprecision(12);
      for (const auto& r : tr.rows) {
        os << r.iteration << ',' << r.J << ',' << r.total_delay << ',' << r.tau_o << ','
           << r.c << ',' << r.constraint << ',' << r.status << '\n';
        if (cfg.trace) std::cout << r.iteration << ' ' << r.J << ' ' << r.c << '\n';
      }
      files.put("case_a.csv", os.str());
      const OuterState& f = tr.final_state;
      files.put("K.txt", matrix_text(f.K));
      files.put("design.json", design_json(f.K, f.tau_o, f.c, s.T).dump(2) + "\n");
      for (const auto& r : tr.rows) sum.J_trace.push_back(r.J);
      sum.c_change = f.c - tr.rows.front().c;
      sum.S_BW = f.S_BW;
      const double J0 = tr.rows.front().J;
      summary["final"] = {{"J", f.J}, {"J_normalized", ratio(f.J, J0)}, {"tau_o", f.tau_o},
                          {"c", f.c}, {"c_change", f.c - tr.rows.front().c}};
      sum.J = f.J;
      sum.nnz = count_nonzero(f.K);
      break;
    }
    case RunMode::kTopologyRedesign:
    case RunMode::kBlockSparse: {
      MatrixXd K;
      double tau_o = 0.0, c = 0.0;
      if (!cfg.design_K.empty()) {
        K = read_matrix_file(cfg.design_K);
        tau_o = cfg.design_tau_o;
        c = cfg.design_c;
        evaluate_design(s.plant, K, build_masks(s.T), tau_o, c, s.basis);  // throws if unstable
      } else {
        const DesignTrace tr = run_alg1(OuterMode::kDelayDesign, s.T);
        files.put("trace.csv", trace_csv(tr));
        K = tr.final_state.K;
        tau_o = tr.final_state.tau_o;
        c = tr.final_state.c;
      }
      const int m = s.plant.m(), n = s.plant.n(), pool = std::min(m, n);
      const CnCostModel cost = make_cn_cost_model(m, n, pool, cfg.seed);
      const CnGeometry geo = cfg.geometry ? make_random_geometry(n, m, pool, cfg.seed,
                                                                 cfg.max_propagation)
                                          : CnGeometry{};
      const RedesignContext rc =
          RedesignContext::make(s.plant, s.basis, K, s.T, tau_o, c, cfg.bw, cost, geo);
      const RedesignMap map = recursive_divide(rc);
      const O3Result o3 = solve_O3(map);
      std::ostringstream csv;
      write_topology_csv(csv, map);
      files.put("topology.csv", csv.str());
      const TopologyEval& in = map.initial;
      std::ostringstream norm;
      norm << "N,J,S_CN,tau_d,tau_c\n" << std::setprecision(12);
      for (const auto& [N, e] : map.by_N)
        norm << N << ',' << ratio(e.J, in.J) << ',' << ratio(e.cost.total, in.cost.total)
             << ',' << ratio(e.tau_d, in.tau_d) << ',' << ratio(e.tau_c, in.tau_c) << '\n';
      files.put("topology_normalized.csv", norm.str());
      files.put("K.txt", matrix_text(K));
      files.put("blocks_initial.txt", sparsity_grid(K, s.T));
      files.put("blocks_selected.txt", sparsity_grid(K, o3.best.T));
      summary["initial_topology"] = {{"J", in.J}, {"S_CN", in.cost.total},
                                     {"tau_d", in.tau_d}, {"tau_c", in.tau_c}};
      summary["selected"] = {{"N", o3.N_star},
                             {"fallback", o3.fallback},
                             {"J", o3.best.J},
                             {"J_normalized", ratio(o3.best.J, in.J)},
                             {"S_CN_normalized", ratio(o3.best.cost.total, in.cost.total)},
                             {"N_lowest_cost_with_J_at_most_initial", o3.N_low_cost},
                             {"topology", topology_json(o3.best.T)}};
      sum.J = o3.best.J;
      sum.S_BW = o3.best.S_BW;
      sum.nnz = count_nonzero(K);
      if (cfg.mode == RunMode::kBlockSparse) {
        AdmmConfig ac = cfg.admm;
        ac.gamma = cfg.block_gamma;
        const auto rows = block_sparse_baseline(rc, map, ac, s.init.K);
        std::ostringstream bs;
        bs << "N,S_BW_redesign,S_BW_block,S_CN,J_redesign,J_block,J_redesign_normalized,"
              "J_block_normalized,blocks_target,blocks_block,nnz_block,gamma,note\n"
           << std::setprecision(12);
        for (const auto& r : rows)
          bs << r.N << ',' << r.S_BW_redesign << ',' << r.S_BW_block << ',' << r.S_CN << ','
             << r.J_redesign << ',' << r.J_block << ',' << ratio(r.J_redesign, in.J) << ','
             << ratio(r.J_block, in.J) << ',' << r.blocks_target << ',' << r.blocks_block
             << ',' << r.nnz_block << ',' << r.gamma << ',' << r.note << '\n';
        files.put("block_sparse.csv", bs.str());
      }
      break;
    }
  }
  files.put("summary.json", summary.dump(2) + "\n");
  json manifest = {{"schema", kConfigSchema},
                   {"library", kLibraryVersion},
                   {"mode", mode_name(cfg.mode)},
                   {"seed", cfg.seed},
                   {"config_hash", config_hash(cfg)},
                   {"config", json::parse(config_to_json(cfg))},
                   {"files", files.names}};
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  sum.files = files.names;
  sum.files.push_back("manifest.json");
  return sum;
}

}  // namespace dcd
