#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcd/codesign.hpp"
#include "dcd/model.hpp"
#include "dcd/netcost.hpp"
#include "dcd/sparseadmm.hpp"

namespace dcd {

inline constexpr int kConfigSchema = 1;
inline constexpr const char* kLibraryVersion = "dcd 1.0.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { kCaseA, kAlgorithm1, kConstantDelay, kTopologyRedesign, kBlockSparse };

RunMode parse_mode(const std::string& s);
std::string mode_name(RunMode m);

struct PlantSource {
  bool random = true;
  int n = 10;
  int m = 10;
  double spectral_radius = 1.0;
  // file source: B_w, Q, R default to identity when empty
  MatrixXd A, B, B_w, Q, R;
};

struct TopologySource {
  std::string kind = "blocks";  // blocks | singletons | explicit
  int cn_count = 2;             // blocks
  bool shuffle = false;         // singletons: random orders from the seed
  std::vector<int> X_order, U_order, n_sizes, m_sizes;  // explicit, zero based
  MatrixXd link_lengths;
};

struct ExperimentConfig {
  int schema = kConfigSchema;
  RunMode mode = RunMode::kAlgorithm1;
  std::uint64_t seed = 1;
  PlantSource plant;
  TopologySource topology;
  int spectral_N = 14;
  double tau_o = 0.2;  // tried first; shrunk until stable
  double c = 0.5;
  BandwidthModel bw;
  AdmmConfig admm;
  // co-design loop
  int gamma_points = 40;
  double gamma_lo = 0.01;
  double gamma_hi = 0.95;
  int rounds = 3;
  int k_c = 4;
  int ladder = 2;
  // case_a mode
  int case_a_iterations = 15;
  double case_a_epsilon = 0.0;
  int case_a_ladder = 6;
  // redesign
  bool geometry = true;
  double max_propagation = 1e-4;
  double block_gamma = 1.0;  // first gamma of the block-shrinkage path
  std::string design_K;  // optional gain file; otherwise the co-design loop is run
  double design_tau_o = 0.0;
  double design_c = 0.0;
  bool trace = false;
};

// Validates and fills defaults; errors name the offending field. Matrix
// fields take a nested row-major array or a path to a matrix file, resolved
// against base_dir.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);
// FNV-1a over the canonical JSON dump.
std::string config_hash(const ExperimentConfig& cfg);

// "rows cols" header then row-major values.
void write_matrix(std::ostream& os, const MatrixXd& M);
MatrixXd read_matrix(std::istream& is);
MatrixXd read_matrix_file(const std::filesystem::path& p);

PlantModel build_plant(const ExperimentConfig& cfg);
Topology build_topology(const ExperimentConfig& cfg, int m, int n);

struct RunSummary {
  std::vector<std::string> files;
  double J = 0.0;
  double S_BW = 0.0;
  int nnz = 0;
  double c_change = 0.0;        // final c minus initial c
  std::vector<double> J_trace;  // case_a and algorithm1 modes
  std::string note;
};

// Runs one experiment and writes its artifacts into out_dir.
RunSummary run_experiment(const ExperimentConfig& cfg,
                          const std::filesystem::path& out_dir);

struct SweepItem {
  std::uint64_t seed = 0;
  std::filesystem::path dir;
  RunSummary summary;
  std::string error;  // empty on success
};

// One experiment per seed in out_dir/seed_<s>, spread over worker threads.
std::vector<SweepItem> run_sweep(const ExperimentConfig& cfg,
                                 const std::vector<std::uint64_t>& seeds,
                                 const std::filesystem::path& out_dir,
                                 unsigned threads = 0);

struct DesignReport {
  double abscissa = 0.0;
  double J = 0.0;
  double dJ_dtau_o = 0.0;
  double dJ_dc = 0.0;
  double grad_K_norm = 0.0;
  int nnz = 0;
  ChannelCounts counts;
  double S_BW = 0.0;
};

// Stability, H2 and gradient report for a stored design. Throws
// StabilityError when the design does not verify.
DesignReport analyze_design(const ExperimentConfig& cfg, const MatrixXd& K,
                            double tau_o, double c);

}  // namespace dcd
