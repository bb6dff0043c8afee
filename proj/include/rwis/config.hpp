#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rwis {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kManifestSchemaVersion = 1;

/// Kernel selection as it appears in experiment configs.
struct KernelConfig {
  std::string type = "uniform";  // uniform | sticky | swap | tabulated
  double kappa = 4.0;            // sticky
  std::string csv;               // tabulated
  int bins = 0;                  // tabulated
  std::string directions = "rho";  // rho | uniform
};

/// Fully serializable experiment description; round-trips load -> save ->
/// load identically. Subcommand-specific options live in dedicated blocks;
/// absent blocks keep their defaults.
struct ExperimentConfig {
  std::string model = "simple2d";  // builtin name or model-file path
  KernelConfig kernel;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out = "out";

  // simulate-duet
  double duet_t_events = 1e6;           // horizon in expected event units
  std::vector<double> duet_horizons;    // optional explicit ladder (event units)
  long long duet_trials = 1000;
  double duet_lambda0 = 0.6;
  long long duet_max_events = 100000000;

  // return-tail
  std::vector<double> tail_t_grid = {1e3, 1e4, 1e5, 1e6};
  long long tail_trials = 100000;
  double tail_t_max = 0.0;  // 0: use max of grid

  // llt-check
  std::vector<double> llt_t_grid = {100, 400, 1600};
  int llt_initial_state = 0;

  // sigma
  long long sigma_trials = 200000;
  double sigma_lambda_t = 1e4;

  // renewal
  std::string renewal_task = "age";     // age | type | order | tauberian
  std::string renewal_tail = "slowlog";
  std::vector<double> renewal_t_grid = {1e3, 1e6, 1e9, 1e12};
  long long renewal_trials = 10000;
  double renewal_a = 0.1, renewal_b = 1.0;
  double renewal_lambda0 = 0.55;
  long long renewal_order_n = 10000;
  std::vector<double> renewal_z_grid = {1e-3, 1e-6};

  // mixture-test
  std::string mixture_duet_csv;
  long long mixture_n = 100000;
  int mixture_permutations = 200;
  std::size_t mixture_pair_cap = 4000;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text, const std::string& origin);
std::string format_config(const ExperimentConfig& config);

/// Output file entry of a run manifest.
struct OutputRecord {
  std::string path;
  std::uint64_t bytes = 0;
  std::uint64_t fnv1a64 = 0;
};

/// Everything needed to reproduce a run byte-for-byte at worker count 1.
struct RunManifest {
  ExperimentConfig config;
  std::string subcommand;
  std::uint64_t master_seed = 0;
  int workers = 1;
  std::string stream_rule = "Rng(master_seed, trial_index)";
  double wall_time_seconds = 0.0;
  std::vector<OutputRecord> outputs;
};

std::string format_manifest(const RunManifest& manifest);

std::uint64_t fnv1a64_file(const std::string& path);

/// CSV writing with locale-independent shortest-round-trip doubles.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<double>& values);
  void raw_row(const std::string& line);
  const std::string& path() const { return path_; }
  void close();

 private:
  std::string path_;
  void* file_;  // FILE*
};

std::string format_double(double v);

}  // namespace rwis
