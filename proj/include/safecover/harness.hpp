#pragma once

#include <json.hpp>
#include <optional>
#include <string>

#include "safecover/macopt.hpp"
#include "safecover/safemac.hpp"

namespace safecover {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Full experiment description. Defaults follow the reference setup: three
// agents on a 30x30 grid with 0.1 spacing, 5-step disks, Matern-5/2 kernels
// with lengthscale 2, noise variance 1e-3, confidence scaling 3, at most 300
// rounds.
struct ExperimentConfig {
  std::string algorithm = "safemac";  // macopt|macopt_h|ucb|safemac|passivemac|two_stage
  std::string environment = "gp";     // gp | obstacle | file:<prefix>
  int n_agents = 3;
  GridDomain grid{30, 30, 0.1};
  int r = 5;
  KernelSpec kernel_rho{KernelSpec::Family::matern52, 2.0, 1.0};
  KernelSpec kernel_q{KernelSpec::Family::matern52, 2.0, 1.0};
  double noise_rho = 1e-3;
  double noise_q = 1e-3;
  double beta_rho = 3.0;  // multiplier on the posterior stddev
  double beta_q = 3.0;
  double eps_rho = 0.25;
  double eps_q = 0.1;
  double lipschitz = 0.0;  // 0: use the environment's empirical bound
  int max_rounds = 300;
  double seed_margin = 0.2;
  std::string disk_mode = "path";  // path | intersect
  bool clamp_density = false;
  ObstacleGenOptions obstacles;
  double runtime_cap_s = 0.0;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "results";

  DiskMode disk_mode_enum() const;
  void validate() const;
};

// Strict parsing: unknown keys anywhere are errors.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// Hash of the canonical config (all defaults applied); env_hash ignores the
// algorithm and output fields so runs of different algorithms on the same
// instance can be joined.
std::string config_hash(const ExperimentConfig& cfg);
std::string env_hash(const ExperimentConfig& cfg);

// Parses "a..b" (inclusive) or a single integer.
std::vector<std::uint64_t> parse_seed_range(const std::string& text);

EnvironmentTruth build_environment(const ExperimentConfig& cfg, std::uint64_t seed);

struct RunRecord {
  nlohmann::json json;  // canonical, append-only representation
  std::string file_name() const;
};

RunRecord run_one(const ExperimentConfig& cfg, std::uint64_t seed);
std::string write_record(const RunRecord& record, const std::string& dir);

// Runs every seed (optionally concurrently; records are independent and
// byte-identical either way) and writes one record file per seed.
std::vector<std::string> sweep(const ExperimentConfig& cfg, int jobs = 0);

// Precomputes oracle quantities (reachable sets, masses, greedy/brute-force
// baselines where enumerable) into oracle_<envhash>_<seed>.json files.
std::vector<std::string> run_oracle(const ExperimentConfig& cfg);

// Aggregates record files into summary.csv and coverage_vs_samples.csv.
void report(const std::string& in_dir, const std::string& out_dir);

// F(X; rho; R-bar_0) / (sum_{R-bar_0} rho / |V|); absent when the reachable
// mass is zero.
std::optional<double> normalized_coverage(const std::vector<Loc>& placements,
                                          const EnvironmentTruth& env, int r,
                                          DiskMode mode = DiskMode::path_restricted);

}  // namespace safecover
