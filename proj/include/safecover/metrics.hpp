#pragma once

#include "safecover/coverage.hpp"
#include "safecover/environments.hpp"
#include "safecover/macopt.hpp"

namespace safecover {

struct RegretRecord {
  int round = 0;
  double simple_actual = 0.0;   // (1-1/e) benchmark minus achieved value
  double per_agent = 0.0;       // sum over agents of locally optimal gain gaps
  double cum_actual = 0.0;
  double cum_per_agent = 0.0;
  double coverage_true = 0.0;   // achieved value under the true density
  long samples_rho = 0;
  long samples_q = 0;
};

// Unconstrained regret against a fixed oracle assignment (brute force on
// enumerable instances, greedy-on-truth otherwise).
std::vector<RegretRecord> unconstrained_regret(const std::vector<RoundLog>& history,
                                               const EnvironmentTruth& env,
                                               const CoverageAssignment& oracle_opt, int r,
                                               DiskMode mode = DiskMode::path_restricted);

// Per-batch oracle for the constrained benchmark: optimal placements over
// the true eps-reachable set of each seed-connected agent group.
struct ReachableOracle {
  std::vector<std::vector<int>> batches;      // partition of agents
  std::vector<LocList> regions;               // R-bar_eps per batch
  std::vector<std::vector<Loc>> placements;   // optimal placements per batch
  double benchmark_value = 0.0;               // sum of F(X*; rho; region)
};

// Builds the oracle by brute force (enumerable instances only).
ReachableOracle reachable_oracle(const EnvironmentTruth& env, double eps_q, int r,
                                 DiskMode mode = DiskMode::path_restricted);

// Constrained simple regret per round: the (1-1/e) benchmark on the oracle
// regions minus the marginal gains achieved inside that round's union sets.
// The oracle batches must form a partition of the agents.
std::vector<RegretRecord> constrained_regret(const std::vector<RoundLog>& history,
                                             const EnvironmentTruth& env,
                                             const ReachableOracle& oracle, int r,
                                             DiskMode mode = DiskMode::path_restricted);

}  // namespace safecover
