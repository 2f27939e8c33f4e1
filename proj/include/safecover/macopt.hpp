#pragma once

#include <optional>
#include <vector>

#include "safecover/coverage.hpp"
#include "safecover/environments.hpp"
#include "safecover/gp.hpp"

namespace safecover {

struct MacoptConfig {
  enum class Sampler { uncertainty, hallucinated, ucb_center };
  double eps_rho = 0.25;
  double beta_sqrt = 3.0;
  int max_rounds = 300;
  int r = 5;
  Sampler sampler = Sampler::uncertainty;
  DiskMode disk_mode = DiskMode::path_restricted;

  void validate() const {
    if (eps_rho < 0.0) throw std::invalid_argument("MacoptConfig: eps_rho must be >= 0");
    if (max_rounds < 1) throw std::invalid_argument("MacoptConfig: max_rounds must be >= 1");
  }
};

struct Observation {
  int agent = 0;
  Loc loc = 0;
  double value = 0.0;
  char kind = 'r';  // 'r' density, 'q' constraint

  bool operator==(const Observation&) const = default;
};

struct RoundLog {
  int round = 0;
  char phase = 'u';  // 'u' unconstrained, 'c' coverage, 'e' exploration
  CoverageAssignment placements;
  std::vector<Loc> goals;
  double sum_max_width = 0.0;  // Gamma_t, raw-width form
  double gamma_analysis = 0.0;  // 2 b C_D sum_i max sigma, analysis form
  std::vector<Observation> observations;

  // Constrained runs also carry the round's set state and worst-case data so
  // regret accounting and the recommendation rule can replay it.
  std::vector<std::vector<int>> batches;
  std::vector<LocList> union_sets;
  std::vector<LocList> pess_sets;
  std::vector<int> opti_sizes;
  Field lower_rho;  // clamped pessimistic density of this round
  std::vector<Loc> recommendation;
  double recommendation_value = 0.0;
};

struct RunResult {
  CoverageAssignment final_assignment;
  std::vector<RoundLog> history;
  bool converged = false;
  bool timed_out = false;
  int rounds = 0;
  long samples_rho = 0;
  long samples_q = 0;
  long safety_violations = 0;    // measurements at true q < 0
  long sandwich_violations = 0;  // pessimistic set escaping the true reachable set
  std::vector<Loc> final_recommendation;
};

// Unconstrained coverage optimization: greedy placements on the density
// upper bound, per-agent sampling goals, stop when the summed goal width
// drops to eps_rho. Observation noise streams are derived per agent from
// rng_seed, keyed by each agent's measurement count.
RunResult macopt_run(const EnvironmentTruth& env, const GpModel& gp_rho,
                     const MacoptConfig& cfg, std::uint64_t rng_seed,
                     const std::optional<LocList>& restrict_to = std::nullopt);

// Per-agent goal rules. Ties break to the lowest location id; agents with an
// empty effective region keep their own placement as goal.
std::vector<Loc> uncertainty_goals(const CoverageAssignment& assignment,
                                   const ConfidenceBounds& bounds);
std::vector<Loc> hallucinated_goals(const CoverageAssignment& assignment,
                                    const ConfidenceBounds& bounds, const GpModel& gp);
std::vector<Loc> ucb_center_goals(const CoverageAssignment& assignment);

// Analysis-form width metric 2 * beta_sqrt * C_D * sum_i max sigma over the
// effective regions.
double analysis_width(const CoverageAssignment& assignment, const GpModel& gp, double beta_sqrt,
                      int domain_size);

}  // namespace safecover
