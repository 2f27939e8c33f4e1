#pragma once

#include <optional>

#include "safecover/macopt.hpp"
#include "safecover/safe_sets.hpp"

namespace safecover {

struct SafemacConfig {
  double eps_rho = 0.25;
  double eps_q = 0.1;
  double beta_sqrt_rho = 3.0;
  double beta_sqrt_q = 3.0;
  double lipschitz = 1.0;
  int max_rounds = 300;
  int r = 5;
  DiskMode disk_mode = DiskMode::path_restricted;
  enum class Heuristic { inverse_distance } heuristic = Heuristic::inverse_distance;
  bool clamp_pessimistic_density = true;  // clamp l^rho at 0 in the recommendation rule
  double runtime_cap_s = 0.0;             // 0 disables the wall-clock cap

  SafetyParams safety() const { return {lipschitz, eps_q}; }

  void validate() const {
    if (eps_rho < 0.0 || eps_q < 0.0)
      throw std::invalid_argument("SafemacConfig: eps values must be >= 0");
    if (max_rounds < 1) throw std::invalid_argument("SafemacConfig: max_rounds must be >= 1");
    safety().validate();
  }
};

// h(v) = 1 / (1 + hop-distance(v, nearest goal)); used to rank frontier
// cells so expansion moves toward the sampling targets.
std::vector<double> inverse_distance_heuristic(const GridDomain& domain, const LocList& candidates,
                                               const LocList& goals);

struct ExpanderDebug {
  LocList frontier;                // optimistic cells not one-step certified
  std::vector<int> frontier_hops;  // hop distance of each frontier cell to the goals
  LocList eps_uncertain;           // W^eps, candidates for measurement
  LocList expanders;               // G at the chosen priority
  int alpha_star_hops = -1;        // hop level actually served, -1 if infeasible
};

// One goal-directed constraint-measurement pick: among the eps-uncertain
// pessimistically safe cells, the widest one that could certify a frontier
// cell of the highest-priority (closest to goal) level. Empty optional when
// the optimization is infeasible.
std::optional<Loc> safe_expansion_step(const LocList& pessimistic, const LocList& optimistic,
                                       const ConfidenceBounds& bounds_q, const GridDomain& domain,
                                       const LocList& goals, const SafetyParams& params,
                                       const LocList& exclude = {},
                                       ExpanderDebug* debug = nullptr);

// Spec-shaped convenience overload for a single agent of a state.
std::optional<Loc> safe_expansion_step(const SafeSetState& state, int agent,
                                       const ConfidenceBounds& bounds_q, const GridDomain& domain,
                                       Loc goal, const SafetyParams& params,
                                       ExpanderDebug* debug = nullptr);

// Best-so-far intermediate recommendation: the round's greedy output when it
// lies in the pessimistic sets, or a fresh pessimistic greedy solution, both
// valued under the clamped density lower bound restricted to the pessimistic
// batches. Falls back to the seeds before any usable round.
CoverageAssignment recommend_intermediate(const std::vector<RoundLog>& history,
                                          const GridDomain& domain, const std::vector<Loc>& seeds,
                                          const SafemacConfig& cfg);

// The full safety-constrained optimizer (phase machine over optimistic
// coverage and optimistic exploration). initial_q_bounds substitutes the
// prior constraint bounds, for tests with a known-safe constraint.
RunResult safemac_run(const EnvironmentTruth& env, const GpModel& gp_rho, const GpModel& gp_q,
                      const SafemacConfig& cfg, std::uint64_t rng_seed,
                      const std::optional<ConfidenceBounds>& initial_q_bounds = std::nullopt);

// Coverage confined to the pessimistic set; the constraint is only measured
// passively alongside each density measurement.
RunResult passivemac_run(const EnvironmentTruth& env, const GpModel& gp_rho, const GpModel& gp_q,
                         const SafemacConfig& cfg, std::uint64_t rng_seed,
                         const std::optional<ConfidenceBounds>& initial_q_bounds = std::nullopt);

// Full safe exploration of the feasible region first, then coverage inside
// the final pessimistic set.
RunResult two_stage_run(const EnvironmentTruth& env, const GpModel& gp_rho, const GpModel& gp_q,
                        const SafemacConfig& cfg, std::uint64_t rng_seed,
                        const std::optional<ConfidenceBounds>& initial_q_bounds = std::nullopt);

}  // namespace safecover
