#pragma once

#include <vector>

#include "safecover/exec.hpp"
#include "safecover/gp.hpp"
#include "safecover/grid.hpp"

namespace safecover {

struct SafetyParams {
  double lipschitz = 1.0;  // function-units per length-unit
  double eps_q = 0.1;      // optimistic exclusion margin

  void validate() const {
    if (!(lipschitz > 0.0)) throw std::invalid_argument("SafetyParams: lipschitz must be > 0");
    if (eps_q < 0.0) throw std::invalid_argument("SafetyParams: eps_q must be >= 0");
  }
};

// One-step constraint-satisfaction operators: every v certified by some
// z in base via score(z) - L * d(v, z) >= 0 (boundary inclusive), where the
// score is the lower bound (pessimistic) or upper bound minus eps_q
// (optimistic). The returned set does not implicitly include the base.
LocList pessimistic_operator(const ConfidenceBounds& bounds_q, const GridDomain& domain,
                             const LocList& base, const SafetyParams& params);
LocList optimistic_operator(const ConfidenceBounds& bounds_q, const GridDomain& domain,
                            const LocList& base, const SafetyParams& params);

// Kernel behind the operators: certification mask from per-base scores.
// Serial reference and OpenMP variant produce identical bits.
std::vector<std::uint8_t> certified_mask_serial(const GridDomain& domain, const LocList& base,
                                                const std::vector<double>& base_scores,
                                                double lipschitz);
std::vector<std::uint8_t> certified_mask_parallel(const GridDomain& domain, const LocList& base,
                                                  const std::vector<double>& base_scores,
                                                  double lipschitz);

enum class OperatorKind { pessimistic, optimistic };

// Least fixed point of S -> (operator(S) restricted to the component of S) u S,
// iterated from the seed. On the undirected grid, reach-and-return collapses
// to connectivity inside the candidate set.
LocList ergodic_expand(OperatorKind kind, const ConfidenceBounds& bounds_q,
                       const GridDomain& domain, const LocList& seed, const SafetyParams& params,
                       Exec exec = default_exec());

// Ground-truth safely-reachable set from the seed under the true constraint,
// used only by oracles and metrics. Seeds must satisfy q >= 0.
LocList true_reachable_set(const std::vector<double>& truth_q, const GridDomain& domain,
                           const LocList& seed, double eps, double lipschitz,
                           Exec exec = default_exec());

// Per-agent pessimistic/optimistic/union sets.
struct SafeSetState {
  std::vector<Loc> seeds;                // one per agent
  std::vector<LocList> pessimistic;      // S^{p,i}
  std::vector<LocList> optimistic;       // S^{o,i}
  std::vector<LocList> unions;           // S^{u,i} = S^{p,i} u S^{o,i}

  int n_agents() const { return static_cast<int>(seeds.size()); }
};

// Pessimistic sets start at each agent's own seed; optimistic sets start as
// the whole domain until the first expansion replaces them.
SafeSetState initial_safe_state(const GridDomain& domain, const std::vector<Loc>& seeds);

// Both expansions are applied to the previous pessimistic set; optimistic
// sets are recomputed fresh and may shrink, pessimistic sets only grow.
SafeSetState update_safe_sets(const SafeSetState& state, const ConfidenceBounds& bounds_q,
                              const GridDomain& domain, const SafetyParams& params,
                              Exec exec = default_exec());

struct BatchCollection {
  std::vector<std::vector<int>> batches;  // agent indices, each sorted; batches
                                          // ordered by smallest member
  std::vector<LocList> merged_sets;       // union of the members' sets
};

// Transitive closure of pairwise union-set intersection.
BatchCollection compute_batches(const SafeSetState& state);

// Same grouping over the pessimistic sets (used by the recommendation rule).
BatchCollection compute_batches_pessimistic(const SafeSetState& state);

// Grouping of arbitrary per-agent sets; the building block for the above.
BatchCollection group_by_intersection(const std::vector<LocList>& per_agent_sets);

}  // namespace safecover
