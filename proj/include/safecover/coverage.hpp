#pragma once

#include <cstdint>
#include <vector>

#include "safecover/exec.hpp"
#include "safecover/grid.hpp"

namespace safecover {

// Per-location field values (density or a confidence bound on it).
using Field = std::vector<double>;

// How a sensing disk interacts with a restriction set: BFS that never leaves
// the set (default; disconnected pockets are not covered through walls), or
// plain set intersection of the unrestricted disk.
enum class DiskMode { path_restricted, intersect };

struct CoverageAssignment {
  std::vector<Loc> placements;             // ordered by agent index
  std::vector<LocList> disks;              // restricted disk of each agent
  std::vector<LocList> effective_regions;  // disk minus lower-indexed disks
  double total_value = 0.0;                // w.r.t. the field it was built on
  std::vector<std::uint8_t> zero_gain;     // agents placed with empty region
};

LocList restricted_disk(const GridDomain& domain, Loc center, int r, const LocList& restrict_to,
                        DiskMode mode);

// Builds the assignment structure (disks, disjoint effective regions, value)
// for fixed placements. Placements must lie inside the restriction.
CoverageAssignment make_assignment(const Field& field, const GridDomain& domain,
                                   const std::vector<Loc>& placements, int r,
                                   const LocList& restrict_to,
                                   DiskMode mode = DiskMode::path_restricted);

// F(X) = sum_i sum_{v in D^{i-}} field(v) / |V|. The normalizer is always
// the full domain size, also under a restriction.
double coverage_value(const Field& field, const GridDomain& domain,
                      const std::vector<Loc>& placements, int r, const LocList& restrict_to,
                      DiskMode mode = DiskMode::path_restricted);

// F(existing + candidate) - F(existing).
double marginal_gain(const Field& field, const GridDomain& domain,
                     const std::vector<Loc>& existing, Loc candidate, int r,
                     const LocList& restrict_to, DiskMode mode = DiskMode::path_restricted);

struct GreedyResult {
  CoverageAssignment assignment;
  std::vector<Loc> goals;      // per agent, width argmax inside its region
  double sum_max_width = 0.0;  // sum over agents of (upper-lower) at goal
};

// Sequential greedy placement maximizing the upper-bound coverage, plus the
// per-agent uncertainty-sampling goals. All argmax ties break to the lowest
// location id.
GreedyResult greedy_ucb(const Field& upper, const Field& lower, const GridDomain& domain,
                        int n_agents, int r, const LocList& restrict_to,
                        DiskMode mode = DiskMode::path_restricted, Exec exec = default_exec());

// Exhaustive maximizer over unordered placements; the test oracle for the
// greedy ratio and the regret benchmarks. Guarded against oversized inputs.
CoverageAssignment brute_force_optimal(const Field& field, const GridDomain& domain,
                                       int n_agents, int r, const LocList& restrict_to,
                                       DiskMode mode = DiskMode::path_restricted,
                                       Exec exec = default_exec());

// Score of every candidate placement for the next greedy pick: the summed
// upper bound over its not-yet-covered disk cells. Serial reference and
// OpenMP variant; bit-identical outputs.
std::vector<double> placement_scores_serial(const Field& upper, const GridDomain& domain, int r,
                                            const LocList& restrict_to,
                                            const std::vector<std::uint8_t>& covered,
                                            DiskMode mode);
std::vector<double> placement_scores_parallel(const Field& upper, const GridDomain& domain, int r,
                                              const LocList& restrict_to,
                                              const std::vector<std::uint8_t>& covered,
                                              DiskMode mode);

}  // namespace safecover
