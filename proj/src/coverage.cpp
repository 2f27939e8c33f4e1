#include "safecover/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace safecover {

LocList restricted_disk(const GridDomain& domain, Loc center, int r, const LocList& restrict_to,
                        DiskMode mode) {
  if (mode == DiskMode::path_restricted) return disk(domain, center, r, restrict_to).members;
  if (!contains(restrict_to, center))
    throw std::invalid_argument("restricted_disk: center not inside the restriction set");
  return set_intersection(disk(domain, center, r).members, restrict_to);
}

CoverageAssignment make_assignment(const Field& field, const GridDomain& domain,
                                   const std::vector<Loc>& placements, int r,
                                   const LocList& restrict_to, DiskMode mode) {
  CoverageAssignment a;
  a.placements = placements;
  std::vector<std::uint8_t> covered(domain.size(), 0);
  for (Loc p : placements) {
    if (!contains(restrict_to, p))
      throw std::invalid_argument("make_assignment: placement outside the restriction set");
    LocList d = restricted_disk(domain, p, r, restrict_to, mode);
    LocList effective;
    for (Loc v : d) {
      if (!covered[v]) {
        covered[v] = 1;
        effective.push_back(v);
        a.total_value += field[v];
      }
    }
    a.disks.push_back(std::move(d));
    a.zero_gain.push_back(effective.empty() ? 1 : 0);
    a.effective_regions.push_back(std::move(effective));
  }
  a.total_value /= domain.size();
  return a;
}

double coverage_value(const Field& field, const GridDomain& domain,
                      const std::vector<Loc>& placements, int r, const LocList& restrict_to,
                      DiskMode mode) {
  return make_assignment(field, domain, placements, r, restrict_to, mode).total_value;
}

double marginal_gain(const Field& field, const GridDomain& domain,
                     const std::vector<Loc>& existing, Loc candidate, int r,
                     const LocList& restrict_to, DiskMode mode) {
  std::vector<Loc> extended = existing;
  extended.push_back(candidate);
  const auto a = make_assignment(field, domain, extended, r, restrict_to, mode);
  double gain = 0.0;
  for (Loc v : a.effective_regions.back()) gain += field[v];
  return gain / domain.size();
}

namespace {

double disk_score(const Field& upper, const GridDomain& domain, Loc center, int r,
                  const LocList& restrict_to, const std::vector<std::uint8_t>& covered,
                  DiskMode mode) {
  double s = 0.0;
  for (Loc v : restricted_disk(domain, center, r, restrict_to, mode))
    if (!covered[v]) s += upper[v];
  return s;
}

}  // namespace

std::vector<double> placement_scores_serial(const Field& upper, const GridDomain& domain, int r,
                                            const LocList& restrict_to,
                                            const std::vector<std::uint8_t>& covered,
                                            DiskMode mode) {
  std::vector<double> scores(restrict_to.size());
  for (int i = 0; i < static_cast<int>(restrict_to.size()); ++i)
    scores[i] = disk_score(upper, domain, restrict_to[i], r, restrict_to, covered, mode);
  return scores;
}

std::vector<double> placement_scores_parallel(const Field& upper, const GridDomain& domain, int r,
                                              const LocList& restrict_to,
                                              const std::vector<std::uint8_t>& covered,
                                              DiskMode mode) {
  std::vector<double> scores(restrict_to.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < static_cast<int>(restrict_to.size()); ++i)
    scores[i] = disk_score(upper, domain, restrict_to[i], r, restrict_to, covered, mode);
  return scores;
}

GreedyResult greedy_ucb(const Field& upper, const Field& lower, const GridDomain& domain,
                        int n_agents, int r, const LocList& restrict_to, DiskMode mode,
                        Exec exec) {
  if (restrict_to.empty()) throw std::invalid_argument("greedy_ucb: empty restriction set");
  if (n_agents < 1) throw std::invalid_argument("greedy_ucb: need at least one agent");

  GreedyResult res;
  std::vector<std::uint8_t> covered(domain.size(), 0);
  std::vector<Loc> placements;
  for (int agent = 0; agent < n_agents; ++agent) {
    const auto scores = exec == Exec::parallel
                            ? placement_scores_parallel(upper, domain, r, restrict_to, covered, mode)
                            : placement_scores_serial(upper, domain, r, restrict_to, covered, mode);
    int best = 0;
    for (int i = 1; i < static_cast<int>(scores.size()); ++i)
      if (scores[i] > scores[best]) best = i;
    const Loc pick = restrict_to[best];
    placements.push_back(pick);
    for (Loc v : restricted_disk(domain, pick, r, restrict_to, mode)) covered[v] = 1;
  }

  // Rebuild the assignment in one pass so regions/value are consistent.
  res.assignment = make_assignment(upper, domain, placements, r, restrict_to, mode);

  for (int agent = 0; agent < n_agents; ++agent) {
    const LocList& region = res.assignment.effective_regions[agent];
    Loc goal = res.assignment.placements[agent];
    if (!region.empty()) {
      goal = region[0];
      for (Loc v : region)
        if (upper[v] - lower[v] > upper[goal] - lower[goal]) goal = v;
    }
    res.goals.push_back(goal);
    res.sum_max_width += upper[goal] - lower[goal];
  }
  return res;
}

namespace {

struct BruteState {
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<Loc> best_combo;
};

// Depth-first enumeration of index combinations i0 < i1 < ... over the
// candidate list, reusing an epoch-stamped coverage buffer.
void enumerate_from(const Field& field, const GridDomain& domain,
                    const std::vector<LocList>& disks, const LocList& candidates, int n_agents,
                    std::vector<int>& combo, double value, std::vector<int>& stamp, int& epoch,
                    std::vector<int>& stamp_trail, BruteState& state) {
  if (static_cast<int>(combo.size()) == n_agents) {
    if (value > state.best_value) {
      state.best_value = value;
      state.best_combo.clear();
      for (int idx : combo) state.best_combo.push_back(candidates[idx]);
    }
    return;
  }
  const int start = combo.empty() ? 0 : combo.back() + 1;
  const int remaining = n_agents - static_cast<int>(combo.size());
  for (int i = start; i + remaining <= static_cast<int>(candidates.size()); ++i) {
    double gain = 0.0;
    size_t trail_start = stamp_trail.size();
    for (Loc v : disks[i]) {
      if (stamp[v] != epoch) {
        stamp[v] = epoch;
        stamp_trail.push_back(v);
        gain += field[v];
      }
    }
    combo.push_back(i);
    enumerate_from(field, domain, disks, candidates, n_agents, combo, value + gain, stamp, epoch,
                   stamp_trail, state);
    combo.pop_back();
    for (size_t k = trail_start; k < stamp_trail.size(); ++k) stamp[stamp_trail[k]] = -1;
    stamp_trail.resize(trail_start);
  }
}

BruteState brute_force_slice(const Field& field, const GridDomain& domain,
                             const std::vector<LocList>& disks, const LocList& candidates,
                             int n_agents, int first_index) {
  BruteState state;
  std::vector<int> stamp(domain.size(), -1);
  std::vector<int> stamp_trail;
  int epoch = 1;
  std::vector<int> combo{first_index};
  double value = 0.0;
  for (Loc v : disks[first_index]) {
    stamp[v] = epoch;
    stamp_trail.push_back(v);
    value += field[v];
  }
  if (n_agents == 1) {
    state.best_value = value;
    state.best_combo = {candidates[first_index]};
    return state;
  }
  enumerate_from(field, domain, disks, candidates, n_agents, combo, value, stamp, epoch,
                 stamp_trail, state);
  return state;
}

}  // namespace

CoverageAssignment brute_force_optimal(const Field& field, const GridDomain& domain, int n_agents,
                                       int r, const LocList& restrict_to, DiskMode mode,
                                       Exec exec) {
  if (restrict_to.empty()) throw std::invalid_argument("brute_force_optimal: empty restriction");
  const int effective_agents = std::min<int>(n_agents, static_cast<int>(restrict_to.size()));
  double combos = 1.0;
  for (int i = 0; i < effective_agents; ++i) combos *= static_cast<double>(restrict_to.size());
  if (combos > 1e7)
    throw std::invalid_argument("brute_force_optimal: instance too large (guard 1e7)");

  std::vector<LocList> disks(restrict_to.size());
  for (size_t i = 0; i < restrict_to.size(); ++i)
    disks[i] = restricted_disk(domain, restrict_to[i], r, restrict_to, mode);

  const int slices = static_cast<int>(restrict_to.size()) - effective_agents + 1;
  std::vector<BruteState> per_slice(slices);
  auto run_slice = [&](int i) {
    per_slice[i] = brute_force_slice(field, domain, disks, restrict_to, effective_agents, i);
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < slices; ++i) run_slice(i);
  } else {
    for (int i = 0; i < slices; ++i) run_slice(i);
  }

  // Merge in slice order; ties keep the earlier (lexicographically smaller)
  // combination, so the result is independent of the thread count.
  BruteState best;
  for (const auto& s : per_slice)
    if (s.best_value > best.best_value) best = s;

  std::vector<Loc> placements = best.best_combo;
  while (static_cast<int>(placements.size()) < n_agents) placements.push_back(placements.front());
  return make_assignment(field, domain, placements, r, restrict_to, mode);
}

}  // namespace safecover
