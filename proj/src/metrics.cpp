#include "safecover/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "safecover/safe_sets.hpp"

namespace safecover {

namespace {

constexpr double kGreedyFactor = 1.0 - 1.0 / 2.718281828459045235360287471352662498;

// Best single-location gain given an already-chosen prefix, scanning every
// candidate in the restriction.
double best_marginal_gain(const Field& field, const GridDomain& domain,
                          const std::vector<Loc>& prefix, int r, const LocList& restrict_to,
                          DiskMode mode) {
  std::vector<std::uint8_t> covered(domain.size(), 0);
  for (Loc p : prefix)
    for (Loc v : restricted_disk(domain, p, r, restrict_to, mode)) covered[v] = 1;
  const auto scores = placement_scores_serial(field, domain, r, restrict_to, covered, mode);
  double best = 0.0;
  for (double s : scores) best = std::max(best, s);
  return best / domain.size();
}

}  // namespace

std::vector<RegretRecord> unconstrained_regret(const std::vector<RoundLog>& history,
                                               const EnvironmentTruth& env,
                                               const CoverageAssignment& oracle_opt, int r,
                                               DiskMode mode) {
  const GridDomain& domain = env.domain;
  LocList all(domain.size());
  std::iota(all.begin(), all.end(), 0);
  const double opt_value = coverage_value(env.density, domain, oracle_opt.placements, r, all, mode);

  std::vector<RegretRecord> records;
  double cum_actual = 0.0, cum_agent = 0.0;
  long rho_count = 0, q_count = 0;
  for (const RoundLog& log : history) {
    RegretRecord rec;
    rec.round = log.round;
    const auto truth =
        make_assignment(env.density, domain, log.placements.placements, r, all, mode);
    rec.coverage_true = truth.total_value;
    rec.simple_actual = kGreedyFactor * opt_value - truth.total_value;

    std::vector<Loc> prefix;
    for (size_t i = 0; i < truth.placements.size(); ++i) {
      double achieved = 0.0;
      for (Loc v : truth.effective_regions[i]) achieved += env.density[v];
      achieved /= domain.size();
      rec.per_agent += best_marginal_gain(env.density, domain, prefix, r, all, mode) - achieved;
      prefix.push_back(truth.placements[i]);
    }

    for (const auto& o : log.observations) (o.kind == 'r' ? rho_count : q_count) += 1;
    cum_actual += rec.simple_actual;
    cum_agent += rec.per_agent;
    rec.cum_actual = cum_actual;
    rec.cum_per_agent = cum_agent;
    rec.samples_rho = rho_count;
    rec.samples_q = q_count;
    records.push_back(rec);
  }
  return records;
}

ReachableOracle reachable_oracle(const EnvironmentTruth& env, double eps_q, int r, DiskMode mode) {
  const GridDomain& domain = env.domain;
  std::vector<LocList> reach_eps;
  for (Loc s : env.seeds)
    reach_eps.push_back(true_reachable_set(env.constraint, domain, {s}, eps_q, env.lipschitz_q));

  ReachableOracle oracle;
  const BatchCollection groups = group_by_intersection(reach_eps);
  oracle.batches = groups.batches;
  oracle.regions = groups.merged_sets;
  for (size_t b = 0; b < groups.batches.size(); ++b) {
    const auto best = brute_force_optimal(env.density, domain,
                                          static_cast<int>(groups.batches[b].size()), r,
                                          groups.merged_sets[b], mode);
    oracle.benchmark_value += best.total_value;
    oracle.placements.push_back(best.placements);
  }
  return oracle;
}

std::vector<RegretRecord> constrained_regret(const std::vector<RoundLog>& history,
                                             const EnvironmentTruth& env,
                                             const ReachableOracle& oracle, int r, DiskMode mode) {
  const GridDomain& domain = env.domain;
  const int n_agents = static_cast<int>(env.seeds.size());
  {
    std::vector<int> seen(n_agents, 0);
    for (const auto& batch : oracle.batches)
      for (int agent : batch) {
        if (agent < 0 || agent >= n_agents || seen[agent]++)
          throw std::invalid_argument(
              "constrained_regret: oracle batches do not partition the agents");
      }
    if (std::accumulate(seen.begin(), seen.end(), 0) != n_agents)
      throw std::invalid_argument(
          "constrained_regret: oracle batches do not partition the agents");
  }

  // Evaluation region for the true coverage column: the union of the
  // agents' zero-margin reachable sets.
  LocList eval_region;
  for (Loc s : env.seeds)
    eval_region = set_union(
        eval_region, true_reachable_set(env.constraint, domain, {s}, 0.0, env.lipschitz_q));

  std::vector<RegretRecord> records;
  double cum_actual = 0.0, cum_agent = 0.0;
  long rho_count = 0, q_count = 0;
  for (const RoundLog& log : history) {
    if (log.batches.empty() || log.union_sets.empty())
      throw std::invalid_argument("constrained_regret: history lacks batch/union-set data");
    RegretRecord rec;
    rec.round = log.round;

    // Achieved marginal gains inside this round's union sets, plus the
    // locally optimal gains for the per-agent column.
    double achieved_total = 0.0;
    for (const auto& batch : log.batches) {
      LocList arena;
      for (int agent : batch) arena = set_union(arena, log.union_sets[agent]);
      std::vector<Loc> prefix;
      for (int agent : batch) {
        const Loc placement = log.placements.placements[agent];
        const double local_best =
            best_marginal_gain(env.density, domain, prefix, r, arena, mode);
        const double achieved =
            marginal_gain(env.density, domain, prefix, placement, r, arena, mode);
        achieved_total += achieved;
        rec.per_agent += local_best - achieved;
        prefix.push_back(placement);
      }
    }
    rec.simple_actual = kGreedyFactor * oracle.benchmark_value - achieved_total;

    // True coverage of this round's placements over the reachable region.
    std::vector<Loc> inside;
    for (Loc p : log.placements.placements)
      if (contains(eval_region, p)) inside.push_back(p);
    rec.coverage_true =
        inside.empty() ? 0.0 : coverage_value(env.density, domain, inside, r, eval_region, mode);

    for (const auto& o : log.observations) (o.kind == 'r' ? rho_count : q_count) += 1;
    cum_actual += rec.simple_actual;
    cum_agent += rec.per_agent;
    rec.cum_actual = cum_actual;
    rec.cum_per_agent = cum_agent;
    rec.samples_rho = rho_count;
    rec.samples_q = q_count;
    records.push_back(rec);
  }
  return records;
}

}  // namespace safecover
