#include "safecover/macopt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace safecover {

std::vector<Loc> uncertainty_goals(const CoverageAssignment& assignment,
                                   const ConfidenceBounds& bounds) {
  std::vector<Loc> goals;
  for (size_t i = 0; i < assignment.placements.size(); ++i) {
    const LocList& region = assignment.effective_regions[i];
    Loc goal = assignment.placements[i];
    if (!region.empty()) {
      goal = region[0];
      for (Loc v : region)
        if (bounds.width(v) > bounds.width(goal)) goal = v;
    }
    goals.push_back(goal);
  }
  return goals;
}

std::vector<Loc> hallucinated_goals(const CoverageAssignment& assignment,
                                    const ConfidenceBounds& bounds, const GpModel& gp) {
  (void)bounds;
  GpModel conditioned = gp;
  std::vector<Loc> goals;
  for (size_t i = 0; i < assignment.placements.size(); ++i) {
    const LocList& region = assignment.effective_regions[i];
    Loc goal = assignment.placements[i];
    if (!region.empty()) {
      const auto& var = conditioned.variances();
      goal = region[0];
      for (Loc v : region)
        if (var[v] > var[goal]) goal = v;
    }
    goals.push_back(goal);
    // Value-free conditioning: only the variance matters, so the posterior
    // mean stands in for the unseen measurement.
    conditioned.add_observation(goal, conditioned.means()[goal]);
  }
  return goals;
}

std::vector<Loc> ucb_center_goals(const CoverageAssignment& assignment) {
  return assignment.placements;
}

double analysis_width(const CoverageAssignment& assignment, const GpModel& gp, double beta_sqrt,
                      int domain_size) {
  size_t max_disk = 0;
  for (const auto& d : assignment.disks) max_disk = std::max(max_disk, d.size());
  const double cd = static_cast<double>(max_disk) / domain_size;
  double sum = 0.0;
  for (const auto& region : assignment.effective_regions) {
    double best = 0.0;
    for (Loc v : region) best = std::max(best, gp.stddev(v));
    sum += best;
  }
  return 2.0 * beta_sqrt * cd * sum;
}

RunResult macopt_run(const EnvironmentTruth& env, const GpModel& gp_rho, const MacoptConfig& cfg,
                     std::uint64_t rng_seed, const std::optional<LocList>& restrict_to) {
  cfg.validate();
  const GridDomain& domain = env.domain;
  const int n_agents = static_cast<int>(env.seeds.size());

  LocList restrict;
  if (restrict_to) {
    restrict = *restrict_to;
  } else {
    restrict.resize(domain.size());
    std::iota(restrict.begin(), restrict.end(), 0);
  }

  GpModel gp = gp_rho;
  ConfidenceBounds bounds = update_bounds(initial_bounds(domain, gp.kernel(), cfg.beta_sqrt), gp,
                                          cfg.beta_sqrt);

  RngStream root(rng_seed, "run");
  std::vector<RngStream> obs_rng;
  for (int i = 0; i < n_agents; ++i) obs_rng.push_back(root.child("obs_rho", i));
  const double noise_sd = std::sqrt(env.noise_rho);

  RunResult res;
  int t = 1;
  GreedyResult greedy =
      greedy_ucb(bounds.upper, bounds.lower, domain, n_agents, cfg.r, restrict, cfg.disk_mode);

  while (true) {
    RoundLog log;
    log.round = t;
    log.placements = greedy.assignment;
    log.sum_max_width = greedy.sum_max_width;
    log.gamma_analysis = analysis_width(greedy.assignment, gp, cfg.beta_sqrt, domain.size());

    if (greedy.sum_max_width <= cfg.eps_rho) {
      res.history.push_back(std::move(log));
      res.converged = true;
      break;
    }
    if (t >= cfg.max_rounds) {
      res.history.push_back(std::move(log));
      res.converged = false;
      break;
    }

    std::vector<Loc> goals;
    switch (cfg.sampler) {
      case MacoptConfig::Sampler::uncertainty:
        goals = uncertainty_goals(greedy.assignment, bounds);
        break;
      case MacoptConfig::Sampler::hallucinated:
        goals = hallucinated_goals(greedy.assignment, bounds, gp);
        break;
      case MacoptConfig::Sampler::ucb_center:
        goals = ucb_center_goals(greedy.assignment);
        break;
    }
    log.goals = goals;

    std::vector<double> values(goals.size());
    for (int i = 0; i < n_agents; ++i) {
      values[i] = env.density[goals[i]] + noise_sd * obs_rng[i].next_normal();
      log.observations.push_back({i, goals[i], values[i], 'r'});
      if (env.constraint[goals[i]] < 0.0) ++res.safety_violations;
    }
    gp.add_observations(goals, values);
    bounds = update_bounds(bounds, gp, cfg.beta_sqrt);
    res.samples_rho += n_agents;

    res.history.push_back(std::move(log));
    ++t;
    greedy = greedy_ucb(bounds.upper, bounds.lower, domain, n_agents, cfg.r, restrict,
                        cfg.disk_mode);
  }

  res.rounds = t;
  res.final_assignment = greedy.assignment;
  res.final_recommendation = greedy.assignment.placements;
  return res;
}

}  // namespace safecover
