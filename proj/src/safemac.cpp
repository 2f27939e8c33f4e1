#include "safecover/safemac.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace safecover {

namespace {

std::vector<int> hop_distances(const GridDomain& domain, const LocList& goals) {
  std::vector<int> dist(domain.size(), -1);
  std::deque<Loc> queue;
  for (Loc g : goals) {
    if (dist[g] < 0) {
      dist[g] = 0;
      queue.push_back(g);
    }
  }
  while (!queue.empty()) {
    const Loc v = queue.front();
    queue.pop_front();
    Loc nb[4];
    const int n = domain.neighbors(v, nb);
    for (int i = 0; i < n; ++i)
      if (dist[nb[i]] < 0) {
        dist[nb[i]] = dist[v] + 1;
        queue.push_back(nb[i]);
      }
  }
  return dist;
}

}  // namespace

std::vector<double> inverse_distance_heuristic(const GridDomain& domain, const LocList& candidates,
                                               const LocList& goals) {
  if (goals.empty()) throw std::invalid_argument("inverse_distance_heuristic: no goals");
  const auto dist = hop_distances(domain, goals);
  std::vector<double> h(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) h[i] = 1.0 / (1.0 + dist[candidates[i]]);
  return h;
}

std::optional<Loc> safe_expansion_step(const LocList& pessimistic, const LocList& optimistic,
                                       const ConfidenceBounds& bounds_q, const GridDomain& domain,
                                       const LocList& goals, const SafetyParams& params,
                                       const LocList& exclude, ExpanderDebug* debug) {
  if (goals.empty()) return std::nullopt;

  // A_t support: optimistic cells not certified by one pessimistic step.
  std::vector<double> scores(pessimistic.size());
  for (size_t i = 0; i < pessimistic.size(); ++i) scores[i] = bounds_q.lower[pessimistic[i]];
  const auto certified =
      default_exec() == Exec::parallel
          ? certified_mask_parallel(domain, pessimistic, scores, params.lipschitz)
          : certified_mask_serial(domain, pessimistic, scores, params.lipschitz);
  LocList frontier;
  for (Loc v : optimistic)
    if (!certified[v]) frontier.push_back(v);

  // W^eps: places that are provably safe but not eps-accurately known.
  LocList uncertain;
  for (Loc v : pessimistic)
    if (bounds_q.width(v) > params.eps_q && !contains(exclude, v)) uncertain.push_back(v);

  if (debug) {
    debug->frontier = frontier;
    debug->eps_uncertain = uncertain;
    debug->expanders.clear();
    debug->alpha_star_hops = -1;
    debug->frontier_hops.clear();
  }
  if (frontier.empty() || uncertain.empty()) return std::nullopt;

  // Bucket the frontier into priority levels by hop distance to the goals.
  const auto dist = hop_distances(domain, goals);
  int max_hop = 0;
  for (Loc v : frontier) max_hop = std::max(max_hop, dist[v]);
  std::vector<LocList> levels(max_hop + 1);
  for (Loc v : frontier) levels[dist[v]].push_back(v);
  if (debug)
    for (Loc v : frontier) debug->frontier_hops.push_back(dist[v]);

  // Conservative reach boxes in cell units avoid most distance evaluations.
  std::vector<int> reach_cells(uncertain.size());
  for (size_t i = 0; i < uncertain.size(); ++i)
    reach_cells[i] = static_cast<int>(std::ceil(
                         std::max(0.0, bounds_q.upper[uncertain[i]]) /
                         (params.lipschitz * domain.spacing))) +
                     1;

  for (int hop = 0; hop <= max_hop; ++hop) {
    if (levels[hop].empty()) continue;
    LocList expanders;
    for (size_t i = 0; i < uncertain.size(); ++i) {
      const Loc w = uncertain[i];
      if (bounds_q.upper[w] < 0.0) continue;
      const int wr = domain.row(w), wc = domain.col(w);
      for (Loc z : levels[hop]) {
        if (std::abs(wr - domain.row(z)) > reach_cells[i] ||
            std::abs(wc - domain.col(z)) > reach_cells[i])
          continue;
        if (bounds_q.upper[w] - params.lipschitz * domain.distance(w, z) >= 0.0) {
          expanders.push_back(w);
          break;
        }
      }
    }
    if (expanders.empty()) continue;
    Loc best = expanders[0];
    for (Loc w : expanders)
      if (bounds_q.width(w) > bounds_q.width(best)) best = w;
    if (debug) {
      debug->expanders = expanders;
      debug->alpha_star_hops = hop;
    }
    return best;
  }
  return std::nullopt;
}

std::optional<Loc> safe_expansion_step(const SafeSetState& state, int agent,
                                       const ConfidenceBounds& bounds_q, const GridDomain& domain,
                                       Loc goal, const SafetyParams& params,
                                       ExpanderDebug* debug) {
  return safe_expansion_step(state.pessimistic[agent], state.optimistic[agent], bounds_q, domain,
                             {goal}, params, {}, debug);
}

namespace {

// Greedy solve per batch, mapped back to global agent slots.
struct BatchSolve {
  CoverageAssignment assignment;  // indexed by global agent
  std::vector<Loc> width_goals;   // density-width argmax per agent
  double gamma = 0.0;
};

BatchSolve solve_batches(const ConfidenceBounds& bounds_rho, const GridDomain& domain,
                         const BatchCollection& batches, int n_agents, int r, DiskMode mode) {
  BatchSolve out;
  out.assignment.placements.assign(n_agents, 0);
  out.assignment.disks.assign(n_agents, {});
  out.assignment.effective_regions.assign(n_agents, {});
  out.assignment.zero_gain.assign(n_agents, 0);
  out.width_goals.assign(n_agents, 0);
  for (size_t b = 0; b < batches.batches.size(); ++b) {
    const auto& members = batches.batches[b];
    GreedyResult g = greedy_ucb(bounds_rho.upper, bounds_rho.lower, domain,
                                static_cast<int>(members.size()), r, batches.merged_sets[b], mode);
    for (size_t k = 0; k < members.size(); ++k) {
      const int agent = members[k];
      out.assignment.placements[agent] = g.assignment.placements[k];
      out.assignment.disks[agent] = g.assignment.disks[k];
      out.assignment.effective_regions[agent] = g.assignment.effective_regions[k];
      out.assignment.zero_gain[agent] = g.assignment.zero_gain[k];
      out.width_goals[agent] = g.goals[k];
    }
    out.assignment.total_value += g.assignment.total_value;
    out.gamma += g.sum_max_width;
  }
  return out;
}

Field clamped_lower(const ConfidenceBounds& bounds_rho, bool clamp) {
  Field f = bounds_rho.lower;
  if (clamp)
    for (double& v : f) v = std::max(0.0, v);
  return f;
}

// Value of a placement vector under the worst-case density, summed over the
// pessimistic batches. Returns nullopt when some agent sits outside its
// batch's merged pessimistic set (batch mates' sets are mutually traversable).
std::optional<double> pessimistic_value(const GridDomain& domain, const std::vector<Loc>& placements,
                                        const BatchCollection& pess_batches, const Field& lower,
                                        int r, DiskMode mode) {
  double total = 0.0;
  for (size_t b = 0; b < pess_batches.batches.size(); ++b) {
    std::vector<Loc> batch_placements;
    for (int agent : pess_batches.batches[b]) {
      if (!contains(pess_batches.merged_sets[b], placements[agent])) return std::nullopt;
      batch_placements.push_back(placements[agent]);
    }
    total += make_assignment(lower, domain, batch_placements, r, pess_batches.merged_sets[b], mode)
                 .total_value;
  }
  return total;
}

struct RecommendationTracker {
  std::vector<Loc> best;
  double best_value = -std::numeric_limits<double>::infinity();

  // Considers the round's greedy output and the fresh pessimistic greedy.
  void observe(const GridDomain& domain, const SafemacConfig& cfg,
               const std::vector<Loc>& greedy_placements, const std::vector<LocList>& pess_sets,
               const Field& lower) {
    const BatchCollection pb = group_by_intersection(pess_sets);
    if (auto value = pessimistic_value(domain, greedy_placements, pb, lower, cfg.r, cfg.disk_mode);
        value && *value > best_value) {
      best_value = *value;
      best = greedy_placements;
    }
    BatchSolve pess_solve;
    {
      ConfidenceBounds lb;
      lb.lower = lower;
      lb.upper = lower;
      pess_solve = solve_batches(lb, domain, pb, static_cast<int>(pess_sets.size()), cfg.r,
                                 cfg.disk_mode);
    }
    if (auto value = pessimistic_value(domain, pess_solve.assignment.placements, pb, lower, cfg.r,
                                       cfg.disk_mode);
        value && *value > best_value) {
      best_value = *value;
      best = pess_solve.assignment.placements;
    }
  }
};

}  // namespace

CoverageAssignment recommend_intermediate(const std::vector<RoundLog>& history,
                                          const GridDomain& domain, const std::vector<Loc>& seeds,
                                          const SafemacConfig& cfg) {
  RecommendationTracker tracker;
  const RoundLog* chosen_round = nullptr;
  for (const RoundLog& log : history) {
    if (log.pess_sets.empty() || log.lower_rho.empty()) continue;
    const double before = tracker.best_value;
    tracker.observe(domain, cfg, log.placements.placements, log.pess_sets, log.lower_rho);
    if (tracker.best_value > before) chosen_round = &log;
  }
  if (tracker.best.empty() || !chosen_round) {
    LocList all_seeds(seeds.begin(), seeds.end());
    std::sort(all_seeds.begin(), all_seeds.end());
    all_seeds.erase(std::unique(all_seeds.begin(), all_seeds.end()), all_seeds.end());
    CoverageAssignment a;
    a.placements = seeds;
    for (Loc s : seeds) {
      a.disks.push_back({s});
      a.effective_regions.push_back({});
      a.zero_gain.push_back(1);
    }
    return a;
  }
  const BatchCollection pb = group_by_intersection(chosen_round->pess_sets);
  CoverageAssignment out;
  out.placements = tracker.best;
  out.disks.assign(tracker.best.size(), {});
  out.effective_regions.assign(tracker.best.size(), {});
  out.zero_gain.assign(tracker.best.size(), 0);
  for (size_t b = 0; b < pb.batches.size(); ++b) {
    std::vector<Loc> batch_placements;
    for (int agent : pb.batches[b]) batch_placements.push_back(tracker.best[agent]);
    const auto a = make_assignment(chosen_round->lower_rho, domain, batch_placements, cfg.r,
                                   pb.merged_sets[b], cfg.disk_mode);
    for (size_t k = 0; k < pb.batches[b].size(); ++k) {
      const int agent = pb.batches[b][k];
      out.disks[agent] = a.disks[k];
      out.effective_regions[agent] = a.effective_regions[k];
      out.zero_gain[agent] = a.zero_gain[k];
    }
    out.total_value += a.total_value;
  }
  return out;
}

namespace {

// Shared context for the constrained runs.
struct ConstrainedRun {
  const EnvironmentTruth& env;
  const SafemacConfig& cfg;
  GpModel gp_rho;
  GpModel gp_q;
  ConfidenceBounds bounds_rho;
  ConfidenceBounds bounds_q;
  SafeSetState state;
  std::vector<RngStream> rho_rng, q_rng;
  std::vector<LocList> true_reach_0;  // per-agent oracle, audits only
  RunResult res;
  RecommendationTracker tracker;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  ConstrainedRun(const EnvironmentTruth& env_in, const GpModel& gp_rho_in, const GpModel& gp_q_in,
                 const SafemacConfig& cfg_in, std::uint64_t rng_seed,
                 const std::optional<ConfidenceBounds>& initial_q_bounds)
      : env(env_in),
        cfg(cfg_in),
        gp_rho(gp_rho_in),
        gp_q(gp_q_in),
        bounds_rho(update_bounds(initial_bounds(env_in.domain, gp_rho_in.kernel(), cfg_in.beta_sqrt_rho),
                                 gp_rho_in, cfg_in.beta_sqrt_rho)),
        bounds_q(initial_q_bounds
                     ? *initial_q_bounds
                     : update_bounds(initial_bounds(env_in.domain, gp_q_in.kernel(), cfg_in.beta_sqrt_q),
                                     gp_q_in, cfg_in.beta_sqrt_q)),
        state(initial_safe_state(env_in.domain, env_in.seeds)) {
    cfg.validate();
    for (Loc s : env.seeds)
      if (env.constraint[s] < 0.0)
        throw EnvError(EnvError::Code::unsafe_seed, "constrained run: seed with q < 0");
    RngStream root(rng_seed, "run");
    for (int i = 0; i < state.n_agents(); ++i) {
      rho_rng.push_back(root.child("obs_rho", i));
      q_rng.push_back(root.child("obs_q", i));
      true_reach_0.push_back(
          true_reachable_set(env.constraint, env.domain, {env.seeds[i]}, 0.0, env.lipschitz_q));
    }
  }

  int n_agents() const { return state.n_agents(); }

  bool expired() const {
    if (cfg.runtime_cap_s <= 0.0) return false;
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
    return elapsed.count() > cfg.runtime_cap_s;
  }

  double measure_rho(int agent, Loc at) {
    const double y = env.density[at] + std::sqrt(env.noise_rho) * rho_rng[agent].next_normal();
    if (env.constraint[at] < 0.0) ++res.safety_violations;
    ++res.samples_rho;
    return y;
  }

  double measure_q(int agent, Loc at) {
    const double y = env.constraint[at] + std::sqrt(env.noise_q) * q_rng[agent].next_normal();
    if (env.constraint[at] < 0.0) ++res.safety_violations;
    ++res.samples_q;
    return y;
  }

  void audit_state() {
    for (int i = 0; i < n_agents(); ++i)
      if (!is_subset(state.pessimistic[i], true_reach_0[i])) ++res.sandwich_violations;
  }

  // Fills the set/recommendation fields of a closing round's log. The batch
  // partition and union sets are the ones the logged assignment was solved
  // against; the pessimistic sets are the end-of-round state feeding the
  // recommendation rule.
  void finish_log(RoundLog& log, const BatchCollection& solve_batches,
                  const std::vector<LocList>& solve_unions) {
    log.batches = solve_batches.batches;
    log.union_sets = solve_unions;
    log.pess_sets = state.pessimistic;
    for (const auto& o : state.optimistic) log.opti_sizes.push_back(static_cast<int>(o.size()));
    log.lower_rho = clamped_lower(bounds_rho, cfg.clamp_pessimistic_density);
    tracker.observe(env.domain, cfg, log.placements.placements, log.pess_sets, log.lower_rho);
    if (!tracker.best.empty()) {
      log.recommendation = tracker.best;
      log.recommendation_value = tracker.best_value;
      for (Loc p : tracker.best)
        if (env.constraint[p] < 0.0) ++res.safety_violations;
    }
    audit_state();
  }

  void finalize(const CoverageAssignment& final_assignment, bool converged, int t) {
    res.final_assignment = final_assignment;
    res.converged = converged;
    res.rounds = t;
    res.final_recommendation = tracker.best.empty() ? env.seeds : tracker.best;
  }
};

}  // namespace

RunResult safemac_run(const EnvironmentTruth& env, const GpModel& gp_rho, const GpModel& gp_q,
                      const SafemacConfig& cfg, std::uint64_t rng_seed,
                      const std::optional<ConfidenceBounds>& initial_q_bounds) {
  ConstrainedRun run(env, gp_rho, gp_q, cfg, rng_seed, initial_q_bounds);
  const GridDomain& domain = env.domain;
  const int n = run.n_agents();
  const SafetyParams safety = cfg.safety();

  BatchCollection batches_at_solve = compute_batches(run.state);
  BatchSolve solve =
      solve_batches(run.bounds_rho, domain, batches_at_solve, n, cfg.r, cfg.disk_mode);
  std::vector<LocList> unions_at_solve = run.state.unions;

  // Goals blacklisted after an infeasible expansion, per agent, cleared when
  // that agent's optimistic set changes.
  std::vector<LocList> blacklist(n);

  int t = 1;
  bool converged = false;
  constexpr Loc kIdle = -1;
  int stalled_rounds = 0;  // no observation and no set change

  while (t <= cfg.max_rounds && !run.res.timed_out) {
    if (run.expired()) {
      run.res.timed_out = true;
      break;
    }
    // A full pass with no measurement and no state change is a fixed point:
    // classification of the remaining frontier is infeasible at the current
    // accuracy, so spinning to the round cap would change nothing.
    if (stalled_rounds >= 2) break;

    // Termination: every disk fully classified and low density uncertainty.
    bool any_frontier_under_disk = false;
    for (int i = 0; i < n && !any_frontier_under_disk; ++i) {
      const LocList frontier = set_difference(run.state.optimistic[i], run.state.pessimistic[i]);
      any_frontier_under_disk = !set_intersection(frontier, solve.assignment.disks[i]).empty();
    }
    if (!any_frontier_under_disk && solve.gamma <= cfg.eps_rho) {
      converged = true;
      RoundLog log;
      log.round = t;
      log.phase = 'c';
      log.placements = solve.assignment;
      log.sum_max_width = solve.gamma;
      log.gamma_analysis = analysis_width(solve.assignment, run.gp_rho, cfg.beta_sqrt_rho,
                                          domain.size());
      run.finish_log(log, batches_at_solve, unions_at_solve);
      run.res.history.push_back(std::move(log));
      break;
    }

    // Phase goal selection.
    const bool coverage_phase = solve.gamma > cfg.eps_rho;
    std::vector<Loc> goals(n, kIdle);
    if (coverage_phase) {
      goals = solve.width_goals;
    } else {
      for (int i = 0; i < n; ++i) {
        LocList candidates = set_intersection(
            set_difference(run.state.optimistic[i], run.state.pessimistic[i]),
            solve.assignment.disks[i]);
        Loc best = kIdle;
        for (Loc v : candidates) {
          if (contains(blacklist[i], v)) continue;
          if (best == kIdle || run.bounds_q.width(v) > run.bounds_q.width(best)) best = v;
        }
        goals[i] = best;
      }
    }

    // Safe-expansion module: agents whose goal is not pessimistically safe
    // measure the constraint; afterwards both safe sets advance.
    std::vector<int> unsafe_agents;
    for (int i = 0; i < n; ++i)
      if (goals[i] != kIdle && !contains(run.state.pessimistic[i], goals[i]))
        unsafe_agents.push_back(i);
    const bool all_idle_exploration =
        !coverage_phase && std::all_of(goals.begin(), goals.end(),
                                       [&](Loc g) { return g == kIdle; });

    if (!unsafe_agents.empty() || all_idle_exploration) {
      RoundLog log;
      log.round = t;
      log.phase = coverage_phase ? 'c' : 'e';
      log.placements = solve.assignment;
      log.goals = goals;
      log.sum_max_width = solve.gamma;
      log.gamma_analysis = analysis_width(solve.assignment, run.gp_rho, cfg.beta_sqrt_rho,
                                          domain.size());
      bool measured = false;
      for (int i : unsafe_agents) {
        const auto pick = safe_expansion_step(run.state.pessimistic[i], run.state.optimistic[i],
                                              run.bounds_q, domain, {goals[i]}, safety);
        if (pick) {
          const double y = run.measure_q(i, *pick);
          log.observations.push_back({i, *pick, y, 'q'});
          run.gp_q.add_observation(*pick, y);
          run.bounds_q = update_bounds(run.bounds_q, run.gp_q, cfg.beta_sqrt_q);
          measured = true;
        } else {
          blacklist[i] = set_union(blacklist[i], {goals[i]});
        }
      }
      const std::vector<LocList> old_opti = run.state.optimistic;
      const std::vector<LocList> old_pess = run.state.pessimistic;
      run.state = update_safe_sets(run.state, run.bounds_q, domain, safety);
      for (int i = 0; i < n; ++i)
        if (run.state.optimistic[i] != old_opti[i]) blacklist[i].clear();
      if (!measured && run.state.optimistic == old_opti && run.state.pessimistic == old_pess)
        ++stalled_rounds;
      else
        stalled_rounds = 0;
      run.finish_log(log, batches_at_solve, unions_at_solve);
      run.res.history.push_back(std::move(log));
      ++t;
      if (t > cfg.max_rounds) break;
    }

    // Re-solve on union-set topology change.
    if (run.state.unions != unions_at_solve) {
      batches_at_solve = compute_batches(run.state);
      solve = solve_batches(run.bounds_rho, domain, batches_at_solve, n, cfg.r, cfg.disk_mode);
      unions_at_solve = run.state.unions;
      goals = solve.width_goals;
    }

    // Density measurements happen only when every goal is provably safe and
    // the coverage uncertainty still exceeds the threshold.
    bool all_goals_safe = true;
    for (int i = 0; i < n; ++i)
      if (goals[i] == kIdle || !contains(run.state.pessimistic[i], goals[i])) {
        all_goals_safe = false;
        break;
      }
    if (all_goals_safe && solve.gamma > cfg.eps_rho) {
      RoundLog log;
      log.round = t;
      log.phase = 'c';
      log.placements = solve.assignment;
      log.goals = goals;
      log.sum_max_width = solve.gamma;
      log.gamma_analysis = analysis_width(solve.assignment, run.gp_rho, cfg.beta_sqrt_rho,
                                          domain.size());
      std::vector<double> values(n);
      for (int i = 0; i < n; ++i) {
        values[i] = run.measure_rho(i, goals[i]);
        log.observations.push_back({i, goals[i], values[i], 'r'});
      }
      run.gp_rho.add_observations(goals, values);
      run.bounds_rho = update_bounds(run.bounds_rho, run.gp_rho, cfg.beta_sqrt_rho);
      run.finish_log(log, batches_at_solve, unions_at_solve);
      run.res.history.push_back(std::move(log));
      stalled_rounds = 0;
      ++t;
      if (t > cfg.max_rounds) break;
      solve = solve_batches(run.bounds_rho, domain, batches_at_solve, n, cfg.r, cfg.disk_mode);
      unions_at_solve = run.state.unions;
    }
  }

  run.finalize(solve.assignment, converged, t);
  return run.res;
}

RunResult passivemac_run(const EnvironmentTruth& env, const GpModel& gp_rho, const GpModel& gp_q,
                         const SafemacConfig& cfg, std::uint64_t rng_seed,
                         const std::optional<ConfidenceBounds>& initial_q_bounds) {
  ConstrainedRun run(env, gp_rho, gp_q, cfg, rng_seed, initial_q_bounds);
  const GridDomain& domain = env.domain;
  const int n = run.n_agents();
  const SafetyParams safety = cfg.safety();

  // Coverage always lives in the pessimistic sets; the optimistic machinery
  // stays untouched, so only the pessimistic expansion runs.
  auto grow_pessimistic = [&]() {
    for (int i = 0; i < n; ++i) {
      run.state.pessimistic[i] = ergodic_expand(OperatorKind::pessimistic, run.bounds_q, domain,
                                                run.state.pessimistic[i], safety);
      run.state.optimistic[i] = run.state.pessimistic[i];
      run.state.unions[i] = run.state.pessimistic[i];
    }
  };
  grow_pessimistic();

  int t = 1;
  bool converged = false;
  BatchCollection batches_at_solve = compute_batches_pessimistic(run.state);
  std::vector<LocList> sets_at_solve = run.state.pessimistic;
  BatchSolve solve =
      solve_batches(run.bounds_rho, domain, batches_at_solve, n, cfg.r, cfg.disk_mode);

  while (t <= cfg.max_rounds && !run.res.timed_out) {
    if (run.expired()) {
      run.res.timed_out = true;
      break;
    }
    RoundLog log;
    log.round = t;
    log.phase = 'c';
    log.placements = solve.assignment;
    log.sum_max_width = solve.gamma;
    log.gamma_analysis = analysis_width(solve.assignment, run.gp_rho, cfg.beta_sqrt_rho,
                                        domain.size());

    if (solve.gamma <= cfg.eps_rho) {
      run.finish_log(log, batches_at_solve, sets_at_solve);
      run.res.history.push_back(std::move(log));
      converged = true;
      break;
    }

    const std::vector<Loc> goals = solve.width_goals;
    log.goals = goals;
    std::vector<double> rho_values(n);
    for (int i = 0; i < n; ++i) {
      rho_values[i] = run.measure_rho(i, goals[i]);
      log.observations.push_back({i, goals[i], rho_values[i], 'r'});
    }
    run.gp_rho.add_observations(goals, rho_values);
    run.bounds_rho = update_bounds(run.bounds_rho, run.gp_rho, cfg.beta_sqrt_rho);

    // The passive part: a constraint sample at every density sample site.
    for (int i = 0; i < n; ++i) {
      const double y = run.measure_q(i, goals[i]);
      log.observations.push_back({i, goals[i], y, 'q'});
      run.gp_q.add_observation(goals[i], y);
    }
    run.bounds_q = update_bounds(run.bounds_q, run.gp_q, cfg.beta_sqrt_q);
    grow_pessimistic();

    run.finish_log(log, batches_at_solve, sets_at_solve);
    run.res.history.push_back(std::move(log));
    ++t;
    if (t > cfg.max_rounds) break;
    batches_at_solve = compute_batches_pessimistic(run.state);
    sets_at_solve = run.state.pessimistic;
    solve = solve_batches(run.bounds_rho, domain, batches_at_solve, n, cfg.r, cfg.disk_mode);
  }

  run.finalize(solve.assignment, converged, t);
  return run.res;
}

RunResult two_stage_run(const EnvironmentTruth& env, const GpModel& gp_rho, const GpModel& gp_q,
                        const SafemacConfig& cfg, std::uint64_t rng_seed,
                        const std::optional<ConfidenceBounds>& initial_q_bounds) {
  ConstrainedRun run(env, gp_rho, gp_q, cfg, rng_seed, initial_q_bounds);
  const GridDomain& domain = env.domain;
  const int n = run.n_agents();
  const SafetyParams safety = cfg.safety();

  int t = 1;
  BatchCollection batches_at_solve = compute_batches_pessimistic(run.state);
  std::vector<LocList> sets_at_solve = run.state.pessimistic;
  BatchSolve solve =
      solve_batches(run.bounds_rho, domain, batches_at_solve, n, cfg.r, cfg.disk_mode);

  // Stage 1: learn the constraint eps-accurately over the whole reachable
  // region. Each agent samples the widest still-uncertain pessimistically
  // safe cell; expansion happens through the ordinary set updates. The stage
  // ends when the frontier is exhausted and no eps-uncertainty remains, or
  // when nothing can make progress anymore.
  while (t <= cfg.max_rounds && !run.res.timed_out) {
    if (run.expired()) {
      run.res.timed_out = true;
      break;
    }
    bool any_frontier = false;
    bool any_uncertain = false;
    for (int i = 0; i < n; ++i) {
      any_frontier = any_frontier ||
                     !set_difference(run.state.optimistic[i], run.state.pessimistic[i]).empty();
      for (Loc v : run.state.pessimistic[i])
        if (run.bounds_q.width(v) > cfg.eps_q) {
          any_uncertain = true;
          break;
        }
    }
    if (!any_frontier && !any_uncertain) break;

    RoundLog log;
    log.round = t;
    log.phase = 'e';
    log.placements = solve.assignment;
    log.sum_max_width = solve.gamma;

    LocList picked_this_round;
    for (int i = 0; i < n; ++i) {
      Loc pick = -1;
      for (Loc v : run.state.pessimistic[i]) {
        if (run.bounds_q.width(v) <= cfg.eps_q || contains(picked_this_round, v)) continue;
        if (pick < 0 || run.bounds_q.width(v) > run.bounds_q.width(pick)) pick = v;
      }
      if (pick < 0) continue;
      const double y = run.measure_q(i, pick);
      log.observations.push_back({i, pick, y, 'q'});
      run.gp_q.add_observation(pick, y);
      run.bounds_q = update_bounds(run.bounds_q, run.gp_q, cfg.beta_sqrt_q);
      picked_this_round = set_union(picked_this_round, {pick});
    }
    const SafeSetState before = run.state;
    run.state = update_safe_sets(run.state, run.bounds_q, domain, safety);
    run.finish_log(log, batches_at_solve, sets_at_solve);
    run.res.history.push_back(std::move(log));
    ++t;
    const bool stalled = picked_this_round.empty() &&
                         run.state.pessimistic == before.pessimistic &&
                         run.state.optimistic == before.optimistic;
    if (stalled) break;  // leftover cells are not certifiable at this accuracy
  }

  // Stage 2: coverage inside the settled pessimistic sets.
  bool converged = false;
  batches_at_solve = compute_batches_pessimistic(run.state);
  sets_at_solve = run.state.pessimistic;
  solve = solve_batches(run.bounds_rho, domain, batches_at_solve, n, cfg.r, cfg.disk_mode);
  while (t <= cfg.max_rounds && !run.res.timed_out) {
    if (run.expired()) {
      run.res.timed_out = true;
      break;
    }
    RoundLog log;
    log.round = t;
    log.phase = 'c';
    log.placements = solve.assignment;
    log.sum_max_width = solve.gamma;
    log.gamma_analysis = analysis_width(solve.assignment, run.gp_rho, cfg.beta_sqrt_rho,
                                        domain.size());
    if (solve.gamma <= cfg.eps_rho) {
      run.finish_log(log, batches_at_solve, sets_at_solve);
      run.res.history.push_back(std::move(log));
      converged = true;
      break;
    }
    const std::vector<Loc> goals = solve.width_goals;
    log.goals = goals;
    std::vector<double> values(n);
    for (int i = 0; i < n; ++i) {
      values[i] = run.measure_rho(i, goals[i]);
      log.observations.push_back({i, goals[i], values[i], 'r'});
    }
    run.gp_rho.add_observations(goals, values);
    run.bounds_rho = update_bounds(run.bounds_rho, run.gp_rho, cfg.beta_sqrt_rho);
    run.finish_log(log, batches_at_solve, sets_at_solve);
    run.res.history.push_back(std::move(log));
    ++t;
    if (t > cfg.max_rounds) break;
    solve = solve_batches(run.bounds_rho, domain, batches_at_solve, n, cfg.r, cfg.disk_mode);
  }

  run.finalize(solve.assignment, converged, t);
  return run.res;
}

}  // namespace safecover
