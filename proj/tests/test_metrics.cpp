#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "safecover/metrics.hpp"
#include "safecover/safemac.hpp"

using namespace safecover;

namespace {

const KernelSpec kMatern{KernelSpec::Family::matern52, 2.0, 1.0};
constexpr double kGreedyFactor = 1.0 - 1.0 / 2.718281828459045235360287471352662498;

EnvironmentTruth gp_env(std::uint64_t seed, int w, int h, int n_agents) {
  EnvOptions opts;
  opts.n_seeds = n_agents;
  opts.seed_margin = -100.0;
  return sample_gp_environment({w, h, 0.25}, kMatern, kMatern, seed, opts);
}

// Minimal unconstrained history: one round per placement vector.
std::vector<RoundLog> history_of(const EnvironmentTruth& env,
                                 const std::vector<std::vector<Loc>>& rounds, int r) {
  LocList all(env.domain.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<RoundLog> history;
  int t = 1;
  for (const auto& placements : rounds) {
    RoundLog log;
    log.round = t++;
    log.placements = make_assignment(env.density, env.domain, placements, r, all);
    history.push_back(std::move(log));
  }
  return history;
}

}  // namespace

TEST_CASE("unconstrained regret: optimal play yields negative regret") {
  const auto env = gp_env(1, 6, 6, 2);
  LocList all(env.domain.size());
  std::iota(all.begin(), all.end(), 0);
  const auto opt = brute_force_optimal(env.density, env.domain, 2, 1, all);

  const auto records =
      unconstrained_regret(history_of(env, {opt.placements, opt.placements}, 1), env, opt, 1);
  REQUIRE(records.size() == 2);
  for (const auto& rec : records) {
    // (1 - 1/e) F(X*) - F(X*) = -F(X*)/e < 0 is allowed by the definition.
    CHECK(rec.simple_actual == doctest::Approx(-opt.total_value / 2.718281828459045)
                                   .epsilon(1e-9));
    CHECK(rec.per_agent >= -1e-12);
  }
  CHECK(records[1].cum_actual == doctest::Approx(records[0].simple_actual * 2).epsilon(1e-12));
}

TEST_CASE("unconstrained regret: zero density gives zero regret") {
  auto env = gp_env(2, 5, 5, 1);
  std::fill(env.density.begin(), env.density.end(), 0.0);
  LocList all(env.domain.size());
  std::iota(all.begin(), all.end(), 0);
  const auto opt = brute_force_optimal(env.density, env.domain, 1, 1, all);
  const auto records = unconstrained_regret(history_of(env, {{3}, {7}}, 1), env, opt, 1);
  for (const auto& rec : records) {
    CHECK(rec.simple_actual == 0.0);
    CHECK(rec.per_agent == 0.0);
    CHECK(rec.coverage_true == 0.0);
  }
}

TEST_CASE("regret records match a hand prefix-summed oracle") {
  const auto env = gp_env(3, 7, 7, 2);
  LocList all(env.domain.size());
  std::iota(all.begin(), all.end(), 0);
  const auto opt = brute_force_optimal(env.density, env.domain, 2, 1, all);

  RngStream rng(5, "hist");
  std::vector<std::vector<Loc>> rounds;
  for (int t = 0; t < 6; ++t)
    rounds.push_back({static_cast<Loc>(rng.next_below(env.domain.size())),
                      static_cast<Loc>(rng.next_below(env.domain.size()))});
  const auto records = unconstrained_regret(history_of(env, rounds, 1), env, opt, 1);

  double cum = 0.0;
  for (size_t t = 0; t < rounds.size(); ++t) {
    const double achieved = coverage_value(env.density, env.domain, rounds[t], 1, all);
    const double expected = kGreedyFactor * opt.total_value - achieved;
    CHECK(records[t].simple_actual == doctest::Approx(expected).epsilon(1e-12));
    CHECK(records[t].coverage_true == doctest::Approx(achieved).epsilon(1e-12));
    cum += expected;
    CHECK(records[t].cum_actual == doctest::Approx(cum).epsilon(1e-12));
    // Re-running the accounting gives identical records.
    const auto again = unconstrained_regret(history_of(env, rounds, 1), env, opt, 1);
    CHECK(again[t].simple_actual == records[t].simple_actual);
  }
}

TEST_CASE("per-agent regret upper-bounds actual regret per round") {
  const auto env = gp_env(7, 8, 8, 3);
  LocList all(env.domain.size());
  std::iota(all.begin(), all.end(), 0);
  const auto opt = brute_force_optimal(env.density, env.domain, 3, 1, all);

  RngStream rng(9, "bound");
  std::vector<std::vector<Loc>> rounds;
  for (int t = 0; t < 10; ++t)
    rounds.push_back({static_cast<Loc>(rng.next_below(env.domain.size())),
                      static_cast<Loc>(rng.next_below(env.domain.size())),
                      static_cast<Loc>(rng.next_below(env.domain.size()))});
  const auto records = unconstrained_regret(history_of(env, rounds, 1), env, opt, 1);
  for (const auto& rec : records) CHECK(rec.simple_actual <= rec.per_agent + 1e-9);
}

TEST_CASE("constrained regret on a fully safe environment matches unconstrained") {
  auto env = gp_env(11, 6, 6, 2);
  std::fill(env.constraint.begin(), env.constraint.end(), 100.0);
  env.lipschitz_q = 1.0;
  LocList all(env.domain.size());
  std::iota(all.begin(), all.end(), 0);

  const auto oracle = reachable_oracle(env, 0.0, 1);
  REQUIRE(oracle.batches.size() == 1);
  CHECK(oracle.regions[0] == all);

  // History with full-domain union sets and a single batch.
  RngStream rng(13, "const-hist");
  std::vector<RoundLog> history;
  for (int t = 0; t < 5; ++t) {
    RoundLog log;
    log.round = t + 1;
    std::vector<Loc> placements{static_cast<Loc>(rng.next_below(env.domain.size())),
                                static_cast<Loc>(rng.next_below(env.domain.size()))};
    log.placements = make_assignment(env.density, env.domain, placements, 1, all);
    log.batches = {{0, 1}};
    log.union_sets = {all, all};
    history.push_back(std::move(log));
  }

  const auto constrained = constrained_regret(history, env, oracle, 1);
  const auto unconstrained =
      unconstrained_regret(history, env,
                           brute_force_optimal(env.density, env.domain, 2, 1, all), 1);
  for (size_t t = 0; t < history.size(); ++t) {
    CHECK(constrained[t].simple_actual ==
          doctest::Approx(unconstrained[t].simple_actual).epsilon(1e-12));
    CHECK(constrained[t].simple_actual <= constrained[t].per_agent + 1e-9);
  }
}

TEST_CASE("constrained regret is additive across disconnected pockets") {
  // Two safe pockets separated by an unsafe band; one agent each.
  const GridDomain d{9, 4, 1.0};
  EnvironmentTruth env;
  env.domain = d;
  env.density.assign(d.size(), 0.0);
  env.constraint.assign(d.size(), -0.5);
  RngStream rng(17, "pockets");
  for (int row = 0; row < 4; ++row) {
    for (int col = 0; col < 3; ++col) {
      env.density[d.at(row, col)] = rng.next_double();
      env.density[d.at(row, col + 6)] = rng.next_double();
      env.constraint[d.at(row, col)] = 1.5;
      env.constraint[d.at(row, col + 6)] = 1.5;
    }
  }
  env.seeds = {d.at(1, 1), d.at(1, 7)};
  env.noise_rho = env.noise_q = 1e-3;
  env.lipschitz_q = 1.1 * empirical_lipschitz(d, env.constraint);

  const auto oracle = reachable_oracle(env, 0.0, 1);
  REQUIRE(oracle.batches.size() == 2);

  // The joint benchmark decomposes into the two pocket benchmarks.
  double separate = 0.0;
  for (size_t b = 0; b < oracle.batches.size(); ++b)
    separate +=
        brute_force_optimal(env.density, d, 1, 1, oracle.regions[b]).total_value;
  CHECK(oracle.benchmark_value == doctest::Approx(separate).epsilon(1e-12));

  RoundLog log;
  log.round = 1;
  log.batches = {{0}, {1}};
  log.union_sets = {oracle.regions[0], oracle.regions[1]};
  std::vector<Loc> placements{env.seeds[0], env.seeds[1]};
  log.placements.placements = placements;
  const auto records = constrained_regret({log}, env, oracle, 1);

  const double left = marginal_gain(env.density, d, {}, env.seeds[0], 1, oracle.regions[0]);
  const double right = marginal_gain(env.density, d, {}, env.seeds[1], 1, oracle.regions[1]);
  CHECK(records[0].simple_actual ==
        doctest::Approx(kGreedyFactor * oracle.benchmark_value - left - right).epsilon(1e-12));
}

TEST_CASE("oracle batch partition is validated") {
  const auto env = gp_env(19, 5, 5, 2);
  ReachableOracle bad;
  bad.batches = {{0}, {0}};  // duplicates agent 0, misses agent 1
  bad.regions = {{0}, {1}};
  RoundLog log;
  log.round = 1;
  log.batches = {{0, 1}};
  LocList all(env.domain.size());
  std::iota(all.begin(), all.end(), 0);
  log.union_sets = {all, all};
  log.placements.placements = {0, 1};
  CHECK_THROWS_AS(constrained_regret({log}, env, bad, 1), std::invalid_argument);
}

TEST_CASE("safemac convergence regret is below eps on an enumerable instance") {
  EnvOptions opts;
  opts.n_seeds = 2;
  opts.seed_margin = 0.05;
  const EnvironmentTruth env =
      sample_obstacle_environment({8, 8, 0.1}, {}, kMatern, 5, opts);
  SafemacConfig cfg;
  cfg.r = 2;
  cfg.eps_rho = 0.05;
  cfg.eps_q = 0.1;
  cfg.lipschitz = env.lipschitz_q;
  const GpModel gp_rho(env.domain, kMatern, 1e-3);
  const GpModel gp_q(env.domain, kMatern, 1e-3);
  const auto res = safemac_run(env, gp_rho, gp_q, cfg, 1);
  REQUIRE(res.converged);

  const auto oracle = reachable_oracle(env, cfg.eps_q, cfg.r);
  const auto records = constrained_regret(res.history, env, oracle, cfg.r);
  CHECK(records.back().simple_actual <= cfg.eps_rho + 1e-9);
}
