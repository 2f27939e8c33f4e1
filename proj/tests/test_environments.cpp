#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "safecover/environments.hpp"

using namespace safecover;

namespace {

const KernelSpec kMatern2{KernelSpec::Family::matern52, 2.0, 1.0};

std::filesystem::path temp_prefix(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / "safecover_env_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("gp environment sampling is deterministic per seed") {
  const GridDomain d{12, 12, 0.1};
  EnvOptions opts;
  opts.n_seeds = 2;
  const auto a = sample_gp_environment(d, kMatern2, kMatern2, 7, opts);
  const auto b = sample_gp_environment(d, kMatern2, kMatern2, 7, opts);
  CHECK(a.density == b.density);
  CHECK(a.constraint == b.constraint);
  CHECK(a.seeds == b.seeds);
  const auto c = sample_gp_environment(d, kMatern2, kMatern2, 8, opts);
  CHECK(a.density != c.density);
}

TEST_CASE("gp environment invariants: nonneg density, safe seeds, lipschitz bound") {
  const GridDomain d{15, 15, 0.1};
  EnvOptions opts;
  opts.n_seeds = 3;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto env = sample_gp_environment(d, kMatern2, kMatern2, seed, opts);
    for (double rho : env.density) CHECK(rho >= 0.0);
    for (double q : env.constraint) CHECK(std::isfinite(q));
    for (Loc s : env.seeds) CHECK(env.constraint[s] >= opts.seed_margin);
    CHECK(env.lipschitz_q >= empirical_lipschitz(d, env.constraint));
  }
}

TEST_CASE("sampled fields reproduce the prior covariance at two cells") {
  const GridDomain d{8, 8, 0.25};
  const KernelSpec spec{KernelSpec::Family::matern52, 1.0, 1.0};
  const GpPriorSampler sampler(d, spec);
  const Loc a = d.at(2, 2), b = d.at(5, 4);

  const int n = 500;
  double sum_a = 0, sum_b = 0, sum_ab = 0, sum_aa = 0, sum_bb = 0;
  RngStream rng(99, "cov-mc");
  for (int i = 0; i < n; ++i) {
    const Field f = sampler.sample(rng);
    sum_a += f[a];
    sum_b += f[b];
    sum_ab += f[a] * f[b];
    sum_aa += f[a] * f[a];
    sum_bb += f[b] * f[b];
  }
  const double mean_a = sum_a / n, mean_b = sum_b / n;
  const double cov = sum_ab / n - mean_a * mean_b;
  const double var_a = sum_aa / n - mean_a * mean_a;
  const double var_b = sum_bb / n - mean_b * mean_b;
  const double expected = kernel_value(spec, d.distance(a, b));
  // Standard error of a Gaussian covariance estimate.
  const double se = std::sqrt((var_a * var_b + cov * cov) / n);
  CHECK(std::abs(cov - expected) <= 3.0 * se);
  CHECK(std::abs(var_a - 1.0) <= 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("30x30 lengthscale-2 fields are smooth: empirical L_q below 3") {
  const GridDomain d{30, 30, 0.1};
  EnvOptions opts;
  opts.n_seeds = 1;
  int smooth = 0;
  const int n_seeds = 40;
  for (std::uint64_t seed = 0; seed < n_seeds; ++seed) {
    const auto env = sample_gp_environment(d, kMatern2, kMatern2, seed, opts);
    if (empirical_lipschitz(d, env.constraint) < 3.0) ++smooth;
  }
  CHECK(smooth >= static_cast<int>(0.95 * n_seeds));
}

TEST_CASE("obstacle constraint follows the sigmoid-of-distance formula") {
  const GridDomain d{20, 20, 0.1};
  ObstacleSpec spec;
  spec.blocks.push_back({0.5, 0.5, 0.9, 0.9});
  EnvOptions opts;
  opts.n_seeds = 1;
  opts.seed_margin = 0.1;
  const auto env = obstacle_environment(d, spec, kMatern2, 3, opts);

  // Interior cell: formula value 0 minus the strict-unsafety offset.
  const Loc inside = d.at(7, 7);  // (0.7, 0.7)
  CHECK(obstacle_distance(spec, d.x(inside), d.y(inside)) == 0.0);
  CHECK(env.constraint[inside] == doctest::Approx(-1e-6).epsilon(1e-9));

  // One length-unit away: q = 1/(1+exp(-1.5)) - 0.5.
  const Loc far = d.at(7, 19);  // (1.9, 0.7) -> distance 1.0 from x1=0.9
  CHECK(obstacle_distance(spec, d.x(far), d.y(far)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(env.constraint[far] == doctest::Approx(0.31757447619364365).epsilon(1e-9));

  // Saturation toward 0.5 far away from every block.
  ObstacleSpec tiny;
  tiny.blocks.push_back({0.0, 0.0, 0.05, 0.05});
  const GridDomain wide{40, 40, 0.5};
  const auto far_env = obstacle_environment(wide, tiny, kMatern2, 3, opts);
  CHECK(far_env.constraint[wide.at(39, 39)] == doctest::Approx(0.5).epsilon(1e-9));

  // Strictly positive off the blocks.
  for (Loc v = 0; v < d.size(); ++v)
    if (obstacle_distance(spec, d.x(v), d.y(v)) > 0.0) CHECK(env.constraint[v] > 0.0);
}

TEST_CASE("point-to-rectangle distance cases") {
  ObstacleSpec spec;
  spec.blocks.push_back({1.0, 1.0, 2.0, 3.0});
  CHECK(obstacle_distance(spec, 1.5, 2.0) == 0.0);                       // inside
  CHECK(obstacle_distance(spec, 2.0, 2.0) == 0.0);                       // on the edge
  CHECK(obstacle_distance(spec, 3.0, 2.0) == doctest::Approx(1.0));      // right of it
  CHECK(obstacle_distance(spec, 0.0, 0.0) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));                 // corner diagonal
}

TEST_CASE("all cells blocked is an error") {
  const GridDomain d{4, 4, 1.0};
  ObstacleSpec spec;
  spec.blocks.push_back({-1.0, -1.0, 10.0, 10.0});
  CHECK_THROWS_AS(obstacle_environment(d, spec, kMatern2, 1, {}), EnvError);
}

TEST_CASE("sampled obstacles stay inside the domain") {
  const GridDomain d{30, 30, 0.1};
  RngStream rng(5, "obst");
  for (int rep = 0; rep < 20; ++rep) {
    const auto spec = sample_obstacles(d, rng);
    for (const auto& b : spec.blocks) {
      CHECK(b.x0 >= 0.0);
      CHECK(b.y0 >= 0.0);
      CHECK(b.x1 <= (d.width - 1) * d.spacing);
      CHECK(b.y1 <= (d.height - 1) * d.spacing);
      CHECK(b.x0 <= b.x1);
      CHECK(b.y0 <= b.y1);
    }
  }
}

TEST_CASE("save then load reproduces the environment exactly") {
  const GridDomain d{9, 7, 0.1};
  EnvOptions opts;
  opts.n_seeds = 2;
  const auto env = sample_gp_environment(d, kMatern2, kMatern2, 21, opts);
  const auto prefix = temp_prefix("roundtrip");
  save_environment(env, prefix.string());
  const auto loaded = load_environment_prefix(prefix.string());

  CHECK(loaded.domain.width == env.domain.width);
  CHECK(loaded.domain.height == env.domain.height);
  CHECK(loaded.domain.spacing == env.domain.spacing);
  CHECK(loaded.density == env.density);
  CHECK(loaded.constraint == env.constraint);
  CHECK(loaded.seeds == env.seeds);
  CHECK(loaded.noise_rho == env.noise_rho);
  CHECK(loaded.noise_q == env.noise_q);
  CHECK(loaded.lipschitz_q == env.lipschitz_q);
}

TEST_CASE("a 34x34 grid loads with 1156 locations") {
  const GridDomain d{34, 34, 0.1};
  EnvOptions opts;
  opts.n_seeds = 3;
  const auto env = sample_gp_environment(d, kMatern2, kMatern2, 4, opts);
  const auto prefix = temp_prefix("grid34");
  save_environment(env, prefix.string());
  const auto loaded = load_environment_prefix(prefix.string());
  CHECK(loaded.domain.size() == 1156);
}

TEST_CASE("loader rejects bad files with distinct error codes") {
  const GridDomain d{5, 5, 0.2};
  EnvOptions opts;
  opts.n_seeds = 1;
  auto env = sample_gp_environment(d, kMatern2, kMatern2, 9, opts);
  const auto prefix = temp_prefix("errors");
  save_environment(env, prefix.string());
  const std::string density = prefix.string() + ".density.csv";
  const std::string constraint = prefix.string() + ".constraint.csv";
  const std::string meta = prefix.string() + ".meta.json";

  {
    // Truncate a row: shape mismatch.
    const auto other = temp_prefix("errors_shape");
    save_environment(env, other.string());
    std::ofstream out(other.string() + ".density.csv", std::ios::trunc);
    out << "1,2,3\n";
    out.close();
    try {
      load_environment(other.string() + ".density.csv", constraint, meta);
      FAIL("expected shape_mismatch");
    } catch (const EnvError& e) {
      CHECK(e.code() == EnvError::Code::shape_mismatch);
    }
  }

  {
    // Non-finite cell.
    const auto other = temp_prefix("errors_nan");
    save_environment(env, other.string());
    std::ofstream out(other.string() + ".density.csv", std::ios::trunc);
    for (int row = 0; row < 5; ++row) out << "1,2,nan,4,5\n";
    out.close();
    try {
      load_environment(other.string() + ".density.csv", constraint, meta);
      FAIL("expected non_finite");
    } catch (const EnvError& e) {
      CHECK(e.code() == EnvError::Code::non_finite);
    }
  }

  {
    // A seed with q < 0.
    auto bad = env;
    for (double& q : bad.constraint) q = -1.0;
    const auto other = temp_prefix("errors_seed");
    save_environment(bad, other.string());
    try {
      load_environment_prefix(other.string());
      FAIL("expected unsafe_seed");
    } catch (const EnvError& e) {
      CHECK(e.code() == EnvError::Code::unsafe_seed);
    }
  }

  {
    // Negative density without the clamp option.
    auto bad = env;
    bad.density[3] = -0.25;
    const auto other = temp_prefix("errors_neg");
    save_environment(bad, other.string());
    try {
      load_environment_prefix(other.string());
      FAIL("expected negative_density");
    } catch (const EnvError& e) {
      CHECK(e.code() == EnvError::Code::negative_density);
    }
    const auto clamped = load_environment_prefix(other.string(), true);
    CHECK(clamped.density[3] == 0.0);
  }
}
