#pragma once

#include <string>
#include <vector>

#include "safecover/coverage.hpp"
#include "safecover/gp.hpp"
#include "safecover/grid.hpp"
#include "safecover/rng.hpp"

namespace safecover {

// Ground-truth density/constraint pair; consumed only by the simulator
// oracle and the metrics, never by the learners.
struct EnvironmentTruth {
  GridDomain domain;
  Field density;            // rho >= 0
  Field constraint;         // q, safety means q >= 0
  std::vector<Loc> seeds;   // X_0, one per agent, q(seed) >= 0
  double noise_rho = 1e-3;  // observation noise variances
  double noise_q = 1e-3;
  double lipschitz_q = 0.0;  // empirical bound x 1.1, or value from file
};

struct ObstacleSpec {
  struct Rect {
    double x0, y0, x1, y1;  // bottom-left / top-right, length-units
  };
  std::vector<Rect> blocks;
};

class EnvError : public std::runtime_error {
 public:
  enum class Code { shape_mismatch, non_finite, unsafe_seed, negative_density, no_safe_seed };
  EnvError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }
  const char* code_name() const;

 private:
  Code code_;
};

struct EnvOptions {
  int n_seeds = 3;
  double seed_margin = 0.2;  // q(seed) >= margin at sampling time
  double noise_rho = 1e-3;
  double noise_q = 1e-3;
  bool clamp_density = false;  // clamp at 0 instead of shifting by -min
};

// Exact multivariate-normal draws of rho and q from the kernel priors; rho is
// shifted (or clamped) non-negative and seeds are drawn uniformly among cells
// with q >= margin. Re-draws up to 100 times before giving up.
EnvironmentTruth sample_gp_environment(const GridDomain& domain, const KernelSpec& kernel_rho,
                                       const KernelSpec& kernel_q, std::uint64_t rng_seed,
                                       const EnvOptions& opts = {});

// Sigmoid-of-distance constraint around axis-aligned blocks: q' maps the
// distance to the nearest obstacle through 1/(1+exp(-1.5 d)), q = q' - 0.5,
// and obstacle-interior cells get an extra -1e-6 so collisions are strictly
// unsafe. Density is GP-sampled as in the synthetic environment.
EnvironmentTruth obstacle_environment(const GridDomain& domain, const ObstacleSpec& spec,
                                      const KernelSpec& kernel_rho, std::uint64_t rng_seed,
                                      const EnvOptions& opts = {});

struct ObstacleGenOptions {
  int count_min = 3;
  int count_max = 6;
  double size_min_frac = 0.10;  // block side as a fraction of the domain extent
  double size_max_frac = 0.35;
};

ObstacleSpec sample_obstacles(const GridDomain& domain, RngStream& rng,
                              const ObstacleGenOptions& opts = {});

// Obstacle layout plus environment in one draw; layouts without an eligible
// seed cell are re-drawn (up to 100 attempts).
EnvironmentTruth sample_obstacle_environment(const GridDomain& domain,
                                             const ObstacleGenOptions& gen_opts,
                                             const KernelSpec& kernel_rho, std::uint64_t rng_seed,
                                             const EnvOptions& opts = {});

// Exact Euclidean distance from a point to the nearest block (0 inside).
double obstacle_distance(const ObstacleSpec& spec, double x, double y);

// Largest edge gradient max |f(v)-f(w)| / d(v,w) over the adjacency.
double empirical_lipschitz(const GridDomain& domain, const Field& field);

// CSV grid (height rows x width comma-separated columns, round-trip exact)
// per field plus a JSON sidecar with spacing, seeds as [row, col] pairs,
// noise levels and the Lipschitz constant. Paths are <prefix>.density.csv,
// <prefix>.constraint.csv, <prefix>.meta.json.
void save_environment(const EnvironmentTruth& env, const std::string& prefix);
EnvironmentTruth load_environment(const std::string& density_path,
                                  const std::string& constraint_path,
                                  const std::string& meta_path, bool clamp_density = false);
EnvironmentTruth load_environment_prefix(const std::string& prefix, bool clamp_density = false);

// Draws from the zero-mean prior of a fixed (domain, kernel) pair; the
// factorization is done once and shared across samples.
class GpPriorSampler {
 public:
  GpPriorSampler(const GridDomain& domain, const KernelSpec& kernel);
  Field sample(RngStream& rng) const;

 private:
  Eigen::MatrixXd factor_;
  int size_ = 0;
};

}  // namespace safecover
