#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "safecover/exec.hpp"
#include "safecover/grid.hpp"

namespace safecover {

struct KernelSpec {
  enum class Family { matern52, rbf };
  Family family = Family::matern52;
  double lengthscale = 1.0;    // length-units
  double output_scale = 1.0;   // function-units^2

  void validate() const {
    if (!(lengthscale > 0.0) || !(output_scale > 0.0))
      throw std::invalid_argument("KernelSpec: lengthscale and output_scale must be > 0");
  }
};

double kernel_value(const KernelSpec& spec, double dist);

// Gram matrix on a location set, parallel/serial variants. Entries are
// independent, so both produce identical bits.
Eigen::MatrixXd kernel_matrix_serial(const GridDomain& domain, const KernelSpec& spec,
                                     const LocList& locs);
Eigen::MatrixXd kernel_matrix_parallel(const GridDomain& domain, const KernelSpec& spec,
                                       const LocList& locs);
Eigen::MatrixXd kernel_matrix(const GridDomain& domain, const KernelSpec& spec,
                              const LocList& locs, Exec mode = default_exec());

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Lower Cholesky factor with an escalating diagonal jitter (1e-10 to 1e-6,
// x10 per retry); throws NumericalError with diagnostics when exhausted.
Eigen::MatrixXd cholesky_with_jitter(Eigen::MatrixXd m, const char* what);

// Exact GP posterior over the grid. Observations are appended to a growing
// Cholesky factor of (K + sigma^2 I); the posterior mean and variance at
// every grid cell are kept current incrementally, so full-domain queries are
// O(1) reads and an m-observation update costs O(m n |V|).
class GpModel {
 public:
  GpModel(const GridDomain& domain, KernelSpec kernel, double noise_var);

  void add_observation(Loc at, double value);
  void add_observations(std::span<const Loc> at, std::span<const double> values);
  GpModel with_observation(Loc at, double value) const;

  // Posterior mean and marginal variance at the query locations.
  void posterior(const LocList& query, std::vector<double>& means,
                 std::vector<double>& variances) const;

  const std::vector<double>& means() const { return mean_all_; }
  const std::vector<double>& variances() const { return var_all_; }
  double stddev(Loc v) const;

  int n_obs() const { return n_; }
  const std::vector<Loc>& obs_locations() const { return obs_locs_; }
  const std::vector<double>& obs_values() const { return obs_vals_; }
  const GridDomain& domain() const { return domain_; }
  const KernelSpec& kernel() const { return kernel_; }
  double noise_var() const { return noise_var_; }

  // Rebuilds the factor and caches from scratch (one dense factorization).
  void refit();

  // Relative Frobenius residual ||L L^T - (K + sigma^2 I)||_F / ||.||_F.
  double factor_residual() const;

 private:
  void append_block(std::span<const Loc> at, std::span<const double> values);
  void ensure_capacity(int rows);

  GridDomain domain_;
  KernelSpec kernel_;
  double noise_var_ = 1e-3;

  int n_ = 0;  // observations in use; matrices below may have spare capacity
  std::vector<Loc> obs_locs_;
  std::vector<double> obs_vals_;
  Eigen::MatrixXd factor_;   // lower-triangular L, top-left n x n in use
  Eigen::VectorXd white_;    // c = L^{-1} y, first n in use
  Eigen::MatrixXd cross_;    // W = L^{-1} K(obs, V), top n rows in use
  std::vector<double> mean_all_;  // W^T c
  std::vector<double> var_all_;   // k(v,v) - sum_i W(i,v)^2
};

// Running intersection of per-round confidence intervals. Lower bounds only
// grow and upper bounds only shrink.
struct ConfidenceBounds {
  std::vector<double> lower;
  std::vector<double> upper;
  double beta_sqrt = 3.0;
  long clamp_count = 0;  // times l > u had to be reconciled (expected 0)

  double width(Loc v) const { return upper[v] - lower[v]; }
};

// Wide sentinel box around the prior; the first real update dominates it.
ConfidenceBounds initial_bounds(const GridDomain& domain, const KernelSpec& kernel,
                                double beta_sqrt);

// Elementwise l = max(l, mu - b*sigma), u = min(u, mu + b*sigma).
ConfidenceBounds update_bounds(const ConfidenceBounds& bounds, const GpModel& model,
                               double beta_sqrt);

}  // namespace safecover
