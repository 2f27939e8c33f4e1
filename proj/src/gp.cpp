#include "safecover/gp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace safecover {

double kernel_value(const KernelSpec& spec, double dist) {
  const double d = dist / spec.lengthscale;
  switch (spec.family) {
    case KernelSpec::Family::matern52: {
      const double s = 2.2360679774997896964091736687747 * d;  // sqrt(5) d / l
      return spec.output_scale * (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
    case KernelSpec::Family::rbf:
      return spec.output_scale * std::exp(-0.5 * d * d);
  }
  return 0.0;
}

Eigen::MatrixXd kernel_matrix_serial(const GridDomain& domain, const KernelSpec& spec,
                                     const LocList& locs) {
  const int n = static_cast<int>(locs.size());
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      k(i, j) = kernel_value(spec, domain.distance(locs[i], locs[j]));
  return k;
}

Eigen::MatrixXd kernel_matrix_parallel(const GridDomain& domain, const KernelSpec& spec,
                                       const LocList& locs) {
  const int n = static_cast<int>(locs.size());
  Eigen::MatrixXd k(n, n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      k(i, j) = kernel_value(spec, domain.distance(locs[i], locs[j]));
  return k;
}

Eigen::MatrixXd kernel_matrix(const GridDomain& domain, const KernelSpec& spec,
                              const LocList& locs, Exec mode) {
  return mode == Exec::parallel ? kernel_matrix_parallel(domain, spec, locs)
                                : kernel_matrix_serial(domain, spec, locs);
}

namespace {
constexpr double kJitterStart = 1e-10;
constexpr double kJitterStop = 1e-6;
}  // namespace

Eigen::MatrixXd cholesky_with_jitter(Eigen::MatrixXd m, const char* what) {
  for (double jitter = 0.0;;) {
    Eigen::MatrixXd attempt = m;
    if (jitter > 0.0) attempt.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(attempt);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    if (jitter == 0.0) {
      jitter = kJitterStart;
    } else if (jitter < kJitterStop) {
      jitter *= 10.0;
    } else {
      std::ostringstream msg;
      msg << what << ": factorization failed after jitter ladder up to " << kJitterStop
          << " (dim " << m.rows() << ", min diag " << m.diagonal().minCoeff()
          << ", max |entry| " << m.cwiseAbs().maxCoeff() << ")";
      throw NumericalError(msg.str());
    }
  }
}

GpModel::GpModel(const GridDomain& domain, KernelSpec kernel, double noise_var)
    : domain_(domain), kernel_(kernel), noise_var_(noise_var) {
  kernel_.validate();
  if (!(noise_var_ > 0.0)) throw std::invalid_argument("GpModel: noise variance must be > 0");
  const double prior = kernel_value(kernel_, 0.0);
  mean_all_.assign(domain_.size(), 0.0);
  var_all_.assign(domain_.size(), prior);
}

void GpModel::ensure_capacity(int rows) {
  if (factor_.rows() >= rows) return;
  int cap = std::max<int>(16, static_cast<int>(factor_.rows()));
  while (cap < rows) cap *= 2;
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(cap, cap);
  f.topLeftCorner(n_, n_) = factor_.topLeftCorner(n_, n_);
  factor_.swap(f);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(cap);
  w.head(n_) = white_.head(n_);
  white_.swap(w);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(cap, domain_.size());
  c.topRows(n_) = cross_.topRows(n_);
  cross_.swap(c);
}

void GpModel::add_observation(Loc at, double value) {
  add_observations(std::span<const Loc>(&at, 1), std::span<const double>(&value, 1));
}

GpModel GpModel::with_observation(Loc at, double value) const {
  GpModel copy = *this;
  copy.add_observation(at, value);
  return copy;
}

void GpModel::add_observations(std::span<const Loc> at, std::span<const double> values) {
  if (at.size() != values.size())
    throw std::invalid_argument("add_observations: location/value size mismatch");
  if (at.empty()) return;
  for (size_t i = 0; i < at.size(); ++i) {
    if (!domain_.valid(at[i]))
      throw std::invalid_argument("add_observations: location out of domain");
    if (!std::isfinite(values[i]))
      throw std::invalid_argument("add_observations: non-finite observation value");
  }
  append_block(at, values);
}

void GpModel::append_block(std::span<const Loc> at, std::span<const double> values) {
  const int m = static_cast<int>(at.size());
  const int n = n_;
  const int vcount = domain_.size();
  ensure_capacity(n + m);

  // B = L^{-1} K(old, new): already available as columns of the cross cache.
  Eigen::MatrixXd b(n, m);
  for (int j = 0; j < m; ++j) b.col(j) = cross_.col(at[j]).head(n);

  LocList new_locs(at.begin(), at.end());
  Eigen::MatrixXd k_new = kernel_matrix(domain_, kernel_, new_locs);
  k_new.diagonal().array() += noise_var_;
  const Eigen::MatrixXd schur = k_new - b.transpose() * b;
  const Eigen::MatrixXd ls = cholesky_with_jitter(schur, "GpModel::add_observations");

  factor_.block(n, 0, m, n) = b.transpose();
  factor_.block(n, n, m, m) = ls;

  // c_s = L_s^{-1} (y_new - B^T c)
  Eigen::VectorXd y(m);
  for (int j = 0; j < m; ++j) y(j) = values[j];
  Eigen::VectorXd rhs = y - b.transpose() * white_.head(n);
  ls.triangularView<Eigen::Lower>().solveInPlace(rhs);
  white_.segment(n, m) = rhs;

  // New cross rows W_s = L_s^{-1} (K(new, V) - B^T W), one grid column at a
  // time; the mean/variance caches update from the same column.
  auto col_update = [&](int v) {
    Eigen::VectorXd t(m);
    for (int j = 0; j < m; ++j)
      t(j) = kernel_value(kernel_, domain_.distance(at[j], static_cast<Loc>(v)));
    if (n > 0) t.noalias() -= b.transpose() * cross_.col(v).head(n);
    ls.triangularView<Eigen::Lower>().solveInPlace(t);
    cross_.col(v).segment(n, m) = t;
    mean_all_[v] += t.dot(rhs);
    var_all_[v] = std::max(0.0, var_all_[v] - t.squaredNorm());
  };
  if (default_exec() == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int v = 0; v < vcount; ++v) col_update(v);
  } else {
    for (int v = 0; v < vcount; ++v) col_update(v);
  }

  n_ += m;
  obs_locs_.insert(obs_locs_.end(), at.begin(), at.end());
  obs_vals_.insert(obs_vals_.end(), values.begin(), values.end());
}

void GpModel::posterior(const LocList& query, std::vector<double>& means,
                        std::vector<double>& variances) const {
  means.resize(query.size());
  variances.resize(query.size());
  for (size_t i = 0; i < query.size(); ++i) {
    if (!domain_.valid(query[i])) throw std::invalid_argument("posterior: query out of domain");
    means[i] = mean_all_[query[i]];
    variances[i] = var_all_[query[i]];
  }
}

double GpModel::stddev(Loc v) const { return std::sqrt(var_all_[v]); }

void GpModel::refit() {
  std::vector<Loc> locs = std::move(obs_locs_);
  std::vector<double> vals = std::move(obs_vals_);
  const double prior = kernel_value(kernel_, 0.0);
  n_ = 0;
  obs_locs_.clear();
  obs_vals_.clear();
  factor_.resize(0, 0);
  white_.resize(0);
  cross_.resize(0, 0);
  std::fill(mean_all_.begin(), mean_all_.end(), 0.0);
  std::fill(var_all_.begin(), var_all_.end(), prior);
  if (!locs.empty()) add_observations(locs, vals);
}

double GpModel::factor_residual() const {
  if (n_ == 0) return 0.0;
  LocList locs(obs_locs_.begin(), obs_locs_.end());
  Eigen::MatrixXd k = kernel_matrix(domain_, kernel_, locs);
  k.diagonal().array() += noise_var_;
  const auto l = factor_.topLeftCorner(n_, n_);
  const Eigen::MatrixXd rebuilt = l * l.transpose();
  return (rebuilt - k).norm() / k.norm();
}

ConfidenceBounds initial_bounds(const GridDomain& domain, const KernelSpec& kernel,
                                double beta_sqrt) {
  ConfidenceBounds b;
  b.beta_sqrt = beta_sqrt;
  const double sentinel = 10.0 * beta_sqrt * std::sqrt(kernel_value(kernel, 0.0));
  b.lower.assign(domain.size(), -sentinel);
  b.upper.assign(domain.size(), sentinel);
  return b;
}

ConfidenceBounds update_bounds(const ConfidenceBounds& bounds, const GpModel& model,
                               double beta_sqrt) {
  ConfidenceBounds out = bounds;
  out.beta_sqrt = beta_sqrt;
  const auto& mu = model.means();
  const auto& var = model.variances();
  for (size_t v = 0; v < mu.size(); ++v) {
    const double s = beta_sqrt * std::sqrt(var[v]);
    out.lower[v] = std::max(out.lower[v], mu[v] - s);
    out.upper[v] = std::min(out.upper[v], mu[v] + s);
    if (out.lower[v] > out.upper[v]) {
      // Disjoint with the running interval: containment has failed. Collapse
      // to a point, kept inside the previous interval so both monotonicity
      // directions survive.
      const double mid =
          std::clamp(0.5 * (out.lower[v] + out.upper[v]), bounds.lower[v], bounds.upper[v]);
      out.lower[v] = mid;
      out.upper[v] = mid;
      ++out.clamp_count;
    }
  }
  return out;
}

}  // namespace safecover
