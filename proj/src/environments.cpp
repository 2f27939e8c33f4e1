#include "safecover/environments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace safecover {

const char* EnvError::code_name() const {
  switch (code_) {
    case Code::shape_mismatch: return "shape_mismatch";
    case Code::non_finite: return "non_finite";
    case Code::unsafe_seed: return "unsafe_seed";
    case Code::negative_density: return "negative_density";
    case Code::no_safe_seed: return "no_safe_seed";
  }
  return "unknown";
}

GpPriorSampler::GpPriorSampler(const GridDomain& domain, const KernelSpec& kernel)
    : size_(domain.size()) {
  LocList all(domain.size());
  std::iota(all.begin(), all.end(), 0);
  Eigen::MatrixXd k = kernel_matrix(domain, kernel, all);
  factor_ = cholesky_with_jitter(std::move(k), "GpPriorSampler");
}

Field GpPriorSampler::sample(RngStream& rng) const {
  Eigen::VectorXd z(size_);
  for (int i = 0; i < size_; ++i) z(i) = rng.next_normal();
  Eigen::VectorXd f = factor_ * z;
  return Field(f.data(), f.data() + size_);
}

namespace {

// Prior factorizations are expensive at 30x30 and identical across seeds;
// share them per (domain, kernel).
const GpPriorSampler& shared_sampler(const GridDomain& domain, const KernelSpec& kernel) {
  static std::mutex mu;
  static std::map<std::string, GpPriorSampler> cache;
  std::ostringstream key;
  key << domain.width << 'x' << domain.height << '@' << domain.spacing << '|'
      << static_cast<int>(kernel.family) << '|' << kernel.lengthscale << '|'
      << kernel.output_scale;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key.str());
  if (it == cache.end()) it = cache.emplace(key.str(), GpPriorSampler(domain, kernel)).first;
  return it->second;
}

void make_density_nonnegative(Field& density, bool clamp) {
  if (clamp) {
    for (double& d : density) d = std::max(0.0, d);
  } else {
    const double lo = *std::min_element(density.begin(), density.end());
    if (lo < 0.0)
      for (double& d : density) d -= lo;
  }
}

std::vector<Loc> draw_seeds(const GridDomain& domain, const Field& q, int n_seeds, double margin,
                            RngStream& rng) {
  LocList eligible;
  for (Loc v = 0; v < domain.size(); ++v)
    if (q[v] >= margin) eligible.push_back(v);
  if (static_cast<int>(eligible.size()) < n_seeds) return {};
  std::vector<Loc> seeds;
  while (static_cast<int>(seeds.size()) < n_seeds) {
    const Loc pick = eligible[rng.next_below(eligible.size())];
    if (std::find(seeds.begin(), seeds.end(), pick) == seeds.end()) seeds.push_back(pick);
  }
  return seeds;
}

void finalize(EnvironmentTruth& env, const EnvOptions& opts) {
  env.noise_rho = opts.noise_rho;
  env.noise_q = opts.noise_q;
  env.lipschitz_q = 1.1 * empirical_lipschitz(env.domain, env.constraint);
}

}  // namespace

EnvironmentTruth sample_gp_environment(const GridDomain& domain, const KernelSpec& kernel_rho,
                                       const KernelSpec& kernel_q, std::uint64_t rng_seed,
                                       const EnvOptions& opts) {
  const GpPriorSampler& sampler_rho = shared_sampler(domain, kernel_rho);
  const GpPriorSampler& sampler_q = shared_sampler(domain, kernel_q);
  for (int attempt = 0; attempt < 100; ++attempt) {
    RngStream rho_rng(rng_seed, "rho");
    RngStream q_rng(rng_seed, "q");
    RngStream seed_rng(rng_seed, "x0");
    if (attempt > 0) {
      rho_rng = rho_rng.child("retry", attempt);
      q_rng = q_rng.child("retry", attempt);
      seed_rng = seed_rng.child("retry", attempt);
    }
    EnvironmentTruth env;
    env.domain = domain;
    env.density = sampler_rho.sample(rho_rng);
    env.constraint = sampler_q.sample(q_rng);
    make_density_nonnegative(env.density, opts.clamp_density);
    env.seeds = draw_seeds(domain, env.constraint, opts.n_seeds, opts.seed_margin, seed_rng);
    if (env.seeds.empty()) continue;
    finalize(env, opts);
    return env;
  }
  throw EnvError(EnvError::Code::no_safe_seed,
                 "sample_gp_environment: no seed with the required margin after 100 draws");
}

double obstacle_distance(const ObstacleSpec& spec, double x, double y) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : spec.blocks) {
    const double dx = std::max({r.x0 - x, 0.0, x - r.x1});
    const double dy = std::max({r.y0 - y, 0.0, y - r.y1});
    best = std::min(best, std::hypot(dx, dy));
  }
  return best;
}

EnvironmentTruth obstacle_environment(const GridDomain& domain, const ObstacleSpec& spec,
                                      const KernelSpec& kernel_rho, std::uint64_t rng_seed,
                                      const EnvOptions& opts) {
  EnvironmentTruth env;
  env.domain = domain;
  env.constraint.resize(domain.size());
  bool any_safe = false;
  for (Loc v = 0; v < domain.size(); ++v) {
    const double d = obstacle_distance(spec, domain.x(v), domain.y(v));
    double q = 1.0 / (1.0 + std::exp(-1.5 * d)) - 0.5;
    if (d == 0.0) q -= 1e-6;  // collisions are strictly unsafe
    env.constraint[v] = q;
    any_safe = any_safe || q >= 0.0;
  }
  if (!any_safe)
    throw EnvError(EnvError::Code::no_safe_seed, "obstacle_environment: all cells inside blocks");

  const GpPriorSampler& sampler_rho = shared_sampler(domain, kernel_rho);
  RngStream rho_rng(rng_seed, "rho");
  env.density = sampler_rho.sample(rho_rng);
  make_density_nonnegative(env.density, opts.clamp_density);

  RngStream seed_rng(rng_seed, "x0");
  env.seeds = draw_seeds(domain, env.constraint, opts.n_seeds, opts.seed_margin, seed_rng);
  if (env.seeds.empty())
    throw EnvError(EnvError::Code::no_safe_seed,
                   "obstacle_environment: no seed with the required margin");
  finalize(env, opts);
  return env;
}

EnvironmentTruth sample_obstacle_environment(const GridDomain& domain,
                                             const ObstacleGenOptions& gen_opts,
                                             const KernelSpec& kernel_rho, std::uint64_t rng_seed,
                                             const EnvOptions& opts) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    RngStream layout_rng(rng_seed, "obstacles");
    if (attempt > 0) layout_rng = layout_rng.child("retry", attempt);
    const ObstacleSpec spec = sample_obstacles(domain, layout_rng, gen_opts);
    try {
      const std::uint64_t env_seed = attempt == 0 ? rng_seed : RngStream(rng_seed, "obstacles")
                                                                   .child("retry", attempt)
                                                                   .next_u64();
      return obstacle_environment(domain, spec, kernel_rho, env_seed, opts);
    } catch (const EnvError& e) {
      if (e.code() != EnvError::Code::no_safe_seed) throw;
    }
  }
  throw EnvError(EnvError::Code::no_safe_seed,
                 "sample_obstacle_environment: no layout with an eligible seed after 100 draws");
}

ObstacleSpec sample_obstacles(const GridDomain& domain, RngStream& rng,
                              const ObstacleGenOptions& opts) {
  const double w = (domain.width - 1) * domain.spacing;
  const double h = (domain.height - 1) * domain.spacing;
  const double extent = std::max(w, h);
  const int count =
      opts.count_min + static_cast<int>(rng.next_below(opts.count_max - opts.count_min + 1));
  ObstacleSpec spec;
  for (int i = 0; i < count; ++i) {
    const double bw = extent * (opts.size_min_frac +
                                (opts.size_max_frac - opts.size_min_frac) * rng.next_double());
    const double bh = extent * (opts.size_min_frac +
                                (opts.size_max_frac - opts.size_min_frac) * rng.next_double());
    const double cx = rng.next_double() * w;
    const double cy = rng.next_double() * h;
    ObstacleSpec::Rect r;
    r.x0 = std::max(0.0, cx - bw / 2);
    r.x1 = std::min(w, cx + bw / 2);
    r.y0 = std::max(0.0, cy - bh / 2);
    r.y1 = std::min(h, cy + bh / 2);
    spec.blocks.push_back(r);
  }
  return spec;
}

double empirical_lipschitz(const GridDomain& domain, const Field& field) {
  double best = 0.0;
  for (Loc v = 0; v < domain.size(); ++v) {
    Loc nb[4];
    const int n = domain.neighbors(v, nb);
    for (int i = 0; i < n; ++i)
      best = std::max(best, std::abs(field[v] - field[nb[i]]) / domain.distance(v, nb[i]));
  }
  return best;
}

namespace {

void write_grid_csv(const std::string& path, const GridDomain& domain, const Field& field) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  char buf[64];
  for (int r = 0; r < domain.height; ++r) {
    for (int c = 0; c < domain.width; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", field[domain.at(r, c)]);
      out << buf << (c + 1 < domain.width ? "," : "\n");
    }
  }
}

std::vector<std::vector<double>> read_grid_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void save_environment(const EnvironmentTruth& env, const std::string& prefix) {
  write_grid_csv(prefix + ".density.csv", env.domain, env.density);
  write_grid_csv(prefix + ".constraint.csv", env.domain, env.constraint);
  nlohmann::json meta;
  meta["width"] = env.domain.width;
  meta["height"] = env.domain.height;
  meta["spacing"] = env.domain.spacing;
  nlohmann::json seeds = nlohmann::json::array();
  for (Loc s : env.seeds)
    seeds.push_back({env.domain.row(s), env.domain.col(s)});
  meta["seeds"] = seeds;
  meta["noise_rho"] = env.noise_rho;
  meta["noise_q"] = env.noise_q;
  meta["lipschitz_q"] = env.lipschitz_q;
  std::ofstream out(prefix + ".meta.json");
  if (!out) throw std::runtime_error("cannot open for writing: " + prefix + ".meta.json");
  out << meta.dump(2) << "\n";
}

EnvironmentTruth load_environment(const std::string& density_path,
                                  const std::string& constraint_path,
                                  const std::string& meta_path, bool clamp_density) {
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw std::runtime_error("cannot open for reading: " + meta_path);
  nlohmann::json meta = nlohmann::json::parse(meta_in);

  EnvironmentTruth env;
  env.domain.width = meta.at("width").get<int>();
  env.domain.height = meta.at("height").get<int>();
  env.domain.spacing = meta.at("spacing").get<double>();
  env.noise_rho = meta.at("noise_rho").get<double>();
  env.noise_q = meta.at("noise_q").get<double>();
  env.lipschitz_q = meta.at("lipschitz_q").get<double>();

  auto load_grid = [&](const std::string& path) {
    const auto rows = read_grid_csv(path);
    if (static_cast<int>(rows.size()) != env.domain.height)
      throw EnvError(EnvError::Code::shape_mismatch,
                     path + ": expected " + std::to_string(env.domain.height) + " rows, got " +
                         std::to_string(rows.size()));
    Field f(env.domain.size());
    for (int r = 0; r < env.domain.height; ++r) {
      if (static_cast<int>(rows[r].size()) != env.domain.width)
        throw EnvError(EnvError::Code::shape_mismatch,
                       path + ": row " + std::to_string(r) + " has " +
                           std::to_string(rows[r].size()) + " columns, expected " +
                           std::to_string(env.domain.width));
      for (int c = 0; c < env.domain.width; ++c) {
        if (!std::isfinite(rows[r][c]))
          throw EnvError(EnvError::Code::non_finite,
                         path + ": non-finite cell at row " + std::to_string(r));
        f[env.domain.at(r, c)] = rows[r][c];
      }
    }
    return f;
  };

  env.density = load_grid(density_path);
  env.constraint = load_grid(constraint_path);
  if (clamp_density)
    for (double& d : env.density) d = std::max(0.0, d);
  for (double d : env.density)
    if (d < 0.0)
      throw EnvError(EnvError::Code::negative_density, density_path + ": negative density cell");

  for (const auto& rc : meta.at("seeds")) {
    const int r = rc.at(0).get<int>();
    const int c = rc.at(1).get<int>();
    if (r < 0 || r >= env.domain.height || c < 0 || c >= env.domain.width)
      throw EnvError(EnvError::Code::shape_mismatch, "seed outside the grid");
    const Loc s = env.domain.at(r, c);
    if (env.constraint[s] < 0.0)
      throw EnvError(EnvError::Code::unsafe_seed,
                     "seed at (" + std::to_string(r) + "," + std::to_string(c) + ") has q < 0");
    env.seeds.push_back(s);
  }
  return env;
}

EnvironmentTruth load_environment_prefix(const std::string& prefix, bool clamp_density) {
  return load_environment(prefix + ".density.csv", prefix + ".constraint.csv",
                          prefix + ".meta.json", clamp_density);
}

}  // namespace safecover
