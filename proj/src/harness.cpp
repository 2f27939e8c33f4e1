#include "safecover/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "safecover/metrics.hpp"
#include "safecover/safe_sets.hpp"

namespace safecover {

namespace fs = std::filesystem;
using nlohmann::json;

DiskMode ExperimentConfig::disk_mode_enum() const {
  if (disk_mode == "path") return DiskMode::path_restricted;
  if (disk_mode == "intersect") return DiskMode::intersect;
  throw ConfigError("disk_mode must be 'path' or 'intersect'");
}

void ExperimentConfig::validate() const {
  static const std::set<std::string> algos = {"macopt", "macopt_h", "ucb",
                                              "safemac", "passivemac", "two_stage"};
  if (!algos.count(algorithm)) throw ConfigError("unknown algorithm: " + algorithm);
  if (environment != "gp" && environment != "obstacle" &&
      environment.rfind("file:", 0) != 0)
    throw ConfigError("environment must be gp, obstacle or file:<prefix>");
  if (n_agents < 1) throw ConfigError("n_agents must be >= 1");
  if (grid.width < 1 || grid.height < 1 || !(grid.spacing > 0.0))
    throw ConfigError("grid dimensions must be positive");
  if (r < 0) throw ConfigError("r must be >= 0");
  kernel_rho.validate();
  kernel_q.validate();
  if (!(noise_rho > 0.0) || !(noise_q > 0.0)) throw ConfigError("noise variances must be > 0");
  if (beta_rho <= 0.0 || beta_q <= 0.0) throw ConfigError("beta values must be > 0");
  if (eps_rho < 0.0 || eps_q < 0.0) throw ConfigError("eps values must be >= 0");
  if (lipschitz < 0.0) throw ConfigError("lipschitz must be >= 0 (0 = empirical)");
  if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  disk_mode_enum();
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

KernelSpec parse_kernel(const json& j, const std::string& where) {
  check_keys(j, {"family", "lengthscale", "output_scale"}, where);
  KernelSpec k;
  if (j.contains("family")) {
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "matern52")
      k.family = KernelSpec::Family::matern52;
    else if (fam == "rbf")
      k.family = KernelSpec::Family::rbf;
    else
      throw ConfigError(where + ": family must be matern52 or rbf");
  }
  if (j.contains("lengthscale")) k.lengthscale = j.at("lengthscale").get<double>();
  if (j.contains("output_scale")) k.output_scale = j.at("output_scale").get<double>();
  return k;
}

json kernel_to_json(const KernelSpec& k) {
  return {{"family", k.family == KernelSpec::Family::matern52 ? "matern52" : "rbf"},
          {"lengthscale", k.lengthscale},
          {"output_scale", k.output_scale}};
}

}  // namespace

std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) return {std::stoull(text)};
  const std::uint64_t lo = std::stoull(text.substr(0, dots));
  const std::uint64_t hi = std::stoull(text.substr(dots + 2));
  if (hi < lo) throw ConfigError("seed range upper bound below lower bound");
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
  return seeds;
}

ExperimentConfig parse_config(const json& j) {
  static const std::set<std::string> allowed = {
      "algorithm", "environment", "n_agents",   "grid",        "r",
      "kernel_rho", "kernel_q",   "noise_rho",  "noise_q",     "beta_rho",
      "beta_q",     "eps_rho",    "eps_q",      "lipschitz",   "max_rounds",
      "seed_margin", "disk_mode", "clamp_density", "obstacles", "runtime_cap_s",
      "seeds",      "output_dir"};
  check_keys(j, allowed, "config");

  ExperimentConfig cfg;
  if (j.contains("algorithm")) cfg.algorithm = j.at("algorithm").get<std::string>();
  if (j.contains("environment")) cfg.environment = j.at("environment").get<std::string>();
  if (j.contains("n_agents")) cfg.n_agents = j.at("n_agents").get<int>();
  if (j.contains("grid")) {
    check_keys(j.at("grid"), {"width", "height", "spacing"}, "grid");
    if (j.at("grid").contains("width")) cfg.grid.width = j.at("grid").at("width").get<int>();
    if (j.at("grid").contains("height")) cfg.grid.height = j.at("grid").at("height").get<int>();
    if (j.at("grid").contains("spacing"))
      cfg.grid.spacing = j.at("grid").at("spacing").get<double>();
  }
  if (j.contains("r")) cfg.r = j.at("r").get<int>();
  if (j.contains("kernel_rho")) cfg.kernel_rho = parse_kernel(j.at("kernel_rho"), "kernel_rho");
  if (j.contains("kernel_q")) cfg.kernel_q = parse_kernel(j.at("kernel_q"), "kernel_q");
  if (j.contains("noise_rho")) cfg.noise_rho = j.at("noise_rho").get<double>();
  if (j.contains("noise_q")) cfg.noise_q = j.at("noise_q").get<double>();
  if (j.contains("beta_rho")) cfg.beta_rho = j.at("beta_rho").get<double>();
  if (j.contains("beta_q")) cfg.beta_q = j.at("beta_q").get<double>();
  if (j.contains("eps_rho")) cfg.eps_rho = j.at("eps_rho").get<double>();
  if (j.contains("eps_q")) cfg.eps_q = j.at("eps_q").get<double>();
  if (j.contains("lipschitz")) cfg.lipschitz = j.at("lipschitz").get<double>();
  if (j.contains("max_rounds")) cfg.max_rounds = j.at("max_rounds").get<int>();
  if (j.contains("seed_margin")) cfg.seed_margin = j.at("seed_margin").get<double>();
  if (j.contains("disk_mode")) cfg.disk_mode = j.at("disk_mode").get<std::string>();
  if (j.contains("clamp_density")) cfg.clamp_density = j.at("clamp_density").get<bool>();
  if (j.contains("obstacles")) {
    check_keys(j.at("obstacles"), {"count_min", "count_max", "size_min_frac", "size_max_frac"},
               "obstacles");
    const auto& o = j.at("obstacles");
    if (o.contains("count_min")) cfg.obstacles.count_min = o.at("count_min").get<int>();
    if (o.contains("count_max")) cfg.obstacles.count_max = o.at("count_max").get<int>();
    if (o.contains("size_min_frac"))
      cfg.obstacles.size_min_frac = o.at("size_min_frac").get<double>();
    if (o.contains("size_max_frac"))
      cfg.obstacles.size_max_frac = o.at("size_max_frac").get<double>();
  }
  if (j.contains("runtime_cap_s")) cfg.runtime_cap_s = j.at("runtime_cap_s").get<double>();
  if (j.contains("seeds")) {
    cfg.seeds.clear();
    if (j.at("seeds").is_string()) {
      cfg.seeds = parse_seed_range(j.at("seeds").get<std::string>());
    } else {
      for (const auto& s : j.at("seeds")) cfg.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["algorithm"] = cfg.algorithm;
  j["environment"] = cfg.environment;
  j["n_agents"] = cfg.n_agents;
  j["grid"] = {{"width", cfg.grid.width}, {"height", cfg.grid.height},
               {"spacing", cfg.grid.spacing}};
  j["r"] = cfg.r;
  j["kernel_rho"] = kernel_to_json(cfg.kernel_rho);
  j["kernel_q"] = kernel_to_json(cfg.kernel_q);
  j["noise_rho"] = cfg.noise_rho;
  j["noise_q"] = cfg.noise_q;
  j["beta_rho"] = cfg.beta_rho;
  j["beta_q"] = cfg.beta_q;
  j["eps_rho"] = cfg.eps_rho;
  j["eps_q"] = cfg.eps_q;
  j["lipschitz"] = cfg.lipschitz;
  j["max_rounds"] = cfg.max_rounds;
  j["seed_margin"] = cfg.seed_margin;
  j["disk_mode"] = cfg.disk_mode;
  j["clamp_density"] = cfg.clamp_density;
  j["obstacles"] = {{"count_min", cfg.obstacles.count_min},
                    {"count_max", cfg.obstacles.count_max},
                    {"size_min_frac", cfg.obstacles.size_min_frac},
                    {"size_max_frac", cfg.obstacles.size_max_frac}};
  j["runtime_cap_s"] = cfg.runtime_cap_s;
  return j;
}

namespace {

std::string hex_hash(const std::string& text) {
  const std::uint64_t h = RngStream::fnv1a(text);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string config_hash(const ExperimentConfig& cfg) {
  return hex_hash(config_to_json(cfg).dump());
}

std::string env_hash(const ExperimentConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("algorithm");
  j.erase("runtime_cap_s");
  return hex_hash(j.dump());
}

EnvironmentTruth build_environment(const ExperimentConfig& cfg, std::uint64_t seed) {
  EnvOptions opts;
  opts.n_seeds = cfg.n_agents;
  opts.seed_margin = cfg.seed_margin;
  opts.noise_rho = cfg.noise_rho;
  opts.noise_q = cfg.noise_q;
  opts.clamp_density = cfg.clamp_density;

  EnvironmentTruth env;
  if (cfg.environment == "gp") {
    env = sample_gp_environment(cfg.grid, cfg.kernel_rho, cfg.kernel_q, seed, opts);
  } else if (cfg.environment == "obstacle") {
    env = sample_obstacle_environment(cfg.grid, cfg.obstacles, cfg.kernel_rho, seed, opts);
  } else {
    env = load_environment_prefix(cfg.environment.substr(5), cfg.clamp_density);
  }
  if (cfg.lipschitz > 0.0) env.lipschitz_q = cfg.lipschitz;
  return env;
}

std::optional<double> normalized_coverage(const std::vector<Loc>& placements,
                                          const EnvironmentTruth& env, int r, DiskMode mode) {
  LocList region;
  for (Loc s : env.seeds)
    region = set_union(region,
                       true_reachable_set(env.constraint, env.domain, {s}, 0.0, env.lipschitz_q));
  double mass = 0.0;
  for (Loc v : region) mass += env.density[v];
  mass /= env.domain.size();
  if (mass <= 0.0) return std::nullopt;
  std::vector<Loc> inside;
  for (Loc p : placements)
    if (contains(region, p)) inside.push_back(p);
  const double value =
      inside.empty() ? 0.0 : coverage_value(env.density, env.domain, inside, r, region, mode);
  return value / mass;
}

namespace {

RunResult dispatch(const ExperimentConfig& cfg, const EnvironmentTruth& env, std::uint64_t seed) {
  const GpModel gp_rho(env.domain, cfg.kernel_rho, cfg.noise_rho);
  const GpModel gp_q(env.domain, cfg.kernel_q, cfg.noise_q);
  if (cfg.algorithm == "macopt" || cfg.algorithm == "macopt_h" || cfg.algorithm == "ucb") {
    MacoptConfig mc;
    mc.eps_rho = cfg.eps_rho;
    mc.beta_sqrt = cfg.beta_rho;
    mc.max_rounds = cfg.max_rounds;
    mc.r = cfg.r;
    mc.disk_mode = cfg.disk_mode_enum();
    mc.sampler = cfg.algorithm == "macopt"     ? MacoptConfig::Sampler::uncertainty
                 : cfg.algorithm == "macopt_h" ? MacoptConfig::Sampler::hallucinated
                                               : MacoptConfig::Sampler::ucb_center;
    return macopt_run(env, gp_rho, mc, seed);
  }
  SafemacConfig sc;
  sc.eps_rho = cfg.eps_rho;
  sc.eps_q = cfg.eps_q;
  sc.beta_sqrt_rho = cfg.beta_rho;
  sc.beta_sqrt_q = cfg.beta_q;
  sc.lipschitz = env.lipschitz_q;
  sc.max_rounds = cfg.max_rounds;
  sc.r = cfg.r;
  sc.disk_mode = cfg.disk_mode_enum();
  sc.runtime_cap_s = cfg.runtime_cap_s;
  if (cfg.algorithm == "safemac") return safemac_run(env, gp_rho, gp_q, sc, seed);
  if (cfg.algorithm == "passivemac") return passivemac_run(env, gp_rho, gp_q, sc, seed);
  return two_stage_run(env, gp_rho, gp_q, sc, seed);
}

json round_to_json(const RoundLog& log, const EnvironmentTruth& env, int r, DiskMode mode,
                   long cum_rho, long cum_q) {
  json obs = json::array();
  for (const auto& o : log.observations)
    obs.push_back({o.agent, o.loc, o.value, std::string(1, o.kind)});
  json j;
  j["t"] = log.round;
  j["phase"] = std::string(1, log.phase);
  j["placements"] = log.placements.placements;
  j["goals"] = log.goals;
  j["gamma"] = log.sum_max_width;
  j["gamma_analysis"] = log.gamma_analysis;
  j["obs"] = obs;
  j["cum_rho"] = cum_rho;
  j["cum_q"] = cum_q;
  if (!log.batches.empty()) {
    json sizes = json::array();
    for (const auto& b : log.batches) sizes.push_back(b.size());
    j["batch_sizes"] = sizes;
    json pess = json::array();
    for (const auto& p : log.pess_sets) pess.push_back(p.size());
    j["pess_sizes"] = pess;
    j["opti_sizes"] = log.opti_sizes;
  }
  if (!log.recommendation.empty()) {
    j["rec"] = log.recommendation;
    j["rec_value_lcb"] = log.recommendation_value;
    if (auto cov = normalized_coverage(log.recommendation, env, r, mode))
      j["rec_cov_norm"] = *cov;
  }
  return j;
}

}  // namespace

std::string RunRecord::file_name() const {
  return "run_" + json.at("config_hash").get<std::string>() + "_" +
         std::to_string(json.at("seed").get<std::uint64_t>()) + ".json";
}

RunRecord run_one(const ExperimentConfig& cfg, std::uint64_t seed) {
  const EnvironmentTruth env = build_environment(cfg, seed);
  const RunResult res = dispatch(cfg, env, seed);
  const DiskMode mode = cfg.disk_mode_enum();

  json j;
  j["config_hash"] = config_hash(cfg);
  j["env_hash"] = env_hash(cfg);
  j["seed"] = seed;
  j["algorithm"] = cfg.algorithm;
  j["converged"] = res.converged;
  j["timed_out"] = res.timed_out;
  j["rounds"] = res.rounds;
  j["samples_rho"] = res.samples_rho;
  j["samples_q"] = res.samples_q;
  j["safety_violations"] = res.safety_violations;
  j["sandwich_violations"] = res.sandwich_violations;
  j["final_placements"] = res.final_assignment.placements;
  j["final_recommendation"] = res.final_recommendation;

  LocList region;
  for (Loc s : env.seeds)
    region = set_union(region,
                       true_reachable_set(env.constraint, env.domain, {s}, 0.0, env.lipschitz_q));
  std::vector<Loc> inside;
  for (Loc p : res.final_assignment.placements)
    if (contains(region, p)) inside.push_back(p);
  j["final_coverage_raw"] =
      inside.empty() ? 0.0
                     : coverage_value(env.density, env.domain, inside, cfg.r, region, mode);
  {
    // Coverage over the whole domain, the natural score for the
    // unconstrained algorithms.
    LocList all(env.domain.size());
    std::iota(all.begin(), all.end(), 0);
    j["final_coverage_full_raw"] =
        coverage_value(env.density, env.domain, res.final_assignment.placements, cfg.r, all, mode);
  }
  if (auto cov = normalized_coverage(res.final_assignment.placements, env, cfg.r, mode))
    j["final_coverage_norm"] = *cov;
  if (auto cov = normalized_coverage(res.final_recommendation, env, cfg.r, mode))
    j["recommendation_coverage_norm"] = *cov;

  json rounds = json::array();
  long cum_rho = 0, cum_q = 0;
  for (const auto& log : res.history) {
    for (const auto& o : log.observations) (o.kind == 'r' ? cum_rho : cum_q) += 1;
    rounds.push_back(round_to_json(log, env, cfg.r, mode, cum_rho, cum_q));
  }
  j["rounds_log"] = rounds;
  return RunRecord{std::move(j)};
}

std::string write_record(const RunRecord& record, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path path = fs::path(dir) / record.file_name();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << record.json.dump() << "\n";
  return path.string();
}

std::vector<std::string> sweep(const ExperimentConfig& cfg, int jobs) {
  const int n = static_cast<int>(cfg.seeds.size());
  if (jobs <= 0) jobs = std::min(n, omp_get_max_threads());
  std::vector<std::string> paths(n);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (int i = 0; i < n; ++i) {
    try {
      paths[i] = write_record(run_one(cfg, cfg.seeds[i]), cfg.output_dir);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return paths;
}

std::vector<std::string> run_oracle(const ExperimentConfig& cfg) {
  std::vector<std::string> paths;
  for (std::uint64_t seed : cfg.seeds) {
    const EnvironmentTruth env = build_environment(cfg, seed);
    const DiskMode mode = cfg.disk_mode_enum();
    json j;
    j["env_hash"] = env_hash(cfg);
    j["seed"] = seed;

    LocList region;
    json per_agent = json::array();
    for (Loc s : env.seeds) {
      const LocList reach =
          true_reachable_set(env.constraint, env.domain, {s}, 0.0, env.lipschitz_q);
      per_agent.push_back(reach.size());
      region = set_union(region, reach);
    }
    j["reach0_sizes"] = per_agent;
    double mass = 0.0;
    for (Loc v : region) mass += env.density[v];
    j["reach0_mass"] = mass / env.domain.size();

    // Greedy on the truth is always available; brute force only when the
    // instance is enumerable.
    const GreedyResult greedy = greedy_ucb(env.density, env.density, env.domain,
                                           static_cast<int>(env.seeds.size()), cfg.r, region, mode);
    j["greedy_on_truth_value"] = greedy.assignment.total_value;
    j["greedy_on_truth_placements"] = greedy.assignment.placements;
    try {
      const auto oracle = reachable_oracle(env, cfg.eps_q, cfg.r, mode);
      j["brute_force_value"] = oracle.benchmark_value;
      json bp = json::array();
      for (const auto& b : oracle.placements) bp.push_back(b);
      j["brute_force_placements"] = bp;
    } catch (const std::invalid_argument&) {
      j["brute_force_value"] = nullptr;
    }

    fs::create_directories(cfg.output_dir);
    const fs::path path = fs::path(cfg.output_dir) /
                          ("oracle_" + env_hash(cfg) + "_" + std::to_string(seed) + ".json");
    std::ofstream out(path);
    out << j.dump() << "\n";
    paths.push_back(path.string());
  }
  return paths;
}

namespace {

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const double pos = q * (values.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - lo) * (values[hi] - values[lo]);
}

}  // namespace

void report(const std::string& in_dir, const std::string& out_dir) {
  struct Entry {
    std::string algorithm, env_hash;
    std::uint64_t seed;
    double coverage = std::nan("");
    double samples = 0;
    double rounds = 0;
    bool converged = false;
    long violations = 0;
    json rounds_log;
  };
  std::vector<Entry> entries;
  for (const auto& item : fs::directory_iterator(in_dir)) {
    const std::string name = item.path().filename().string();
    if (name.rfind("run_", 0) != 0 || item.path().extension() != ".json") continue;
    std::ifstream in(item.path());
    json j = json::parse(in);
    Entry e;
    e.algorithm = j.at("algorithm").get<std::string>();
    e.env_hash = j.at("env_hash").get<std::string>();
    e.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("final_coverage_norm")) e.coverage = j.at("final_coverage_norm").get<double>();
    e.samples = j.at("samples_rho").get<double>() + j.at("samples_q").get<double>();
    e.rounds = j.at("rounds").get<double>();
    e.converged = j.at("converged").get<bool>();
    e.violations = j.at("safety_violations").get<long>();
    e.rounds_log = j.at("rounds_log");
    entries.push_back(std::move(e));
  }

  // Per-instance sample normalization across algorithms sharing (env, seed).
  std::map<std::pair<std::string, std::uint64_t>, double> max_samples;
  for (const auto& e : entries) {
    auto& m = max_samples[{e.env_hash, e.seed}];
    m = std::max(m, e.samples);
  }

  std::map<std::string, std::vector<const Entry*>> by_algo;
  for (const auto& e : entries) by_algo[e.algorithm].push_back(&e);

  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "summary.csv");
    out << "algorithm,n_runs,converged_frac,coverage_median,coverage_q25,coverage_q75,"
           "samples_median,samples_q25,samples_q75,norm_samples_median,rounds_median,"
           "violations_total\n";
    for (const auto& [algo, list] : by_algo) {
      std::vector<double> cov, samp, norm_samp, rounds;
      double conv = 0;
      long violations = 0;
      for (const Entry* e : list) {
        if (!std::isnan(e->coverage)) cov.push_back(e->coverage);
        samp.push_back(e->samples);
        const double m = max_samples[{e->env_hash, e->seed}];
        if (m > 0) norm_samp.push_back(e->samples / m);
        rounds.push_back(e->rounds);
        conv += e->converged ? 1 : 0;
        violations += e->violations;
      }
      out << algo << ',' << list.size() << ',' << conv / list.size() << ','
          << quantile(cov, 0.5) << ',' << quantile(cov, 0.25) << ',' << quantile(cov, 0.75) << ','
          << quantile(samp, 0.5) << ',' << quantile(samp, 0.25) << ',' << quantile(samp, 0.75)
          << ',' << quantile(norm_samp, 0.5) << ',' << quantile(rounds, 0.5) << ',' << violations
          << "\n";
    }
  }
  {
    std::ofstream out(fs::path(out_dir) / "coverage_vs_samples.csv");
    out << "algorithm,env_hash,seed,round,cum_samples,rec_cov_norm\n";
    for (const auto& e : entries) {
      for (const auto& r : e.rounds_log) {
        if (!r.contains("rec_cov_norm")) continue;
        out << e.algorithm << ',' << e.env_hash << ',' << e.seed << ','
            << r.at("t").get<int>() << ','
            << r.at("cum_rho").get<long>() + r.at("cum_q").get<long>() << ','
            << r.at("rec_cov_norm").get<double>() << "\n";
      }
    }
  }
}

}  // namespace safecover
