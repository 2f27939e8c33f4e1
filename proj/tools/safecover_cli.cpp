#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>

#include "safecover/harness.hpp"

using namespace safecover;

namespace {

int fail(const std::string& code, const std::string& message) {
  nlohmann::json err;
  err["error"] = message;
  err["code"] = code;
  std::cerr << err.dump() << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent safe coverage simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, in_dir, seeds_text;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 0;
  bool serial = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON experiment config")->required();
    cmd->add_option("--out", out_dir, "output directory (overrides config)");
    cmd->add_flag("--serial", serial, "disable the OpenMP kernels");
  };

  CLI::App* run = app.add_subcommand("run", "execute one config+seed");
  add_common(run);
  run->add_option("--seed", seed, "rng seed (overrides config seeds)")
      ->each([&](const std::string&) { seed_given = true; });

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "fan out over seeds");
  add_common(sweep_cmd);
  sweep_cmd->add_option("--seeds", seeds_text, "seed range a..b or single seed");
  sweep_cmd->add_option("--jobs", jobs, "concurrent runs (default: min(seeds, cores))");

  CLI::App* oracle_cmd = app.add_subcommand("oracle", "precompute oracle baselines");
  add_common(oracle_cmd);
  oracle_cmd->add_option("--seeds", seeds_text, "seed range a..b or single seed");

  CLI::App* report_cmd = app.add_subcommand("report", "aggregate run records");
  report_cmd->add_option("--in", in_dir, "directory with run_*.json files")->required();
  report_cmd->add_option("--out", out_dir, "directory for CSV tables")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (serial) set_default_exec(Exec::serial);
    if (report_cmd->parsed()) {
      report(in_dir, out_dir);
      return 0;
    }

    ExperimentConfig cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (!seeds_text.empty()) cfg.seeds = parse_seed_range(seeds_text);

    if (run->parsed()) {
      if (seed_given) cfg.seeds = {seed};
      const std::string path = write_record(run_one(cfg, cfg.seeds.front()), cfg.output_dir);
      std::cout << path << "\n";
    } else if (sweep_cmd->parsed()) {
      for (const auto& path : sweep(cfg, jobs)) std::cout << path << "\n";
    } else if (oracle_cmd->parsed()) {
      for (const auto& path : run_oracle(cfg)) std::cout << path << "\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    return fail("config", e.what());
  } catch (const EnvError& e) {
    return fail(e.code_name(), e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
}
