// sgpucb_bench: run safe-bandit experiments from a JSON config and aggregate traces.
//
//   sgpucb_bench run --config <path> --out <dir> [--seeds N] [--parallel K]
//   sgpucb_bench aggregate --in <dir> --out <file>
//
// Exit codes: 0 success, 1 other failure, 2 config/usage error, 3 I/O error.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sgpucb/bench.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

int cmd_run(const std::string& config_path, const std::string& out_dir, int seeds, int parallel) {
  sgpucb::ExperimentConfig cfg = sgpucb::load_experiment_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (seeds > 0) cfg.n_seeds = seeds;
  const auto result = sgpucb::run_experiment(cfg, {.parallel = parallel});
  std::cout << "wrote " << cfg.n_seeds - static_cast<int>(result.failed_seeds.size()) << " seeds x "
            << cfg.algorithms.size() << " algorithms to " << result.output_dir.string() << '\n';
  if (!result.failed_seeds.empty()) {
    std::cerr << "instance generation failed for seeds:";
    for (auto s : result.failed_seeds) std::cerr << ' ' << s;
    std::cerr << '\n';
  }
  for (const auto& [name, a] : result.summary.at("algorithms").items()) {
    const auto& step = a.at("mean_step_regret");
    std::cout << "  " << name << ": final per-step regret " << step.back().get<double>() << ", violations "
              << a.at("violations_total").get<long long>() << '\n';
  }
  return kExitOk;
}

int cmd_aggregate(const std::string& in_dir, const std::string& out_file) {
  const auto summary = sgpucb::aggregate(in_dir);
  sgpucb::write_json(out_file, summary);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe GP bandit benchmark harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir, in_dir, out_file;
  int seeds = 0;
  int parallel = 1;

  auto* run = app.add_subcommand("run", "run every configured algorithm over all seeds");
  run->add_option("--config", config_path, "experiment JSON")->required();
  run->add_option("--out", out_dir, "output directory (overrides run.output_dir)")->required();
  run->add_option("--seeds", seeds, "number of seeds (overrides run.n_seeds)")->check(CLI::PositiveNumber);
  run->add_option("--parallel", parallel, "worker threads")->check(CLI::PositiveNumber);

  auto* agg = app.add_subcommand("aggregate", "summarize a directory of trace CSVs");
  agg->add_option("--in", in_dir, "run output directory or trace directory")->required();
  agg->add_option("--out", out_file, "summary JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, seeds, parallel);
    return cmd_aggregate(in_dir, out_file);
  } catch (const sgpucb::ConfigError& e) {
    std::cerr << "config error at " << e.what() << '\n';
    return kExitConfig;
  } catch (const sgpucb::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
