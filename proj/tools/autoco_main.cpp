// Command-line entry point: experiment runs, data preparation, numerical
// validation suites, plotting, and synthetic-world generation.  Exit codes:
// 0 success, 1 runtime error, 2 usage error.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "autoco/checkpoint.hpp"
#include "autoco/config.hpp"
#include "autoco/envs.hpp"
#include "autoco/features.hpp"
#include "autoco/harness.hpp"
#include "autoco/validate.hpp"

namespace {

int cmd_run(const std::string& config_path, bool seed_set, std::uint64_t seed,
            const std::string& out_dir, int parallel, bool quiet) {
  autoco::harness::ExperimentConfig cfg =
      autoco::harness::load_experiment(config_path);
  if (seed_set) cfg.seed = seed;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (cfg.out_dir.empty()) cfg.out_dir = "results/" + cfg.name;

  const autoco::harness::ExperimentLog log =
      autoco::harness::run_experiment(cfg, parallel, quiet);
  autoco::harness::write_outputs(cfg, log, cfg.out_dir);

  const nlohmann::ordered_json summary = autoco::harness::summarize(cfg, log);
  std::printf("experiment: %s  (seed %llu, %d x %d trials, %d repetitions)\n",
              cfg.name.c_str(),
              static_cast<unsigned long long>(cfg.seed), cfg.batches,
              cfg.trials_per_batch, cfg.repetitions);
  for (const auto& [alg, entry] : summary.at("algorithms").items()) {
    std::printf("  %-14s cum_ctr %.5f +/- %.5f   cum_regret %.2f +/- %.2f",
                alg.c_str(),
                entry.at("final_cum_ctr").at("mean").get<double>(),
                entry.at("final_cum_ctr").at("stderr").get<double>(),
                entry.at("final_cum_regret").at("mean").get<double>(),
                entry.at("final_cum_regret").at("stderr").get<double>());
    if (entry.contains("relative_regret"))
      std::printf("   rel_regret %.2f +/- %.2f",
                  entry.at("relative_regret").at("mean").get<double>(),
                  entry.at("relative_regret").at("stderr").get<double>());
    std::printf("\n");
  }
  std::printf("outputs: %s/{batches.csv, summary.json, curves.svg}\n",
              cfg.out_dir.c_str());
  return 0;
}

int cmd_prep_data(const std::string& dataset,
                  const std::vector<std::string>& paths) {
  if (paths.size() < 2) {
    std::fprintf(stderr,
                 "prep-data: need at least one input path and one output "
                 "path\n");
    return 2;
  }
  const std::string& output = paths.back();
  const std::vector<std::string> inputs(paths.begin(), paths.end() - 1);

  autoco::CategoricalDataset data;
  if (dataset == "mushroom") {
    if (inputs.size() != 1) {
      std::fprintf(stderr, "prep-data: mushroom takes exactly one input\n");
      return 2;
    }
    data = autoco::load_mushroom(inputs.front());
  } else if (dataset == "adult") {
    data = autoco::load_adult(inputs);
  } else {
    std::fprintf(stderr, "prep-data: unknown dataset '%s' (mushroom|adult)\n",
                 dataset.c_str());
    return 2;
  }
  autoco::save_records(data, output);
  std::printf("%s: %zu records, %d fields -> %s\n", dataset.c_str(),
              data.size(), data.schema.field_count(), output.c_str());
  return 0;
}

int cmd_validate(const std::string& suite, std::uint64_t seed) {
  std::vector<autoco::validate::SuiteResult> results;
  if (suite == "gradients" || suite == "all")
    results.push_back(autoco::validate::check_gradients(100, seed));
  if (suite == "kl" || suite == "all")
    results.push_back(autoco::validate::check_kl(20, 1000000, seed + 1));
  if (suite == "prox" || suite == "all")
    results.push_back(autoco::validate::check_prox(10000, seed + 2));
  if (results.empty()) {
    std::fprintf(stderr, "validate: unknown suite '%s' (gradients|kl|prox|all)\n",
                 suite.c_str());
    return 2;
  }
  bool all_pass = true;
  for (const autoco::validate::SuiteResult& r : results) {
    std::printf("[%s]\n", r.name.c_str());
    for (const std::string& line : r.lines) std::printf("  %s\n", line.c_str());
    std::printf("  %s\n", r.pass ? "PASS" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

int cmd_plot(const std::string& batches_path, const std::string& out_path) {
  std::ifstream is(batches_path, std::ios::binary);
  if (!is) throw std::runtime_error(batches_path + ": cannot open");
  const autoco::harness::ExperimentLog log =
      autoco::harness::read_batches_csv(is);
  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw std::runtime_error(out_path + ": cannot open for writing");
  autoco::harness::write_curves_svg(log, os);
  std::printf("%zu rows -> %s\n", log.size(), out_path.c_str());
  return 0;
}

int cmd_gen_world(const std::string& config_path, std::uint64_t seed,
                  const std::string& out_path) {
  autoco::envs::SyntheticConfig synth;
  if (!config_path.empty()) {
    const autoco::config::Table root =
        autoco::config::load_config_file(config_path);
    const autoco::config::Table* env = root.child("environment");
    if (env == nullptr)
      throw autoco::config::ConfigError(config_path +
                                        ": missing [environment] section");
    autoco::harness::EnvSpec spec = autoco::harness::parse_env_spec(*env);
    if (spec.kind != "synthetic")
      throw autoco::config::ConfigError(
          "gen-world: environment kind must be synthetic");
    synth = spec.synthetic;
  }
  const autoco::envs::SyntheticWorld world = autoco::envs::synth_generate(synth, seed);
  autoco::envs::save_world_json(out_path, world);
  std::printf("world: %d products x %d candidates, mean ctr %.6f -> %s\n",
              world.product_count(),
              world.config.candidates_per_product, world.mean_ctr,
              out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contextual-bandit experiment toolkit"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  std::string run_config;
  std::uint64_t run_seed = 0;
  std::string run_out_dir;
  int run_parallel = 1;
  bool run_quiet = false;
  run->add_option("config,--config", run_config, "experiment config file")
      ->required();
  auto* seed_opt =
      run->add_option("--seed", run_seed, "master seed (overrides config)");
  run->add_option("--out-dir", run_out_dir, "output directory (overrides config)");
  run->add_option("--parallel", run_parallel, "worker threads for cells")
      ->check(CLI::PositiveNumber);
  run->add_flag("--quiet", run_quiet, "suppress progress output");

  // prep-data
  auto* prep = app.add_subcommand("prep-data",
                                  "convert a UCI dataset into the record format");
  std::string prep_dataset;
  std::vector<std::string> prep_paths;
  prep->add_option("dataset", prep_dataset, "mushroom or adult")->required();
  prep->add_option("paths", prep_paths, "input file(s) then output file")
      ->required()
      ->expected(-2);

  // validate
  auto* val = app.add_subcommand("validate", "run a numerical property suite");
  std::string val_suite;
  std::uint64_t val_seed = 20240817;
  val->add_option("suite", val_suite, "gradients, kl, prox, or all")
      ->required();
  val->add_option("--seed", val_seed, "seed for the randomized checks");

  // plot
  auto* plot = app.add_subcommand("plot", "render curves.svg from a batches.csv");
  std::string plot_batches;
  std::string plot_out = "curves.svg";
  plot->add_option("batches", plot_batches, "batches.csv path")->required();
  plot->add_option("--out", plot_out, "output svg path");

  // gen-world
  auto* gen = app.add_subcommand("gen-world",
                                 "generate and save a synthetic world artifact");
  std::string gen_config;
  std::uint64_t gen_seed = 1;
  std::string gen_out = "world.json";
  gen->add_option("--config", gen_config,
                  "config file with an [environment] section");
  gen->add_option("--seed", gen_seed, "world seed");
  gen->add_option("--out", gen_out, "output json path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (run->parsed())
      return cmd_run(run_config, seed_opt->count() > 0, run_seed, run_out_dir,
                     run_parallel, run_quiet);
    if (prep->parsed()) return cmd_prep_data(prep_dataset, prep_paths);
    if (val->parsed()) return cmd_validate(val_suite, val_seed);
    if (plot->parsed()) return cmd_plot(plot_batches, plot_out);
    if (gen->parsed()) return cmd_gen_world(gen_config, gen_seed, gen_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
