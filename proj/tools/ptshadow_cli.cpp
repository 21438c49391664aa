/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ptshadow/cli.hpp"

namespace {

using namespace ptshadow;

struct GlobalOpts {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  Index threads = 1;
};

ScenarioConfig load_config(const GlobalOpts& g) {
  if (g.config.empty()) throw ConfigError("--config is required");
  std::ifstream is(g.config);
  if (!is) throw ConfigError("cannot open config file: " + g.config);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ScenarioConfig cfg = config_from_json(j);
  if (g.seed) cfg.seed = *g.seed;
  if (g.out) cfg.out = *g.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Process-tensor shadow tomography batch harness"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config, "path to the JSON config file");
  std::uint64_t seed_opt = 0;
  std::string out_opt;
  auto* seed_flag =
      app.add_option("--seed", seed_opt, "override the config seed");
  auto* out_flag =
      app.add_option("--out", out_opt, "override the output directory");
  app.add_option("--threads", g.threads,
                 "worker count (results are independent of it)");

  auto* spin = app.add_subcommand("spin-chain", "end-to-end spin-chain study");
  auto* corr = app.add_subcommand("corr-noise", "pairwise correlation maps");
  auto* val = app.add_subcommand("validate", "Hellinger cross-validation");
  auto* chr = app.add_subcommand("characterize-instrument",
                                 "bootstrap instrument characterization");
  auto* est = app.add_subcommand("estimate", "shadow records to MLE estimate");
  auto* fcs = app.add_subcommand("fcs", "shadow records to MPO");

  std::string mpo_path, records_path;
  val->add_option("--mpo", mpo_path, "MPO artifact to validate");
  est->add_option("--records", records_path, "shadow record file");
  fcs->add_option("--records", records_path, "shadow record file");

  CLI11_PARSE(app, argc, argv);
  if (*seed_flag) g.seed = seed_opt;
  if (*out_flag) g.out = out_opt;

  try {
    const ScenarioConfig cfg = load_config(g);
    cli::RunContext ctx(cfg.out, cfg);
    if (spin->parsed()) {
      cli::run_spin_chain(cfg, ctx);
    } else if (corr->parsed()) {
      cli::run_correlated_noise(cfg, ctx);
    } else if (val->parsed()) {
      cli::run_validation(cfg, ctx, mpo_path.empty() ? cfg.records : mpo_path);
    } else if (chr->parsed()) {
      cli::run_characterize(cfg, ctx);
    } else if (est->parsed()) {
      cli::run_estimate(cfg, ctx,
                        records_path.empty() ? cfg.records : records_path);
    } else if (fcs->parsed()) {
      cli::run_fcs(cfg, ctx,
                   records_path.empty() ? cfg.records : records_path);
    }
    ctx.finish(g.threads);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cli::ConditioningError& e) {
    std::cerr << "conditioning refusal: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
