/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#ifndef PTSHADOW_CLI_HPP
#define PTSHADOW_CLI_HPP

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ptshadow/instruments.hpp"
#include "ptshadow/io.hpp"
#include "ptshadow/studies.hpp"

namespace ptshadow::cli {

inline constexpr const char* kToolVersion = "ptshadow 1.0.0";

/// Numerical-conditioning refusal; mapped to exit code 3 by the CLI.
struct ConditioningError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Collects emitted artifacts and per-stage timings, then writes the run
/// manifest. The manifest itself carries wall-clock timings and is therefore
/// run metadata: every other artifact is byte-reproducible from
/// (config, seed), the manifest's inventory checksums prove it.
class RunContext {
 public:
  RunContext(std::filesystem::path out_dir, const ScenarioConfig& cfg)
      : dir_(std::move(out_dir)), cfg_(cfg) {
    std::filesystem::create_directories(dir_);
    write_json("config.json", config_to_json(cfg));
    config_hash_ = io::hex64(io::checksum_file(path("config.json")));
  }

  std::string path(const std::string& name) const {
    return (dir_ / name).string();
  }

  void note_file(const std::string& name) { files_.push_back(name); }

  void write_json(const std::string& name, const nlohmann::json& j) {
    std::ofstream os(path(name));
    if (!os) throw std::runtime_error("cannot open for writing: " + path(name));
    os << j.dump(2) << "\n";
    note_file(name);
  }

  /// One CSV table; each row joined with commas.
  void write_csv(const std::string& name, const std::string& header,
                 const std::vector<std::vector<double>>& rows) {
    std::ofstream os(path(name));
    if (!os) throw std::runtime_error("cannot open for writing: " + path(name));
    os << header << "\n";
    os.precision(17);
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i)
        os << (i ? "," : "") << row[i];
      os << "\n";
    }
    note_file(name);
  }

  template <typename F>
  auto stage(const std::string& name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      timings_.emplace_back(name, seconds_since(t0));
    } else {
      auto r = body();
      timings_.emplace_back(name, seconds_since(t0));
      return r;
    }
  }

  void finish(Index threads) {
    nlohmann::json j;
    j["tool_version"] = kToolVersion;
    j["config_hash"] = config_hash_;
    j["threads"] = threads;
    nlohmann::json timings = nlohmann::json::array();
    for (const auto& [name, sec] : timings_)
      timings.push_back({{"stage", name}, {"seconds", sec}});
    j["timings"] = std::move(timings);
    nlohmann::json inv = nlohmann::json::array();
    for (const auto& f : files_)
      inv.push_back({{"file", f},
                     {"checksum", io::hex64(io::checksum_file(path(f)))}});
    j["files"] = std::move(inv);
    std::ofstream os(path("run_manifest.json"));
    os << j.dump(2) << "\n";
  }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }

  std::filesystem::path dir_;
  ScenarioConfig cfg_;
  std::string config_hash_;
  std::vector<std::string> files_;
  std::vector<std::pair<std::string, double>> timings_;
};

namespace cli_detail {

inline InstrumentFrame make_frame(const ScenarioConfig& cfg) {
  if (cfg.frame != "pauli") throw ConfigError("frame: unknown frame");
  return pauli_process_frame(cfg.steps);
}

inline FitOptions fit_options(const ScenarioConfig& cfg) {
  FitOptions f;
  f.max_iters = cfg.fit_max_iters;
  f.tol = cfg.fit_tol;
  return f;
}

inline MarginalOptions marginal_options(const ScenarioConfig& cfg) {
  MarginalOptions m;
  m.fit = fit_options(cfg);
  m.consistency_tol = cfg.consistency_tol;
  m.min_shots = cfg.min_shots;
  return m;
}

inline MpoOptions mpo_options(const ScenarioConfig& cfg) {
  MpoOptions m;
  m.cutoff = cfg.mpo_cutoff;
  m.min_singular = cfg.mpo_min_singular;
  return m;
}

/// Refusal points surface as runtime_errors inside the library; rewrap so
/// the CLI can map them to exit code 3.
template <typename F>
auto refusable(F&& body) {
  try {
    return body();
  } catch (const std::runtime_error& e) {
    throw ConditioningError(e.what());
  }
}

/// marginals_from_shadow flags starved windows as invalid_argument; that is
/// a statistics problem of the data, not a config bug, so surface it as a
/// conditioning refusal.
inline MarginalSet fit_marginals(const ShadowSet& shadow, Index window,
                                 const MarginalOptions& opts) {
  try {
    return marginals_from_shadow(shadow, window, opts);
  } catch (const std::invalid_argument& e) {
    if (std::string(e.what()).find("insufficient shots") != std::string::npos)
      throw ConditioningError(e.what());
    throw;
  } catch (const std::runtime_error& e) {
    throw ConditioningError(e.what());
  }
}

inline void emit_shadow(RunContext& ctx, const ShadowSet& shadow) {
  io::save_shadow_records(ctx.path("records.bin"), shadow);
  ctx.note_file("records.bin");
  if (shadow.snapshots.size() <= 10000) {
    io::save_shadow_jsonl(ctx.path("records.jsonl"), shadow);
    ctx.note_file("records.jsonl");
  }
}

inline void emit_mpo(RunContext& ctx, const MpoProcess& mpo,
                     nlohmann::json extra = {}) {
  io::save_mpo(ctx.path("mpo.bin"), mpo);
  ctx.note_file("mpo.bin");
  nlohmann::json j = io::mpo_summary(mpo);
  for (auto& [k, v] : extra.items()) j[k] = v;
  ctx.write_json("mpo_summary.json", j);
}

inline void emit_window_metrics(RunContext& ctx, const MarginalSet& ms) {
  std::vector<std::vector<double>> rows;
  for (const auto& w : window_nm_curves(ms))
    rows.push_back({static_cast<double>(w.start), w.negativity, w.qmi});
  ctx.write_csv("window_metrics.csv", "start,negativity,qmi", rows);
}

}  // namespace cli_detail

// ---------------------------------------------------------------------------
// Subcommand drivers

/// Spin-chain (or idle-neighbors / custom) end-to-end study: idle-dynamics
/// curves, shadow sampling, window marginal estimation, and FCS assembly.
inline void run_spin_chain(const ScenarioConfig& cfg, RunContext& ctx) {
  using namespace cli_detail;
  if (cfg.chain_len < 2)
    throw ConfigError("scenario.chain_len: spin-chain needs >= 2 qubits");
  Rng rng(cfg.seed);
  const ChainDynamics dyn =
      ctx.stage("build", [&] { return build_chain(cfg, rng); });
  ctx.write_json("scenario_summary.json",
                 {{"kind", to_string(cfg.kind)},
                  {"chain_len", cfg.chain_len},
                  {"coupling_angles", dyn.angles},
                  {"env_init", cfg.env_init},
                  {"gate_ensemble",
                   cfg.kind == ScenarioKind::kIdleNeighbors
                       ? "haar (qr of ginibre)"
                       : "exchange"}});

  ctx.stage("idle", [&] {
    const IdleMetrics m = idle_metrics(dyn);
    std::vector<std::vector<double>> rows;
    for (std::size_t s = 0; s < m.purity1.size(); ++s) {
      rows.push_back({0.0, static_cast<double>(s), m.purity1[s]});
      rows.push_back({1.0, static_cast<double>(s), m.purity2[s]});
      rows.push_back({2.0, static_cast<double>(s), m.trace_distance[s]});
    }
    ctx.write_csv("idle_metrics.csv",
                  "metric(0=purity1 1=purity2 2=trace_distance),step,value",
                  rows);
  });

  const InstrumentFrame frame = make_frame(cfg);
  MarginalSet ms;
  nlohmann::json extra;
  if (cfg.exact) {
    if (cfg.steps > kDenseStepCap)
      throw ConfigError("exact: steps exceed the dense cap");
    const ProcessTensor pt = ctx.stage("simulate", [&] {
      return simulate_process(dyn.unitaries, dyn.rho_se, dyn.local_dim);
    });
    io::save_process(ctx.path("process.bin"), pt);
    ctx.note_file("process.bin");
    ms = ctx.stage("marginals", [&] { return exact_marginals(pt, cfg.window); });
    const MpoProcess mpo = ctx.stage("mpo", [&] {
      return refusable([&] {
        return assemble_mpo(build_E(ms), dyn.local_dim, mpo_options(cfg));
      });
    });
    extra["reconstruction_error"] =
        (reconstruct_dense(mpo).choi - pt.choi).norm();
    cli_detail::emit_window_metrics(ctx, ms);
    emit_mpo(ctx, mpo, extra);
  } else {
    Rng srng = rng.split(1);
    const ShadowSet shadow = ctx.stage("sample", [&] {
      return sample_shadow_trajectories(dyn.unitaries, dyn.rho_se,
                                        dyn.local_dim, frame, cfg.shots, srng);
    });
    emit_shadow(ctx, shadow);
    ms = ctx.stage("marginals", [&] {
      return fit_marginals(shadow, cfg.window, marginal_options(cfg));
    });
    const MpoProcess mpo = ctx.stage("mpo", [&] {
      return refusable([&] {
        return assemble_mpo(build_E(ms), dyn.local_dim, mpo_options(cfg));
      });
    });
    cli_detail::emit_window_metrics(ctx, ms);
    emit_mpo(ctx, mpo);
  }
}

/// Pairwise correlated-noise statistics over all ordered step pairs i < j.
inline void run_correlated_noise(const ScenarioConfig& cfg, RunContext& ctx) {
  using namespace cli_detail;
  if (cfg.steps < 2) throw ConfigError("scenario.steps: corr-noise needs k >= 2");
  Rng rng(cfg.seed);
  const ChainDynamics dyn =
      ctx.stage("build", [&] { return build_chain(cfg, rng); });

  std::vector<PairStats> stats;
  if (cfg.exact) {
    if (cfg.steps > kDenseStepCap)
      throw ConfigError("exact: steps exceed the dense cap");
    const ProcessTensor pt = ctx.stage("simulate", [&] {
      return simulate_process(dyn.unitaries, dyn.rho_se, dyn.local_dim);
    });
    ctx.stage("pairs", [&] {
      for (Index i = 1; i <= cfg.steps; ++i)
        for (Index j = i + 1; j <= cfg.steps; ++j)
          stats.push_back(pair_stats_exact(pt, i, j));
    });
  } else {
    const InstrumentFrame frame = make_frame(cfg);
    Rng srng = rng.split(1);
    const ShadowSet shadow = ctx.stage("sample", [&] {
      return sample_shadow_trajectories(dyn.unitaries, dyn.rho_se,
                                        dyn.local_dim, frame, cfg.shots, srng);
    });
    emit_shadow(ctx, shadow);
    Rng brng = rng.split(2);
    ctx.stage("pairs", [&] {
      for (Index i = 1; i <= cfg.steps; ++i)
        for (Index j = i + 1; j <= cfg.steps; ++j)
          stats.push_back(pair_stats_from_shadow(shadow, i, j, 20, brng));
    });
  }
  std::vector<std::vector<double>> rows;
  for (const auto& s : stats)
    rows.push_back({static_cast<double>(s.i), static_cast<double>(s.j),
                    s.negativity, s.negativity_sigma, s.trace_distance,
                    s.trace_distance_sigma, s.zz, s.zz_sigma, s.xx, s.xx_sigma,
                    s.zx, s.zx_sigma, s.xz, s.xz_sigma});
  ctx.write_csv("pair_stats.csv",
                "i,j,negativity,negativity_sigma,trace_distance,"
                "trace_distance_sigma,zz,zz_sigma,xx,xx_sigma,zx,zx_sigma,"
                "xz,xz_sigma",
                rows);
}

/// Hellinger cross-validation of an existing MPO artifact against fresh
/// samples of the configured scenario.
inline void run_validation(const ScenarioConfig& cfg, RunContext& ctx,
                           const std::string& mpo_path) {
  using namespace cli_detail;
  if (mpo_path.empty())
    throw ConfigError("records: validate needs the MPO artifact path");
  MpoProcess mpo;
  try {
    mpo = io::load_mpo(mpo_path);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot load MPO artifact: ") + e.what());
  }
  if (mpo.steps != cfg.steps)
    throw ConfigError("scenario.steps: does not match the MPO artifact");
  Rng rng(cfg.seed);
  const ChainDynamics dyn =
      ctx.stage("build", [&] { return build_chain(cfg, rng); });
  const InstrumentFrame frame = make_frame(cfg);
  Rng vrng = rng.split(7);
  const std::vector<ValidationRow> rows = ctx.stage("validate", [&] {
    return validate_mpo(mpo, dyn, frame, cfg.val_sequences,
                        cfg.exact ? 0 : cfg.val_shots, cfg.val_max_window,
                        vrng);
  });
  std::vector<std::vector<double>> table;
  for (const auto& r : rows)
    table.push_back({static_cast<double>(r.sequence),
                     static_cast<double>(r.window_len),
                     static_cast<double>(r.start), r.fidelity});
  ctx.write_csv("validation.csv", "sequence,window_len,start,fidelity", table);

  nlohmann::json summary;
  for (Index len = 1; len <= cfg.val_max_window; ++len) {
    std::vector<double> f;
    for (const auto& r : rows)
      if (r.window_len == len) f.push_back(r.fidelity);
    if (f.empty()) continue;
    std::sort(f.begin(), f.end());
    summary["median_fidelity"][std::to_string(len)] = f[(f.size() - 1) / 2];
  }
  ctx.write_json("validation_summary.json", summary);
}

/// Bootstrap-instrument characterization and IC basis construction.
inline void run_characterize(const ScenarioConfig& cfg, RunContext& ctx) {
  using namespace cli_detail;
  BootstrapSpec spec;
  spec.gamma = cfg.gamma;
  const CharacterizedInstrument ci =
      ctx.stage("characterize", [&] { return characterize(spec); });
  const IcBasis basis = ctx.stage("ic-basis", [&] {
    return refusable([&] { return ic_basis(ci); });
  });

  nlohmann::json j;
  j["gamma"] = cfg.gamma;
  nlohmann::json params = nlohmann::json::array();
  for (const auto& t : ci.basis_params)
    params.push_back({t[0], t[1], t[2]});
  j["basis_params"] = std::move(params);
  j["ic"] = {{"rank", basis.rank},
             {"smallest_sv", basis.smallest_sv},
             {"condition", basis.condition}};
  nlohmann::json elems = nlohmann::json::array();
  for (const auto& e : basis.elements)
    elems.push_back(
        {{"theta", e.theta}, {"phi", e.phi}, {"lambda", e.lambda}, {"x", e.x}});
  j["ic_elements"] = std::move(elems);
  if (std::abs(cfg.gamma - M_PI / 4) < 1e-12) {
    const PtmCheck pc = ptm_check(ci, 0.0, 0.0, 0.0);
    j["ptm_check"] = {{"theta", 0.0},
                      {"phi", 0.0},
                      {"lambda", 0.0},
                      {"computed", pc.computed},
                      {"reference", pc.reference},
                      {"max_deviation", pc.max_deviation}};
  }
  ctx.write_json("instrument.json", j);

  // binary container with the 16 element Chois
  {
    std::ofstream os(ctx.path("ic_basis.bin"), std::ios::binary);
    io::detail::write_magic(os, "PTIC");
    io::detail::write_pod<std::uint32_t>(
        os, static_cast<std::uint32_t>(basis.chois.size()));
    for (const auto& c : basis.chois) io::detail::write_matrix(os, c.matrix);
    ctx.note_file("ic_basis.bin");
  }
}

/// Full MLE process-tensor estimate from an existing shadow record file.
inline void run_estimate(const ScenarioConfig& cfg, RunContext& ctx,
                         const std::string& records_path) {
  using namespace cli_detail;
  if (records_path.empty())
    throw ConfigError("records: estimate needs a shadow record file");
  if (cfg.steps > kDenseStepCap)
    throw ConfigError("scenario.steps: dense MLE exceeds the step cap");
  const InstrumentFrame frame = make_frame(cfg);
  ShadowSet shadow;
  try {
    shadow = io::load_shadow_records(records_path, frame);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot load records: ") + e.what());
  }
  const MleResult res = ctx.stage("fit", [&] {
    MleProblem problem = problem_from_frame(
        frame, counts_from_shadow(shadow),
        maximally_mixed_process(cfg.steps, frame.local_dim));
    return fit(problem, fit_options(cfg));
  });
  io::save_process(ctx.path("estimate.bin"), res.estimate);
  ctx.note_file("estimate.bin");
  ctx.write_json("fit_log.json", io::fit_log(res));
}

/// Window marginal estimation plus FCS assembly from an existing shadow
/// record file.
inline void run_fcs(const ScenarioConfig& cfg, RunContext& ctx,
                    const std::string& records_path) {
  using namespace cli_detail;
  if (records_path.empty())
    throw ConfigError("records: fcs needs a shadow record file");
  const InstrumentFrame frame = make_frame(cfg);
  ShadowSet shadow;
  try {
    shadow = io::load_shadow_records(records_path, frame);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot load records: ") + e.what());
  }
  const MarginalSet ms = ctx.stage("marginals", [&] {
    return fit_marginals(shadow, cfg.window, marginal_options(cfg));
  });
  const MpoProcess mpo = ctx.stage("mpo", [&] {
    return refusable([&] {
      return assemble_mpo(build_E(ms), frame.local_dim, mpo_options(cfg));
    });
  });
  cli_detail::emit_window_metrics(ctx, ms);
  emit_mpo(ctx, mpo);
}

}  // namespace ptshadow::cli

#endif  // PTSHADOW_CLI_HPP
