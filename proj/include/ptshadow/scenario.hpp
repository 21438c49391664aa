/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#ifndef PTSHADOW_SCENARIO_HPP
#define PTSHADOW_SCENARIO_HPP

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptshadow/gates.hpp"
#include "ptshadow/metrics.hpp"
#include "ptshadow/process.hpp"
#include "ptshadow/rng.hpp"
#include "ptshadow/sampling.hpp"

namespace ptshadow {

/// Invalid or inconsistent configuration; mapped to exit code 2 by the CLI.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ScenarioKind { kSpinChain, kIdleNeighbors, kCustomUnitaries };

inline std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kSpinChain: return "spin_chain";
    case ScenarioKind::kIdleNeighbors: return "idle_neighbors";
    case ScenarioKind::kCustomUnitaries: return "custom_unitaries";
  }
  return "?";
}

inline ScenarioKind scenario_kind_from_string(const std::string& s) {
  if (s == "spin_chain") return ScenarioKind::kSpinChain;
  if (s == "idle_neighbors") return ScenarioKind::kIdleNeighbors;
  if (s == "custom_unitaries") return ScenarioKind::kCustomUnitaries;
  throw ConfigError("scenario.kind: unknown kind '" + s + "'");
}

/// One experiment description; parsed from the versioned JSON config file.
struct ScenarioConfig {
  int version = 1;
  ScenarioKind kind = ScenarioKind::kSpinChain;
  Index chain_len = 2;       // qubits including the system (qubit 0)
  Index steps = 4;           // k
  double alpha_max = M_PI / 4;  // coupling angle ~ uniform[0, alpha_max]
  std::string env_init = "zeros";
  std::string frame = "pauli";
  Index window = 2;          // ell
  std::size_t shots = 100000;
  std::uint64_t seed = 1;
  std::string out = "out";
  bool exact = false;        // infinite-shot mode where supported

  std::vector<Matrix> custom_unitaries;  // kind == custom_unitaries

  // validation study
  Index val_sequences = 20;
  std::size_t val_shots = 16384;
  Index val_max_window = 5;

  // tolerance overrides
  double mpo_cutoff = 1e-6;
  double mpo_min_singular = 1e-9;
  double consistency_tol = 1e-2;
  std::size_t min_shots = 1000;
  Index fit_max_iters = 250;
  double fit_tol = 1e-10;

  // artifact inputs for estimate/fcs on existing data
  std::string records;

  // characterize-instrument
  double gamma = M_PI / 4;

  void validate() const {
    if (version != 1)
      throw ConfigError("version: unsupported config version " +
                        std::to_string(version));
    if (chain_len < 1) throw ConfigError("scenario.chain_len: must be >= 1");
    if (steps < 1) throw ConfigError("scenario.steps: must be >= 1");
    if (alpha_max < 0.0)
      throw ConfigError("scenario.alpha_max: must be >= 0");
    if (env_init != "zeros" && env_init != "mixed")
      throw ConfigError("scenario.env_init: expected 'zeros' or 'mixed'");
    if (frame != "pauli")
      throw ConfigError("frame: only 'pauli' is built in");
    if (window < 1 || window > steps)
      throw ConfigError("window: need 1 <= window <= steps");
    if (!exact && shots == 0) throw ConfigError("shots: must be > 0");
    if (kind == ScenarioKind::kCustomUnitaries) {
      if (static_cast<Index>(custom_unitaries.size()) != steps)
        throw ConfigError(
            "scenario.custom_unitaries: need one unitary per step");
      const Index dim = Index{1} << chain_len;
      for (const auto& u : custom_unitaries)
        if (u.rows() != dim || !gates::is_unitary(u, 1e-8))
          throw ConfigError(
              "scenario.custom_unitaries: entries must be unitary with "
              "dimension 2^chain_len");
    }
    if (val_sequences < 1) throw ConfigError("validation.sequences: >= 1");
    if (val_max_window < 1) throw ConfigError("validation.max_window: >= 1");
  }
};

namespace scenario_detail {

inline Matrix json_to_matrix(const nlohmann::json& j, const std::string& where) {
  if (!j.contains("re") || !j.contains("im"))
    throw ConfigError(where + ": expected {re, im} row-major arrays");
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  const Index n = static_cast<Index>(re.size());
  Matrix m(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c)
      m(r, c) = Complex(re[static_cast<std::size_t>(r)]
                          [static_cast<std::size_t>(c)].get<double>(),
                        im[static_cast<std::size_t>(r)]
                          [static_cast<std::size_t>(c)].get<double>());
  return m;
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace scenario_detail

inline ScenarioConfig config_from_json(const nlohmann::json& j) {
  using scenario_detail::maybe;
  ScenarioConfig c;
  try {
    maybe(j, "version", c.version);
    if (j.contains("scenario")) {
      const auto& s = j.at("scenario");
      if (s.contains("kind"))
        c.kind = scenario_kind_from_string(s.at("kind").get<std::string>());
      maybe(s, "chain_len", c.chain_len);
      maybe(s, "steps", c.steps);
      maybe(s, "alpha_max", c.alpha_max);
      maybe(s, "env_init", c.env_init);
      if (s.contains("custom_unitaries"))
        for (const auto& u : s.at("custom_unitaries"))
          c.custom_unitaries.push_back(scenario_detail::json_to_matrix(
              u, "scenario.custom_unitaries"));
    }
    maybe(j, "frame", c.frame);
    maybe(j, "window", c.window);
    maybe(j, "shots", c.shots);
    maybe(j, "seed", c.seed);
    maybe(j, "out", c.out);
    maybe(j, "exact", c.exact);
    maybe(j, "records", c.records);
    maybe(j, "gamma", c.gamma);
    if (j.contains("validation")) {
      const auto& v = j.at("validation");
      maybe(v, "sequences", c.val_sequences);
      maybe(v, "shots_per_sequence", c.val_shots);
      maybe(v, "max_window", c.val_max_window);
    }
    if (j.contains("mpo")) {
      maybe(j.at("mpo"), "cutoff", c.mpo_cutoff);
      maybe(j.at("mpo"), "min_singular", c.mpo_min_singular);
    }
    if (j.contains("marginals")) {
      maybe(j.at("marginals"), "consistency_tol", c.consistency_tol);
      maybe(j.at("marginals"), "min_shots", c.min_shots);
    }
    if (j.contains("fit")) {
      maybe(j.at("fit"), "max_iters", c.fit_max_iters);
      maybe(j.at("fit"), "tol", c.fit_tol);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["version"] = c.version;
  j["scenario"] = {{"kind", to_string(c.kind)},
                   {"chain_len", c.chain_len},
                   {"steps", c.steps},
                   {"alpha_max", c.alpha_max},
                   {"env_init", c.env_init}};
  j["frame"] = c.frame;
  j["window"] = c.window;
  j["shots"] = c.shots;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["exact"] = c.exact;
  j["validation"] = {{"sequences", c.val_sequences},
                     {"shots_per_sequence", c.val_shots},
                     {"max_window", c.val_max_window}};
  j["mpo"] = {{"cutoff", c.mpo_cutoff}, {"min_singular", c.mpo_min_singular}};
  j["marginals"] = {{"consistency_tol", c.consistency_tol},
                    {"min_shots", c.min_shots}};
  j["fit"] = {{"max_iters", c.fit_max_iters}, {"tol", c.fit_tol}};
  if (!c.records.empty()) j["records"] = c.records;
  j["gamma"] = c.gamma;
  return j;
}

// ---------------------------------------------------------------------------
// Chain construction

/// Embed a two-qubit gate acting on qubits (pos, pos+1) of an n-qubit chain
/// (qubit 0 is the most significant factor).
inline Matrix embed_pair_gate(const Matrix& g, Index pos, Index n) {
  if (g.rows() != 4 || pos < 0 || pos + 1 >= n)
    throw std::invalid_argument("embed_pair_gate: bad position");
  const Index left = Index{1} << pos;
  const Index right = Index{1} << (n - pos - 2);
  return kron(kron(identity(left), g), identity(right));
}

/// A realized dynamics instance: per-step full-chain unitaries plus the
/// joint system-environment initial state (system = qubit 0).
struct ChainDynamics {
  std::vector<Matrix> unitaries;  // 2^n x 2^n, one per step
  Matrix rho_se;                  // on (S (x) E)
  Index local_dim = 2;
  Index env_dim = 1;
  std::vector<double> angles;  // coupling angles drawn, spin_chain only
};

/// Draw the scenario's step unitaries from the config. spin_chain applies an
/// exchange rotation exp(-i a (XX+YY+ZZ)/2) on every neighboring pair with a
/// fresh angle a ~ uniform[0, alpha_max] per bond per step; idle_neighbors
/// applies Haar-random SU(4) gates (QR of Ginibre) on every neighboring pair.
inline ChainDynamics build_chain(const ScenarioConfig& cfg, Rng& rng) {
  ChainDynamics dyn;
  const Index n = cfg.chain_len;
  const Index dim = Index{1} << n;
  dyn.env_dim = dim / 2;
  if (cfg.env_init == "zeros") {
    Matrix env = Matrix::Zero(dyn.env_dim, dyn.env_dim);
    env(0, 0) = 1.0;
    dyn.rho_se = kron(gates::projector(gates::ket0()), env);
  } else {
    dyn.rho_se = kron(gates::projector(gates::ket0()),
                      identity(dyn.env_dim) / static_cast<double>(dyn.env_dim));
  }
  if (cfg.kind == ScenarioKind::kCustomUnitaries) {
    dyn.unitaries = cfg.custom_unitaries;
    return dyn;
  }
  for (Index step = 0; step < cfg.steps; ++step) {
    Matrix u = identity(dim);
    for (Index b = 0; b + 1 < n; ++b) {
      Matrix g;
      if (cfg.kind == ScenarioKind::kSpinChain) {
        const double a = rng.uniform(0.0, cfg.alpha_max);
        dyn.angles.push_back(a);
        g = gates::exchange(a);
      } else {
        g = rng.haar_unitary(4);
      }
      u = embed_pair_gate(g, b, n) * u;
    }
    if (n == 1) {
      // degenerate single-qubit chain: Markov by construction
      u = (cfg.kind == ScenarioKind::kSpinChain) ? identity(2)
                                                 : rng.haar_unitary(2);
    }
    dyn.unitaries.push_back(u);
  }
  return dyn;
}

// ---------------------------------------------------------------------------
// Idle-dynamics curves

struct IdleMetrics {
  std::vector<double> purity1;         // system purity per step, rho1 = |0><0|
  std::vector<double> purity2;         // rho2 = |i+><i+|
  std::vector<double> trace_distance;  // between the two evolved system states
};

/// Evolve the chain with no interventions and track the reduced system
/// state for the two reference initializations. Entry 0 is the initial
/// state, entry j the state after step j.
inline IdleMetrics idle_metrics(const ChainDynamics& dyn) {
  const Index d = dyn.local_dim;
  const Index de = dyn.env_dim;
  const Matrix env = partial_trace(
      dyn.rho_se, LegShape({d, de}, {"s", "e"}), {"e"});
  const LegShape shape({d, de}, {"s", "e"});
  Matrix r1 = kron(gates::projector(gates::ket0()), env);
  Matrix r2 = kron(gates::projector(gates::ket_iplus()), env);
  IdleMetrics m;
  const auto record = [&](const Matrix& a, const Matrix& b) {
    const Matrix s1 = partial_trace(a, shape, {"s"});
    const Matrix s2 = partial_trace(b, shape, {"s"});
    m.purity1.push_back(purity(s1));
    m.purity2.push_back(purity(s2));
    m.trace_distance.push_back(trace_distance(s1, s2));
  };
  record(r1, r2);
  for (const auto& u : dyn.unitaries) {
    r1 = u * r1 * u.adjoint();
    r2 = u * r2 * u.adjoint();
    record(r1, r2);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Fixed-setting instrument sequences

/// The two-outcome instrument of one frame setting (elements unweighted).
inline Instrument setting_instrument(const StepFrame& sf, Index setting) {
  Instrument inst;
  for (std::size_t e = 0; e < sf.elements.size(); ++e)
    if (sf.setting[e] == setting) inst.elements.push_back(sf.elements[e]);
  if (inst.elements.empty())
    throw std::invalid_argument("setting_instrument: unknown setting");
  return inst;
}

/// POVM effects of one terminal setting.
inline std::vector<Matrix> setting_povm(const TerminalFrame& tf,
                                        Index setting) {
  std::vector<Matrix> povm;
  for (std::size_t e = 0; e < tf.effects.size(); ++e)
    if (tf.setting[e] == setting) povm.push_back(tf.effects[e]);
  if (povm.empty()) throw std::invalid_argument("setting_povm: unknown setting");
  return povm;
}

namespace scenario_detail {

/// Apply a CP map (Choi on the system) to a system+environment density
/// matrix via its Kraus operators.
inline Matrix apply_on_system(const ChoiOperator& c, const Matrix& rho,
                              Index d, Index de) {
  const auto ks = detail::kraus_from_choi(c);
  Matrix out = Matrix::Zero(rho.rows(), rho.cols());
  for (const auto& k : ks) {
    const Matrix ext = kron(k, identity(de));
    out += ext * rho * ext.adjoint();
  }
  return out;
}

}  // namespace scenario_detail

/// Exact joint distribution of the outcomes observed in slots
/// [window_start, window_start + window_len) when the fixed per-slot
/// instruments `controls` are applied at every step; outcomes outside the
/// window are summed over. If the window reaches the final slot the terminal
/// POVM outcome is appended as the fastest index; otherwise the final state
/// is traced. Flat index: earliest window slot slowest.
inline std::vector<double> sequence_distribution(
    const ChainDynamics& dyn, const std::vector<Instrument>& controls,
    const std::vector<Matrix>& terminal_povm, Index window_start,
    Index window_len) {
  const Index k = static_cast<Index>(dyn.unitaries.size());
  const Index d = dyn.local_dim;
  const Index de = dyn.env_dim;
  if (static_cast<Index>(controls.size()) != k)
    throw std::invalid_argument("sequence_distribution: one instrument per slot");
  if (window_start < 0 || window_len < 1 || window_start + window_len > k + 1)
    throw std::invalid_argument("sequence_distribution: window out of range");
  const bool with_terminal = (window_start + window_len == k + 1);
  const Index slot_len = with_terminal ? window_len - 1 : window_len;

  std::vector<Matrix> branches{dyn.rho_se};
  for (Index j = 0; j < k; ++j) {
    const Instrument& inst = controls[static_cast<std::size_t>(j)];
    const bool open = (j >= window_start && j < window_start + slot_len);
    std::vector<Matrix> next;
    next.reserve(branches.size() * (open ? inst.elements.size() : 1));
    for (const auto& rho : branches) {
      if (open) {
        for (const auto& el : inst.elements)
          next.push_back(scenario_detail::apply_on_system(el, rho, d, de));
      } else {
        Matrix sum = Matrix::Zero(rho.rows(), rho.cols());
        for (const auto& el : inst.elements)
          sum += scenario_detail::apply_on_system(el, rho, d, de);
        next.push_back(std::move(sum));
      }
    }
    branches = std::move(next);
    const Matrix& u = dyn.unitaries[static_cast<std::size_t>(j)];
    for (auto& rho : branches) rho = u * rho * u.adjoint();
  }

  std::vector<double> dist;
  dist.reserve(branches.size() * (with_terminal ? terminal_povm.size() : 1));
  for (const auto& rho : branches) {
    if (with_terminal) {
      for (const auto& eff : terminal_povm)
        dist.push_back(
            std::real((kron(eff, identity(de)) * rho).trace()));
    } else {
      dist.push_back(std::real(rho.trace()));
    }
  }
  for (double& p : dist) p = std::max(0.0, p);
  return dist;
}

/// Multinomial sample of a distribution; returns per-cell counts.
inline std::vector<double> sample_counts(const std::vector<double>& dist,
                                         std::size_t shots, Rng& rng) {
  std::vector<double> counts(dist.size(), 0.0);
  for (std::size_t s = 0; s < shots; ++s)
    counts[rng.sample_discrete(dist)] += 1.0;
  return counts;
}

}  // namespace ptshadow

#endif  // PTSHADOW_SCENARIO_HPP
