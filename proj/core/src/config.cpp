#include "cowsec/config.hpp"

#include <fstream>
#include <set>

namespace cowsec {

namespace {

using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw ValidationError("config: " + path + ": " + why);
}

void require_keys(const ordered_json& j, const std::string& path,
                  const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) fail(path + "." + key, "unknown key");
  }
}

double get_number(const ordered_json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) fail(path + "." + key, "missing required field");
  if (!j.at(key).is_number()) fail(path + "." + key, "expected a number");
  return j.at(key).get<double>();
}

double get_number_or(const ordered_json& j, const std::string& path, const std::string& key,
                     double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) fail(path + "." + key, "expected a number");
  return j.at(key).get<double>();
}

std::int64_t get_integer(const ordered_json& j, const std::string& path, const std::string& key,
                         std::int64_t fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) fail(path + "." + key, "expected an integer");
  return j.at(key).get<std::int64_t>();
}

std::string get_string_or(const ordered_json& j, const std::string& path, const std::string& key,
                          const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) fail(path + "." + key, "expected a string");
  return j.at(key).get<std::string>();
}

ProtocolParams parse_protocol(const ordered_json& j) {
  require_keys(j, "protocol", {"alpha2", "f", "t_b", "eta", "delta_t"});
  ProtocolParams p;
  p.alpha2 = get_number(j, "protocol", "alpha2");
  p.f = get_number(j, "protocol", "f");
  p.t_b = get_number(j, "protocol", "t_b");
  p.eta = get_number(j, "protocol", "eta");
  p.delta_t = get_number_or(j, "protocol", "delta_t", 0.0);
  p.validate();
  return p;
}

AttackParams parse_attack(const ordered_json& j) {
  require_keys(j, "attack", {"q_inc", "q_p", "m_min", "beta2"});
  AttackParams a;
  a.q_inc = get_number(j, "attack", "q_inc");
  a.q_p = get_number(j, "attack", "q_p");
  if (!j.contains("m_min")) fail("attack.m_min", "missing required field");
  a.m_min = static_cast<int>(get_integer(j, "attack", "m_min", 1));
  a.beta2 = get_number(j, "attack", "beta2");
  a.validate();
  return a;
}

OptimizationTarget parse_target(const ordered_json& j) {
  require_keys(j, "target", {"objective", "q_th", "v_th", "undefined_visibility"});
  OptimizationTarget t;
  const std::string obj = get_string_or(j, "target", "objective", "max_min_visibility");
  if (obj == "max_min_visibility") t.objective = Objective::MaxMinVisibility;
  else if (obj == "max_average_visibility") t.objective = Objective::MaxAverageVisibility;
  else fail("target.objective", "expected max_min_visibility or max_average_visibility");
  t.q_th = get_number(j, "target", "q_th");
  t.v_th = get_number(j, "target", "v_th");
  const std::string pol = get_string_or(j, "target", "undefined_visibility", "perfect");
  if (pol == "perfect") t.undefined_policy = UndefinedVisibilityPolicy::TreatAsPerfect;
  else if (pol == "fail") t.undefined_policy = UndefinedVisibilityPolicy::Fail;
  else fail("target.undefined_visibility", "expected perfect or fail");
  t.validate();
  return t;
}

SimOptions parse_sim(const ordered_json& j) {
  require_keys(j, "sim", {"n_signals", "seed", "replicas", "estimator", "v_ave_weighting"});
  SimOptions s;
  s.n_signals = get_integer(j, "sim", "n_signals", s.n_signals);
  const std::int64_t seed = get_integer(j, "sim", "seed", 1);
  if (seed < 0) fail("sim.seed", "must be nonnegative");
  s.seed = static_cast<std::uint64_t>(seed);
  s.replicas = static_cast<int>(get_integer(j, "sim", "replicas", 1));
  const std::string est = get_string_or(j, "sim", "estimator", "auto");
  if (est == "auto") s.estimator = Estimator::Auto;
  else if (est == "sampled") s.estimator = Estimator::Sampled;
  else if (est == "marginal") s.estimator = Estimator::Marginal;
  else fail("sim.estimator", "expected auto, sampled or marginal");
  if (j.contains("v_ave_weighting")) {
    const auto& w = j.at("v_ave_weighting");
    if (w.is_string()) {
      const std::string mode = w.get<std::string>();
      if (mode == "occurrence") s.v_ave.mode = VAveWeighting::Occurrence;
      else if (mode == "uniform") s.v_ave.mode = VAveWeighting::Uniform;
      else fail("sim.v_ave_weighting", "expected occurrence, uniform, or a map");
    } else if (w.is_object()) {
      require_keys(w, "sim.v_ave_weighting", {"d", "01", "0d", "d1", "dd"});
      s.v_ave.mode = VAveWeighting::Custom;
      for (SeqKind k : kAllSeqKinds) {
        const double v = get_number(w, "sim.v_ave_weighting", seq_name(k));
        if (!(v >= 0.0)) fail(std::string("sim.v_ave_weighting.") + seq_name(k), "must be >= 0");
        s.v_ave.custom[static_cast<int>(k)] = v;
      }
    } else {
      fail("sim.v_ave_weighting", "expected occurrence, uniform, or a map");
    }
  }
  s.validate();
  return s;
}

SweepConfig parse_sweep(const ordered_json& j) {
  require_keys(j, "sweep", {"eta_grid", "gain_grid"});
  SweepConfig s;
  auto grid = [&](const std::string& key, std::vector<double>& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_array()) fail("sweep." + key, "expected an array of numbers");
    for (const auto& v : j.at(key)) {
      if (!v.is_number()) fail("sweep." + key, "expected an array of numbers");
      out.push_back(v.get<double>());
    }
    if (out.empty()) fail("sweep." + key, "must not be empty");
  };
  grid("eta_grid", s.eta_grid);
  grid("gain_grid", s.gain_grid);
  return s;
}

ExperimentPoint parse_experiment(const ordered_json& j, const std::string& path) {
  require_keys(j, path, {"label", "gain", "qber", "visibilities", "v_ave", "alpha2", "f"});
  ExperimentPoint e;
  e.label = get_string_or(j, path, "label", "");
  if (e.label.empty()) fail(path + ".label", "missing required field");
  e.gain = get_number(j, path, "gain");
  e.qber = get_number(j, path, "qber");
  e.alpha2 = get_number(j, path, "alpha2");
  e.f = get_number(j, path, "f");
  if (j.contains("visibilities")) {
    const auto& vis = j.at("visibilities");
    require_keys(vis, path + ".visibilities", {"d", "01", "0d", "d1", "dd"});
    for (SeqKind k : kAllSeqKinds)
      if (vis.contains(seq_name(k)))
        e.visibilities[k] = get_number(vis, path + ".visibilities", seq_name(k));
  }
  if (j.contains("v_ave")) e.v_ave = get_number(j, path, "v_ave");
  // Range validation is deferred to check_experiment so a malformed point
  // fails at row level while the remaining rows are still processed.
  return e;
}

OutputConfig parse_output(const ordered_json& j) {
  require_keys(j, "output", {"directory", "format"});
  OutputConfig o;
  o.directory = get_string_or(j, "output", "directory", o.directory);
  const std::string fmt = get_string_or(j, "output", "format", "csv");
  if (fmt == "csv") o.format = OutputFormat::Csv;
  else if (fmt == "json") o.format = OutputFormat::Json;
  else fail("output.format", "expected csv or json");
  return o;
}

}  // namespace

RunConfig parse_config(const ordered_json& j) {
  require_keys(j, "config",
               {"protocol", "attack", "target", "budget", "sim", "sweep", "experiments", "output"});
  if (!j.contains("protocol")) fail("config.protocol", "missing required section");

  RunConfig cfg;
  cfg.protocol = parse_protocol(j.at("protocol"));
  if (j.contains("attack")) cfg.attack = parse_attack(j.at("attack"));
  if (j.contains("target")) cfg.target = parse_target(j.at("target"));
  cfg.budget = static_cast<int>(get_integer(j, "config", "budget", cfg.budget));
  if (cfg.budget < 1) fail("config.budget", "must be >= 1");
  if (j.contains("sim")) cfg.sim = parse_sim(j.at("sim"));
  if (j.contains("sweep")) cfg.sweep = parse_sweep(j.at("sweep"));
  if (j.contains("experiments")) {
    if (!j.at("experiments").is_array()) fail("config.experiments", "expected an array");
    int idx = 0;
    for (const auto& e : j.at("experiments"))
      cfg.experiments.push_back(parse_experiment(e, "experiments[" + std::to_string(idx++) + "]"));
  }
  if (j.contains("output")) cfg.output = parse_output(j.at("output"));
  cfg.resolved = j;
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open file: " + path);
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config: " + path + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace cowsec
