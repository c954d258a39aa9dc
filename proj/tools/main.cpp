#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "cowsec/config.hpp"
#include "cowsec/report.hpp"

namespace {

using namespace cowsec;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitSolver = 4;

struct CliOverrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> format;
  std::optional<int> replicas;
};

RunConfig load_with_overrides(const CliOverrides& ov) {
  RunConfig cfg = load_config(ov.config_path);
  if (ov.seed) {
    cfg.sim.seed = *ov.seed;
    cfg.resolved["sim"]["seed"] = *ov.seed;
  }
  if (ov.replicas) {
    if (*ov.replicas < 1) throw ValidationError("--replicas must be >= 1");
    cfg.sim.replicas = *ov.replicas;
    cfg.resolved["sim"]["replicas"] = *ov.replicas;
  }
  if (ov.out_dir) {
    cfg.output.directory = *ov.out_dir;
    cfg.resolved["output"]["directory"] = *ov.out_dir;
  }
  if (ov.format) {
    if (*ov.format == "csv") cfg.output.format = OutputFormat::Csv;
    else if (*ov.format == "json") cfg.output.format = OutputFormat::Json;
    else throw ValidationError("--format must be csv or json");
    cfg.resolved["output"]["format"] = *ov.format;
  }
  cfg.sim.validate();
  return cfg;
}

std::string artifact_path(const RunConfig& cfg, const std::string& stem) {
  fs::create_directories(cfg.output.directory);
  const char* ext = cfg.output.format == OutputFormat::Csv ? ".csv" : ".json";
  return (fs::path(cfg.output.directory) / (stem + ext)).string();
}

void emit(const RunConfig& cfg, const std::string& command, const std::string& stem,
          const Table& table, const nlohmann::ordered_json& payload) {
  const std::string path = artifact_path(cfg, stem);
  if (cfg.output.format == OutputFormat::Csv) {
    write_csv(path, artifact_header(command, cfg), table);
  } else {
    nlohmann::ordered_json root;
    root["command"] = command;
    root["config"] = cfg.resolved;
    root["seed"] = cfg.sim.seed;
    root["result"] = payload;
    write_json_file(path, root);
  }
  std::cout << "wrote " << path << "\n";
}

std::string vacuous_flags(const ObservedStats& st) {
  std::string flags;
  for (SeqKind s : kAllSeqKinds) {
    const SeqStats& q = st.of(s);
    if (!q.visibility) {
      if (!flags.empty()) flags += " ";
      flags += std::string(q.occurrences == 0 ? "missing:" : "vacuous:") + seq_name(s);
    }
  }
  return flags;
}

int cmd_simulate(const RunConfig& cfg) {
  if (!cfg.attack)
    throw ValidationError("simulate requires a fixed attack section (q_inc, q_p, m_min, beta2)");
  if (cfg.target)
    throw ValidationError("simulate takes a fixed attack, not an optimization request; drop target");
  MeasurementFamily family(cfg.protocol);
  const ObservedStats st =
      run_attack_sim(cfg.protocol, *cfg.attack, family.at(cfg.attack->q_inc), cfg.sim);
  emit(cfg, "simulate", "stats", stats_table(st), stats_to_json(st));
  return kExitOk;
}

int cmd_frontier(const RunConfig& cfg) {
  if (!cfg.target) throw ValidationError("frontier requires a target section");
  if (cfg.attack)
    throw ValidationError("frontier optimizes the attack; drop the fixed attack section");
  if (cfg.sweep.gain_grid.empty()) throw ValidationError("frontier requires sweep.gain_grid");

  std::vector<double> gains = cfg.sweep.gain_grid;
  std::sort(gains.begin(), gains.end(), std::greater<>());
  gains.erase(std::unique(gains.begin(), gains.end()), gains.end());

  const std::vector<OptimizeResult> results =
      frontier_sweep(cfg.protocol, gains, *cfg.target, cfg.budget, cfg.sim.seed, cfg.sim);

  Table t;
  t.columns = {"gain", "achieved_gain", "qber", "V_d", "V_01", "V_0d", "V_d1", "V_dd",
               "V_ave", "q_inc", "q_p", "m_min", "beta2", "status"};
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  int feasible_rows = 0;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const double gain = gains[i];
    const OptimizeResult& r = results[i];
    nlohmann::ordered_json row;
    row["gain"] = gain;
    if (!r.feasible) {
      t.rows.push_back({format_double(gain), "", "", "", "", "", "", "", "", "", "", "", "",
                        "infeasible max_gain=" + format_double(r.max_achievable_gain)});
      row["status"] = "infeasible";
      row["max_achievable_gain"] = r.max_achievable_gain;
      rows.push_back(row);
      continue;
    }
    ++feasible_rows;
    const ObservedStats& st = r.stats;
    auto vis = [&](SeqKind s) {
      const SeqStats& q = st.of(s);
      return q.visibility ? format_double(*q.visibility) : std::string("1");
    };
    const std::string flags = vacuous_flags(st);
    t.rows.push_back({format_double(gain), format_double(st.gain_bit),
                      format_double(st.qber.value_or(0.0)), vis(SeqKind::D), vis(SeqKind::S01),
                      vis(SeqKind::S0d), vis(SeqKind::Sd1), vis(SeqKind::Sdd),
                      st.v_ave ? format_double(*st.v_ave) : std::string("1"),
                      format_double(r.params.q_inc), format_double(r.params.q_p),
                      std::to_string(r.params.m_min), format_double(r.params.beta2),
                      flags.empty() ? "ok" : flags});
    row["status"] = "ok";
    row["attack"] = {{"q_inc", r.params.q_inc},
                     {"q_p", r.params.q_p},
                     {"m_min", r.params.m_min},
                     {"beta2", r.params.beta2}};
    row["stats"] = stats_to_json(st);
    rows.push_back(row);
  }
  emit(cfg, "frontier", "frontier", t, rows);
  return feasible_rows > 0 ? kExitOk : kExitInfeasible;
}

int cmd_bound(const RunConfig& cfg) {
  if (!cfg.target) throw ValidationError("bound requires a target section");
  if (cfg.sweep.eta_grid.empty()) throw ValidationError("bound requires sweep.eta_grid");
  std::vector<double> grid = cfg.sweep.eta_grid;
  std::sort(grid.begin(), grid.end(), std::greater<>());

  const BoundSweepResult sweep = bound_sweep(cfg.protocol.f, grid, *cfg.target, cfg.budget,
                                             cfg.sim.seed, cfg.protocol.t_b, cfg.sim);
  Table t;
  t.columns = {"eta", "alpha_max2", "R", "status"};
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const BoundPoint& pt : sweep.points) {
    std::string status = "ok";
    if (pt.no_secure_intensity) status = "no_secure_intensity";
    if (pt.success_unbounded) status = "attack_never_succeeded";
    t.rows.push_back(
        {format_double(pt.eta), format_double(pt.alpha_max2), format_double(pt.r), status});
    rows.push_back({{"eta", pt.eta},
                    {"alpha_max2", pt.alpha_max2},
                    {"R", pt.r},
                    {"status", status}});
  }
  t.footer_comments.push_back("loglog_slope = " + format_double(sweep.loglog_slope));
  t.footer_comments.push_back("loglog_r2 = " + format_double(sweep.loglog_r2));
  nlohmann::ordered_json payload;
  payload["points"] = rows;
  payload["loglog_slope"] = sweep.loglog_slope;
  payload["loglog_r2"] = sweep.loglog_r2;
  emit(cfg, "bound", "bound", t, payload);
  return kExitOk;
}

int cmd_check(const RunConfig& cfg) {
  if (!cfg.target) throw ValidationError("check requires a target section");
  if (cfg.experiments.empty())
    throw ValidationError("check requires a non-empty experiments list");

  Table t;
  t.columns = {"label", "verdict", "attack_gain", "attack_qber", "attack_V_d", "attack_V_01",
               "attack_V_0d", "attack_V_d1", "attack_V_dd", "attack_V_ave", "detail"};
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const ExperimentPoint& pt : cfg.experiments) {
    nlohmann::ordered_json row;
    row["label"] = pt.label;
    try {
      const CheckResult r =
          check_experiment(pt, cfg.protocol, *cfg.target, cfg.budget, cfg.sim.seed, cfg.sim);
      const char* verdict =
          r.verdict == Verdict::Insecure ? "insecure" : "not_decided_by_this_attack";
      const ObservedStats& st = r.attack.stats;
      auto vis = [&](SeqKind s) {
        const SeqStats& q = st.of(s);
        return q.visibility ? format_double(*q.visibility) : std::string("1");
      };
      if (r.attack.feasible) {
        t.rows.push_back({pt.label, verdict, format_double(st.gain_bit),
                          format_double(st.qber.value_or(0.0)), vis(SeqKind::D), vis(SeqKind::S01),
                          vis(SeqKind::S0d), vis(SeqKind::Sd1), vis(SeqKind::Sdd),
                          st.v_ave ? format_double(*st.v_ave) : std::string("1"), r.detail});
        row["stats"] = stats_to_json(st);
      } else {
        t.rows.push_back({pt.label, verdict, "", "", "", "", "", "", "", "", r.detail});
      }
      row["verdict"] = verdict;
      row["detail"] = r.detail;
    } catch (const ValidationError& e) {
      t.rows.push_back({pt.label, "error", "", "", "", "", "", "", "", "", e.what()});
      row["verdict"] = "error";
      row["detail"] = e.what();
    }
    rows.push_back(row);
  }
  emit(cfg, "check", "check", t, rows);
  return kExitOk;
}

int cmd_discriminate(const RunConfig& cfg) {
  const DiscriminationProblem prob = DiscriminationProblem::build(build_ensemble(cfg.protocol));
  const UsdSolution usd = usd_failure_probability(prob);

  std::vector<double> q_points = {0.0};
  if (cfg.attack) q_points.push_back(cfg.attack->q_inc);
  q_points.push_back(usd.q_usd);

  Table t;
  t.columns = {"q_inc", "avg_error", "c_0", "c_1", "c_d", "e_00", "e_11", "e_dd",
               "completeness_residual", "min_operator_eig"};
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (double q : q_points) {
    const MeasurementModel m = intermediate_measurement(prob, q);
    t.rows.push_back({format_double(q), format_double(m.avg_error),
                      format_double(m.conclusive_prob(0)), format_double(m.conclusive_prob(1)),
                      format_double(m.conclusive_prob(2)), format_double(m.confusion(0, 0)),
                      format_double(m.confusion(1, 1)), format_double(m.confusion(2, 2)),
                      format_double(m.completeness_residual()),
                      format_double(m.min_operator_eigenvalue())});
    nlohmann::ordered_json row;
    row["q_inc"] = q;
    row["avg_error"] = m.avg_error;
    row["conclusive"] = {m.conclusive_prob(0), m.conclusive_prob(1), m.conclusive_prob(2)};
    rows.push_back(row);
  }
  t.footer_comments.push_back("q_usd = " + format_double(usd.q_usd));
  nlohmann::ordered_json payload;
  payload["q_usd"] = usd.q_usd;
  payload["models"] = rows;
  emit(cfg, "discriminate", "discriminate", t, payload);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential-attack analysis toolkit for coherent-one-way QKD"};
  app.require_subcommand(1);

  CliOverrides ov;
  std::string command;
  for (const std::string name : {"simulate", "frontier", "bound", "check", "discriminate"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", ov.config_path, "Path to the run configuration")->required();
    sub->add_option("--seed", ov.seed, "Override sim.seed");
    sub->add_option("--out", ov.out_dir, "Override output.directory");
    sub->add_option("--format", ov.format, "Override output.format (csv|json)");
    sub->add_option("--replicas", ov.replicas, "Override sim.replicas");
    sub->callback([&command, name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  try {
    const RunConfig cfg = load_with_overrides(ov);
    if (command == "simulate") return cmd_simulate(cfg);
    if (command == "frontier") return cmd_frontier(cfg);
    if (command == "bound") return cmd_bound(cfg);
    if (command == "check") return cmd_check(cfg);
    if (command == "discriminate") return cmd_discriminate(cfg);
    std::cerr << "error: unknown command\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << " (restarts=" << e.restarts
              << ", best_residual=" << e.best_residual << ")\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
