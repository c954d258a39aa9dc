#include "cowsec/report.hpp"

#include <charconv>
#include <fstream>

namespace cowsec {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> artifact_header(const std::string& command, const RunConfig& cfg) {
  std::vector<std::string> out;
  out.push_back("cowsec " + command);
  out.push_back("config = " + cfg.resolved.dump());
  out.push_back("seed = " + std::to_string(cfg.sim.seed));
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header_comments,
               const Table& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write output file: " + path);
  for (const auto& line : header_comments) out << "# " << line << "\n";
  for (std::size_t c = 0; c < table.columns.size(); ++c)
    out << table.columns[c] << (c + 1 < table.columns.size() ? "," : "");
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << row[c] << (c + 1 < row.size() ? "," : "");
    out << "\n";
  }
  for (const auto& line : table.footer_comments) out << "# " << line << "\n";
}

void write_json_file(const std::string& path, const nlohmann::ordered_json& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write output file: " + path);
  out << payload.dump(2) << "\n";
}

nlohmann::ordered_json stats_to_json(const ObservedStats& st) {
  nlohmann::ordered_json j;
  j["n_signals"] = st.n_signals;
  j["replicas"] = st.replicas;
  j["gain_bit"] = st.gain_bit;
  j["gain_bit_se"] = st.gain_bit_se;
  j["gain_all"] = st.gain_all;
  j["gain_all_se"] = st.gain_all_se;
  if (st.qber) {
    j["qber"] = *st.qber;
    j["qber_se"] = st.qber_se;
  } else {
    j["qber"] = nullptr;
  }
  for (SeqKind s : kAllSeqKinds) {
    const SeqStats& q = st.of(s);
    nlohmann::ordered_json e;
    e["occurrences"] = q.occurrences;
    e["p_m1"] = q.p_m1;
    e["p_m1_se"] = q.p_m1_se;
    e["p_m2"] = q.p_m2;
    e["p_m2_se"] = q.p_m2_se;
    if (q.visibility) {
      e["visibility"] = *q.visibility;
      e["visibility_se"] = q.visibility_se;
    } else {
      e["visibility"] = nullptr;
      e["vacuous"] = q.vacuous;
    }
    j["seq"][seq_name(s)] = e;
  }
  if (st.v_ave) {
    j["v_ave"] = *st.v_ave;
    j["v_ave_se"] = st.v_ave_se;
  } else {
    j["v_ave"] = nullptr;
  }
  if (!st.warnings.empty()) j["warnings"] = st.warnings;
  return j;
}

Table stats_table(const ObservedStats& st) {
  Table t;
  t.columns = {"metric", "value", "stderr", "flag"};
  auto row = [&](const std::string& name, double v, double se, const std::string& flag = "") {
    t.rows.push_back({name, format_double(v), format_double(se), flag});
  };
  row("gain_bit", st.gain_bit, st.gain_bit_se);
  row("gain_all", st.gain_all, st.gain_all_se);
  if (st.qber) row("qber", *st.qber, st.qber_se);
  else t.rows.push_back({"qber", "", "", "undefined"});
  for (SeqKind s : kAllSeqKinds) {
    const SeqStats& q = st.of(s);
    const std::string tag = seq_name(s);
    row("p_m1_" + tag, q.p_m1, q.p_m1_se);
    row("p_m2_" + tag, q.p_m2, q.p_m2_se);
    if (q.visibility) row("V_" + tag, *q.visibility, q.visibility_se);
    else t.rows.push_back({"V_" + tag, "", "", q.vacuous ? "vacuous" : "undefined"});
  }
  if (st.v_ave) row("V_ave", *st.v_ave, st.v_ave_se);
  else t.rows.push_back({"V_ave", "", "", "undefined"});
  t.rows.push_back({"n_signals", std::to_string(st.n_signals), "", ""});
  for (const auto& w : st.warnings) t.footer_comments.push_back("warning: " + w);
  return t;
}

}  // namespace cowsec
