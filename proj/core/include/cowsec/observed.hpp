#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cowsec/protocol.hpp"

namespace cowsec {

/// Mean and standard error of a per-signal quantity.
struct MeanAccumulator {
  std::int64_t n = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x) {
    ++n;
    sum += x;
    sum_sq += x * x;
  }
  void merge(const MeanAccumulator& o) {
    n += o.n;
    sum += o.sum;
    sum_sq += o.sum_sq;
  }
  double mean() const { return n > 0 ? sum / static_cast<double>(n) : 0.0; }
  double stderr_mean() const;
};

/// Ratio estimator r = sum(d) / sum(t) with a delta-method standard error.
/// Used for QBER (errors over sifted clicks) and visibilities
/// (m1-m2 mass over m1+m2 mass).
struct RatioAccumulator {
  std::int64_t n = 0;
  double sd = 0.0, st = 0.0;
  double sdd = 0.0, stt = 0.0, sdt = 0.0;

  void add(double d, double t) {
    ++n;
    sd += d;
    st += t;
    sdd += d * d;
    stt += t * t;
    sdt += d * t;
  }
  void merge(const RatioAccumulator& o) {
    n += o.n;
    sd += o.sd;
    st += o.st;
    sdd += o.sdd;
    stt += o.stt;
    sdt += o.sdt;
  }
  bool has_mass() const { return st > 0.0; }
  double ratio() const { return sd / st; }
  double stderr_ratio() const;
};

/// Per-sequence monitoring-line estimates, conditioned on Alice having sent
/// the sequence. `visibility` is empty when no click mass reached either
/// detector (all conditioned resends were vacuum); such sequences are
/// "vacuous": Bob collects no evidence from them.
struct SeqStats {
  std::int64_t occurrences = 0;
  double p_m1 = 0.0, p_m1_se = 0.0;
  double p_m2 = 0.0, p_m2_se = 0.0;
  std::optional<double> visibility;
  double visibility_se = 0.0;
  bool vacuous = false;
};

/// Everything Alice and Bob monitor, as estimated by one simulation run.
/// gain_bit is the per-emitted-signal probability of (bit signal AND data
/// click); gain_all counts data clicks on every signal kind.
struct ObservedStats {
  double gain_bit = 0.0, gain_bit_se = 0.0;
  double gain_all = 0.0, gain_all_se = 0.0;
  std::optional<double> qber;
  double qber_se = 0.0;
  std::array<SeqStats, 5> seq{};
  std::optional<double> v_ave;
  double v_ave_se = 0.0;
  std::int64_t n_signals = 0;
  std::uint64_t seed = 0;
  int replicas = 1;
  std::vector<std::string> warnings;

  const SeqStats& of(SeqKind s) const { return seq[static_cast<int>(s)]; }
  SeqStats& of(SeqKind s) { return seq[static_cast<int>(s)]; }
};

/// Normalized click asymmetry (p1 - p2) / (p1 + p2). Empty when both click
/// probabilities vanish: the conditioning event never produced clicks, which
/// is distinct from a measured value of zero.
std::optional<double> visibility(double p1, double p2);

}  // namespace cowsec
