#pragma once

#include <array>
#include <cmath>

#include "cowsec/attack.hpp"
#include "cowsec/observed.hpp"

namespace cowsec::detail {

/// Shared accumulation for the sampled and marginal estimators. Gains are per
/// emitted signal, QBER is a ratio over bit signals, monitoring masses are
/// conditioned on Alice's sequence occurrences.
struct StatsAccumulator {
  MeanAccumulator gain_bit, gain_all;
  RatioAccumulator qber;
  std::array<MeanAccumulator, 5> m1, m2;
  std::array<RatioAccumulator, 5> vis;

  void add_signal(bool is_bit, double click_mass) {
    gain_all.add(click_mass);
    gain_bit.add(is_bit ? click_mass : 0.0);
  }
  void add_bit_bins(double error_mass, double click_mass) { qber.add(error_mass, click_mass); }
  void add_pair(SeqKind s, double p1, double p2) {
    const int i = static_cast<int>(s);
    m1[i].add(p1);
    m2[i].add(p2);
    vis[i].add(p1 - p2, p1 + p2);
  }
  void merge(const StatsAccumulator& o) {
    gain_bit.merge(o.gain_bit);
    gain_all.merge(o.gain_all);
    qber.merge(o.qber);
    for (int i = 0; i < 5; ++i) {
      m1[i].merge(o.m1[i]);
      m2[i].merge(o.m2[i]);
      vis[i].merge(o.vis[i]);
    }
  }
};

ObservedStats finalize_stats(const StatsAccumulator& acc, const ProtocolParams& p,
                             const SimOptions& opts);

/// Monitored boundary sequence for adjacent signals (late pulse of `a`
/// facing early pulse of `b`), if both facing pulses are non-empty.
inline bool boundary_sequence(SignalKind a, SignalKind b, SeqKind& out) {
  if (!pulse_pattern(a).late || !pulse_pattern(b).early) return false;
  if (a == SignalKind::Bit0 && b == SignalKind::Bit1) out = SeqKind::S01;
  else if (a == SignalKind::Bit0 && b == SignalKind::Decoy) out = SeqKind::S0d;
  else if (a == SignalKind::Decoy && b == SignalKind::Bit1) out = SeqKind::Sd1;
  else if (a == SignalKind::Decoy && b == SignalKind::Decoy) out = SeqKind::Sdd;
  else return false;
  return true;
}

/// Error and click masses on a bit signal's two data bins, with double-bin
/// mass split half-half between the bit values.
inline void bit_bin_masses(double p_correct, double p_wrong, double& error_mass,
                           double& click_mass) {
  error_mass = p_wrong * (1.0 - p_correct) + 0.5 * p_wrong * p_correct;
  click_mass = 1.0 - (1.0 - p_correct) * (1.0 - p_wrong);
}

void accumulate_sampled(std::span<const SignalKind> kinds, const MeasurementModel& m,
                        const AttackParams& a, const ProtocolParams& p, std::uint64_t seed,
                        StatsAccumulator& acc);

void accumulate_marginal(std::span<const SignalKind> kinds, const MeasurementModel& m,
                         const AttackParams& a, const ProtocolParams& p, StatsAccumulator& acc);

/// True when the marginal estimator's run-length recursion stays shallow
/// enough to be worthwhile.
bool marginal_applicable(const MeasurementModel& m, const AttackParams& a);

}  // namespace cowsec::detail
