#include <algorithm>
#include <cmath>
#include <vector>

#include "attack_internal.hpp"

namespace cowsec::detail {

namespace {

// Run-length profiles. L_j(d, z): exactly d conclusive signals immediately
// left of j, z = "some identity-0 among them". R_j(d, o): d conclusive
// signals immediately right of j, o = "some identity-1 among them". Depths
// are truncated at kept probability ~gamma_max^Dmax, far below the
// estimator's resolution.
struct ProfileBuffers {
  int dmax;
  std::vector<double> cur, next;  // (dmax+1) x 2, index d*2+flag

  explicit ProfileBuffers(int dmax) : dmax(dmax), cur(2 * (dmax + 1), 0.0), next(cur) {}

  void reset_delta() {
    std::fill(cur.begin(), cur.end(), 0.0);
    cur[0] = 1.0;
  }
  double at(int d, int flag) const { return cur[2 * d + flag]; }

  /// Extend by one signal of conclusive probability g whose flagged identity
  /// (0 for left profiles, 1 for right profiles) has probability q.
  void extend(double g, double q) {
    std::fill(next.begin(), next.end(), 0.0);
    next[0] = 1.0 - g;
    for (int d = 0; d <= dmax; ++d) {
      const int dest = std::min(d + 1, dmax);
      const double p0 = cur[2 * d], p1 = cur[2 * d + 1];
      next[2 * dest + 1] += g * (q * (p0 + p1) + (1.0 - q) * p1);
      next[2 * dest] += g * (1.0 - q) * p0;
    }
    cur.swap(next);
  }
};

}  // namespace

void accumulate_marginal(std::span<const SignalKind> kinds, const MeasurementModel& m,
                         const AttackParams& a, const ProtocolParams& p, StatsAccumulator& acc) {
  const std::size_t n = kinds.size();
  const double b = a.beta2, tb = p.t_b, qp = a.q_p;

  const double p_data = -std::expm1(-tb * b);
  const double click_decoy = 1.0 - (1.0 - p_data) * (1.0 - p_data);
  const double p_pair = -std::expm1(-(1.0 - tb) * b);        // coherent equal pair at M1
  const double p_lone = -std::expm1(-0.25 * (1.0 - tb) * b); // pulse facing vacuum, both ports

  std::vector<double> gamma(n);
  std::vector<std::array<double, 3>> eid(n);
  double gmax = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const int k = static_cast<int>(kinds[j]);
    gamma[j] = m.conclusive_prob(k);
    for (int i = 0; i < 3; ++i) eid[j][i] = m.confusion(i, k);
    gmax = std::max(gmax, gamma[j]);
  }

  int dmax = 4;
  if (gmax > 0.0 && gmax < 1.0)
    dmax = std::clamp(static_cast<int>(std::ceil(-37.0 / std::log(gmax))), 4, 56);
  else if (gmax >= 1.0)
    dmax = 56;  // callers gate on marginal_applicable; keep a hard cap anyway
  const int tneed = std::min(a.m_min - 1, dmax);

  // Right-profile suffix sums rs[j][o][t] = P(right run depth >= t, flag o).
  const std::size_t stride = 2 * static_cast<std::size_t>(tneed + 1);
  std::vector<double> rs(n * stride, 0.0);
  {
    ProfileBuffers right(dmax);
    right.reset_delta();
    std::vector<double> suffix(2 * (dmax + 2), 0.0);
    for (std::size_t jj = 0; jj < n; ++jj) {
      const std::size_t j = n - 1 - jj;
      if (jj > 0) right.extend(gamma[j + 1], eid[j + 1][1]);
      for (int o = 0; o < 2; ++o) {
        double run = 0.0;
        for (int d = dmax; d >= 0; --d) {
          run += right.at(d, o);
          suffix[2 * d + o] = run;
        }
        for (int t = 0; t <= tneed; ++t) rs[j * stride + 2 * t + o] = suffix[2 * t + o];
      }
    }
  }
  auto rs_at = [&](std::size_t j, int o, int t) -> double {
    if (t > dmax) return 0.0;
    t = std::max(t, 0);
    return rs[j * stride + 2 * std::min(t, tneed) + o];
  };
  auto rs_both = [&](std::size_t j, int t) { return rs_at(j, 0, t) + rs_at(j, 1, t); };

  ProfileBuffers left(dmax);
  left.reset_delta();
  for (std::size_t j = 0; j < n; ++j) {
    const double w0 = gamma[j] * eid[j][0];
    const double w1 = gamma[j] * eid[j][1];
    const double wd = gamma[j] * eid[j][2];

    // Kept-as-identity probabilities for signal j. The trim branch keeps j
    // iff an identity-0 appears at or left of it and an identity-1 at or
    // right of it within the run; the keep branch needs only the length cut.
    double keep_any = 0.0, trim_need_o = 0.0, trim_need_z = 0.0, trim_need_zo = 0.0;
    for (int d = 0; d <= dmax; ++d) {
      const double a0 = left.at(d, 0) + left.at(d, 1);
      const double a1 = left.at(d, 1);
      if (a0 == 0.0) continue;
      const int t1 = a.m_min - 1 - d;
      const double r_both = rs_both(j, t1);
      const double r_o = rs_at(j, 1, t1);
      keep_any += a0 * r_both;
      trim_need_o += a0 * r_o;
      trim_need_z += a1 * r_both;
      trim_need_zo += a1 * r_o;
    }
    const double kept0 = w0 * ((1.0 - qp) * keep_any + qp * trim_need_o);
    const double kept1 = w1 * ((1.0 - qp) * keep_any + qp * trim_need_z);
    const double keptd = wd * ((1.0 - qp) * keep_any + qp * trim_need_zo);

    const bool is_bit = kinds[j] == SignalKind::Bit0 || kinds[j] == SignalKind::Bit1;
    const double click = (kept0 + kept1) * p_data + keptd * click_decoy;
    acc.add_signal(is_bit, click);
    if (is_bit) {
      const double wrong_kept = kinds[j] == SignalKind::Bit0 ? kept1 : kept0;
      const double err_flip = p_data;  // wrong bin only
      double err_decoy, click_decoy_bins;
      bit_bin_masses(p_data, p_data, err_decoy, click_decoy_bins);
      acc.add_bit_bins(wrong_kept * err_flip + keptd * err_decoy, click);
    }
    if (kinds[j] == SignalKind::Decoy) {
      const double lone = (kept0 + kept1) * p_lone;
      acc.add_pair(SeqKind::D, keptd * p_pair + lone, lone);
    }

    if (j + 1 < n) {
      SeqKind s;
      if (boundary_sequence(kinds[j], kinds[j + 1], s)) {
        // Both kept: joint left profile of j and right profile of j+1.
        double s_keep = 0.0, s_a0b1 = 0.0, s_a1b0 = 0.0, s_a1b1 = 0.0;
        for (int d = 0; d <= dmax; ++d) {
          const double a0 = left.at(d, 0) + left.at(d, 1);
          const double a1 = left.at(d, 1);
          if (a0 == 0.0) continue;
          const int t2 = a.m_min - 2 - d;
          const double b0 = rs_both(j + 1, t2);
          const double b1 = rs_at(j + 1, 1, t2);
          s_keep += a0 * b0;
          s_a0b1 += a0 * b1;
          s_a1b0 += a1 * b0;
          s_a1b1 += a1 * b1;
        }
        const double v0 = gamma[j + 1] * eid[j + 1][0];
        const double v1 = gamma[j + 1] * eid[j + 1][1];
        const double vd = gamma[j + 1] * eid[j + 1][2];
        double p1_mass = 0.0, p2_mass = 0.0;
        const std::array<double, 3> wj = {w0, w1, wd};
        const std::array<double, 3> wj1 = {v0, v1, vd};
        for (int ij = 0; ij < 3; ++ij) {
          for (int ij1 = 0; ij1 < 3; ++ij1) {
            const bool x_full = ij != 1;   // late pulse of identity ij
            const bool y_full = ij1 != 0;  // early pulse of identity ij1
            if (!x_full && !y_full) continue;
            const double trim_sel = ij == 0 ? (ij1 == 1 ? s_keep : s_a0b1)
                                            : (ij1 == 1 ? s_a1b0 : s_a1b1);
            const double prob = wj[ij] * wj1[ij1] * ((1.0 - qp) * s_keep + qp * trim_sel);
            if (prob == 0.0) continue;
            if (x_full && y_full) {
              p1_mass += prob * p_pair;  // same block, difference port dark
            } else {
              p1_mass += prob * p_lone;
              p2_mass += prob * p_lone;
            }
          }
        }
        // One side kept at a run boundary (neighbor inconclusive); only the
        // keep branch leaks here, trimming never exposes these pulses.
        double keep_len1_left = 0.0;
        for (int d = std::max(0, a.m_min - 1); d <= dmax; ++d)
          keep_len1_left += left.at(d, 0) + left.at(d, 1);
        const double t2_mass =
            (w0 + wd) * (1.0 - gamma[j + 1]) * (1.0 - qp) * keep_len1_left;
        const double t3_mass =
            (1.0 - gamma[j]) * (v1 + vd) * (1.0 - qp) * rs_both(j + 1, a.m_min - 1);
        p1_mass += (t2_mass + t3_mass) * p_lone;
        p2_mass += (t2_mass + t3_mass) * p_lone;
        acc.add_pair(s, p1_mass, p2_mass);
      }
    }
    left.extend(gamma[j], eid[j][0]);
  }
}

}  // namespace cowsec::detail
