#include "cowsec/states.hpp"

#include <cmath>

namespace cowsec {

double MeanAccumulator::stderr_mean() const {
  if (n < 2) return 0.0;
  const double nn = static_cast<double>(n);
  const double var = (sum_sq - sum * sum / nn) / (nn - 1.0);
  return var > 0.0 ? std::sqrt(var / nn) : 0.0;
}

double RatioAccumulator::stderr_ratio() const {
  if (n < 2 || !(st > 0.0)) return 0.0;
  const double nn = static_cast<double>(n);
  const double r = sd / st;
  const double md = sd / nn, mt = st / nn;
  const double vd = (sdd - nn * md * md) / (nn - 1.0);
  const double vt = (stt - nn * mt * mt) / (nn - 1.0);
  const double cdt = (sdt - nn * md * mt) / (nn - 1.0);
  // Var(sum d / sum t) by the delta method around the means.
  const double var = (vd - 2.0 * r * cdt + r * r * vt) / nn;
  return var > 0.0 ? std::sqrt(var) / mt : 0.0;
}

std::optional<double> visibility(double p1, double p2) {
  if (!(p1 >= 0.0 && p1 <= 1.0) || !(p2 >= 0.0 && p2 <= 1.0))
    throw ValidationError("visibility: click probabilities must lie in [0,1]");
  if (p1 == 0.0 && p2 == 0.0) return std::nullopt;
  return (p1 - p2) / (p1 + p2);
}

double coherent_overlap(double gamma2, double delta2, bool same_phase) {
  if (!(gamma2 >= 0.0) || !(delta2 >= 0.0))
    throw ValidationError("coherent_overlap: negative mean photon number");
  const double a = std::sqrt(gamma2);
  const double b = std::sqrt(delta2);
  const double diff = same_phase ? a - b : a + b;
  return std::exp(-0.5 * diff * diff);
}

SignalEnsemble build_ensemble(const ProtocolParams& p) {
  p.validate();
  SignalEnsemble e;
  e.alpha2 = p.alpha2;
  const double bit_bit = coherent_overlap(0.0, p.alpha2) * coherent_overlap(p.alpha2, 0.0);
  const double bit_decoy = coherent_overlap(0.0, p.alpha2) * coherent_overlap(p.alpha2, p.alpha2);
  e.gram << 1.0, bit_bit, bit_decoy,
      bit_bit, 1.0, bit_decoy,
      bit_decoy, bit_decoy, 1.0;
  const Priors pr = priors_of(p);
  e.priors << pr.p0, pr.p1, pr.pd;
  return e;
}

double honest_click_probability(const ProtocolParams& p, SignalKind k) {
  const double mu = p.eta * p.t_b * p.alpha2 * non_empty_pulses(k);
  return -std::expm1(-mu);
}

double honest_gain_bit(const ProtocolParams& p) {
  return (1.0 - p.f) * honest_click_probability(p, SignalKind::Bit0);
}

ObservedStats honest_stats(const ProtocolParams& p) {
  p.validate();
  ObservedStats s;
  const double p_bit = honest_click_probability(p, SignalKind::Bit0);
  const double p_decoy = honest_click_probability(p, SignalKind::Decoy);
  s.gain_bit = (1.0 - p.f) * p_bit;
  s.gain_all = (1.0 - p.f) * p_bit + p.f * p_decoy;
  s.qber = 0.0;
  const double p_m1 = -std::expm1(-(1.0 - p.t_b) * p.eta * p.alpha2);
  for (SeqKind k : kAllSeqKinds) {
    SeqStats& q = s.of(k);
    q.occurrences = -1;  // closed form, not sampled
    q.p_m1 = p_m1;
    q.p_m2 = 0.0;
    q.visibility = p.alpha2 > 0.0 ? visibility(p_m1, 0.0) : std::nullopt;
    q.vacuous = !(p.alpha2 > 0.0);
  }
  s.v_ave = s.of(SeqKind::D).visibility;
  return s;
}

}  // namespace cowsec
