#include "cowsec/attack.hpp"

#include <algorithm>
#include <cmath>

#include "attack_internal.hpp"
#include "cowsec/rng.hpp"

namespace cowsec {

namespace {

constexpr std::uint64_t kAliceStream = 1;
constexpr std::uint64_t kOutcomeStream = 2;
constexpr std::uint64_t kTrimStream = 3;
constexpr std::uint64_t kThetaStream = 4;

double uniform(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace

std::vector<SignalKind> sample_alice_train(const ProtocolParams& p, std::int64_t n,
                                           std::uint64_t seed) {
  p.validate();
  if (n < 1) throw ValidationError("sample_alice_train: n must be >= 1");
  const Priors pr = priors_of(p);
  std::mt19937_64 rng = make_engine(seed, kAliceStream);
  std::vector<SignalKind> out(static_cast<std::size_t>(n));
  for (auto& k : out) {
    const double u = uniform(rng);
    k = u < pr.p0 ? SignalKind::Bit0 : (u < pr.p0 + pr.p1 ? SignalKind::Bit1 : SignalKind::Decoy);
  }
  return out;
}

std::vector<Outcome> eve_measure_train(std::span<const SignalKind> train,
                                       const MeasurementModel& m, std::uint64_t seed) {
  std::mt19937_64 rng = make_engine(seed, kOutcomeStream);
  std::vector<Outcome> out(train.size());
  for (std::size_t j = 0; j < train.size(); ++j) {
    const int k = static_cast<int>(train[j]);
    // Two draws per signal regardless of the branch keeps candidate
    // measurements aligned on common random numbers.
    const double u_conclusive = uniform(rng);
    const double u_identity = uniform(rng);
    if (k > 2 || u_conclusive >= m.conclusive_prob(k)) continue;
    double cdf = 0.0;
    int identity = 2;
    for (int i = 0; i < 3; ++i) {
      cdf += m.confusion(i, k);
      if (u_identity < cdf) {
        identity = i;
        break;
      }
    }
    out[j] = {true, static_cast<SignalKind>(identity)};
  }
  return out;
}

PulseTrain build_eve_train(std::span<const Outcome> outcomes, const AttackParams& a,
                           std::uint64_t seed) {
  a.validate();
  std::mt19937_64 rng = make_engine(seed, kTrimStream);
  PulseTrain train;
  train.intensity.assign(2 * outcomes.size(), 0.0);
  train.block.assign(2 * outcomes.size(), PulseTrain::kNoBlock);

  std::int32_t next_block = 0;
  std::size_t j = 0;
  while (j < outcomes.size()) {
    if (!outcomes[j].conclusive) {
      ++j;
      continue;
    }
    std::size_t end = j;
    while (end + 1 < outcomes.size() && outcomes[end + 1].conclusive) ++end;
    const double u_trim = uniform(rng);  // drawn for every run, kept streams stable
    std::size_t lo = j, hi = end;
    bool keep = (end - j + 1) >= static_cast<std::size_t>(a.m_min);
    if (keep && u_trim < a.q_p) {
      // Widest window opening on an empty early bin and closing on an empty
      // late bin, so no non-empty pulse faces a coherence break.
      std::size_t first0 = end + 1, last1 = 0;
      bool has0 = false, has1 = false;
      for (std::size_t t = j; t <= end; ++t) {
        if (!has0 && outcomes[t].kind == SignalKind::Bit0) {
          first0 = t;
          has0 = true;
        }
        if (outcomes[t].kind == SignalKind::Bit1) {
          last1 = t;
          has1 = true;
        }
      }
      if (has0 && has1 && first0 <= last1) {
        lo = first0;
        hi = last1;
      } else {
        keep = false;
      }
    }
    if (keep) {
      const std::int32_t id = next_block++;
      for (std::size_t t = lo; t <= hi; ++t) {
        const PulsePattern pat = pulse_pattern(outcomes[t].kind);
        if (pat.early) {
          train.intensity[2 * t] = a.beta2;
          train.block[2 * t] = id;
        }
        if (pat.late) {
          train.intensity[2 * t + 1] = a.beta2;
          train.block[2 * t + 1] = id;
        }
      }
    }
    j = end + 1;
  }
  return train;
}

PulseTrain honest_train(std::span<const SignalKind> kinds, double alpha2) {
  PulseTrain train;
  train.intensity.assign(2 * kinds.size(), 0.0);
  train.block.assign(2 * kinds.size(), PulseTrain::kNoBlock);
  for (std::size_t j = 0; j < kinds.size(); ++j) {
    const PulsePattern pat = pulse_pattern(kinds[j]);
    if (pat.early) {
      train.intensity[2 * j] = alpha2;
      train.block[2 * j] = 0;
    }
    if (pat.late) {
      train.intensity[2 * j + 1] = alpha2;
      train.block[2 * j + 1] = 0;
    }
  }
  return train;
}

ReceivedClicks bob_receive(const PulseTrain& train, const ProtocolParams& p, bool lossless,
                           std::uint64_t seed) {
  p.validate();
  if (train.intensity.size() != train.block.size() || train.intensity.size() % 2 != 0)
    throw ValidationError("bob_receive: malformed pulse train");
  std::mt19937_64 rng = make_engine(seed, kThetaStream);
  const double scale = lossless ? 1.0 : p.eta;
  const std::size_t slots = train.slots();

  ReceivedClicks rc;
  rc.data.resize(slots);
  std::vector<double> amp(slots);
  for (std::size_t k = 0; k < slots; ++k) {
    amp[k] = std::sqrt(train.intensity[k]);
    rc.data[k] = -std::expm1(-p.t_b * scale * train.intensity[k]);
  }
  if (slots < 2) return rc;
  rc.m1.resize(slots - 1);
  rc.m2.resize(slots - 1);
  const double c = 0.25 * (1.0 - p.t_b) * scale;
  for (std::size_t k = 0; k + 1 < slots; ++k) {
    const double r1 = amp[k], r2 = amp[k + 1];
    double mu1, mu2;
    if (r1 > 0.0 && r2 > 0.0 && train.block[k] != train.block[k + 1]) {
      const double cosp = std::cos(2.0 * M_PI * uniform(rng));
      mu1 = c * (r1 * r1 + r2 * r2 + 2.0 * r1 * r2 * cosp);
      mu2 = c * (r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * cosp);
    } else {
      // In phase: the difference port cancels exactly for equal amplitudes.
      const double sum = r1 + r2, diff = r1 - r2;
      mu1 = c * sum * sum;
      mu2 = c * diff * diff;
    }
    rc.m1[k] = -std::expm1(-mu1);
    rc.m2[k] = -std::expm1(-mu2);
  }
  return rc;
}

namespace detail {

void accumulate_sampled(std::span<const SignalKind> kinds, const MeasurementModel& m,
                        const AttackParams& a, const ProtocolParams& p, std::uint64_t seed,
                        StatsAccumulator& acc) {
  const std::vector<Outcome> outcomes = eve_measure_train(kinds, m, seed);
  const PulseTrain train = build_eve_train(outcomes, a, seed);
  const ReceivedClicks rc = bob_receive(train, p, /*lossless=*/true, seed);
  const std::size_t n = kinds.size();
  for (std::size_t j = 0; j < n; ++j) {
    const double pe = rc.data[2 * j], pl = rc.data[2 * j + 1];
    const double click = 1.0 - (1.0 - pe) * (1.0 - pl);
    const bool is_bit = kinds[j] == SignalKind::Bit0 || kinds[j] == SignalKind::Bit1;
    acc.add_signal(is_bit, click);
    if (is_bit) {
      const double p_correct = kinds[j] == SignalKind::Bit0 ? pl : pe;
      const double p_wrong = kinds[j] == SignalKind::Bit0 ? pe : pl;
      double err, cl;
      bit_bin_masses(p_correct, p_wrong, err, cl);
      acc.add_bit_bins(err, cl);
    }
    if (kinds[j] == SignalKind::Decoy) acc.add_pair(SeqKind::D, rc.m1[2 * j], rc.m2[2 * j]);
    if (j + 1 < n) {
      SeqKind s;
      if (boundary_sequence(kinds[j], kinds[j + 1], s))
        acc.add_pair(s, rc.m1[2 * j + 1], rc.m2[2 * j + 1]);
    }
  }
}

ObservedStats finalize_stats(const StatsAccumulator& acc, const ProtocolParams& p,
                             const SimOptions& opts) {
  ObservedStats st;
  st.n_signals = acc.gain_all.n;
  st.seed = opts.seed;
  st.replicas = opts.replicas;
  st.gain_bit = acc.gain_bit.mean();
  st.gain_bit_se = acc.gain_bit.stderr_mean();
  st.gain_all = acc.gain_all.mean();
  st.gain_all_se = acc.gain_all.stderr_mean();
  if (acc.qber.has_mass()) {
    st.qber = acc.qber.ratio();
    st.qber_se = acc.qber.stderr_ratio();
  } else {
    st.warnings.push_back("qber undefined: no sifted clicks");
  }
  for (SeqKind s : kAllSeqKinds) {
    const int i = static_cast<int>(s);
    SeqStats& q = st.of(s);
    q.occurrences = acc.m1[i].n;
    if (q.occurrences == 0) {
      st.warnings.push_back(std::string("sequence ") + seq_name(s) +
                            " never occurred; increase n_signals");
      q.vacuous = true;
      continue;
    }
    q.p_m1 = acc.m1[i].mean();
    q.p_m1_se = acc.m1[i].stderr_mean();
    q.p_m2 = acc.m2[i].mean();
    q.p_m2_se = acc.m2[i].stderr_mean();
    if (acc.vis[i].has_mass()) {
      q.visibility = acc.vis[i].ratio();
      q.visibility_se = acc.vis[i].stderr_ratio();
    } else {
      q.vacuous = true;  // conditioning event produced no clicks at all
    }
  }
  // Average visibility: weighted combination of the conditional click
  // probabilities across sequences.
  std::array<double, 5> w{};
  const Priors pr = priors_of(p);
  switch (opts.v_ave.mode) {
    case VAveWeighting::Occurrence:
      w = {pr.pd, pr.p0 * pr.p1, pr.p0 * pr.pd, pr.pd * pr.p1, pr.pd * pr.pd};
      break;
    case VAveWeighting::Uniform:
      w = {1.0, 1.0, 1.0, 1.0, 1.0};
      break;
    case VAveWeighting::Custom:
      w = opts.v_ave.custom;
      break;
  }
  double num = 0.0, den = 0.0, var = 0.0;
  for (int i = 0; i < 5; ++i) {
    if (st.seq[i].occurrences <= 0) continue;
    num += w[i] * (st.seq[i].p_m1 - st.seq[i].p_m2);
    den += w[i] * (st.seq[i].p_m1 + st.seq[i].p_m2);
  }
  if (den > 0.0) {
    const double v = num / den;
    for (int i = 0; i < 5; ++i) {
      if (st.seq[i].occurrences <= 0) continue;
      const double d1 = w[i] * (1.0 - v) / den;
      const double d2 = w[i] * (1.0 + v) / den;
      var += d1 * d1 * st.seq[i].p_m1_se * st.seq[i].p_m1_se +
             d2 * d2 * st.seq[i].p_m2_se * st.seq[i].p_m2_se;
    }
    st.v_ave = v;
    st.v_ave_se = std::sqrt(var);
  }
  return st;
}

bool marginal_applicable(const MeasurementModel& m, const AttackParams& a) {
  (void)a;
  return m.conclusive_prob.maxCoeff() <= 0.5;
}

}  // namespace detail

ObservedStats run_attack_sim(const ProtocolParams& p, const AttackParams& a,
                             const MeasurementModel& m, const SimOptions& opts) {
  p.validate();
  a.validate();
  opts.validate();

  const bool marginal = opts.estimator == Estimator::Marginal ||
                        (opts.estimator == Estimator::Auto && detail::marginal_applicable(m, a));
  detail::StatsAccumulator total;
  const std::int64_t base = opts.n_signals / opts.replicas;
  const std::int64_t rem = opts.n_signals % opts.replicas;
  for (int r = 0; r < opts.replicas; ++r) {
    const std::int64_t n_r = base + (r < rem ? 1 : 0);
    if (n_r == 0) continue;
    const std::uint64_t seed_r = sub_seed(opts.seed, 0x100 + static_cast<std::uint64_t>(r));
    const std::vector<SignalKind> kinds = sample_alice_train(p, n_r, seed_r);
    detail::StatsAccumulator acc;
    if (marginal)
      detail::accumulate_marginal(kinds, m, a, p, acc);
    else
      detail::accumulate_sampled(kinds, m, a, p, seed_r, acc);
    total.merge(acc);
  }
  return detail::finalize_stats(total, p, opts);
}

ObservedStats run_attack_sim(const ProtocolParams& p, const AttackParams& a, std::int64_t n,
                             std::uint64_t seed) {
  const DiscriminationProblem prob = DiscriminationProblem::build(build_ensemble(p));
  const MeasurementModel m = intermediate_measurement(prob, a.q_inc);
  SimOptions opts;
  opts.n_signals = n;
  opts.seed = seed;
  return run_attack_sim(p, a, m, opts);
}

ObservedStats run_honest_sim(const ProtocolParams& p, const SimOptions& opts) {
  p.validate();
  opts.validate();
  detail::StatsAccumulator total;
  const std::int64_t base = opts.n_signals / opts.replicas;
  const std::int64_t rem = opts.n_signals % opts.replicas;
  for (int r = 0; r < opts.replicas; ++r) {
    const std::int64_t n_r = base + (r < rem ? 1 : 0);
    if (n_r == 0) continue;
    const std::uint64_t seed_r = sub_seed(opts.seed, 0x100 + static_cast<std::uint64_t>(r));
    const std::vector<SignalKind> kinds = sample_alice_train(p, n_r, seed_r);
    const PulseTrain train = honest_train(kinds, p.alpha2);
    const ReceivedClicks rc = bob_receive(train, p, /*lossless=*/false, seed_r);
    detail::StatsAccumulator acc;
    const std::size_t n = kinds.size();
    for (std::size_t j = 0; j < n; ++j) {
      const double pe = rc.data[2 * j], pl = rc.data[2 * j + 1];
      const double click = 1.0 - (1.0 - pe) * (1.0 - pl);
      const bool is_bit = kinds[j] == SignalKind::Bit0 || kinds[j] == SignalKind::Bit1;
      acc.add_signal(is_bit, click);
      if (is_bit) {
        double err, cl;
        detail::bit_bin_masses(kinds[j] == SignalKind::Bit0 ? pl : pe,
                               kinds[j] == SignalKind::Bit0 ? pe : pl, err, cl);
        acc.add_bit_bins(err, cl);
      }
      if (kinds[j] == SignalKind::Decoy) acc.add_pair(SeqKind::D, rc.m1[2 * j], rc.m2[2 * j]);
      if (j + 1 < n) {
        SeqKind s;
        if (detail::boundary_sequence(kinds[j], kinds[j + 1], s))
          acc.add_pair(s, rc.m1[2 * j + 1], rc.m2[2 * j + 1]);
      }
    }
    total.merge(acc);
  }
  return detail::finalize_stats(total, p, opts);
}

ObservedStats run_honest_sim(const ProtocolParams& p, std::int64_t n, std::uint64_t seed) {
  SimOptions opts;
  opts.n_signals = n;
  opts.seed = seed;
  return run_honest_sim(p, opts);
}

}  // namespace cowsec
