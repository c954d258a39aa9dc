#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cowsec/discrimination.hpp"
#include "cowsec/observed.hpp"
#include "cowsec/protocol.hpp"
#include "cowsec/states.hpp"

namespace cowsec {

/// Eve's tunable knobs. q_inc selects the measurement interpolation point,
/// q_p the probability of trimming a surviving run to its widest
/// vacuum-bounded window, m_min the shortest run she resends, beta2 the
/// intensity of her non-empty pulses.
struct AttackParams {
  double q_inc = 0.0;
  double q_p = 1.0;
  int m_min = 1;
  double beta2 = 0.5;

  void validate() const {
    if (!(q_inc >= 0.0 && q_inc <= 1.0)) throw ValidationError("attack.q_inc must be in [0,1]");
    if (!(q_p >= 0.0 && q_p <= 1.0)) throw ValidationError("attack.q_p must be in [0,1]");
    if (m_min < 1) throw ValidationError("attack.m_min must be >= 1");
    if (!(beta2 >= 0.0)) throw ValidationError("attack.beta2 must be >= 0");
  }
};

/// One measurement outcome per signal.
struct Outcome {
  bool conclusive = false;
  SignalKind kind = SignalKind::VacuumPair;
};

/// Time-ordered slot intensities (two slots per signal) with per-slot
/// phase-coherence labels. Slots sharing a label are mutually coherent;
/// vacuum slots carry kNoBlock.
struct PulseTrain {
  static constexpr std::int32_t kNoBlock = -1;
  std::vector<double> intensity;
  std::vector<std::int32_t> block;

  std::size_t slots() const { return intensity.size(); }
  std::size_t signals() const { return intensity.size() / 2; }
};

/// Expected click probabilities per slot. `data` has one entry per slot;
/// `m1`/`m2` have one entry per interior slot pair (k, k+1) of the
/// interferometer, the non-interfering satellite slots at the train ends are
/// not reported.
struct ReceivedClicks {
  std::vector<double> data;
  std::vector<double> m1;
  std::vector<double> m2;
};

std::vector<SignalKind> sample_alice_train(const ProtocolParams& p, std::int64_t n,
                                           std::uint64_t seed);

std::vector<Outcome> eve_measure_train(std::span<const SignalKind> train,
                                       const MeasurementModel& m, std::uint64_t seed);

/// Applies run detection, the m_min cutoff, probabilistic trimming and the
/// intensity substitution. Each contiguous kept segment becomes one coherent
/// block; a run with no trimmable window sends vacuum under the trim branch.
PulseTrain build_eve_train(std::span<const Outcome> outcomes, const AttackParams& a,
                           std::uint64_t seed);

/// Alice's own emission as a pulse train: one global coherent block.
PulseTrain honest_train(std::span<const SignalKind> kinds, double alpha2);

/// Beamsplitter plus Mach-Zehnder model. Lossless resends skip the channel
/// transmittance (untrusted-device scenario). The relative phase across
/// distinct coherence blocks is the only sampled quantity; all click
/// probabilities are expected values.
ReceivedClicks bob_receive(const PulseTrain& train, const ProtocolParams& p, bool lossless,
                           std::uint64_t seed);

enum class Estimator : std::uint8_t { Auto, Sampled, Marginal };

enum class VAveWeighting : std::uint8_t { Occurrence, Uniform, Custom };

struct VAveWeights {
  VAveWeighting mode = VAveWeighting::Occurrence;
  std::array<double, 5> custom{};
};

struct SimOptions {
  std::int64_t n_signals = 200'000;
  std::uint64_t seed = 1;
  int replicas = 1;
  Estimator estimator = Estimator::Auto;
  VAveWeights v_ave;

  void validate() const {
    if (n_signals < 1) throw ValidationError("sim.n_signals must be >= 1");
    if (replicas < 1) throw ValidationError("sim.replicas must be >= 1");
    if (n_signals < replicas) throw ValidationError("sim.n_signals must cover every replica");
  }
};

/// Full sequential-attack simulation: samples Alice's train, Eve's outcomes
/// and resend decisions, then accumulates Bob's expected detection
/// statistics conditioned on what Alice sent. With Estimator::Marginal the
/// per-signal outcome randomness is integrated out analytically
/// (Rao-Blackwellized over the same sampled train), which resolves the tiny
/// click masses of the deep-loss regime at fixed sample size.
ObservedStats run_attack_sim(const ProtocolParams& p, const AttackParams& a,
                             const MeasurementModel& m, const SimOptions& opts);

/// Convenience overload building the interpolated measurement for a.q_inc.
ObservedStats run_attack_sim(const ProtocolParams& p, const AttackParams& a, std::int64_t n,
                             std::uint64_t seed);

/// No eavesdropper: Alice's train through the lossy channel.
ObservedStats run_honest_sim(const ProtocolParams& p, std::int64_t n, std::uint64_t seed);
ObservedStats run_honest_sim(const ProtocolParams& p, const SimOptions& opts);

}  // namespace cowsec
