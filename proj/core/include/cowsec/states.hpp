#pragma once

#include <Eigen/Dense>

#include "cowsec/observed.hpp"
#include "cowsec/protocol.hpp"

namespace cowsec {

/// |<gamma|delta>| for two coherent pulses of the given mean photon numbers.
/// With a common phase the amplitudes are real and the overlap is
/// exp(-(sqrt(gamma2)-sqrt(delta2))^2 / 2); with opposite phases the relative
/// sign flips. Throws on negative intensities.
double coherent_overlap(double gamma2, double delta2, bool same_phase = true);

/// The three-signal source ensemble: pairwise overlaps and priors, ordered
/// (Bit0, Bit1, Decoy).
struct SignalEnsemble {
  Eigen::Matrix3d gram;
  Eigen::Vector3d priors;
  double alpha2 = 0.0;
};

SignalEnsemble build_ensemble(const ProtocolParams& p);

/// Closed-form statistics of the lossy channel with no eavesdropper and ideal
/// detectors: zero QBER, unit visibilities, Poissonian click probabilities.
ObservedStats honest_stats(const ProtocolParams& p);

/// Per-emitted-signal probability that Alice sent a bit signal and Bob's data
/// line clicked: (1-f) * (1 - exp(-eta t_b alpha2)).
double honest_gain_bit(const ProtocolParams& p);

/// Data-line click probability for one signal kind under the honest channel.
double honest_click_probability(const ProtocolParams& p, SignalKind k);

}  // namespace cowsec
