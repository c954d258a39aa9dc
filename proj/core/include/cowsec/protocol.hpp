#pragma once

#include <array>
#include <cstdint>

#include "cowsec/errors.hpp"

namespace cowsec {

/// Source and channel configuration shared by all modules.
///
/// alpha2  mean photon number |alpha|^2 of a non-empty pulse
/// f       decoy fraction; bit priors are p0 = p1 = (1-f)/2, pd = f
/// t_b     transmittance of Bob's data/monitoring beamsplitter
/// eta     end-to-end channel transmittance
/// delta_t pulse period, informational only
struct ProtocolParams {
  double alpha2 = 0.5;
  double f = 0.155;
  double t_b = 0.5;
  double eta = 1.0;
  double delta_t = 0.0;

  void validate() const {
    if (!(alpha2 >= 0.0)) throw ValidationError("protocol.alpha2 must be >= 0");
    if (!(f > 0.0 && f < 1.0)) throw ValidationError("protocol.f must be in (0,1)");
    if (!(t_b > 0.0 && t_b < 1.0)) throw ValidationError("protocol.t_b must be in (0,1)");
    if (!(eta > 0.0 && eta <= 1.0)) throw ValidationError("protocol.eta must be in (0,1]");
  }
};

struct Priors {
  double p0, p1, pd;
};

inline Priors priors_of(const ProtocolParams& p) {
  return {0.5 * (1.0 - p.f), 0.5 * (1.0 - p.f), p.f};
}

/// The two-pulse signal alphabet. VacuumPair never leaves Alice's source; it
/// represents empty slots in resent trains.
enum class SignalKind : std::uint8_t { Bit0 = 0, Bit1 = 1, Decoy = 2, VacuumPair = 3 };

/// Which of the two time bins carry a pulse. The early bin is the temporally
/// first slot; Bit0 carries its pulse in the late bin, Bit1 in the early bin.
struct PulsePattern {
  bool early, late;
};

inline PulsePattern pulse_pattern(SignalKind k) {
  switch (k) {
    case SignalKind::Bit0: return {false, true};
    case SignalKind::Bit1: return {true, false};
    case SignalKind::Decoy: return {true, true};
    case SignalKind::VacuumPair: return {false, false};
  }
  return {false, false};
}

inline int non_empty_pulses(SignalKind k) {
  const PulsePattern pat = pulse_pattern(k);
  return (pat.early ? 1 : 0) + (pat.late ? 1 : 0);
}

/// Adjacent-pulse sequences monitored by Bob's interferometer. "D" is the
/// pair inside one decoy signal; the others span a signal boundary whose two
/// facing pulses are both non-empty.
enum class SeqKind : std::uint8_t { D = 0, S01 = 1, S0d = 2, Sd1 = 3, Sdd = 4 };

inline constexpr std::array<SeqKind, 5> kAllSeqKinds = {
    SeqKind::D, SeqKind::S01, SeqKind::S0d, SeqKind::Sd1, SeqKind::Sdd};

inline const char* seq_name(SeqKind s) {
  switch (s) {
    case SeqKind::D: return "d";
    case SeqKind::S01: return "01";
    case SeqKind::S0d: return "0d";
    case SeqKind::Sd1: return "d1";
    case SeqKind::Sdd: return "dd";
  }
  return "?";
}

}  // namespace cowsec
