#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cowsec/attack.hpp"

namespace cowsec {

enum class Objective : std::uint8_t { MaxMinVisibility, MaxAverageVisibility };

/// How a sequence with zero monitoring click mass enters the success test.
/// Such a sequence yields no visibility estimate and hence no evidence of a
/// threshold violation, so by default it counts as compliant (and is
/// flagged); Fail reproduces the strict reading.
enum class UndefinedVisibilityPolicy : std::uint8_t { TreatAsPerfect, Fail };

struct OptimizationTarget {
  Objective objective = Objective::MaxMinVisibility;
  double q_th = 0.05;
  double v_th = 0.95;
  UndefinedVisibilityPolicy undefined_policy = UndefinedVisibilityPolicy::TreatAsPerfect;

  void validate() const {
    if (!(q_th >= 0.0 && q_th <= 0.5)) throw ValidationError("target.q_th must be in [0,0.5]");
    if (!(v_th >= 0.0 && v_th <= 1.0)) throw ValidationError("target.v_th must be in [0,1]");
  }
};

struct SuccessCheck {
  bool success = false;
  bool qber_ok = false;
  bool visibility_ok = false;
  std::vector<SeqKind> vacuous;  // sequences that carried no click mass
  std::string detail;
};

/// True iff the simulated attack stays within both monitoring thresholds:
/// QBER <= q_th and (per-sequence or average) visibility >= v_th.
SuccessCheck attack_succeeds(const ObservedStats& stats, const OptimizationTarget& t);

/// Shared, memoized access to the interpolated-measurement family of one
/// ensemble: exact solves on a q_inc grid, probabilistic mixtures of
/// neighboring solves in between (any mixture is itself a measurement Eve
/// can implement). Zero-error members above q_usd are built directly.
class MeasurementFamily {
 public:
  /// The default solver options are lighter than the standalone ones: family
  /// anchors are seeded from the MED/USD mixture (which already dominates the
  /// mixture error line), so few random restarts are needed here.
  MeasurementFamily(const ProtocolParams& p,
                    const SolveOptions& opts = {.restarts = 6, .seed = 0x5eedULL,
                                                .constraint_tol = 1e-8, .max_iterations = 250});

  double q_usd() const { return q_usd_; }
  const DiscriminationProblem& problem() const { return problem_; }
  const MeasurementModel& at(double q_inc);

 private:
  DiscriminationProblem problem_;
  SolveOptions opts_;
  double q_usd_ = 1.0;
  std::map<double, MeasurementModel> cache_;
};

struct OptimizeResult {
  bool feasible = false;
  AttackParams params;
  ObservedStats stats;
  double achieved_gain = 0.0;
  double target_gain = 0.0;
  double max_achievable_gain = 0.0;
  double objective_value = 0.0;
  int evaluations = 0;
};

/// Best attack parameters whose simulated bit gain matches target_gain within
/// kGainMatchTol, maximizing the target objective and secondarily minimizing
/// QBER. Coarse grid over (m_min, q_p), continuous matching of q_inc,
/// derivative-free polish of beta2. Infeasible targets return
/// feasible = false with the attack's maximum achievable gain.
OptimizeResult optimize_attack_at_gain(const ProtocolParams& p, double target_gain,
                                       const OptimizationTarget& t, int budget,
                                       std::uint64_t seed, const SimOptions& sim = {});
/// `hints` are warm-start cells (for example the winner at a neighboring
/// gain) that enter the refinement stage regardless of their probe rank.
OptimizeResult optimize_attack_at_gain(const ProtocolParams& p, double target_gain,
                                       const OptimizationTarget& t, int budget,
                                       std::uint64_t seed, const SimOptions& sim,
                                       MeasurementFamily& family,
                                       std::span<const AttackParams> hints = {});

inline constexpr double kGainMatchTol = 0.01;
inline constexpr double kBeta2Max = 50.0;

/// Optimizes every point of a descending gain grid with two continuation
/// passes (descending, then ascending) so neighboring solutions warm-start
/// each other along the frontier.
std::vector<OptimizeResult> frontier_sweep(const ProtocolParams& p,
                                           std::span<const double> gains_desc,
                                           const OptimizationTarget& t, int budget,
                                           std::uint64_t seed, const SimOptions& sim = {});

struct AlphaMaxResult {
  double alpha_max2 = 0.0;
  bool no_secure_intensity = false;  // attack succeeds even at the intensity floor
  bool success_unbounded = false;    // attack never succeeded up to the search cap
  bool verified_above = false;       // attack confirmed successful at 1.1x the result
  int evaluations = 0;
};

/// Largest alpha2 (relative tolerance 1e-2) at which the optimized attack,
/// required to reproduce the honest gain at (eta, alpha2), still fails the
/// thresholds. For the strict thresholds (0,1) only zero-error fully-trimmed
/// attacks qualify, so the test reduces to comparing the honest gain against
/// that family's gain ceiling.
AlphaMaxResult alpha_max(double f, double eta, const OptimizationTarget& t, int budget,
                         std::uint64_t seed, double t_b = 0.5, const SimOptions& sim = {});

struct BoundPoint {
  double eta = 0.0;
  double f = 0.0;
  double alpha_max2 = 0.0;
  double r = 0.0;  // (1-f) * eta * alpha_max2
  bool no_secure_intensity = false;
  bool success_unbounded = false;
};

struct BoundSweepResult {
  std::vector<BoundPoint> points;
  double loglog_slope = 0.0;  // d log r / d log eta over the valid points
  double loglog_r2 = 0.0;
};

BoundSweepResult bound_sweep(double f, std::span<const double> eta_grid,
                             const OptimizationTarget& t, int budget, std::uint64_t seed,
                             double t_b = 0.5, const SimOptions& sim = {});

struct ExperimentPoint {
  std::string label;
  double gain = 0.0;
  double qber = 0.0;
  std::map<SeqKind, double> visibilities;
  std::optional<double> v_ave;
  double alpha2 = 0.0;
  double f = 0.0;

  void validate() const;
};

enum class Verdict : std::uint8_t { Insecure, NotDecidedByThisAttack };

struct CheckResult {
  Verdict verdict = Verdict::NotDecidedByThisAttack;
  OptimizeResult attack;
  std::string detail;
};

/// Optimizes the attack at the experiment's gain and compares frontiers: the
/// point is insecure if the attack reaches its gain with no worse QBER and no
/// worse visibilities than measured.
CheckResult check_experiment(const ExperimentPoint& point, const ProtocolParams& p,
                             const OptimizationTarget& t, int budget, std::uint64_t seed,
                             const SimOptions& sim = {});

}  // namespace cowsec
