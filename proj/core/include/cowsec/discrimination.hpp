#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>

#include "cowsec/states.hpp"

namespace cowsec {

/// Intensities below this are treated as the degenerate (all states equal)
/// ensemble; the Gram matrix is numerically singular there.
inline constexpr double kDegenerateAlpha2 = 1e-6;

/// The three-state discrimination instance in orthonormal coordinates.
/// `embedding` is a lower-triangular factor of the Gram matrix; its rows are
/// the embedded state vectors (unit norm, pairwise inner products equal to
/// the overlaps).
struct DiscriminationProblem {
  SignalEnsemble ensemble;
  Eigen::Matrix3d embedding = Eigen::Matrix3d::Identity();
  bool degenerate = false;

  static DiscriminationProblem build(const SignalEnsemble& e);
  Eigen::Vector3d state(int j) const { return embedding.row(j).transpose(); }
};

/// Eve's per-signal measurement. conclusive_prob[j] is the probability of a
/// conclusive outcome on input state j; confusion(i,j) is the probability of
/// reporting identity i given input j and a conclusive outcome (columns sum
/// to one). avg_error conditions on conclusive outcomes and weights by the
/// priors.
struct MeasurementModel {
  double q_inc = 0.0;
  Eigen::Vector3d conclusive_prob = Eigen::Vector3d::Ones();
  Eigen::Matrix3d confusion = Eigen::Matrix3d::Identity();
  double avg_error = 0.0;
  /// POVM elements in embedded coordinates: outcomes 0, 1, d, inconclusive.
  std::array<Eigen::Matrix3d, 4> operators{};
  bool degenerate = false;

  /// Largest deviation of sum(operators) from the identity.
  double completeness_residual() const;
  /// Smallest eigenvalue across all operators (>= -1e-9 for a valid POVM).
  double min_operator_eigenvalue() const;
};

struct UsdSolution {
  double q_usd = 1.0;
  /// Optimal per-state conclusive probabilities of the zero-error measurement.
  Eigen::Vector3d conclusive = Eigen::Vector3d::Zero();
  bool degenerate = false;
};

/// Minimum prior-averaged inconclusive probability over all measurements that
/// never misidentify a state. Zero-error POVM elements are nonnegative
/// scalings of the reciprocal-state projectors, so the problem reduces to
/// maximizing priors.c over the spectrahedron diag(c) <= Gram; solved with a
/// log-det barrier.
UsdSolution usd_failure_probability(const DiscriminationProblem& prob);

struct SolveOptions {
  int restarts = 32;
  std::uint64_t seed = 0x5eedULL;
  double constraint_tol = 1e-8;
  int max_iterations = 400;
};

/// Minimum-error discrimination (q_inc = 0): projected-gradient ascent over
/// stacked measurement factorizations on the Stiefel manifold, randomized
/// restarts, certified against the pretty-good-measurement error.
MeasurementModel med_measurement(const DiscriminationProblem& prob, const SolveOptions& opts = {});

/// The interpolated measurement: minimizes the conclusive-conditioned error
/// subject to a prior-averaged inconclusive probability of exactly q_inc.
/// Reproduces MED at q_inc = 0 and reaches zero error for q_inc >= q_usd,
/// where the zero-error measurement maximizing the minimum per-state
/// conclusive probability is returned.
MeasurementModel intermediate_measurement(const DiscriminationProblem& prob, double q_inc,
                                          const SolveOptions& opts = {});

/// Error probability of the pretty good measurement (square-root measurement)
/// for the ensemble; an upper bound on the MED error.
double pretty_good_measurement_error(const DiscriminationProblem& prob);

}  // namespace cowsec
