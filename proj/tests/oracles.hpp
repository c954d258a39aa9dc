#pragma once

// Brute-force oracles kept independent of the library's solvers: the USD
// optimum by refined grid search over the three conclusive scalings, the MED
// optimum by refined grid search over orthonormal measurement bases (the MED
// optimum for linearly independent pure states is attained by one).

#include <Eigen/Dense>
#include <array>
#include <cmath>

namespace oracles {

inline bool psd(const Eigen::Matrix3d& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(m).eigenvalues().minCoeff() >= -1e-12;
}

/// max priors.a subject to diag(a) <= gram via hierarchical grid refinement.
inline double usd_max_conclusive(const Eigen::Matrix3d& gram, const Eigen::Vector3d& priors) {
  Eigen::Vector3d center = Eigen::Vector3d::Constant(0.5);
  double half = 0.5;
  double best = 0.0;
  Eigen::Vector3d best_a = Eigen::Vector3d::Zero();
  const int pts = 13;
  for (int level = 0; level < 12; ++level) {
    for (int i = 0; i < pts; ++i) {
      for (int j = 0; j < pts; ++j) {
        for (int k = 0; k < pts; ++k) {
          Eigen::Vector3d a(center(0) - half + 2.0 * half * i / (pts - 1),
                            center(1) - half + 2.0 * half * j / (pts - 1),
                            center(2) - half + 2.0 * half * k / (pts - 1));
          a = a.cwiseMax(0.0).cwiseMin(1.0);
          if (priors.dot(a) <= best) continue;
          if (!psd(gram - Eigen::Matrix3d(a.asDiagonal()))) continue;
          best = priors.dot(a);
          best_a = a;
        }
      }
    }
    center = best_a;
    half *= 0.35;
  }
  return best;
}

inline double usd_failure_oracle(const Eigen::Matrix3d& gram, const Eigen::Vector3d& priors) {
  return 1.0 - usd_max_conclusive(gram, priors);
}

/// Minimum average error over orthonormal bases (b_j assigned to state j),
/// parametrized by ZYZ Euler angles with local refinement.
inline double med_error_oracle(const std::array<Eigen::Vector3d, 3>& states,
                               const Eigen::Vector3d& priors) {
  auto error_at = [&](double a, double b, double c) {
    const Eigen::Matrix3d rot(Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()) *
                              Eigen::AngleAxisd(b, Eigen::Vector3d::UnitY()) *
                              Eigen::AngleAxisd(c, Eigen::Vector3d::UnitZ()));
    double correct = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double amp = rot.col(j).dot(states[j]);
      correct += priors(j) * amp * amp;
    }
    return 1.0 - correct;
  };

  double best = 1.0;
  std::array<double, 3> best_angles{0.0, 0.0, 0.0};
  double range_a = M_PI, range_b = 0.5 * M_PI, range_c = M_PI;
  std::array<double, 3> center{0.0, 0.5 * M_PI, 0.0};
  const int pts = 31;
  for (int level = 0; level < 7; ++level) {
    for (int i = 0; i < pts; ++i) {
      for (int j = 0; j < pts; ++j) {
        for (int k = 0; k < pts; ++k) {
          const double a = center[0] - range_a + 2.0 * range_a * i / (pts - 1);
          const double b = center[1] - range_b + 2.0 * range_b * j / (pts - 1);
          const double c = center[2] - range_c + 2.0 * range_c * k / (pts - 1);
          const double e = error_at(a, b, c);
          if (e < best) {
            best = e;
            best_angles = {a, b, c};
          }
        }
      }
    }
    center = best_angles;
    range_a *= 0.2;
    range_b *= 0.2;
    range_c *= 0.2;
  }
  return best;
}

}  // namespace oracles
