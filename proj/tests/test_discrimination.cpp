#include <doctest.h>

#include <cmath>

#include "cowsec/discrimination.hpp"
#include "oracles.hpp"

using namespace cowsec;

namespace {

DiscriminationProblem problem_at(double alpha2, double f = 0.155) {
  ProtocolParams p;
  p.alpha2 = alpha2;
  p.f = f;
  return DiscriminationProblem::build(build_ensemble(p));
}

}  // namespace

TEST_CASE("embedding reproduces the gram matrix") {
  for (double a2 : {1e-3, 0.1, 0.5, 1.0, 5.0}) {
    const DiscriminationProblem prob = problem_at(a2);
    REQUIRE_FALSE(prob.degenerate);
    CHECK((prob.embedding * prob.embedding.transpose() - prob.ensemble.gram)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    // Lower-triangular factor, unit-norm embedded states.
    CHECK(prob.embedding(0, 1) == 0.0);
    CHECK(prob.embedding(0, 2) == 0.0);
    CHECK(prob.embedding(1, 2) == 0.0);
    for (int j = 0; j < 3; ++j) CHECK(prob.state(j).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(problem_at(0.0).degenerate);
  CHECK(problem_at(1e-8).degenerate);
}

TEST_CASE("usd failure probability matches the grid-search oracle") {
  for (double a2 : {0.25, 0.5, 1.0}) {
    const DiscriminationProblem prob = problem_at(a2);
    const UsdSolution sol = usd_failure_probability(prob);
    const double oracle = oracles::usd_failure_oracle(prob.ensemble.gram, prob.ensemble.priors);
    CHECK(std::abs(sol.q_usd - oracle) < 1e-6);
    CHECK(sol.q_usd > 0.0);
    CHECK(sol.q_usd < 1.0);
  }
}

TEST_CASE("usd failure stays below the per-pulse construction") {
  // Feasible-point upper bound: resolve each pulse with two-state
  // vacuum-versus-alpha USD (symmetric failure s = exp(-alpha2/2)); a signal
  // is implied whenever a pulse reads vacuum, or both read alpha.
  for (double a2 : {0.1, 0.5, 1.0}) {
    const double f = 0.155;
    const double s = std::exp(-0.5 * a2);
    const double per_pulse = 1.0 - ((1.0 - f) * (1.0 - s) + f * (1.0 - s) * (1.0 - s));
    const UsdSolution sol = usd_failure_probability(problem_at(a2, f));
    CHECK(sol.q_usd <= per_pulse + 1e-12);
  }
}

TEST_CASE("usd degenerates and saturates") {
  const UsdSolution deg = usd_failure_probability(problem_at(0.0));
  CHECK(deg.degenerate);
  CHECK(deg.q_usd == 1.0);
  CHECK(usd_failure_probability(problem_at(1e-4)).q_usd > 0.999);
}

TEST_CASE("usd failure is non-increasing in intensity") {
  double prev = 1.0;
  for (double a2 = 0.1; a2 <= 2.0 + 1e-9; a2 += 0.1) {
    const double q = usd_failure_probability(problem_at(a2)).q_usd;
    CHECK(q <= prev + 1e-10);
    prev = q;
  }
}

TEST_CASE("med matches the orthonormal-basis oracle") {
  const DiscriminationProblem prob = problem_at(0.5);
  const MeasurementModel med = med_measurement(prob);
  const double oracle =
      oracles::med_error_oracle({prob.state(0), prob.state(1), prob.state(2)},
                                prob.ensemble.priors);
  CHECK(std::abs(med.avg_error - oracle) < 1e-5);
}

TEST_CASE("med edge cases and certification") {
  SUBCASE("near-orthogonal states are almost perfectly distinguishable") {
    const MeasurementModel med = med_measurement(problem_at(20.0));
    CHECK(med.avg_error >= 0.0);
    CHECK(med.avg_error <= 1e-4);
  }
  SUBCASE("identical states reduce to guessing the most likely one") {
    const MeasurementModel med = med_measurement(problem_at(0.0));
    CHECK(med.degenerate);
    CHECK(med.avg_error == doctest::Approx(1.0 - 0.4225).epsilon(1e-12));
  }
  SUBCASE("certified against the pretty good measurement") {
    for (double a2 : {0.1, 0.5, 1.5}) {
      const DiscriminationProblem prob = problem_at(a2);
      const MeasurementModel med = med_measurement(prob);
      CHECK(med.avg_error <= pretty_good_measurement_error(prob) + 1e-9);
      CHECK(med.q_inc == 0.0);
      CHECK(med.conclusive_prob.minCoeff() == 1.0);
    }
  }
}

TEST_CASE("interpolated measurement endpoints and curve") {
  const DiscriminationProblem prob = problem_at(0.5);
  const UsdSolution usd = usd_failure_probability(prob);
  const MeasurementModel med = med_measurement(prob);

  SUBCASE("q_inc = 0 reproduces minimum-error discrimination") {
    const MeasurementModel m = intermediate_measurement(prob, 0.0);
    CHECK(m.avg_error == doctest::Approx(med.avg_error).epsilon(1e-9));
    CHECK(m.q_inc == 0.0);
  }
  SUBCASE("at and beyond the usd point the error vanishes") {
    for (double q : {usd.q_usd, 0.5 * (1.0 + usd.q_usd), 1.0}) {
      const MeasurementModel m = intermediate_measurement(prob, q);
      CHECK(m.avg_error <= 1e-9);
      CHECK(std::abs(prob.ensemble.priors.dot(Eigen::Vector3d::Ones() - m.conclusive_prob) - q) <
            1e-8);
    }
  }
  SUBCASE("slack above the usd point reopens every conclusive channel") {
    const MeasurementModel m = intermediate_measurement(prob, usd.q_usd + 0.05);
    CHECK(m.conclusive_prob.minCoeff() > 1e-4);
    CHECK(m.avg_error == 0.0);
  }
  SUBCASE("error is non-increasing and dominated by the med/usd mixture line") {
    double prev = 1.0;
    for (int i = 0; i < 20; ++i) {
      const double q = i / 19.0;
      const MeasurementModel m = intermediate_measurement(prob, q);
      CHECK(m.avg_error <= prev + 1e-9);
      prev = m.avg_error;
      if (q < 1.0) {
        const double w = std::min(1.0, q / usd.q_usd);
        const double mixture = (1.0 - w) * med.avg_error / (1.0 - q);
        CHECK(m.avg_error <= mixture + 1e-6);
      }
      // POVM reconstruction invariants.
      CHECK(m.completeness_residual() < 1e-9);
      CHECK(m.min_operator_eigenvalue() > -1e-9);
      CHECK(std::abs(prob.ensemble.priors.dot(Eigen::Vector3d::Ones() - m.conclusive_prob) - q) <
            1e-8);
      for (int col = 0; col < 3; ++col) {
        CHECK(m.confusion.col(col).sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(m.confusion.col(col).minCoeff() >= 0.0);
        // Diagonal dominance is expected but not required; warn only.
        WARN(m.confusion(col, col) >= m.confusion.col(col).maxCoeff() - 1e-9);
      }
    }
  }
  SUBCASE("out-of-range q_inc is rejected") {
    CHECK_THROWS_AS(intermediate_measurement(prob, -0.1), ValidationError);
    CHECK_THROWS_AS(intermediate_measurement(prob, 1.1), ValidationError);
  }
}

TEST_CASE("interpolated measurement respects the bit swap symmetry") {
  const DiscriminationProblem prob = problem_at(0.4);
  for (double q : {0.1, 0.3, 0.55}) {
    const MeasurementModel m = intermediate_measurement(prob, q);
    CHECK(m.conclusive_prob(0) == doctest::Approx(m.conclusive_prob(1)).epsilon(1e-9));
    CHECK(m.confusion(2, 0) == doctest::Approx(m.confusion(2, 1)).epsilon(1e-8));
    CHECK(m.confusion(0, 2) == doctest::Approx(m.confusion(1, 2)).epsilon(1e-8));
  }
}

TEST_CASE("degenerate interpolation keeps the guessing rule") {
  const DiscriminationProblem prob = problem_at(0.0);
  const MeasurementModel m = intermediate_measurement(prob, 0.4);
  CHECK(m.degenerate);
  CHECK(m.q_inc == doctest::Approx(0.4));
  CHECK(m.conclusive_prob.isApproxToConstant(0.6, 1e-12));
  CHECK(m.avg_error == doctest::Approx(1.0 - 0.4225).epsilon(1e-12));
}
