#include "cowsec/discrimination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cowsec/rng.hpp"

namespace cowsec {

namespace {

Eigen::Matrix3d psd_sqrt(const Eigen::Matrix3d& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
  Eigen::Vector3d ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

double min_eigenvalue(const Eigen::Matrix3d& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(m).eigenvalues().minCoeff();
}

bool positive_definite(const Eigen::Matrix3d& m, double floor = 0.0) {
  return min_eigenvalue(m) > floor;
}

/// max priors.a subject to diag(a) <= gram, a >= 0, via a log-det barrier with
/// damped Newton steps. `gram` may be any PSD matrix (shifted Grams are used
/// by the min-conclusive search).
struct BarrierResult {
  double value = 0.0;
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
  bool ok = false;
};

BarrierResult max_conclusive(const Eigen::Matrix3d& gram, const Eigen::Vector3d& priors) {
  BarrierResult out;
  const double lam_min = min_eigenvalue(gram);
  if (lam_min <= 1e-14) {
    // Singular feasible region boundary; only a = 0 is safely feasible.
    out.ok = lam_min > -1e-12;
    return out;
  }
  Eigen::Vector3d a = Eigen::Vector3d::Constant(0.5 * lam_min);
  for (double tau = 0.1; tau > 1e-13; tau *= 0.2) {
    for (int iter = 0; iter < 60; ++iter) {
      const Eigen::Matrix3d m = gram - Eigen::Matrix3d(a.asDiagonal());
      const Eigen::Matrix3d minv = m.inverse();
      Eigen::Vector3d grad;
      Eigen::Matrix3d hess = Eigen::Matrix3d::Zero();
      for (int j = 0; j < 3; ++j) {
        grad(j) = -priors(j) + tau * minv(j, j) - tau / a(j);
        for (int k = 0; k < 3; ++k) hess(j, k) = tau * minv(j, k) * minv(j, k);
        hess(j, j) += tau / (a(j) * a(j));
      }
      Eigen::Vector3d step = hess.ldlt().solve(-grad);
      double t = 1.0;
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt) {
        Eigen::Vector3d cand = a + t * step;
        if (cand.minCoeff() > 0.0 &&
            positive_definite(gram - Eigen::Matrix3d(cand.asDiagonal()))) {
          a = cand;
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved || step.norm() * t < 1e-15) break;
    }
  }
  out.a = a;
  out.value = priors.dot(a);
  out.ok = true;
  return out;
}

Eigen::Matrix3d swap01_isometry(const Eigen::Matrix3d& embedding) {
  // Orthogonal map sending state 0 -> 1, 1 -> 0, d -> d; exists because the
  // Gram matrix is invariant under that permutation.
  Eigen::Matrix3d vt = embedding.transpose();  // columns are states
  Eigen::Matrix3d p = Eigen::Matrix3d::Zero();
  p(0, 1) = p(1, 0) = p(2, 2) = 1.0;
  return vt * p * vt.inverse();
}

struct PovmSet {
  std::vector<Eigen::Matrix3d> e;  // conclusive outcomes 0,1,d then optional inc
};

/// Stacked-factor parametrization: A has one 3x3 block per outcome and
/// A^T A = I, so E_k = A_k^T A_k is automatically a POVM.
using Stacked = Eigen::MatrixXd;

Stacked polar_retract(const Stacked& y) {
  Eigen::Matrix3d g = y.transpose() * y;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(g);
  Eigen::Vector3d ev = es.eigenvalues().cwiseMax(1e-300);
  Eigen::Matrix3d inv_sqrt =
      es.eigenvectors() * ev.cwiseInverse().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  return y * inv_sqrt;
}

Stacked stack_povm(const PovmSet& povm) {
  Stacked a(3 * static_cast<int>(povm.e.size()), 3);
  for (size_t k = 0; k < povm.e.size(); ++k) a.middleRows<3>(3 * static_cast<int>(k)) = psd_sqrt(povm.e[k]);
  return polar_retract(a);
}

PovmSet unstack(const Stacked& a) {
  PovmSet out;
  const int blocks = static_cast<int>(a.rows()) / 3;
  out.e.reserve(blocks);
  for (int k = 0; k < blocks; ++k) {
    Eigen::Matrix3d blk = a.middleRows<3>(3 * k);
    out.e.push_back(blk.transpose() * blk);
  }
  return out;
}

struct AscentProblem {
  std::array<Eigen::Vector3d, 3> states;
  Eigen::Vector3d priors;
  bool constrained = false;  // 4th block with an inconclusive-average target
  double q_inc = 0.0;
};

double correct_mass(const AscentProblem& pb, const Stacked& a) {
  double s = 0.0;
  for (int j = 0; j < 3; ++j) s += pb.priors(j) * a.middleRows<3>(3 * j).operator*(pb.states[j]).squaredNorm();
  return s;
}

double inconclusive_mass(const AscentProblem& pb, const Stacked& a) {
  double s = 0.0;
  for (int j = 0; j < 3; ++j) s += pb.priors(j) * a.middleRows<3>(9).operator*(pb.states[j]).squaredNorm();
  return s;
}

/// Projected-gradient ascent with polar retraction and backtracking.
/// Maximizes correct mass; for constrained problems an augmented-Lagrangian
/// term pins the average inconclusive probability to q_inc.
struct AscentResult {
  Stacked a;
  double correct = 0.0;
  double residual = 0.0;
  bool converged = false;
};

AscentResult run_ascent(const AscentProblem& pb, Stacked a, int max_iterations) {
  double lambda = 0.0, mu = 64.0;
  const int outer_rounds = pb.constrained ? 16 : 1;
  AscentResult res{a, 0.0, 0.0, false};
  for (int outer = 0; outer < outer_rounds; ++outer) {
    auto merit = [&](const Stacked& x) {
      double value = correct_mass(pb, x);
      if (pb.constrained) {
        const double h = inconclusive_mass(pb, x) - pb.q_inc;
        value -= lambda * h + mu * h * h;
      }
      return value;
    };
    double cur = merit(a);
    double step = 0.25;
    int flat = 0;
    for (int iter = 0; iter < max_iterations && flat < 3; ++iter) {
      Stacked grad = Stacked::Zero(a.rows(), 3);
      for (int j = 0; j < 3; ++j) {
        const Eigen::Vector3d av = a.middleRows<3>(3 * j) * pb.states[j];
        grad.middleRows<3>(3 * j) += 2.0 * pb.priors(j) * av * pb.states[j].transpose();
      }
      if (pb.constrained) {
        const double h = inconclusive_mass(pb, a) - pb.q_inc;
        const double w = -(lambda + 2.0 * mu * h);
        for (int j = 0; j < 3; ++j) {
          const Eigen::Vector3d av = a.middleRows<3>(9) * pb.states[j];
          grad.middleRows<3>(9) += 2.0 * w * pb.priors(j) * av * pb.states[j].transpose();
        }
      }
      bool improved = false;
      for (int bt = 0; bt < 40; ++bt) {
        Stacked cand = polar_retract(a + step * grad);
        const double cv = merit(cand);
        if (cv > cur + 1e-17) {
          a = cand;
          if (cv - cur < 1e-15 * std::max(1.0, std::abs(cv))) ++flat;
          else flat = 0;
          cur = cv;
          improved = true;
          step = std::min(step * 1.4, 1.0);
          break;
        }
        step *= 0.5;
      }
      if (!improved) break;
    }
    if (!pb.constrained) break;
    const double h = inconclusive_mass(pb, a) - pb.q_inc;
    if (std::abs(h) < 1e-11) break;
    lambda += 2.0 * mu * h;
    mu = std::min(mu * 3.0, 1e9);
  }
  res.a = a;
  res.correct = correct_mass(pb, a);
  res.residual = pb.constrained ? std::abs(inconclusive_mass(pb, a) - pb.q_inc) : 0.0;
  res.converged = true;
  return res;
}

Stacked random_stiefel(int rows, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Stacked a(rows, 3);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < 3; ++c) a(r, c) = gauss(rng);
  return polar_retract(a);
}

MeasurementModel model_from_operators(const DiscriminationProblem& prob,
                                      const std::vector<Eigen::Matrix3d>& conclusive,
                                      const Eigen::Matrix3d& inconclusive) {
  MeasurementModel m;
  for (int k = 0; k < 3; ++k) m.operators[k] = conclusive[k];
  m.operators[3] = inconclusive;

  Eigen::Matrix3d raw = Eigen::Matrix3d::Zero();  // raw(i,j) = <v_j| E_i |v_j>
  for (int j = 0; j < 3; ++j) {
    const Eigen::Vector3d v = prob.state(j);
    for (int i = 0; i < 3; ++i) raw(i, j) = std::max(0.0, v.dot(conclusive[i] * v));
  }
  m.conclusive_prob = raw.colwise().sum().transpose().cwiseMin(1.0);
  m.q_inc = 1.0 - prob.ensemble.priors.dot(m.conclusive_prob);
  m.q_inc = std::clamp(m.q_inc, 0.0, 1.0);

  m.confusion = Eigen::Matrix3d::Identity();
  for (int j = 0; j < 3; ++j) {
    const double cj = raw.col(j).sum();
    if (cj > 1e-14) m.confusion.col(j) = raw.col(j) / cj;
  }
  double err = 0.0, mass = 0.0;
  for (int j = 0; j < 3; ++j) {
    err += prob.ensemble.priors(j) * m.conclusive_prob(j) * (1.0 - m.confusion(j, j));
    mass += prob.ensemble.priors(j) * m.conclusive_prob(j);
  }
  m.avg_error = mass > 0.0 ? err / mass : 0.0;
  return m;
}

MeasurementModel symmetrized(const DiscriminationProblem& prob, const MeasurementModel& m) {
  // Average the measurement with its 0<->1 relabeling; the ensemble is
  // invariant under that swap, so the error and constraint are unchanged and
  // the confusion matrix becomes exactly symmetric.
  const Eigen::Matrix3d w = swap01_isometry(prob.embedding);
  std::vector<Eigen::Matrix3d> conc(3);
  conc[0] = 0.5 * (m.operators[0] + w.transpose() * m.operators[1] * w);
  conc[1] = 0.5 * (m.operators[1] + w.transpose() * m.operators[0] * w);
  conc[2] = 0.5 * (m.operators[2] + w.transpose() * m.operators[2] * w);
  const Eigen::Matrix3d inc = 0.5 * (m.operators[3] + w.transpose() * m.operators[3] * w);
  return model_from_operators(prob, conc, inc);
}

MeasurementModel degenerate_guess_model(const DiscriminationProblem& prob, double q_inc) {
  // All states identical: guess the most likely one on every conclusive
  // outcome (ties resolved to the lowest index).
  MeasurementModel m;
  m.degenerate = true;
  int best = 0;
  for (int j = 1; j < 3; ++j)
    if (prob.ensemble.priors(j) > prob.ensemble.priors(best)) best = j;
  m.q_inc = q_inc;
  m.conclusive_prob = Eigen::Vector3d::Constant(1.0 - q_inc);
  m.confusion = Eigen::Matrix3d::Zero();
  m.confusion.row(best).setOnes();
  m.avg_error = q_inc < 1.0 ? 1.0 - prob.ensemble.priors(best) : 0.0;
  for (auto& op : m.operators) op = Eigen::Matrix3d::Zero();
  m.operators[best] = (1.0 - q_inc) * Eigen::Matrix3d::Identity();
  m.operators[3] = q_inc * Eigen::Matrix3d::Identity();
  if (q_inc >= 1.0) m.confusion = Eigen::Matrix3d::Identity();
  return m;
}

/// Zero-error POVM with the given per-state conclusive probabilities. Valid
/// whenever diag(c) <= Gram; elements are scaled reciprocal-state projectors.
MeasurementModel usd_form_model(const DiscriminationProblem& prob, Eigen::Vector3d c) {
  c = c.cwiseMax(0.0).cwiseMin(1.0) * (1.0 - 1e-13);
  const Eigen::Matrix3d linv = prob.embedding.inverse();
  std::vector<Eigen::Matrix3d> conc(3);
  Eigen::Matrix3d sum = Eigen::Matrix3d::Zero();
  for (int j = 0; j < 3; ++j) {
    const Eigen::Vector3d u = linv.col(j);
    conc[j] = c(j) * u * u.transpose();
    sum += conc[j];
  }
  MeasurementModel m = model_from_operators(prob, conc, Eigen::Matrix3d::Identity() - sum);
  m.confusion = Eigen::Matrix3d::Identity();  // exact by construction
  m.avg_error = 0.0;
  return m;
}

}  // namespace

double MeasurementModel::completeness_residual() const {
  Eigen::Matrix3d sum = Eigen::Matrix3d::Zero();
  for (const auto& op : operators) sum += op;
  return (sum - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

double MeasurementModel::min_operator_eigenvalue() const {
  double mn = std::numeric_limits<double>::infinity();
  for (const auto& op : operators) mn = std::min(mn, min_eigenvalue(op));
  return mn;
}

DiscriminationProblem DiscriminationProblem::build(const SignalEnsemble& e) {
  DiscriminationProblem prob;
  prob.ensemble = e;
  if (e.alpha2 < kDegenerateAlpha2) {
    prob.degenerate = true;
    return prob;
  }
  Eigen::LDLT<Eigen::Matrix3d> ldlt(e.gram);
  const Eigen::Vector3d d = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || d.minCoeff() <= 0.0) {
    prob.degenerate = true;
    return prob;
  }
  // Undo the pivot permutation: G = (P^T L sqrt(D)) (P^T L sqrt(D))^T. For
  // this Gram family the pivot order is the identity and the factor stays
  // lower-triangular; anything else is treated as degenerate.
  const Eigen::Matrix3d perm = ldlt.transpositionsP().transpose() * Eigen::Matrix3d::Identity();
  prob.embedding = perm * Eigen::Matrix3d(ldlt.matrixL()) * d.cwiseSqrt().asDiagonal();
  const bool lower = std::abs(prob.embedding(0, 1)) + std::abs(prob.embedding(0, 2)) +
                         std::abs(prob.embedding(1, 2)) ==
                     0.0;
  if (!lower ||
      (prob.embedding * prob.embedding.transpose() - e.gram).cwiseAbs().maxCoeff() > 1e-12)
    prob.degenerate = true;
  return prob;
}

UsdSolution usd_failure_probability(const DiscriminationProblem& prob) {
  UsdSolution sol;
  if (prob.degenerate) {
    sol.degenerate = true;
    return sol;
  }
  const BarrierResult r = max_conclusive(prob.ensemble.gram, prob.ensemble.priors);
  if (!r.ok) throw SolverError("usd: barrier failed on a nonsingular Gram matrix", 0, 0.0);
  sol.q_usd = 1.0 - r.value;
  sol.conclusive = r.a;
  return sol;
}

double pretty_good_measurement_error(const DiscriminationProblem& prob) {
  if (prob.degenerate) {
    return 1.0 - prob.ensemble.priors.maxCoeff();
  }
  Eigen::Matrix3d rho = Eigen::Matrix3d::Zero();
  for (int j = 0; j < 3; ++j) {
    const Eigen::Vector3d v = prob.state(j);
    rho += prob.ensemble.priors(j) * v * v.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(rho);
  Eigen::Matrix3d inv_sqrt = es.eigenvectors() *
                             es.eigenvalues().cwiseMax(1e-300).cwiseInverse().cwiseSqrt().asDiagonal() *
                             es.eigenvectors().transpose();
  double correct = 0.0;
  for (int j = 0; j < 3; ++j) {
    const Eigen::Vector3d v = prob.state(j);
    const double amp = v.dot(inv_sqrt * v);
    correct += prob.ensemble.priors(j) * prob.ensemble.priors(j) * amp * amp;
  }
  return 1.0 - correct;
}

MeasurementModel med_measurement(const DiscriminationProblem& prob, const SolveOptions& opts) {
  if (prob.degenerate) return degenerate_guess_model(prob, 0.0);

  AscentProblem pb;
  for (int j = 0; j < 3; ++j) pb.states[j] = prob.state(j);
  pb.priors = prob.ensemble.priors;

  // Structured seeds: the pretty good measurement and the identity basis.
  std::vector<Stacked> seeds;
  {
    Eigen::Matrix3d rho = Eigen::Matrix3d::Zero();
    for (int j = 0; j < 3; ++j) rho += pb.priors(j) * pb.states[j] * pb.states[j].transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(rho);
    Eigen::Matrix3d inv_sqrt = es.eigenvectors() *
                               es.eigenvalues().cwiseMax(1e-300).cwiseInverse().cwiseSqrt().asDiagonal() *
                               es.eigenvectors().transpose();
    PovmSet pgm;
    for (int j = 0; j < 3; ++j) {
      const Eigen::Vector3d u = inv_sqrt * pb.states[j];
      pgm.e.push_back(pb.priors(j) * u * u.transpose());
    }
    seeds.push_back(stack_povm(pgm));
    seeds.push_back(polar_retract(Stacked::Identity(9, 3)));
  }
  std::mt19937_64 rng = make_engine(opts.seed, 17);
  AscentResult best;
  best.correct = -1.0;
  for (int r = 0; r < opts.restarts + static_cast<int>(seeds.size()); ++r) {
    Stacked init = r < static_cast<int>(seeds.size()) ? seeds[r] : random_stiefel(9, rng);
    AscentResult res = run_ascent(pb, init, opts.max_iterations);
    if (res.correct > best.correct) best = res;
  }
  PovmSet povm = unstack(best.a);
  MeasurementModel m = symmetrized(
      prob, model_from_operators(prob, {povm.e[0], povm.e[1], povm.e[2]}, Eigen::Matrix3d::Zero()));
  m.q_inc = 0.0;
  m.conclusive_prob = Eigen::Vector3d::Ones();

  const double pgm_error = pretty_good_measurement_error(prob);
  if (m.avg_error > pgm_error + 1e-9 || m.avg_error < -1e-12)
    throw SolverError("med: optimum not certified against the pretty good measurement",
                      opts.restarts, m.avg_error - pgm_error);
  return m;
}

MeasurementModel intermediate_measurement(const DiscriminationProblem& prob, double q_inc,
                                          const SolveOptions& opts) {
  if (!(q_inc >= 0.0 && q_inc <= 1.0))
    throw ValidationError("intermediate_measurement: q_inc must lie in [0,1]");
  if (prob.degenerate) return degenerate_guess_model(prob, q_inc);
  if (q_inc == 0.0) return med_measurement(prob, opts);
  if (q_inc >= 1.0) {
    MeasurementModel m;
    m.q_inc = 1.0;
    m.conclusive_prob.setZero();
    m.avg_error = 0.0;
    for (auto& op : m.operators) op = Eigen::Matrix3d::Zero();
    m.operators[3] = Eigen::Matrix3d::Identity();
    return m;
  }

  const UsdSolution usd = usd_failure_probability(prob);
  if (q_inc >= usd.q_usd - 1e-12) {
    // Zero error is reachable. The average constraint leaves the allocation
    // across states free; blend the prior-optimal corner with the uniform
    // zero-error measurement c = lambda_min(G) * 1 so that every state keeps
    // a conclusive channel whenever slack exists. The blend
    // c = x a* + (1-x) lambda_min 1 satisfies diag(c) <= G for x in [0,1].
    const double target = 1.0 - q_inc;
    const double lam_min = min_eigenvalue(prob.ensemble.gram);
    const double corner_avg = 1.0 - usd.q_usd;
    Eigen::Vector3d c;
    if (target <= lam_min || corner_avg <= lam_min) {
      c = Eigen::Vector3d::Constant(std::min(target, lam_min));
    } else {
      const double x = std::clamp((target - lam_min) / (corner_avg - lam_min), 0.0, 1.0);
      c = x * usd.conclusive + (1.0 - x) * lam_min * Eigen::Vector3d::Ones();
    }
    // Exact average under the priors; the rescale stays inside the feasible
    // cone because it can only shrink c.
    const double avg = prob.ensemble.priors.dot(c);
    if (avg > 0.0 && target < avg) c *= target / avg;
    MeasurementModel m = usd_form_model(prob, c);
    m.q_inc = q_inc;
    return m;
  }

  // General interpolation: 4-outcome ascent with the inconclusive average
  // pinned by an augmented Lagrangian.
  AscentProblem pb;
  for (int j = 0; j < 3; ++j) pb.states[j] = prob.state(j);
  pb.priors = prob.ensemble.priors;
  pb.constrained = true;
  pb.q_inc = q_inc;

  std::vector<Stacked> seeds;
  {
    // MED diluted with a flat inconclusive floor: h = 0 exactly.
    MeasurementModel med = med_measurement(prob, opts);
    PovmSet diluted;
    for (int k = 0; k < 3; ++k) diluted.e.push_back((1.0 - q_inc) * med.operators[k]);
    diluted.e.push_back(q_inc * Eigen::Matrix3d::Identity());
    seeds.push_back(stack_povm(diluted));
    // Convex mixture of MED and the optimal USD with weight q_inc / q_usd:
    // achieves the mixture error line, which the optimum must dominate.
    const double w = std::clamp(q_inc / usd.q_usd, 0.0, 1.0);
    MeasurementModel usd_model = usd_form_model(prob, usd.conclusive);
    PovmSet mix;
    for (int k = 0; k < 3; ++k)
      mix.e.push_back((1.0 - w) * med.operators[k] + w * usd_model.operators[k]);
    mix.e.push_back(w * usd_model.operators[3]);
    seeds.push_back(stack_povm(mix));
  }
  std::mt19937_64 rng = make_engine(opts.seed, 23);
  AscentResult best;
  best.correct = -1.0;
  double best_residual = 1.0;
  for (int r = 0; r < opts.restarts + static_cast<int>(seeds.size()); ++r) {
    Stacked init = r < static_cast<int>(seeds.size()) ? seeds[r] : random_stiefel(12, rng);
    AscentResult res = run_ascent(pb, init, opts.max_iterations);
    if (res.residual > opts.constraint_tol) continue;
    if (res.correct > best.correct) {
      best = res;
      best_residual = res.residual;
    }
  }
  if (best.correct < 0.0)
    throw SolverError("intermediate: no restart met the q_inc constraint", opts.restarts,
                      best_residual);
  PovmSet povm = unstack(best.a);
  MeasurementModel m = symmetrized(prob, model_from_operators(
                                             prob, {povm.e[0], povm.e[1], povm.e[2]}, povm.e[3]));
  return m;
}

}  // namespace cowsec
