#include "upiv/l1_solver.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace upiv {

namespace {

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

}  // namespace

double l1_objective(const Matrix& g, const Vector& h, double lambda, const Vector& beta) {
  return 0.5 * beta.dot(g * beta) - h.dot(beta) + lambda * beta.lpNorm<1>();
}

double l1_lambda_max(const Vector& h) { return h.size() == 0 ? 0.0 : h.cwiseAbs().maxCoeff(); }

L1Result l1_quadratic_solve(const Matrix& g, const Vector& h, double lambda, const L1Options& options,
                            const std::optional<Vector>& warm_start) {
  const Index d = h.size();
  if (g.rows() != d || g.cols() != d) throw Error("l1_quadratic_solve: dimension mismatch");
  if (lambda < 0.0 || !std::isfinite(lambda)) throw Error("l1_quadratic_solve: lambda must be finite and >= 0");
  if (!g.allFinite() || !h.allFinite()) throw Error("l1_quadratic_solve: non-finite input");
  if (options.check_psd && d > 0) {
    const Matrix sym = 0.5 * (g + g.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -options.psd_tolerance) throw Error("l1_quadratic_solve: G is not PSD");
  }

  L1Result result;
  result.beta = warm_start ? *warm_start : Vector::Zero(d);
  if (result.beta.size() != d) throw Error("l1_quadratic_solve: warm start has wrong dimension");

  // grad = h - G beta, kept current after every coordinate move.
  Vector grad = h - g * result.beta;
  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    double max_step = 0.0;
    for (Index j = 0; j < d; ++j) {
      const double gjj = g(j, j);
      const double old = result.beta(j);
      double updated = 0.0;
      if (gjj > 0.0) updated = soft_threshold(grad(j) + gjj * old, lambda) / gjj;
      const double step = updated - old;
      if (step != 0.0) {
        grad.noalias() -= step * g.col(j);
        result.beta(j) = updated;
        max_step = std::max(max_step, std::abs(step));
      }
    }
    result.sweeps = sweep;
    if (max_step < options.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.objective = l1_objective(g, h, lambda, result.beta);
  return result;
}

}  // namespace upiv
