#pragma once

#include <optional>

#include "upiv/types.hpp"

namespace upiv {

struct L1Options {
  double tolerance = 1e-10;     ///< stop when the largest coordinate update falls below this
  int max_sweeps = 100000;
  double psd_tolerance = 1e-8;  ///< most negative eigenvalue of G accepted
  bool check_psd = true;
};

struct L1Result {
  Vector beta;
  int sweeps = 0;
  bool converged = false;
  double objective = 0.0;
};

/// Objective 0.5 b^T G b - h^T b + lambda ||b||_1.
double l1_objective(const Matrix& g, const Vector& h, double lambda, const Vector& beta);

/**
 * Cyclic coordinate descent with soft-thresholding for
 *   min_b 0.5 b^T G b - h^T b + lambda ||b||_1,   G symmetric PSD.
 *
 * Inactive coordinates come back as exact zeros. A warm start may be supplied.
 * Throws when G is not PSD within `psd_tolerance`.
 */
L1Result l1_quadratic_solve(const Matrix& g, const Vector& h, double lambda, const L1Options& options = {},
                            const std::optional<Vector>& warm_start = std::nullopt);

/// Smallest lambda for which the solution is identically zero: ||h||_inf.
double l1_lambda_max(const Vector& h);

}  // namespace upiv
