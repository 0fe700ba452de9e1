#pragma once

#include <span>
#include <vector>

#include "upiv/types.hpp"

namespace upiv {

/// Asymptotic covariance of sqrt(N)(beta_S - beta*_S) on an active support.
struct SandwichVariance {
  Matrix v;
  std::vector<Index> support;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
};

/**
 * V = (B_S^T W B_S)^{-1} B_S^T W Omega W B_S (B_S^T W B_S)^{-1}, with B_S the
 * columns of `b` in `support`. Throws "support not identified" when B_S^T W B_S
 * is not positive definite.
 */
SandwichVariance sandwich_variance(const Matrix& b, const Matrix& omega, const Matrix& w,
                                   std::span<const Index> support);

/// Wald intervals beta_j +- z sqrt(V_jj / N) on the support; [0, 0] elsewhere.
std::vector<Interval> wald_ci(const Vector& beta, const SandwichVariance& sv, double total_n, double level);

/// Standard normal quantile (Acklam's rational approximation plus one Halley step).
double normal_quantile(double p);

double normal_cdf(double x);

}  // namespace upiv
