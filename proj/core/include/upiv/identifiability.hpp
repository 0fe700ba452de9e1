#pragma once

#include <vector>

#include "upiv/datagen.hpp"
#include "upiv/types.hpp"

namespace upiv {

/// True iff the numerical rank of c equals its column count (singular values > tol * sigma_max).
bool dense_identifiable(const Matrix& c, double rel_tol = 1e-10);

/**
 * Restricted nullspace check by exhaustive enumeration: every column subset T
 * with |T| = min(2 s*, d) of c has full column rank. Throws "enumeration budget
 * exceeded" for d > 20.
 */
bool restricted_nullspace_holds(const Matrix& c, int s_star, double rel_tol = 1e-10);

/// Same check on a d x d PSD matrix q: every principal block q_{T,T} is nonsingular.
bool restricted_nullspace_holds_q(const Matrix& q, int s_star, double rel_tol = 1e-10);

/**
 * All minimal-support solutions of c beta = target with |supp beta| <= s*, found
 * by enumerating supports in order of size. Empty when no such solution exists.
 * Throws "enumeration budget exceeded" for d > 12.
 */
std::vector<Vector> sparsest_solution_set(const Matrix& c, const Vector& target, int s_star,
                                          double residual_tol = 1e-8);

/**
 * Population quantities of the balanced categorical design that govern the
 * plug-in estimator's limit.
 *
 * q = (1/m) sum_e (mu_e - mu_bar)(mu_e - mu_bar)^T and
 * noise = (1 - 1/m)(gamma_x^2 sigma_u^2 11^T + mean_e sigma_{x,e}^2 Id), the
 * per-unit variance of the first-stage noise in m B^T B. For d = 1, b = noise.
 * b_iid is sum_i Var(Z_i) when environments are drawn uniformly at random
 * rather than in fixed blocks.
 */
struct PopulationMoments {
  Matrix q;
  Matrix noise;
  double b = 0.0;
  double b_iid = 0.0;
};

PopulationMoments population_q_b(const GeneratorSpec& spec, const GroundTruth& truth);

/// beta* q / (q + b / r~).
double tsiv_bias_predict(double beta_star, double q, double b, double r_tilde);

/// (q + noise / r~)^{-1} q beta*: the multivariate limit of the plug-in estimator.
Vector tsiv_plateau(const Vector& beta_star, const Matrix& q, const Matrix& noise, double r_tilde);

}  // namespace upiv
