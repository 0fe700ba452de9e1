#include "upiv/identifiability.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/SVD>

namespace upiv {

namespace {

int numerical_rank(const Matrix& a, double rel_tol) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int rank = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * s(0)) ++rank;
  }
  return rank;
}

// Calls fn on every k-subset of [0, d) in lexicographic order; stops when fn returns false.
bool for_each_subset(int d, int k, const std::function<bool(const std::vector<Index>&)>& fn) {
  std::vector<Index> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    if (!fn(idx)) return false;
    int i = k - 1;
    while (i >= 0 && idx[i] == d - k + i) --i;
    if (i < 0) return true;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

Matrix columns(const Matrix& c, const std::vector<Index>& t) {
  Matrix out(c.rows(), static_cast<Index>(t.size()));
  for (std::size_t k = 0; k < t.size(); ++k) out.col(static_cast<Index>(k)) = c.col(t[k]);
  return out;
}

}  // namespace

bool dense_identifiable(const Matrix& c, double rel_tol) {
  return c.cols() > 0 && numerical_rank(c, rel_tol) == c.cols();
}

bool restricted_nullspace_holds(const Matrix& c, int s_star, double rel_tol) {
  const int d = static_cast<int>(c.cols());
  if (d > 20) throw Error("enumeration budget exceeded");
  if (s_star < 0) throw Error("s_star must be >= 0");
  const int size = std::min(2 * s_star, d);
  if (size == 0) return true;
  if (c.rows() < size) return false;
  return for_each_subset(d, size, [&](const std::vector<Index>& t) {
    return numerical_rank(columns(c, t), rel_tol) == size;
  });
}

bool restricted_nullspace_holds_q(const Matrix& q, int s_star, double rel_tol) {
  const int d = static_cast<int>(q.cols());
  if (q.rows() != d) throw Error("q must be square");
  if (d > 20) throw Error("enumeration budget exceeded");
  if (s_star < 0) throw Error("s_star must be >= 0");
  const int size = std::min(2 * s_star, d);
  if (size == 0) return true;
  return for_each_subset(d, size, [&](const std::vector<Index>& t) {
    Matrix block(size, size);
    for (int a = 0; a < size; ++a) {
      for (int b = 0; b < size; ++b) block(a, b) = q(t[a], t[b]);
    }
    return numerical_rank(block, rel_tol) == size;
  });
}

std::vector<Vector> sparsest_solution_set(const Matrix& c, const Vector& target, int s_star, double residual_tol) {
  const int d = static_cast<int>(c.cols());
  if (d > 12) throw Error("enumeration budget exceeded");
  if (target.size() != c.rows()) throw Error("sparsest_solution_set: dimension mismatch");
  if (target.norm() < residual_tol) return {Vector::Zero(d)};
  std::vector<Vector> found;
  for (int size = 1; size <= std::min(s_star, d); ++size) {
    for_each_subset(d, size, [&](const std::vector<Index>& t) {
      const Matrix ct = columns(c, t);
      const Vector coef = ct.completeOrthogonalDecomposition().solve(target);
      if ((ct * coef - target).norm() >= residual_tol) return true;
      if ((coef.array() == 0.0).any()) return true;
      Vector beta = Vector::Zero(d);
      for (std::size_t k = 0; k < t.size(); ++k) beta(t[k]) = coef(static_cast<Index>(k));
      const bool duplicate = std::any_of(found.begin(), found.end(),
                                         [&](const Vector& v) { return (v - beta).norm() < residual_tol; });
      if (!duplicate) found.push_back(beta);
      return true;
    });
    if (!found.empty()) break;
  }
  return found;
}

PopulationMoments population_q_b(const GeneratorSpec& spec, const GroundTruth& truth) {
  if (spec.kind != GeneratorKind::Categorical) throw Error("population_q_b: only categorical specs are supported");
  const Matrix& mu = truth.first_stage;
  if (mu.rows() != spec.m || mu.cols() != spec.d) throw Error("population_q_b: ground truth does not match spec");
  const double m = spec.m;
  const Matrix centered = mu.rowwise() - mu.colwise().mean();
  PopulationMoments pm;
  pm.q = centered.transpose() * centered / m;
  const double shared = spec.gamma_x * spec.gamma_x * spec.sigma_u * spec.sigma_u;
  const double own = truth.sigma_x_env.array().square().mean();
  pm.noise = (1.0 - 1.0 / m) * (shared * Matrix::Ones(spec.d, spec.d) + own * Matrix::Identity(spec.d, spec.d));
  if (spec.d == 1) {
    pm.b = pm.noise(0, 0);
    // Uniform environment draw: sum_i Var(Z_i) = (1 - 1/m) mean_e E[X^2 | e] - q / m.
    const Vector mean_sq = (mu.col(0).array().square() + shared + truth.sigma_x_env.array().square()).matrix();
    pm.b_iid = (1.0 - 1.0 / m) * mean_sq.mean() - pm.q(0, 0) / m;
  }
  return pm;
}

double tsiv_bias_predict(double beta_star, double q, double b, double r_tilde) {
  if (!(q > 0.0) || !(r_tilde > 0.0)) throw Error("tsiv_bias_predict: q and r_tilde must be positive");
  return beta_star * q / (q + b / r_tilde);
}

Vector tsiv_plateau(const Vector& beta_star, const Matrix& q, const Matrix& noise, double r_tilde) {
  if (!(r_tilde > 0.0)) throw Error("tsiv_plateau: r_tilde must be positive");
  const Matrix denom = q + noise / r_tilde;
  return denom.ldlt().solve(q * beta_star);
}

}  // namespace upiv
