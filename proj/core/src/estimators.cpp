#include "upiv/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "upiv/l1_solver.hpp"

namespace upiv {

std::string to_string(WeightKind kind) { return kind == WeightKind::Identity ? "identity" : "omega_inverse"; }

void EstimatorConfig::validate() const {
  if (!(ridge > 0.0)) throw ConfigError("ridge must be > 0");
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (redraws < 1) throw ConfigError("redraws must be >= 1");
  if (!(lambda.value >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(lambda.ebic_gamma >= 0.0)) throw ConfigError("ebic_gamma must be >= 0");
  if (lambda.mode == LambdaRule::Mode::Path && (lambda.path_points < 2 || !(lambda.path_ratio > 0.0 && lambda.path_ratio < 1.0))) {
    throw ConfigError("lambda path needs >= 2 points and a ratio in (0, 1)");
  }
  if (support_rule == SupportRule::BetaMinHalf && !(beta_min > 0.0)) {
    throw ConfigError("beta-min support rule needs beta_min > 0");
  }
  if (ci_level && !(*ci_level > 0.0 && *ci_level < 1.0)) throw ConfigError("ci level must lie in (0, 1)");
}

Vector ridge_solve(const Matrix& a, const Vector& rhs, double ridge, double* condition_number) {
  if (!a.allFinite() || !rhs.allFinite()) throw Error("non-finite inputs");
  Matrix sys = 0.5 * (a + a.transpose());
  sys.diagonal().array() += ridge;
  if (condition_number) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sys, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    *condition_number = ev.size() == 0 ? 1.0 : std::abs(ev.maxCoeff()) / std::max(std::abs(ev.minCoeff()), 1e-300);
  }
  Eigen::LLT<Matrix> llt(sys);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  return sys.ldlt().solve(rhs);
}

namespace {

// W = (omega + ridge I)^{-1} held as a Cholesky factor, an explicit matrix, or the identity.
class Weight {
 public:
  static Weight identity() { return Weight{}; }

  static std::optional<Weight> inverse_of(const Matrix& omega, double ridge) {
    Matrix sys = 0.5 * (omega + omega.transpose());
    sys.diagonal().array() += ridge;
    Weight w;
    w.identity_ = false;
    w.llt_.compute(sys);
    if (w.llt_.info() != Eigen::Success) return std::nullopt;
    return w;
  }

  /// Moore-Penrose inverse, dropping eigenvalues below rel_tol * the largest.
  static Weight pseudo_inverse_of(const Matrix& v, double rel_tol) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (v + v.transpose()));
    const Vector& ev = eig.eigenvalues();
    const double cutoff = rel_tol * std::max(ev.maxCoeff(), 0.0);
    Vector inv = Vector::Zero(ev.size());
    for (Index i = 0; i < ev.size(); ++i) {
      if (ev(i) > cutoff && ev(i) > 0.0) inv(i) = 1.0 / ev(i);
    }
    Weight w;
    w.identity_ = false;
    w.explicit_ = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    return w;
  }

  bool is_identity() const { return identity_; }
  Matrix apply(const Matrix& x) const {
    if (identity_) return x;
    return explicit_ ? Matrix(*explicit_ * x) : Matrix(llt_.solve(x));
  }
  Vector apply(const Vector& x) const {
    if (identity_) return x;
    return explicit_ ? Vector(*explicit_ * x) : Vector(llt_.solve(x));
  }
  Matrix dense(Index q) const { return identity_ ? Matrix(Matrix::Identity(q, q)) : apply(Matrix(Matrix::Identity(q, q))); }

 private:
  bool identity_ = true;
  Eigen::LLT<Matrix> llt_;
  std::optional<Matrix> explicit_;
};

bool positive_definite(const Matrix& a) {
  Eigen::LLT<Matrix> llt(0.5 * (a + a.transpose()));
  if (llt.info() != Eigen::Success) return false;
  return llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0;
}

std::vector<Index> nonzero_pattern(const Vector& beta) {
  std::vector<Index> s;
  for (Index j = 0; j < beta.size(); ++j) {
    if (beta(j) != 0.0) s.push_back(j);
  }
  return s;
}

std::vector<Index> select_support(const Vector& beta, const EstimatorConfig& cfg) {
  if (cfg.support_rule == SupportRule::NonzeroPattern) return nonzero_pattern(beta);
  std::vector<Index> s;
  for (Index j = 0; j < beta.size(); ++j) {
    if (std::abs(beta(j)) >= 0.5 * cfg.beta_min) s.push_back(j);
  }
  return s;
}

Matrix sub_block(const Matrix& a, const std::vector<Index>& s) {
  const auto k = static_cast<Index>(s.size());
  Matrix out(k, k);
  for (Index r = 0; r < k; ++r) {
    for (Index c = 0; c < k; ++c) out(r, c) = a(s[r], s[c]);
  }
  return out;
}

Vector sub_vector(const Vector& v, const std::vector<Index>& s) {
  Vector out(static_cast<Index>(s.size()));
  for (std::size_t k = 0; k < s.size(); ++k) out(static_cast<Index>(k)) = v(s[k]);
  return out;
}

Vector scatter(const Vector& values, const std::vector<Index>& s, Index d) {
  Vector out = Vector::Zero(d);
  for (std::size_t k = 0; k < s.size(); ++k) out(s[k]) = values(static_cast<Index>(k));
  return out;
}

// Linear moment g(beta) = target - M beta with quadratic-form data precomputed
// for one weight: gram = M^T W M, rhs = M^T W target.
struct WeightedSystem {
  Matrix gram;
  Vector rhs;
  double target_norm = 0.0;  // target^T W target

  WeightedSystem(const Matrix& m, const Vector& target, const Weight& w) {
    const Matrix wm = w.apply(m);
    gram = m.transpose() * wm;
    gram = 0.5 * (gram + gram.transpose());
    rhs = wm.transpose() * target;
    target_norm = target.dot(w.apply(target));
  }

  double objective(const Vector& beta) const {
    return std::max(target_norm - 2.0 * beta.dot(rhs) + beta.dot(gram * beta), 0.0);
  }

  // Dense solve restricted to `support`; zero elsewhere.
  Vector refit(const std::vector<Index>& support, double ridge, double* cond = nullptr) const {
    if (support.empty()) return Vector::Zero(rhs.size());
    return scatter(ridge_solve(sub_block(gram, support), sub_vector(rhs, support), ridge, cond), support, rhs.size());
  }
};

struct L1Fit {
  Vector beta;
  double lambda = 0.0;
  int sweeps = 0;
  int path_index = -1;
  /// Selected support after backward elimination on the criterion (path rule only).
  std::optional<std::vector<Index>> pruned;
};

/**
 * l1 fit on `weighted`. For the path rule each candidate support is refit with
 * the efficient weight and scored by N * J(S) + |S| (log N + 2 gamma log d),
 * where J is the efficient-weight objective.
 */
L1Fit fit_l1(const WeightedSystem& weighted, const WeightedSystem* efficient, const Matrix* score_cov,
             double total_n, const EstimatorConfig& cfg) {
  L1Fit fit;
  const LambdaRule& rule = cfg.lambda;
  if (rule.mode != LambdaRule::Mode::Path) {
    double lambda = rule.value;
    if (rule.mode == LambdaRule::Mode::Scaled) {
      if (!score_cov) throw Error("scaled lambda needs a moment variance");
      lambda *= std::sqrt(std::max(score_cov->diagonal().maxCoeff(), 0.0) / total_n);
    }
    const L1Result res = l1_quadratic_solve(weighted.gram, weighted.rhs, lambda);
    fit.beta = res.beta;
    fit.lambda = lambda;
    fit.sweeps = res.sweeps;
    return fit;
  }

  if (!efficient) throw Error("lambda path needs a moment variance");
  const double lambda_max = l1_lambda_max(weighted.rhs);
  const Index d = weighted.rhs.size();
  if (lambda_max == 0.0) {
    fit.beta = Vector::Zero(d);
    return fit;
  }
  const double per_term = std::log(total_n) + 2.0 * rule.ebic_gamma * std::log(static_cast<double>(d));
  auto criterion = [&](const std::vector<Index>& s) {
    return total_n * efficient->objective(efficient->refit(s, cfg.ridge)) + static_cast<double>(s.size()) * per_term;
  };
  double best = std::numeric_limits<double>::infinity();
  std::vector<Index> best_support;
  std::optional<Vector> warm;
  std::vector<Index> last_support{static_cast<Index>(-1)};
  double last_score = 0.0;
  for (int k = 0; k < rule.path_points; ++k) {
    const double lambda = lambda_max * std::pow(rule.path_ratio, static_cast<double>(k) / (rule.path_points - 1));
    const L1Result res = l1_quadratic_solve(weighted.gram, weighted.rhs, lambda, L1Options{.check_psd = k == 0}, warm);
    warm = res.beta;
    fit.sweeps += res.sweeps;
    const std::vector<Index> s = select_support(res.beta, cfg);
    if (s != last_support) {
      last_score = criterion(s);
      last_support = s;
    }
    if (last_score < best) {
      best = last_score;
      best_support = s;
      fit.beta = res.beta;
      fit.lambda = lambda;
      fit.path_index = k;
    }
  }
  if (rule.prune) {
    // Stepwise search from the path optimum: best single drop or add while the criterion improves.
    std::vector<bool> in(static_cast<std::size_t>(d), false);
    for (Index j : best_support) in[static_cast<std::size_t>(j)] = true;
    for (Index step = 0; step < 4 * d; ++step) {
      double move_score = best;
      std::vector<Index> move;
      for (std::size_t i = 0; i < best_support.size(); ++i) {
        std::vector<Index> trial = best_support;
        trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
        const double sc = criterion(trial);
        if (sc < move_score) {
          move_score = sc;
          move = std::move(trial);
        }
      }
      for (Index j = 0; j < d; ++j) {
        if (in[static_cast<std::size_t>(j)]) continue;
        std::vector<Index> trial = best_support;
        trial.insert(std::lower_bound(trial.begin(), trial.end(), j), j);
        const double sc = criterion(trial);
        if (sc < move_score) {
          move_score = sc;
          move = std::move(trial);
        }
      }
      if (!(move_score < best)) break;
      best = move_score;
      best_support = std::move(move);
      std::fill(in.begin(), in.end(), false);
      for (Index j : best_support) in[static_cast<std::size_t>(j)] = true;
    }
    fit.pruned = best_support;
  }
  return fit;
}

Matrix pseudo_inverse_solve(const Matrix& a, const Matrix& b) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  return cod.solve(b);
}

}  // namespace

Estimate ts_iv(const MomentSystem& ms, double ridge) {
  if (!ms.a.allFinite() || !ms.b.allFinite()) throw Error("non-finite inputs");
  Estimate est;
  est.beta = ridge_solve(ms.b.transpose() * ms.b, ms.b.transpose() * ms.a, ridge, &est.diagnostics.condition_number);
  const Vector resid = ms.a - ms.b * est.beta;
  est.diagnostics.objective = resid.squaredNorm();
  return est;
}

Estimate ts_2sls(const UnpairedDataset& data, double ridge) {
  data.validate();
  const auto& xi = data.x_instruments;
  const auto& yi = data.y_instruments;
  const int m = data.m();
  const Matrix xc = data.x.rowwise() - data.x.colwise().mean();
  const Vector yc = data.y.array() - data.y.mean();
  const auto nt = static_cast<double>(data.n_tilde());

  // First stage Gamma = (I~_c^T I~_c + ridge I)^{-1} I~_c^T X~_c.
  const Matrix cross = nt * cov_hat(xi, data.x);  // I~_c^T X~_c
  Matrix gamma;
  if (xi.kind() == InstrumentKind::OneHot) {
    // I~_c^T I~_c = n~ (diag(p) - p p^T): Sherman-Morrison on D = n~ diag(p) + ridge.
    const Vector p = xi.mean();
    const Vector dinv = (nt * p.array() + ridge).inverse();
    const Matrix dc = dinv.asDiagonal() * cross;
    const Vector dp = dinv.cwiseProduct(p);
    const double denom = 1.0 - nt * p.dot(dp);
    gamma = dc + dp * ((nt / denom) * (p.transpose() * dc));
  } else {
    const Matrix ic = xi.values().rowwise() - xi.mean().transpose();
    Matrix gram = ic.transpose() * ic;
    gram.diagonal().array() += ridge;
    gamma = gram.llt().solve(cross);
  }
  if (!gamma.allFinite()) throw Error("non-finite first stage");

  // Predictions on the y-sample from its centered instruments.
  Matrix x_hat;
  if (yi.kind() == InstrumentKind::OneHot) {
    const Vector p = yi.mean();
    const Eigen::RowVectorXd offset = p.transpose() * gamma;
    x_hat.resize(data.n(), data.d());
    const auto& labels = yi.labels();
    for (Index i = 0; i < data.n(); ++i) x_hat.row(i) = gamma.row(labels[i]) - offset;
  } else {
    x_hat = (yi.values().rowwise() - yi.mean().transpose()) * gamma;
  }
  (void)m;
  Estimate est;
  est.beta = ridge_solve(x_hat.transpose() * x_hat, x_hat.transpose() * yc, ridge, &est.diagnostics.condition_number);
  est.diagnostics.objective = (yc - x_hat * est.beta).squaredNorm() / static_cast<double>(data.n());
  return est;
}

Estimate naive_ols(const UnpairedDataset& data, Rng& rng) {
  const Index np = std::min(data.n(), data.n_tilde());
  if (np < 1) throw Error("naive_ols: empty sample");
  auto sample = [&rng, np](Index total) {
    std::vector<Index> idx(total);
    std::iota(idx.begin(), idx.end(), Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(np);
    return idx;
  };
  const std::vector<Index> ix = sample(data.n_tilde());
  const std::vector<Index> iy = sample(data.n());
  Matrix xp(np, data.d());
  Vector yp(np);
  for (Index k = 0; k < np; ++k) {
    xp.row(k) = data.x.row(ix[k]);
    yp(k) = data.y(iy[k]);
  }
  xp = xp.rowwise() - xp.colwise().mean();
  yp.array() -= yp.mean();
  Estimate est;
  est.beta = pseudo_inverse_solve(xp.transpose() * xp, xp.transpose() * yp);
  est.diagnostics.objective = (yp - xp * est.beta).squaredNorm() / static_cast<double>(np);
  return est;
}

Estimate up_gmm(const UnpairedDataset& data, const EstimatorConfig& cfg) {
  cfg.validate();
  const MomentSystem ms = moment_system(data);
  const Index d = ms.d();
  const double total_n = static_cast<double>(ms.total());

  // Preliminary identity-weight solve.
  const Vector beta0 = ridge_solve(ms.b.transpose() * ms.b, ms.b.transpose() * ms.a, cfg.ridge);

  std::optional<MomentVariance> mv;
  Weight weight = Weight::identity();
  Estimate est;
  if (cfg.optimal_weight) {
    mv = omega_hat(data, beta0);
    if (auto w = Weight::inverse_of(mv->omega, cfg.ridge)) {
      weight = std::move(*w);
      est.weight_used = WeightKind::OmegaInverse;
    }
  }
  const WeightedSystem weighted(ms.b, ms.a, weight);

  Weight final_weight = weight;
  std::vector<Index> support(d);
  std::iota(support.begin(), support.end(), Index{0});

  if (!cfg.l1) {
    est.beta = ridge_solve(weighted.gram, weighted.rhs, cfg.ridge, &est.diagnostics.condition_number);
    est.diagnostics.objective = weighted.objective(est.beta);
  } else {
    const bool need_variance = cfg.lambda.mode != LambdaRule::Mode::Fixed;
    if (need_variance && !mv) mv = omega_hat(data, beta0);
    std::optional<WeightedSystem> efficient;
    std::optional<Matrix> score_cov;
    if (need_variance) {
      auto w = Weight::inverse_of(mv->omega, cfg.ridge);
      efficient.emplace(ms.b, ms.a, w ? *w : Weight::identity());
      const Matrix wb = weight.apply(ms.b);
      score_cov = wb.transpose() * mv->omega * wb;
    }
    const L1Fit fit = fit_l1(weighted, efficient ? &*efficient : nullptr, score_cov ? &*score_cov : nullptr,
                             total_n, cfg);
    est.diagnostics.lambda = fit.lambda;
    est.diagnostics.l1_sweeps = fit.sweeps;
    est.diagnostics.selected_path_index = fit.path_index;
    support = cfg.post_refit && fit.pruned ? *fit.pruned : select_support(fit.beta, cfg);
    est.beta = fit.beta;
    if (cfg.support_rule == SupportRule::BetaMinHalf) {
      for (Index j = 0; j < d; ++j) {
        if (std::find(support.begin(), support.end(), j) == support.end()) est.beta(j) = 0.0;
      }
    }
    est.diagnostics.objective = weighted.objective(est.beta);

    if (cfg.post_refit) {
      final_weight = Weight::identity();
      est.weight_used = WeightKind::Identity;
      const WeightedSystem identity_system(ms.b, ms.a, Weight::identity());
      est.beta = identity_system.refit(support, cfg.ridge, &est.diagnostics.condition_number);
      if (cfg.optimal_weight && !support.empty()) {
        // Refit weight from Omega-hat with the covariates restricted to the support.
        const MomentVariance mv_s = omega_hat(data, sub_vector(est.beta, support), support);
        if (positive_definite(mv_s.omega)) {
          if (auto w = Weight::inverse_of(mv_s.omega, cfg.ridge)) {
            final_weight = std::move(*w);
            est.weight_used = WeightKind::OmegaInverse;
          }
        }
      }
      const WeightedSystem refit_system(ms.b, ms.a, final_weight);
      est.beta = refit_system.refit(support, cfg.ridge, &est.diagnostics.condition_number);
      est.diagnostics.objective = refit_system.objective(est.beta);
    }
    est.support = support;
  }

  if (cfg.ci_level) {
    const MomentVariance at_estimate = omega_hat(data, est.beta);
    const Matrix w_dense = final_weight.dense(ms.m());
    est.variance = sandwich_variance(ms.b, at_estimate.omega, w_dense, support);
    est.ci = wald_ci(est.beta, *est.variance, total_n, *cfg.ci_level);
  }
  return est;
}

Estimate up_gmm_hd(const UnpairedDataset& data, const EstimatorConfig& cfg, Rng& rng) {
  cfg.validate();
  const MomentSystem ms = moment_system(data);
  CrossFoldOptions fold_options;
  fold_options.folds = cfg.folds;
  fold_options.redraws = cfg.redraws;
  fold_options.scheme = cfg.split_scheme;
  const CrossMoments cm = cross_moments(data, ms, cfg.denominator, fold_options, rng);
  const Index d = ms.d();
  const double total_n = static_cast<double>(ms.total());
  const double m = ms.m();

  const Matrix& c_xx = cm.c_xx;
  const Vector& c_xy = cm.c_xy;
  const Vector beta0 = ridge_solve(c_xx.transpose() * c_xx, c_xx.transpose() * c_xy, cfg.ridge);

  // Variance of the d-dimensional cross moment m B^T g_N(beta), sqrt(N)-scaled.
  std::optional<Matrix> moment_cov;
  const bool need_variance = cfg.optimal_weight || (cfg.l1 && cfg.lambda.mode != LambdaRule::Mode::Fixed);
  auto hd_cov = [&](const Vector& beta) -> std::optional<Matrix> {
    const MomentVariance mv = omega_hat(data, beta);
    Matrix v = (m * m) * (ms.b.transpose() * mv.omega * ms.b);
    return Matrix(0.5 * (v + v.transpose()));
  };
  if (need_variance) moment_cov = hd_cov(beta0);

  Estimate est;
  Weight weight = Weight::identity();
  if (cfg.optimal_weight) {
    if (auto w = Weight::inverse_of(*moment_cov, cfg.ridge)) {
      weight = std::move(*w);
      est.weight_used = WeightKind::OmegaInverse;
    }
  }
  const WeightedSystem weighted(c_xx, c_xy, weight);

  if (!cfg.l1) {
    est.beta = ridge_solve(weighted.gram, weighted.rhs, cfg.ridge, &est.diagnostics.condition_number);
    est.diagnostics.objective = weighted.objective(est.beta);
    return est;
  }

  auto run_path = [&](const std::optional<Matrix>& cov) {
    std::optional<WeightedSystem> efficient;
    std::optional<Matrix> score_cov;
    if (cov) {
      efficient.emplace(c_xx, c_xy, Weight::pseudo_inverse_of(*cov, 1e-8));
      const Matrix wc = weight.apply(c_xx);
      score_cov = wc.transpose() * (*cov) * wc;
    }
    return fit_l1(weighted, efficient ? &*efficient : nullptr, score_cov ? &*score_cov : nullptr, total_n, cfg);
  };
  L1Fit fit;
  if (cfg.lambda.mode == LambdaRule::Mode::Path) {
    // Pilot pass with the variance at beta = 0, then a pass at the pilot refit.
    const L1Fit pilot = run_path(hd_cov(Vector::Zero(d)));
    const std::vector<Index> s = pilot.pruned ? *pilot.pruned : select_support(pilot.beta, cfg);
    fit = run_path(hd_cov(weighted.refit(s, cfg.ridge)));
    fit.sweeps += pilot.sweeps;
  } else {
    fit = run_path(moment_cov);
  }
  est.diagnostics.lambda = fit.lambda;
  est.diagnostics.l1_sweeps = fit.sweeps;
  est.diagnostics.selected_path_index = fit.path_index;
  const std::vector<Index> support = cfg.post_refit && fit.pruned ? *fit.pruned : select_support(fit.beta, cfg);
  est.beta = fit.beta;
  if (cfg.support_rule == SupportRule::BetaMinHalf) est.beta = scatter(sub_vector(fit.beta, support), support, d);
  est.diagnostics.objective = weighted.objective(est.beta);
  if (cfg.post_refit) {
    est.beta = weighted.refit(support, cfg.ridge, &est.diagnostics.condition_number);
    est.diagnostics.objective = weighted.objective(est.beta);
  }
  est.support = support;
  return est;
}

}  // namespace upiv
