#pragma once

#include <optional>
#include <span>
#include <vector>

#include "upiv/rng.hpp"
#include "upiv/types.hpp"

namespace upiv {

/// Centered cross-covariance (1/n) sum_i (u_i - u_bar)(v_i - v_bar)^T over row pairs.
Matrix cov_hat(const Matrix& u, const Matrix& v);
/// Same, with the left factor given as an instrument block.
Matrix cov_hat(const InstrumentBlock& instruments, const Matrix& v);
Vector cov_hat(const InstrumentBlock& instruments, const Vector& v);

/// Empirical moment system a = Cov(I, Y), B = Cov(I~, X~).
struct MomentSystem {
  Vector a;
  Matrix b;
  Index n = 0;
  Index n_tilde = 0;

  int m() const { return static_cast<int>(b.rows()); }
  int d() const { return static_cast<int>(b.cols()); }
  Index total() const { return n + n_tilde; }
};

MomentSystem moment_system(const UnpairedDataset& data);

/// Centers used for fold covariances. Without one, each fold is centered by its
/// own means (the per-fold convention); with one, summands are centered by the
/// supplied full-sample means.
struct SampleCenter {
  Vector instrument_mean;
  Vector covariate_mean;
};

SampleCenter sample_center(const InstrumentBlock& instruments, const Matrix& x);

/**
 * Cross-covariance of a fold of the x-sample.
 *
 * One-hot: row e is p_{k,e} (X_bar_{k,e} - X_bar_k)^T, with an empty
 * environment contributing a zero row. Continuous: (1/n_k) I_c^T X_c.
 */
Matrix fold_cross_cov(const InstrumentBlock& instruments, const Matrix& x, std::span<const Index> fold,
                      const std::optional<SampleCenter>& center = std::nullopt);

/// How the x-sample is split into folds.
enum class SplitScheme {
  Uniform,     ///< random permutation, cut into K nearly equal folds
  Stratified,  ///< random split within each environment (one-hot only)
};

SplitScheme default_split_scheme(InstrumentKind kind);

using Folds = std::vector<std::vector<Index>>;

/// Random K-fold partition of [0, rows). Remainders go round-robin to the first
/// folds; under stratification the round-robin counter runs across environments.
Folds draw_folds(const InstrumentBlock& instruments, int folds, SplitScheme scheme, Rng& rng);

/// m/(K(K-1)) sum_{h != k} B_h^T B_k for one partition.
Matrix cross_fold_term(const InstrumentBlock& instruments, const Matrix& x, const Folds& folds,
                       const std::optional<SampleCenter>& center = std::nullopt);

struct CrossFoldOptions {
  int folds = 2;
  int redraws = 10;
  std::optional<SplitScheme> scheme;  ///< defaults to default_split_scheme(kind)
  bool sample_centering = false;      ///< center fold summands by full-sample means
};

/// Monte-Carlo cross-fold denominator C_XX averaged over `redraws` partitions.
Matrix cross_fold_denominator_mc(const InstrumentBlock& instruments, const Matrix& x,
                                 const CrossFoldOptions& options, Rng& rng);

/**
 * Closed-form limit of the two-fold denominator averaged over all equal-half
 * splits of the given scheme.
 *
 * Uniform: m [ n/(n-1) B^T B - 1/(n(n-1)) sum_j g_j^T g_j ] with g_j the
 * centered summand of B. Stratified (one-hot): within-environment pairs carry
 * the weight r_e/(r_e-1) that a stratified split assigns them.
 */
Matrix cross_fold_denominator_analytic(const InstrumentBlock& instruments, const Matrix& x,
                                       std::optional<SplitScheme> scheme = std::nullopt);

enum class DenominatorKind { MonteCarlo, Analytic };

struct CrossMoments {
  Matrix c_xx;
  Vector c_xy;
  DenominatorKind construction = DenominatorKind::Analytic;
  int folds = 2;
  int redraws = 0;
  double m_scale = 1.0;
};

CrossMoments cross_moments(const UnpairedDataset& data, const MomentSystem& ms, DenominatorKind kind,
                           const CrossFoldOptions& options, Rng& rng);

/// Variance of the sample moment at a preliminary estimate beta0.
struct MomentVariance {
  Matrix omega;
  double tau_n = 0.5;
  double tilde_tau_n = 0.5;
};

MomentVariance omega_hat(const UnpairedDataset& data, const Vector& beta0);

/// Omega-hat with the covariates restricted to `support` (beta0 indexed by support).
MomentVariance omega_hat(const UnpairedDataset& data, const Vector& beta0, std::span<const Index> support);

}  // namespace upiv
