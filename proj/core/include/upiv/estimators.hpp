#pragma once

#include <optional>
#include <string>
#include <vector>

#include "upiv/inference.hpp"
#include "upiv/moments.hpp"
#include "upiv/rng.hpp"
#include "upiv/types.hpp"

namespace upiv {

enum class WeightKind { Identity, OmegaInverse };

std::string to_string(WeightKind kind);

/// How the l1 penalty is chosen.
struct LambdaRule {
  enum class Mode {
    Fixed,   ///< lambda = value
    Scaled,  ///< lambda = value * max_j sd(score_j), the per-coordinate noise level of the gradient at beta*
    Path,    ///< geometric path from lambda_max, picked by an extended BIC on the efficient GMM objective
  };
  Mode mode = Mode::Path;
  double value = 0.0;
  int path_points = 40;
  double path_ratio = 1e-3;
  /// Extended-BIC weight: each selected coordinate costs log N + 2 gamma log d.
  double ebic_gamma = 1.0;
  /// After the path pick, add or drop single coordinates while the criterion improves (used with refit).
  bool prune = true;
};

enum class SupportRule {
  NonzeroPattern,  ///< {j : beta_j != 0}
  BetaMinHalf,     ///< {j : |beta_j| >= beta_min / 2}
};

struct EstimatorConfig {
  double ridge = 1e-10;
  bool optimal_weight = false;
  bool l1 = false;
  LambdaRule lambda;
  bool post_refit = false;
  int folds = 2;
  int redraws = 10;
  DenominatorKind denominator = DenominatorKind::Analytic;
  std::optional<SplitScheme> split_scheme;
  SupportRule support_rule = SupportRule::NonzeroPattern;
  double beta_min = 0.0;
  /// Wald intervals at this level when set (finite-instrument GMM only).
  std::optional<double> ci_level;

  void validate() const;
};

struct Diagnostics {
  double condition_number = 0.0;
  double objective = 0.0;
  double lambda = 0.0;
  int l1_sweeps = 0;
  int selected_path_index = -1;
};

struct Estimate {
  Vector beta;
  std::optional<std::vector<Index>> support;
  std::optional<std::vector<Interval>> ci;
  std::optional<SandwichVariance> variance;
  WeightKind weight_used = WeightKind::Identity;
  Diagnostics diagnostics;
};

/// Solve (B^T B + ridge I) beta = B^T a.
Estimate ts_iv(const MomentSystem& ms, double ridge = 1e-10);

/// Two-stage least squares across samples: first stage on the x-sample, second on the y-sample.
Estimate ts_2sls(const UnpairedDataset& data, double ridge = 1e-10);

/// Baseline that pairs random rows of the two samples and runs OLS.
Estimate naive_ols(const UnpairedDataset& data, Rng& rng);

/// Finite-instrument GMM: identity or estimated optimal weight, optional l1 and refit.
Estimate up_gmm(const UnpairedDataset& data, const EstimatorConfig& cfg);

/// Cross-moment GMM for many instruments; `rng` drives the Monte-Carlo splits.
Estimate up_gmm_hd(const UnpairedDataset& data, const EstimatorConfig& cfg, Rng& rng);

/// Solve (A + ridge I) x = rhs for symmetric A; records the condition number of A + ridge I.
Vector ridge_solve(const Matrix& a, const Vector& rhs, double ridge, double* condition_number = nullptr);

}  // namespace upiv
