#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "upiv/rng.hpp"
#include "upiv/types.hpp"

namespace upiv {

enum class GeneratorKind { Categorical, Continuous };
enum class Setting { S1, S2, S3 };

enum class BetaRule {
  SparseUniform,  ///< s* nonzeros, magnitudes uniform on [-1,-0.5] u [0.5,1]
  DenseUniform,   ///< all d coordinates from the same two bands
  Fixed,          ///< use GeneratorSpec::beta_fixed verbatim
};

std::string to_string(GeneratorKind kind);
std::string to_string(Setting setting);
std::string to_string(BetaRule rule);
GeneratorKind generator_kind_from_string(const std::string& name);
Setting setting_from_string(const std::string& name);
BetaRule beta_rule_from_string(const std::string& name);

/**
 * Parameters of a synthetic regime.
 *
 * Categorical: every environment receives exactly r rows in the y-sample and
 * r_tilde rows in the x-sample. Continuous: n = r m and n~ = r_tilde m.
 */
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::Categorical;
  Setting setting = Setting::S1;
  int m = 100;
  int d = 200;
  int s_star = 10;
  int k = 60;
  int r = 4;
  int r_tilde = 4;
  BetaRule beta_rule = BetaRule::SparseUniform;
  Vector beta_fixed;
  double gamma_x = 0.2;
  double gamma_y = 0.2;
  double sigma_u = 0.2;
  double sigma_x = 1.0;
  double sigma_eps = 0.2;
  double pi_scale = 1.0;
  /// Setting 3: draw A with N(0, 1/k) entries so that mu_e (or I Pi) has unit variance per coordinate.
  bool normalize_factor = true;
  double scale_log_sd = 0.5;
  double clip_low = 0.25;
  double clip_high = 4.0;
  std::uint64_t seed = 0;

  /// Reference constants of a setting: S1 m=100 d=200 s*=10, S2 d=2 dense, S3 k=60 d=100 s*=10.
  static GeneratorSpec preset(Setting setting, GeneratorKind kind = GeneratorKind::Categorical);

  Index n() const { return static_cast<Index>(r) * m; }
  Index n_tilde() const { return static_cast<Index>(r_tilde) * m; }

  void validate() const;
};

struct GroundTruth {
  Vector beta_star;
  std::vector<Index> support;
  /// Environment means mu (m x d) for categorical data, Pi (m x d) for continuous.
  Matrix first_stage;
  /// Low-rank factor A (d x k) in Setting 3, empty otherwise.
  Matrix factor;
  Vector sigma_x_env;
  Vector sigma_eps_env;
};

struct Generated {
  UnpairedDataset data;
  GroundTruth truth;
};

/// Covariates that produced the y-sample outcomes, row-aligned with data.y.
/// Only for testing moment conditions; never part of an UnpairedDataset.
struct ShadowSample {
  Matrix x;
};

Vector gen_beta(BetaRule rule, int d, int s_star, Rng& rng);

/// Noise scales base * LogNormal(0, log_sd), clipped to [low, high] x base, renormalized to mean base.
Vector gen_noise_scales(int count, double base, double log_sd, double low, double high, Rng& rng);

Generated gen_categorical(const GeneratorSpec& spec, Rng& rng, ShadowSample* shadow = nullptr);
Generated gen_continuous(const GeneratorSpec& spec, Rng& rng, ShadowSample* shadow = nullptr);

/// Dispatch on spec.kind with an rng seeded from spec.seed.
Generated generate(const GeneratorSpec& spec, ShadowSample* shadow = nullptr);

}  // namespace upiv
