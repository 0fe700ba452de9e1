#include "upiv/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace upiv {

std::string to_string(GeneratorKind kind) { return kind == GeneratorKind::Categorical ? "categorical" : "continuous"; }

std::string to_string(Setting setting) {
  switch (setting) {
    case Setting::S1: return "S1";
    case Setting::S2: return "S2";
    case Setting::S3: return "S3";
  }
  return "S1";
}

std::string to_string(BetaRule rule) {
  switch (rule) {
    case BetaRule::SparseUniform: return "sparse";
    case BetaRule::DenseUniform: return "dense";
    case BetaRule::Fixed: return "fixed";
  }
  return "sparse";
}

GeneratorKind generator_kind_from_string(const std::string& name) {
  if (name == "categorical" || name == "onehot") return GeneratorKind::Categorical;
  if (name == "continuous") return GeneratorKind::Continuous;
  throw ConfigError("unknown generator kind '" + name + "'");
}

Setting setting_from_string(const std::string& name) {
  if (name == "S1" || name == "s1" || name == "1") return Setting::S1;
  if (name == "S2" || name == "s2" || name == "2") return Setting::S2;
  if (name == "S3" || name == "s3" || name == "3") return Setting::S3;
  throw ConfigError("unknown setting '" + name + "'");
}

BetaRule beta_rule_from_string(const std::string& name) {
  if (name == "sparse") return BetaRule::SparseUniform;
  if (name == "dense") return BetaRule::DenseUniform;
  if (name == "fixed") return BetaRule::Fixed;
  throw ConfigError("unknown beta rule '" + name + "'");
}

GeneratorSpec GeneratorSpec::preset(Setting setting, GeneratorKind kind) {
  GeneratorSpec spec;
  spec.kind = kind;
  spec.setting = setting;
  switch (setting) {
    case Setting::S1:
      spec.m = 100;
      spec.d = 200;
      spec.s_star = 10;
      spec.beta_rule = BetaRule::SparseUniform;
      break;
    case Setting::S2:
      spec.m = 100;
      spec.d = 2;
      spec.s_star = 2;
      spec.beta_rule = BetaRule::DenseUniform;
      break;
    case Setting::S3:
      spec.m = 100;
      spec.k = 60;
      spec.d = 100;
      spec.s_star = 10;
      spec.beta_rule = BetaRule::SparseUniform;
      break;
  }
  return spec;
}

void GeneratorSpec::validate() const {
  if (m < 1 || d < 1) throw ConfigError("m and d must be positive");
  if (r < 1 || r_tilde < 1) throw ConfigError("r and r_tilde must be positive");
  if (n() < 2 || n_tilde() < 2) throw ConfigError("each sample needs at least 2 rows");
  if (beta_rule == BetaRule::SparseUniform && (s_star < 0 || s_star > d)) throw ConfigError("s_star must lie in [0, d]");
  if (beta_rule == BetaRule::Fixed && beta_fixed.size() != d) throw ConfigError("beta_fixed must have length d");
  if (setting == Setting::S3 && k < 1) throw ConfigError("k must be positive in setting 3");
  if (!(clip_low > 0.0 && clip_low <= 1.0 && clip_high >= 1.0)) throw ConfigError("clip range must contain 1");
  for (double v : {gamma_x, gamma_y, sigma_u, sigma_x, sigma_eps, scale_log_sd}) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("scale constants must be finite and >= 0");
  }
}

namespace {

Matrix gaussian_matrix(Index rows, Index cols, double sd, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) out(i, j) = sd * normal(rng);
  }
  return out;
}

// Environment means (categorical) or Pi (continuous); Setting 3 uses a rank-k factorization.
Matrix first_stage(const GeneratorSpec& spec, double scale, Matrix& factor, Rng& rng) {
  if (spec.setting != Setting::S3) return gaussian_matrix(spec.m, spec.d, 1.0, rng);
  const Matrix z = gaussian_matrix(spec.m, spec.k, 1.0, rng);
  factor = gaussian_matrix(spec.d, spec.k, spec.normalize_factor ? 1.0 / std::sqrt(static_cast<double>(spec.k)) : 1.0, rng);
  return scale * z * factor.transpose();
}

}  // namespace

Vector gen_beta(BetaRule rule, int d, int s_star, Rng& rng) {
  if (rule == BetaRule::Fixed) throw Error("gen_beta: fixed rule has no draw");
  if (s_star < 0 || s_star > d) throw Error("gen_beta: s_star must lie in [0, d]");
  const int count = rule == BetaRule::DenseUniform ? d : s_star;
  std::vector<Index> idx(d);
  std::iota(idx.begin(), idx.end(), Index{0});
  for (int k = 0; k < count; ++k) {
    std::uniform_int_distribution<Index> pick(k, d - 1);
    std::swap(idx[k], idx[pick(rng)]);
  }
  std::uniform_real_distribution<double> magnitude(0.5, 1.0);
  std::bernoulli_distribution negative(0.5);
  Vector beta = Vector::Zero(d);
  for (int k = 0; k < count; ++k) {
    const double v = magnitude(rng);
    beta(idx[k]) = negative(rng) ? -v : v;
  }
  return beta;
}

Vector gen_noise_scales(int count, double base, double log_sd, double low, double high, Rng& rng) {
  std::lognormal_distribution<double> lognormal(0.0, log_sd);
  Vector s(count);
  for (int i = 0; i < count; ++i) s(i) = base * std::clamp(lognormal(rng), low, high);
  const double mean = count > 0 ? s.mean() : 0.0;
  if (mean > 0.0) s *= base / mean;
  return s;
}

Generated gen_categorical(const GeneratorSpec& spec, Rng& rng, ShadowSample* shadow) {
  spec.validate();
  if (spec.kind != GeneratorKind::Categorical) throw Error("gen_categorical: spec is not categorical");
  Generated g;
  GroundTruth& t = g.truth;
  t.beta_star = spec.beta_rule == BetaRule::Fixed ? spec.beta_fixed : gen_beta(spec.beta_rule, spec.d, spec.s_star, rng);
  for (Index j = 0; j < spec.d; ++j) {
    if (t.beta_star(j) != 0.0) t.support.push_back(j);
  }
  t.first_stage = first_stage(spec, 1.0, t.factor, rng);
  t.sigma_x_env = gen_noise_scales(spec.m, spec.sigma_x, spec.scale_log_sd, spec.clip_low, spec.clip_high, rng);
  t.sigma_eps_env = gen_noise_scales(spec.m, spec.sigma_eps, spec.scale_log_sd, spec.clip_low, spec.clip_high, rng);

  const int m = spec.m;
  const int d = spec.d;
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<int> y_labels(static_cast<std::size_t>(spec.n()));
  Vector y(spec.n());
  Matrix x_shadow(shadow ? spec.n() : 0, d);
  Vector x_lat(d);
  Index row = 0;
  for (int e = 0; e < m; ++e) {
    for (int k = 0; k < spec.r; ++k, ++row) {
      const double u = spec.sigma_u * normal(rng);
      for (int j = 0; j < d; ++j) x_lat(j) = t.first_stage(e, j) + spec.gamma_x * u + t.sigma_x_env(e) * normal(rng);
      y(row) = x_lat.dot(t.beta_star) + spec.gamma_y * u + t.sigma_eps_env(e) * normal(rng);
      y_labels[row] = e;
      if (shadow) x_shadow.row(row) = x_lat.transpose();
    }
  }

  std::vector<int> x_labels(static_cast<std::size_t>(spec.n_tilde()));
  Matrix x(spec.n_tilde(), d);
  row = 0;
  for (int e = 0; e < m; ++e) {
    for (int k = 0; k < spec.r_tilde; ++k, ++row) {
      const double u = spec.sigma_u * normal(rng);
      for (int j = 0; j < d; ++j) x(row, j) = t.first_stage(e, j) + spec.gamma_x * u + t.sigma_x_env(e) * normal(rng);
      x_labels[row] = e;
    }
  }

  g.data.y_instruments = InstrumentBlock::one_hot(std::move(y_labels), m);
  g.data.y = std::move(y);
  g.data.x_instruments = InstrumentBlock::one_hot(std::move(x_labels), m);
  g.data.x = std::move(x);
  if (shadow) shadow->x = std::move(x_shadow);
  return g;
}

Generated gen_continuous(const GeneratorSpec& spec, Rng& rng, ShadowSample* shadow) {
  spec.validate();
  if (spec.kind != GeneratorKind::Continuous) throw Error("gen_continuous: spec is not continuous");
  Generated g;
  GroundTruth& t = g.truth;
  t.beta_star = spec.beta_rule == BetaRule::Fixed ? spec.beta_fixed : gen_beta(spec.beta_rule, spec.d, spec.s_star, rng);
  for (Index j = 0; j < spec.d; ++j) {
    if (t.beta_star(j) != 0.0) t.support.push_back(j);
  }
  t.first_stage = first_stage(spec, spec.pi_scale, t.factor, rng);
  t.sigma_x_env = gen_noise_scales(spec.m, spec.sigma_x, spec.scale_log_sd, spec.clip_low, spec.clip_high, rng);
  t.sigma_eps_env = gen_noise_scales(spec.m, spec.sigma_eps, spec.scale_log_sd, spec.clip_low, spec.clip_high, rng);

  const int d = spec.d;
  const double inst_sd = 1.0 / std::sqrt(static_cast<double>(spec.m));
  std::normal_distribution<double> normal(0.0, 1.0);

  auto dominant = [](const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    Index c = 0;
    row.cwiseAbs().maxCoeff(&c);
    return c;
  };

  const Matrix iy = gaussian_matrix(spec.n(), spec.m, inst_sd, rng);
  const Matrix signal_y = iy * t.first_stage;
  Vector y(spec.n());
  Matrix x_shadow(shadow ? spec.n() : 0, d);
  Vector x_lat(d);
  for (Index i = 0; i < spec.n(); ++i) {
    const Index c = dominant(iy.row(i));
    const double u = spec.sigma_u * normal(rng);
    for (int j = 0; j < d; ++j) x_lat(j) = signal_y(i, j) + spec.gamma_x * u + t.sigma_x_env(c) * normal(rng);
    y(i) = x_lat.dot(t.beta_star) + spec.gamma_y * u + t.sigma_eps_env(c) * normal(rng);
    if (shadow) x_shadow.row(i) = x_lat.transpose();
  }

  const Matrix ix = gaussian_matrix(spec.n_tilde(), spec.m, inst_sd, rng);
  Matrix x = ix * t.first_stage;
  for (Index i = 0; i < spec.n_tilde(); ++i) {
    const Index c = dominant(ix.row(i));
    const double u = spec.sigma_u * normal(rng);
    for (int j = 0; j < d; ++j) x(i, j) += spec.gamma_x * u + t.sigma_x_env(c) * normal(rng);
  }

  g.data.y_instruments = InstrumentBlock::dense(iy);
  g.data.y = std::move(y);
  g.data.x_instruments = InstrumentBlock::dense(ix);
  g.data.x = std::move(x);
  if (shadow) shadow->x = std::move(x_shadow);
  return g;
}

Generated generate(const GeneratorSpec& spec, ShadowSample* shadow) {
  Rng rng = make_rng(spec.seed);
  return spec.kind == GeneratorKind::Categorical ? gen_categorical(spec, rng, shadow) : gen_continuous(spec, rng, shadow);
}

}  // namespace upiv
