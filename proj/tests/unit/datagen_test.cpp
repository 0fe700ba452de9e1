#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "upiv/identifiability.hpp"
#include "upiv/moments.hpp"

using namespace upiv;

TEST_CASE("beta draws respect the magnitude bands") {
  Rng rng = make_rng(71);
  const Vector dense = gen_beta(BetaRule::SparseUniform, 6, 6, rng);
  for (Index j = 0; j < 6; ++j) CHECK((std::abs(dense(j)) >= 0.5 && std::abs(dense(j)) <= 1.0));
  CHECK(gen_beta(BetaRule::SparseUniform, 6, 0, rng).norm() == 0.0);
  const Vector sparse = gen_beta(BetaRule::SparseUniform, 50, 7, rng);
  CHECK((sparse.array() != 0.0).count() == 7);
  CHECK_THROWS(gen_beta(BetaRule::SparseUniform, 3, 4, rng));
}

TEST_CASE("beta magnitudes are uniform on [0.5, 1]") {
  Rng rng = make_rng(72);
  std::vector<double> mags;
  int negative = 0;
  for (int k = 0; k < 10000; ++k) {
    const Vector b = gen_beta(BetaRule::SparseUniform, 3, 1, rng);
    for (Index j = 0; j < 3; ++j) {
      if (b(j) != 0.0) {
        mags.push_back(std::abs(b(j)));
        negative += b(j) < 0.0;
      }
    }
  }
  std::sort(mags.begin(), mags.end());
  const double n = static_cast<double>(mags.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < mags.size(); ++i) {
    const double cdf = (mags[i] - 0.5) / 0.5;
    ks = std::max({ks, std::abs(cdf - i / n), std::abs(cdf - (i + 1) / n)});
  }
  CHECK(ks < 1.628 / std::sqrt(n));
  CHECK(std::abs(negative / n - 0.5) < 0.03);
}

TEST_CASE("noise scales are renormalized to the base") {
  Rng rng = make_rng(73);
  const Vector s = gen_noise_scales(200, 0.2, 0.5, 0.25, 4.0, rng);
  CHECK(std::abs(s.mean() - 0.2) < 1e-12);
  CHECK(s.minCoeff() > 0.0);
}

TEST_CASE("noiseless categorical data reproduce the environment means") {
  GeneratorSpec spec = GeneratorSpec::preset(Setting::S1);
  spec.m = 5;
  spec.d = 3;
  spec.s_star = 2;
  spec.r = spec.r_tilde = 4;
  spec.gamma_x = spec.gamma_y = spec.sigma_u = spec.sigma_x = spec.sigma_eps = 0.0;
  spec.seed = 74;
  const auto g = generate(spec);
  const auto& xl = g.data.x_instruments.labels();
  for (std::size_t i = 0; i < xl.size(); ++i) {
    CHECK((g.data.x.row(static_cast<Index>(i)) - g.truth.first_stage.row(xl[i])).norm() == 0.0);
  }
  const auto& yl = g.data.y_instruments.labels();
  for (std::size_t i = 0; i < yl.size(); ++i) {
    CHECK(std::abs(g.data.y(static_cast<Index>(i)) - g.truth.first_stage.row(yl[i]).dot(g.truth.beta_star)) < 1e-12);
  }
}

TEST_CASE("categorical samples are balanced and the truth is consistent") {
  const auto g = testing::small_categorical(75, 9, 4, 7);
  for (Index c : g.data.x_instruments.counts()) CHECK(c == 7);
  for (Index c : g.data.y_instruments.counts()) CHECK(c == 7);
  std::vector<Index> nz;
  for (Index j = 0; j < g.truth.beta_star.size(); ++j) {
    if (g.truth.beta_star(j) != 0.0) nz.push_back(j);
  }
  CHECK(nz == g.truth.support);
  CHECK_NOTHROW(g.data.validate());
}

TEST_CASE("generation is deterministic in the seed") {
  for (auto kind : {GeneratorKind::Categorical, GeneratorKind::Continuous}) {
    GeneratorSpec spec = GeneratorSpec::preset(Setting::S3, kind);
    spec.m = 12;
    spec.k = 4;
    spec.d = 8;
    spec.s_star = 2;
    spec.seed = 76;
    const auto a = generate(spec);
    const auto b = generate(spec);
    CHECK(a.data.x == b.data.x);
    CHECK(a.data.y == b.data.y);
    CHECK(a.truth.beta_star == b.truth.beta_star);
    spec.seed = 77;
    CHECK(generate(spec).data.y != a.data.y);
  }
}

TEST_CASE("low-rank first stage has rank k") {
  for (auto kind : {GeneratorKind::Categorical, GeneratorKind::Continuous}) {
    GeneratorSpec spec = GeneratorSpec::preset(Setting::S3, kind);
    spec.m = 30;
    spec.k = 6;
    spec.d = 20;
    spec.s_star = 3;
    spec.seed = 78;
    const auto g = generate(spec);
    Eigen::JacobiSVD<Matrix> svd(g.truth.first_stage);
    const auto& sv = svd.singularValues();
    CHECK((sv.array() > 1e-10 * sv(0)).count() == 6);
  }
}

TEST_CASE("a zero continuous first stage is not identifiable") {
  GeneratorSpec spec = GeneratorSpec::preset(Setting::S3, GeneratorKind::Continuous);
  spec.m = 10;
  spec.k = 3;
  spec.d = 4;
  spec.s_star = 2;
  spec.pi_scale = 0.0;
  spec.seed = 79;
  const auto g = generate(spec);
  CHECK(g.truth.first_stage.norm() == 0.0);
  CHECK_FALSE(dense_identifiable(g.truth.first_stage));
}

TEST_CASE("both samples share the first stage and the outcome noise is exogenous") {
  GeneratorSpec spec = GeneratorSpec::preset(Setting::S2, GeneratorKind::Continuous);
  spec.m = 4;
  spec.d = 2;
  spec.r = spec.r_tilde = 25000;
  spec.seed = 80;
  ShadowSample shadow;
  const auto g = generate(spec, &shadow);
  const Matrix cov_y = cov_hat(g.data.y_instruments, shadow.x);
  const Matrix cov_x = cov_hat(g.data.x_instruments, g.data.x);
  CHECK((cov_y - cov_x).norm() < 0.05);

  const Vector resid = g.data.y - shadow.x * g.truth.beta_star;
  const Vector c = cov_hat(g.data.y_instruments, resid);
  const Matrix ic = g.data.y_instruments.values().rowwise() - g.data.y_instruments.mean().transpose();
  const Vector rc = resid.array() - resid.mean();
  const Matrix summands = ic.array().colwise() * rc.array();
  const Vector se = ((summands.array().square().colwise().mean() - summands.colwise().mean().array().square()) /
                     static_cast<double>(spec.n()))
                        .sqrt()
                        .transpose();
  CHECK(c.norm() < 3.0 * se.norm());
}

TEST_CASE("generator spec validation") {
  GeneratorSpec spec;
  spec.m = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = GeneratorSpec{};
  spec.clip_low = 2.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = GeneratorSpec{};
  spec.beta_rule = BetaRule::Fixed;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  CHECK(GeneratorSpec::preset(Setting::S1).d == 200);
  CHECK(GeneratorSpec::preset(Setting::S3).k == 60);
}
