#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "upiv/estimators.hpp"
#include "upiv/l1_solver.hpp"

using namespace upiv;
using testing::gaussian;

namespace {

UnpairedDataset permute_environments(const UnpairedDataset& data, const std::vector<int>& perm) {
  UnpairedDataset out = data;
  out.y_instruments = data.y_instruments.permuted(perm);
  out.x_instruments = data.x_instruments.permuted(perm);
  return out;
}

GeneratorSpec noiseless_spec(int m, int d) {
  GeneratorSpec spec = GeneratorSpec::preset(Setting::S2);
  spec.m = m;
  spec.d = d;
  spec.s_star = d;
  spec.r = spec.r_tilde = 3;
  spec.gamma_x = spec.gamma_y = spec.sigma_u = spec.sigma_x = spec.sigma_eps = 0.0;
  return spec;
}

}  // namespace

TEST_CASE("ts_iv on an identity system") {
  MomentSystem ms;
  ms.b = Matrix::Identity(2, 2);
  ms.a = Vector(2);
  ms.a << 2, -1;
  const Estimate est = ts_iv(ms);
  CHECK(std::abs(est.beta(0) - 2.0) < 1e-8);
  CHECK(std::abs(est.beta(1) + 1.0) < 1e-8);
  ms.a.setZero();
  CHECK(ts_iv(ms).beta.cwiseAbs().maxCoeff() == 0.0);
  ms.a(0) = NAN;
  CHECK_THROWS(ts_iv(ms));
}

TEST_CASE("ts_iv on balanced one-hot data is OLS on environment means") {
  const auto g = testing::small_categorical(21, 15, 2, 6);
  const int m = g.data.m();
  Matrix xm = Matrix::Zero(m, 2);
  Vector ym = Vector::Zero(m);
  const auto& xl = g.data.x_instruments.labels();
  const auto& yl = g.data.y_instruments.labels();
  for (std::size_t i = 0; i < xl.size(); ++i) xm.row(xl[i]) += g.data.x.row(static_cast<Index>(i)) / 6.0;
  for (std::size_t i = 0; i < yl.size(); ++i) ym(yl[i]) += g.data.y(static_cast<Index>(i)) / 6.0;
  Matrix design(m, 3);
  design << Vector::Ones(m), xm;
  const Vector ols = design.completeOrthogonalDecomposition().solve(ym);
  const Vector beta = ts_iv(moment_system(g.data), 1e-16).beta;
  CHECK((beta - ols.tail(2)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ts_2sls agrees with ts_iv on balanced one-hot data") {
  const auto g = testing::small_categorical(22, 30, 3, 5);
  const Vector a = ts_iv(moment_system(g.data)).beta;
  const Vector b = ts_2sls(g.data).beta;
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-8);

  UnpairedDataset zero = g.data;
  zero.x.setZero();
  CHECK(ts_2sls(zero).beta.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ts_2sls recovers beta with strong continuous instruments and no confounding") {
  GeneratorSpec spec = GeneratorSpec::preset(Setting::S2, GeneratorKind::Continuous);
  spec.m = 5;
  spec.r = spec.r_tilde = 2000;
  spec.gamma_x = spec.gamma_y = 0.0;
  spec.seed = 23;
  const auto g = generate(spec);
  CHECK((ts_2sls(g.data).beta - g.truth.beta_star).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("naive_ols is deterministic and stays away from beta") {
  GeneratorSpec spec = GeneratorSpec::preset(Setting::S2);
  spec.d = 1;
  spec.s_star = 1;
  spec.beta_rule = BetaRule::Fixed;
  spec.beta_fixed = Vector::Constant(1, 1.0);
  spec.m = 20;
  spec.r = spec.r_tilde = 20;
  double mean = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    spec.seed = 100 + static_cast<std::uint64_t>(rep);
    const auto g = generate(spec);
    Rng rng = make_rng(rep);
    mean += naive_ols(g.data, rng).beta(0) / 50.0;
  }
  CHECK(std::abs(mean - 1.0) > 0.5);

  spec.seed = 5;
  const auto g = generate(spec);
  Rng a = make_rng(9), b = make_rng(9);
  CHECK(naive_ols(g.data, a).beta == naive_ols(g.data, b).beta);
}

TEST_CASE("l1 solver reference cases") {
  Matrix g(2, 2);
  g << 2.0, 0.3, 0.3, 1.0;
  Vector h(2);
  h << 0.7, -1.2;
  CHECK((l1_quadratic_solve(g, h, 0.0).beta - g.ldlt().solve(h)).cwiseAbs().maxCoeff() < 1e-8);

  const Matrix diag = Vector(Vector::Constant(2, 3.0)).asDiagonal();
  CHECK(l1_quadratic_solve(diag, h, l1_lambda_max(h)).beta.cwiseAbs().maxCoeff() == 0.0);

  const Matrix id = Matrix::Identity(2, 2);
  for (double lambda : {0.1, 0.5, 0.9, 1.5}) {
    const Vector beta = l1_quadratic_solve(id, h, lambda).beta;
    for (Index j = 0; j < 2; ++j) {
      const double expected = std::copysign(std::max(std::abs(h(j)) - lambda, 0.0), h(j));
      CHECK(std::abs(beta(j) - expected) < 1e-12);
    }
  }

  Matrix bad(2, 2);
  bad << 1.0, 0.0, 0.0, -0.5;
  CHECK_THROWS(l1_quadratic_solve(bad, h, 0.1));
}

TEST_CASE("l1 solution is stationary on a random instance") {
  Rng rng = make_rng(24);
  const Matrix a = gaussian(12, 6, rng);
  const Matrix g = a.transpose() * a;
  const Vector h = gaussian(6, 1, rng).col(0);
  const double lambda = 0.3 * l1_lambda_max(h);
  const Vector beta = l1_quadratic_solve(g, h, lambda).beta;
  const Vector grad = g * beta - h;
  for (Index j = 0; j < 6; ++j) {
    if (beta(j) != 0.0) {
      CHECK(std::abs(grad(j) + lambda * std::copysign(1.0, beta(j))) < 1e-8);
    } else {
      CHECK(std::abs(grad(j)) <= lambda + 1e-8);
    }
  }
}

TEST_CASE("up_gmm with identity weight and no penalty is ts_iv") {
  const auto g = testing::small_continuous(25, 6, 3, 100);
  EstimatorConfig cfg;
  const Vector a = up_gmm(g.data, cfg).beta;
  const Vector b = ts_iv(moment_system(g.data)).beta;
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("optimal and identity weights agree on a homoskedastic balanced design") {
  GeneratorSpec spec = GeneratorSpec::preset(Setting::S2);
  spec.m = 10;
  spec.r = spec.r_tilde = 1000;
  spec.scale_log_sd = 0.0;
  spec.seed = 26;
  const auto g = generate(spec);
  EstimatorConfig id_cfg, opt_cfg;
  opt_cfg.optimal_weight = true;
  const Estimate opt = up_gmm(g.data, opt_cfg);
  CHECK(opt.weight_used == WeightKind::OmegaInverse);
  CHECK((opt.beta - up_gmm(g.data, id_cfg).beta).norm() < 0.1);
}

TEST_CASE("penalized fits shrink monotonically in lambda") {
  const auto g = testing::small_continuous(27, 8, 6, 50);
  EstimatorConfig cfg;
  cfg.l1 = true;
  cfg.lambda.mode = LambdaRule::Mode::Fixed;
  const MomentSystem ms = moment_system(g.data);
  const double lambda_max = l1_lambda_max(ms.b.transpose() * ms.a);
  std::size_t previous = 7;
  for (int k = 0; k < 10; ++k) {
    cfg.lambda.value = lambda_max * std::pow(10.0, -3.0 + 3.0 * k / 9.0);
    const Estimate est = up_gmm(g.data, cfg);
    const auto nnz = static_cast<std::size_t>((est.beta.array() != 0.0).count());
    CHECK(nnz <= previous);
    previous = nnz;
  }
  CHECK(previous == 0);
}

TEST_CASE("refit support matches the nonzero pattern of the estimate") {
  const auto g = testing::small_continuous(28, 12, 8, 200);
  for (bool hd : {false, true}) {
    EstimatorConfig cfg;
    cfg.l1 = true;
    cfg.post_refit = true;
    cfg.optimal_weight = !hd;
    Rng rng = make_rng(1);
    const Estimate est = hd ? up_gmm_hd(g.data, cfg, rng) : up_gmm(g.data, cfg);
    REQUIRE(est.support);
    std::vector<Index> nz;
    for (Index j = 0; j < est.beta.size(); ++j) {
      if (est.beta(j) != 0.0) nz.push_back(j);
    }
    CHECK(nz == *est.support);
  }
}

TEST_CASE("estimators are invariant to relabeling environments") {
  const auto g = testing::small_categorical(29, 12, 3, 6);
  std::vector<int> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[2], perm[7]);
  const UnpairedDataset p = permute_environments(g.data, perm);

  CHECK((ts_iv(moment_system(g.data)).beta - ts_iv(moment_system(p)).beta).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((ts_2sls(g.data).beta - ts_2sls(p).beta).cwiseAbs().maxCoeff() < 1e-10);
  EstimatorConfig cfg;
  cfg.optimal_weight = true;
  CHECK((up_gmm(g.data, cfg).beta - up_gmm(p, cfg).beta).cwiseAbs().maxCoeff() < 1e-10);
  Rng r1 = make_rng(2), r2 = make_rng(2);
  CHECK((up_gmm_hd(g.data, cfg, r1).beta - up_gmm_hd(p, cfg, r2).beta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rescaling covariates rescales ts_iv coefficients inversely") {
  const auto g = testing::small_continuous(30, 6, 3, 80);
  UnpairedDataset scaled = g.data;
  scaled.x *= 2.0;
  const Vector a = ts_iv(moment_system(g.data)).beta;
  const Vector b = ts_iv(moment_system(scaled)).beta;
  CHECK((b - a / 2.0).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("estimators are pure functions of data, config and seed") {
  const auto g = testing::small_categorical(31, 40, 2, 4);
  EstimatorConfig cfg;
  cfg.denominator = DenominatorKind::MonteCarlo;
  Rng a = make_rng(77), b = make_rng(77);
  CHECK(up_gmm_hd(g.data, cfg, a).beta == up_gmm_hd(g.data, cfg, b).beta);
  cfg.optimal_weight = true;
  cfg.l1 = true;
  cfg.post_refit = true;
  CHECK(up_gmm(g.data, cfg).beta == up_gmm(g.data, cfg).beta);
}

TEST_CASE("cross-moment estimator recovers beta from noiseless moments") {
  GeneratorSpec spec = noiseless_spec(30, 1);
  spec.seed = 32;
  const auto g = generate(spec);
  EstimatorConfig cfg;
  Rng rng = make_rng(3);
  CHECK(std::abs(up_gmm_hd(g.data, cfg, rng).beta(0) - g.truth.beta_star(0)) < 1e-6);
}

TEST_CASE("cross-moment estimator beats ts_iv with many weak environments") {
  GeneratorSpec spec = GeneratorSpec::preset(Setting::S2);
  spec.m = 1600;
  spec.r = spec.r_tilde = 8;
  int wins = 0;
  for (int rep = 0; rep < 50; ++rep) {
    spec.seed = 500 + static_cast<std::uint64_t>(rep);
    const auto g = generate(spec);
    Rng rng = make_rng(rep);
    const double hd = (up_gmm_hd(g.data, EstimatorConfig{}, rng).beta - g.truth.beta_star).norm();
    const double ts = (ts_iv(moment_system(g.data)).beta - g.truth.beta_star).norm();
    wins += hd < ts;
  }
  CHECK(wins >= 45);
}

TEST_CASE("estimator config validation") {
  EstimatorConfig cfg;
  cfg.ridge = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.folds = 1;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.redraws = 0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.lambda.value = -1.0;
  CHECK_THROWS(cfg.validate());
}
