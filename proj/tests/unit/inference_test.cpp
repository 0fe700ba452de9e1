#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "upiv/estimators.hpp"
#include "upiv/inference.hpp"

using namespace upiv;
using testing::gaussian;

namespace {

std::vector<Index> all_of(Index d) {
  std::vector<Index> s(static_cast<std::size_t>(d));
  std::iota(s.begin(), s.end(), Index{0});
  return s;
}

Matrix random_spd(Index m, Rng& rng) {
  const Matrix a = gaussian(m, m + 2, rng);
  return a * a.transpose() + 0.1 * Matrix::Identity(m, m);
}

}  // namespace

TEST_CASE("normal quantile and cdf") {
  CHECK(std::abs(normal_quantile(0.975) - 1.959963984540054) < 1e-8);
  CHECK(std::abs(normal_quantile(0.5)) < 1e-12);
  CHECK(std::abs(normal_quantile(0.001) + 3.090232306167813) < 1e-8);
  for (double p : {0.01, 0.2, 0.6, 0.99}) CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) < 1e-10);
}

TEST_CASE("sandwich with the inverse weight collapses to the efficient variance") {
  Rng rng = make_rng(41);
  const Matrix b = gaussian(5, 2, rng);
  const Matrix omega = random_spd(5, rng);
  const Matrix w = omega.inverse();
  const SandwichVariance sv = sandwich_variance(b, omega, w, all_of(2));
  const Matrix efficient = (b.transpose() * w * b).inverse();
  CHECK((sv.v - efficient).cwiseAbs().maxCoeff() < 1e-8);

  const SandwichVariance id = sandwich_variance(Matrix::Identity(3, 3), Matrix::Identity(3, 3),
                                                Matrix::Identity(3, 3), all_of(3));
  CHECK((id.v - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("sandwich matches a direct evaluation on a support") {
  Rng rng = make_rng(42);
  const Matrix b = gaussian(5, 4, rng);
  const Matrix omega = random_spd(5, rng);
  const Matrix w = random_spd(5, rng);
  const std::vector<Index> support = {0, 2};
  Matrix bs(5, 2);
  bs << b.col(0), b.col(2);
  const Matrix bread = (bs.transpose() * w * bs).inverse();
  const Matrix expected = bread * bs.transpose() * w * omega * w * bs * bread;
  const SandwichVariance sv = sandwich_variance(b, omega, w, support);
  CHECK(sv.support == support);
  CHECK((sv.v - expected).cwiseAbs().maxCoeff() < 1e-10);

  Matrix dup = b;
  dup.col(2) = dup.col(0);
  CHECK_THROWS_WITH(sandwich_variance(dup, omega, w, support), "support not identified");
}

TEST_CASE("optimal weighting never increases the sandwich trace") {
  Rng rng = make_rng(43);
  for (int t = 0; t < 20; ++t) {
    const Matrix b = gaussian(6, 3, rng);
    const Matrix omega = random_spd(6, rng);
    const double opt = sandwich_variance(b, omega, omega.inverse(), all_of(3)).v.trace();
    const double id = sandwich_variance(b, omega, Matrix::Identity(6, 6), all_of(3)).v.trace();
    CHECK(opt <= id + 1e-8);
  }
}

TEST_CASE("Wald intervals") {
  SandwichVariance sv;
  sv.v = Matrix::Zero(2, 2);
  sv.support = {0, 1};
  Vector beta(3);
  beta << 0.4, -1.0, 0.0;
  sv.support = {0, 1};
  auto ci = wald_ci(beta, sv, 100.0, 0.95);
  CHECK(ci[0].lower == 0.4);
  CHECK(ci[0].upper == 0.4);
  CHECK(ci[2].lower == 0.0);
  CHECK(ci[2].upper == 0.0);

  sv.v = Matrix::Identity(2, 2);
  ci = wald_ci(beta, sv, 100.0, 0.95);
  CHECK(std::abs((ci[1].upper - ci[1].lower) / 2.0 - 0.196) < 1e-3);
}

TEST_CASE("refit intervals equal oracle intervals when the support is recovered") {
  GeneratorSpec spec = GeneratorSpec::preset(Setting::S2, GeneratorKind::Continuous);
  spec.m = 6;
  spec.d = 4;
  spec.s_star = 2;
  spec.beta_rule = BetaRule::SparseUniform;
  spec.r = spec.r_tilde = 1000;
  spec.seed = 44;
  const auto g = generate(spec);
  EstimatorConfig cfg;
  cfg.optimal_weight = true;
  cfg.l1 = true;
  cfg.post_refit = true;
  cfg.support_rule = SupportRule::BetaMinHalf;
  cfg.beta_min = 0.5;
  cfg.ci_level = 0.95;
  const Estimate est = up_gmm(g.data, cfg);
  REQUIRE(*est.support == g.truth.support);

  // Oracle: refit on the true support with the support-restricted weight, then the sandwich.
  const MomentSystem ms = moment_system(g.data);
  const auto& s = g.truth.support;
  Matrix bs(ms.m(), static_cast<Index>(s.size()));
  for (std::size_t k = 0; k < s.size(); ++k) bs.col(static_cast<Index>(k)) = ms.b.col(s[k]);
  const Matrix ridge = cfg.ridge * Matrix::Identity(bs.cols(), bs.cols());
  const Vector pilot_s = (bs.transpose() * bs + ridge).ldlt().solve(bs.transpose() * ms.a);
  const Matrix w = (omega_hat(g.data, pilot_s, s).omega + cfg.ridge * Matrix::Identity(ms.m(), ms.m())).inverse();
  const Vector beta_s = (bs.transpose() * w * bs + ridge).ldlt().solve(bs.transpose() * w * ms.a);
  Vector beta = Vector::Zero(spec.d);
  for (std::size_t k = 0; k < s.size(); ++k) beta(s[k]) = beta_s(static_cast<Index>(k));
  const SandwichVariance sv = sandwich_variance(ms.b, omega_hat(g.data, beta).omega, w, s);
  const auto oracle = wald_ci(beta, sv, static_cast<double>(ms.total()), 0.95);
  for (std::size_t j = 0; j < oracle.size(); ++j) {
    CHECK(std::abs(oracle[j].lower - (*est.ci)[j].lower) < 1e-12);
    CHECK(std::abs(oracle[j].upper - (*est.ci)[j].upper) < 1e-12);
  }
}
