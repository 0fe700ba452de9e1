#include "upiv/inference.hpp"

#include <cmath>
#include <numbers>

namespace upiv {

SandwichVariance sandwich_variance(const Matrix& b, const Matrix& omega, const Matrix& w,
                                   std::span<const Index> support) {
  const auto s = static_cast<Index>(support.size());
  if (omega.rows() != b.rows() || w.rows() != b.rows()) throw Error("sandwich_variance: dimension mismatch");
  Matrix bs(b.rows(), s);
  for (Index k = 0; k < s; ++k) bs.col(k) = b.col(support[k]);

  SandwichVariance sv;
  sv.support.assign(support.begin(), support.end());
  if (s == 0) {
    sv.v = Matrix(0, 0);
    return sv;
  }
  const Matrix wb = w * bs;
  const Matrix bread = bs.transpose() * wb;
  Eigen::LLT<Matrix> llt(0.5 * (bread + bread.transpose()));
  if (llt.info() != Eigen::Success) throw Error("support not identified");
  const Matrix meat = wb.transpose() * omega * wb;
  const Matrix left = llt.solve(meat);
  const Matrix v = llt.solve(left.transpose());
  sv.v = 0.5 * (v + v.transpose());
  return sv;
}

std::vector<Interval> wald_ci(const Vector& beta, const SandwichVariance& sv, double total_n, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error("wald_ci: level must lie in (0, 1)");
  if (total_n <= 0.0) throw Error("wald_ci: N must be positive");
  const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
  std::vector<Interval> out(beta.size(), Interval{0.0, 0.0, level});
  for (std::size_t k = 0; k < sv.support.size(); ++k) {
    const Index j = sv.support[k];
    const double var = std::max(sv.v(static_cast<Index>(k), static_cast<Index>(k)), 0.0);
    const double half = z * std::sqrt(var / total_n);
    out[j] = Interval{beta(j) - half, beta(j) + half, level};
  }
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("normal_quantile: p must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement brings the relative error from ~1e-9 to machine precision.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace upiv
