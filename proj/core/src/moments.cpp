#include "upiv/moments.hpp"

#include <algorithm>
#include <numeric>

namespace upiv {

namespace {

void require_pairs(Index n) {
  if (n < 2) throw Error("degenerate sample");
}

// (1/n) sum_i (e_{k_i} - p) (v_i - v_bar)^T for environment labels k_i.
Matrix one_hot_cov(const std::vector<int>& labels, int m, const Matrix& v) {
  const auto n = static_cast<Index>(labels.size());
  const Eigen::RowVectorXd v_bar = v.colwise().mean();
  Matrix out = Matrix::Zero(m, v.cols());
  for (Index i = 0; i < n; ++i) out.row(labels[i]) += v.row(i) - v_bar;
  return out / static_cast<double>(n);
}

// Second moment of the centered summands z_i = I_c,i * w_i with w already
// centered: (1/n) sum z_i z_i^T - z_bar z_bar^T.
Matrix summand_covariance(const InstrumentBlock& inst, const Vector& w) {
  const Index n = inst.rows();
  const int m = inst.dim();
  const Vector p = inst.mean();
  Matrix second;
  Vector z_bar;
  if (inst.kind() == InstrumentKind::OneHot) {
    // sum_i w_i^2 (e_k - p)(e_k - p)^T = diag(s2) - s2 p^T - p s2^T + sum(s2) p p^T
    Vector s2 = Vector::Zero(m);
    Vector s1 = Vector::Zero(m);
    const auto& labels = inst.labels();
    for (Index i = 0; i < n; ++i) {
      s2(labels[i]) += w(i) * w(i);
      s1(labels[i]) += w(i);
    }
    second = Matrix(s2.asDiagonal());
    second.noalias() -= s2 * p.transpose();
    second.noalias() -= p * s2.transpose();
    second.noalias() += s2.sum() * (p * p.transpose());
    second /= static_cast<double>(n);
    z_bar = (s1 - w.sum() * p) / static_cast<double>(n);
  } else {
    Matrix z = inst.values().rowwise() - p.transpose();
    z.array().colwise() *= w.array();
    second = (z.transpose() * z) / static_cast<double>(n);
    z_bar = z.colwise().mean().transpose();
  }
  Matrix out = second - z_bar * z_bar.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

Matrix cov_hat(const Matrix& u, const Matrix& v) {
  if (u.rows() != v.rows()) throw Error("cov_hat: row count mismatch");
  require_pairs(u.rows());
  const Matrix uc = u.rowwise() - u.colwise().mean();
  const Matrix vc = v.rowwise() - v.colwise().mean();
  return (uc.transpose() * vc) / static_cast<double>(u.rows());
}

Matrix cov_hat(const InstrumentBlock& instruments, const Matrix& v) {
  if (instruments.rows() != v.rows()) throw Error("cov_hat: row count mismatch");
  require_pairs(v.rows());
  if (instruments.kind() == InstrumentKind::OneHot) return one_hot_cov(instruments.labels(), instruments.dim(), v);
  return cov_hat(instruments.values(), v);
}

Vector cov_hat(const InstrumentBlock& instruments, const Vector& v) {
  return cov_hat(instruments, Matrix(v)).col(0);
}

MomentSystem moment_system(const UnpairedDataset& data) {
  data.validate();
  MomentSystem ms;
  ms.a = cov_hat(data.y_instruments, data.y);
  ms.b = cov_hat(data.x_instruments, data.x);
  ms.n = data.n();
  ms.n_tilde = data.n_tilde();
  return ms;
}

SampleCenter sample_center(const InstrumentBlock& instruments, const Matrix& x) {
  return {instruments.mean(), x.colwise().mean().transpose()};
}

Matrix fold_cross_cov(const InstrumentBlock& instruments, const Matrix& x, std::span<const Index> fold,
                      const std::optional<SampleCenter>& center) {
  if (fold.empty()) throw Error("empty fold");
  const auto nk = static_cast<double>(fold.size());
  const int m = instruments.dim();
  const Index d = x.cols();

  Eigen::RowVectorXd x_bar = Eigen::RowVectorXd::Zero(d);
  for (Index j : fold) x_bar += x.row(j);
  x_bar /= nk;

  if (instruments.kind() == InstrumentKind::OneHot) {
    const auto& labels = instruments.labels();
    Matrix sums = Matrix::Zero(m, d);
    Vector counts = Vector::Zero(m);
    for (Index j : fold) {
      sums.row(labels[j]) += x.row(j);
      counts(labels[j]) += 1.0;
    }
    // Row e: (n_{k,e}/n_k)(X_bar_{k,e} - X_bar); empty environments give a zero row.
    if (!center) {
      return (sums - counts * x_bar) / nk;
    }
    const Eigen::RowVectorXd ref = center->covariate_mean.transpose();
    Matrix out = (sums - counts * ref) / nk;
    out -= center->instrument_mean * (x_bar - ref);
    return out;
  }

  const Matrix& iv = instruments.values();
  Eigen::RowVectorXd i_bar = Eigen::RowVectorXd::Zero(m);
  for (Index j : fold) i_bar += iv.row(j);
  i_bar /= nk;
  if (center) {
    i_bar = center->instrument_mean.transpose();
    x_bar = center->covariate_mean.transpose();
  }
  Matrix out = Matrix::Zero(m, d);
  for (Index j : fold) out.noalias() += (iv.row(j) - i_bar).transpose() * (x.row(j) - x_bar);
  return out / nk;
}

SplitScheme default_split_scheme(InstrumentKind kind) {
  return kind == InstrumentKind::OneHot ? SplitScheme::Stratified : SplitScheme::Uniform;
}

Folds draw_folds(const InstrumentBlock& instruments, int folds, SplitScheme scheme, Rng& rng) {
  const Index n = instruments.rows();
  if (folds < 2) throw Error("need at least 2 folds");
  if (n < folds) throw Error("too few observations for K folds");
  Folds out(folds);
  if (scheme == SplitScheme::Uniform) {
    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const Index base = n / folds;
    const Index extra = n % folds;
    Index pos = 0;
    for (int k = 0; k < folds; ++k) {
      const Index size = base + (k < extra ? 1 : 0);
      out[k].assign(perm.begin() + pos, perm.begin() + pos + size);
      pos += size;
    }
  } else {
    if (instruments.kind() != InstrumentKind::OneHot) throw Error("stratified splits require one-hot instruments");
    std::vector<std::vector<Index>> by_env(instruments.dim());
    const auto& labels = instruments.labels();
    for (Index i = 0; i < n; ++i) by_env[labels[i]].push_back(i);
    std::size_t counter = 0;
    for (auto& members : by_env) {
      std::shuffle(members.begin(), members.end(), rng);
      for (Index i : members) out[counter++ % folds].push_back(i);
    }
  }
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

Matrix cross_fold_term(const InstrumentBlock& instruments, const Matrix& x, const Folds& folds,
                       const std::optional<SampleCenter>& center) {
  const auto k = static_cast<int>(folds.size());
  if (k < 2) throw Error("need at least 2 folds");
  const int m = instruments.dim();
  Matrix total = Matrix::Zero(m, x.cols());
  Matrix self = Matrix::Zero(x.cols(), x.cols());
  for (const auto& fold : folds) {
    const Matrix bk = fold_cross_cov(instruments, x, fold, center);
    total += bk;
    self.noalias() += bk.transpose() * bk;
  }
  // sum_{h != k} B_h^T B_k = (sum B)^T (sum B) - sum B_k^T B_k
  Matrix s = total.transpose() * total - self;
  return (static_cast<double>(m) / (k * (k - 1.0))) * s;
}

Matrix cross_fold_denominator_mc(const InstrumentBlock& instruments, const Matrix& x,
                                 const CrossFoldOptions& options, Rng& rng) {
  if (options.redraws < 1) throw Error("need at least one redraw");
  if (instruments.rows() < options.folds) throw Error("too few observations for K folds");
  const SplitScheme scheme = options.scheme.value_or(default_split_scheme(instruments.kind()));
  std::optional<SampleCenter> center;
  if (options.sample_centering) center = sample_center(instruments, x);
  Matrix acc = Matrix::Zero(x.cols(), x.cols());
  for (int b = 0; b < options.redraws; ++b) {
    const Folds folds = draw_folds(instruments, options.folds, scheme, rng);
    acc += cross_fold_term(instruments, x, folds, center);
  }
  return acc / static_cast<double>(options.redraws);
}

Matrix cross_fold_denominator_analytic(const InstrumentBlock& instruments, const Matrix& x,
                                       std::optional<SplitScheme> scheme_opt) {
  const Index n = x.rows();
  if (n < 2) throw Error("too few observations for the analytic denominator");
  const SplitScheme scheme = scheme_opt.value_or(default_split_scheme(instruments.kind()));
  const int m = instruments.dim();
  const auto nd = static_cast<double>(n);
  const Matrix xc = x.rowwise() - x.colwise().mean();
  const Vector p = instruments.mean();

  // Squared norms of the centered instrument rows: ||I_j - I_bar||^2.
  Vector inst_sq(n);
  if (instruments.kind() == InstrumentKind::OneHot) {
    const double pp = p.squaredNorm();
    const auto& labels = instruments.labels();
    for (Index j = 0; j < n; ++j) inst_sq(j) = 1.0 - 2.0 * p(labels[j]) + pp;
  } else {
    inst_sq = (instruments.values().rowwise() - p.transpose()).rowwise().squaredNorm();
  }
  // sum_j g_j^T g_j with g_j = (I_j - I_bar)(X_j - X_bar)^T
  const Matrix self = xc.transpose() * (inst_sq.asDiagonal() * xc);
  const Matrix b = cov_hat(instruments, x);
  const Matrix btb = b.transpose() * b;

  Matrix out;
  if (scheme == SplitScheme::Uniform) {
    out = static_cast<double>(m) * ((nd / (nd - 1.0)) * btb - self / (nd * (nd - 1.0)));
  } else {
    if (instruments.kind() != InstrumentKind::OneHot) throw Error("stratified splits require one-hot instruments");
    // (m/n^2) [ sum_{i != j} g_i^T g_j + sum_e 1/(r_e - 1) sum_{i != j in e} g_i^T g_j ]
    const auto& labels = instruments.labels();
    Matrix env_sum = Matrix::Zero(m, x.cols());
    std::vector<Matrix> env_self(m, Matrix::Zero(x.cols(), x.cols()));
    Vector counts = Vector::Zero(m);
    for (Index j = 0; j < n; ++j) {
      env_sum.row(labels[j]) += xc.row(j);
      env_self[labels[j]].noalias() += xc.row(j).transpose() * xc.row(j);
      counts(labels[j]) += 1.0;
    }
    const double pp = p.squaredNorm();
    Matrix within = Matrix::Zero(x.cols(), x.cols());
    for (int e = 0; e < m; ++e) {
      if (counts(e) < 2.0) continue;
      const double norm = 1.0 - 2.0 * p(e) + pp;
      const Vector s = env_sum.row(e).transpose();
      within += (norm / (counts(e) - 1.0)) * (s * s.transpose() - env_self[e]);
    }
    out = (static_cast<double>(m) / (nd * nd)) * (nd * nd * btb - self + within);
  }
  return 0.5 * (out + out.transpose());
}

CrossMoments cross_moments(const UnpairedDataset& data, const MomentSystem& ms, DenominatorKind kind,
                           const CrossFoldOptions& options, Rng& rng) {
  CrossMoments cm;
  const double m = ms.m();
  cm.m_scale = m;
  cm.construction = kind;
  cm.folds = options.folds;
  cm.c_xy = m * (ms.b.transpose() * ms.a);
  if (kind == DenominatorKind::MonteCarlo) {
    cm.c_xx = cross_fold_denominator_mc(data.x_instruments, data.x, options, rng);
    cm.redraws = options.redraws;
  } else {
    cm.c_xx = cross_fold_denominator_analytic(data.x_instruments, data.x, options.scheme);
    cm.folds = 2;
  }
  return cm;
}

MomentVariance omega_hat(const UnpairedDataset& data, const Vector& beta0) {
  if (beta0.size() != data.d()) throw Error("omega_hat: beta0 has wrong dimension");
  if (!beta0.allFinite()) throw Error("omega_hat: non-finite beta0");
  const auto n = static_cast<double>(data.n());
  const auto nt = static_cast<double>(data.n_tilde());
  const double total = n + nt;
  MomentVariance mv;
  mv.tau_n = n / total;
  mv.tilde_tau_n = nt / total;
  const Vector yc = data.y.array() - data.y.mean();
  const Matrix xc = data.x.rowwise() - data.x.colwise().mean();
  const Vector w = xc * beta0;
  mv.omega = summand_covariance(data.y_instruments, yc) / mv.tau_n +
             summand_covariance(data.x_instruments, w) / mv.tilde_tau_n;
  return mv;
}

MomentVariance omega_hat(const UnpairedDataset& data, const Vector& beta0, std::span<const Index> support) {
  if (static_cast<Index>(support.size()) != beta0.size()) throw Error("omega_hat: support/beta size mismatch");
  Vector full = Vector::Zero(data.d());
  for (std::size_t k = 0; k < support.size(); ++k) full(support[k]) = beta0(static_cast<Index>(k));
  return omega_hat(data, full);
}

}  // namespace upiv
