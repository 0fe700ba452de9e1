#include "upiv/types.hpp"

#include <cmath>

namespace upiv {

std::string to_string(InstrumentKind kind) {
  return kind == InstrumentKind::OneHot ? "onehot" : "continuous";
}

InstrumentKind instrument_kind_from_string(const std::string& name) {
  if (name == "onehot" || name == "categorical") return InstrumentKind::OneHot;
  if (name == "continuous") return InstrumentKind::Continuous;
  throw ConfigError("unknown instrument kind '" + name + "'");
}

InstrumentBlock InstrumentBlock::one_hot(std::vector<int> labels, int m) {
  if (m <= 0) throw Error("one-hot instruments need m > 0");
  for (int e : labels) {
    if (e < 0 || e >= m) throw Error("environment label out of range");
  }
  InstrumentBlock block;
  block.kind_ = InstrumentKind::OneHot;
  block.m_ = m;
  block.labels_ = std::move(labels);
  return block;
}

InstrumentBlock InstrumentBlock::dense(Matrix values) {
  InstrumentBlock block;
  block.kind_ = InstrumentKind::Continuous;
  block.m_ = static_cast<int>(values.cols());
  block.values_ = std::move(values);
  return block;
}

Index InstrumentBlock::rows() const {
  return kind_ == InstrumentKind::OneHot ? static_cast<Index>(labels_.size()) : values_.rows();
}

const std::vector<int>& InstrumentBlock::labels() const {
  if (kind_ != InstrumentKind::OneHot) throw Error("labels() on continuous instruments");
  return labels_;
}

const Matrix& InstrumentBlock::values() const {
  if (kind_ != InstrumentKind::Continuous) throw Error("values() on one-hot instruments");
  return values_;
}

Matrix InstrumentBlock::to_dense() const {
  if (kind_ == InstrumentKind::Continuous) return values_;
  Matrix out = Matrix::Zero(rows(), m_);
  for (Index i = 0; i < rows(); ++i) out(i, labels_[i]) = 1.0;
  return out;
}

Vector InstrumentBlock::row(Index i) const {
  if (kind_ == InstrumentKind::Continuous) return values_.row(i).transpose();
  Vector out = Vector::Zero(m_);
  out(labels_[i]) = 1.0;
  return out;
}

std::vector<Index> InstrumentBlock::counts() const {
  std::vector<Index> out(m_, 0);
  for (int e : labels()) ++out[e];
  return out;
}

Vector InstrumentBlock::mean() const {
  if (kind_ == InstrumentKind::Continuous) return values_.colwise().mean().transpose();
  Vector p = Vector::Zero(m_);
  for (int e : labels_) p(e) += 1.0;
  return p / static_cast<double>(labels_.size());
}

InstrumentBlock InstrumentBlock::subset(std::span<const Index> rows) const {
  if (kind_ == InstrumentKind::OneHot) {
    std::vector<int> sub;
    sub.reserve(rows.size());
    for (Index i : rows) sub.push_back(labels_[i]);
    return one_hot(std::move(sub), m_);
  }
  Matrix sub(static_cast<Index>(rows.size()), m_);
  for (std::size_t r = 0; r < rows.size(); ++r) sub.row(static_cast<Index>(r)) = values_.row(rows[r]);
  return dense(std::move(sub));
}

InstrumentBlock InstrumentBlock::permuted(std::span<const int> perm) const {
  if (static_cast<int>(perm.size()) != m_) throw Error("permutation size mismatch");
  if (kind_ == InstrumentKind::OneHot) {
    std::vector<int> out(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) out[i] = perm[labels_[i]];
    return one_hot(std::move(out), m_);
  }
  Matrix out(values_.rows(), m_);
  for (int j = 0; j < m_; ++j) out.col(perm[j]) = values_.col(j);
  return dense(std::move(out));
}

void UnpairedDataset::validate() const {
  if (y_instruments.kind() != x_instruments.kind()) throw Error("instrument kinds differ between samples");
  if (y_instruments.dim() != x_instruments.dim()) throw Error("instrument dimension differs between samples");
  if (y_instruments.rows() != y.size()) throw Error("y-sample instrument/outcome length mismatch");
  if (x_instruments.rows() != x.rows()) throw Error("x-sample instrument/covariate length mismatch");
  if (n() < 2 || n_tilde() < 2) throw Error("degenerate sample");
  if (d() < 1) throw Error("covariate dimension must be positive");
  if (!y.allFinite() || !x.allFinite()) throw Error("non-finite data");
  if (kind() == InstrumentKind::Continuous &&
      (!y_instruments.values().allFinite() || !x_instruments.values().allFinite())) {
    throw Error("non-finite data");
  }
}

}  // namespace upiv
