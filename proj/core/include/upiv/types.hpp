#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace upiv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration or input files. The CLI maps this to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class InstrumentKind { OneHot, Continuous };

std::string to_string(InstrumentKind kind);
InstrumentKind instrument_kind_from_string(const std::string& name);

/**
 * Instruments of one sample.
 *
 * One-hot instruments are held as environment labels in [0, m); the dense
 * one-hot matrix is materialized only on request. Continuous instruments are
 * an (rows x m) matrix.
 */
class InstrumentBlock {
 public:
  InstrumentBlock() = default;

  static InstrumentBlock one_hot(std::vector<int> labels, int m);
  static InstrumentBlock dense(Matrix values);

  InstrumentKind kind() const { return kind_; }
  Index rows() const;
  int dim() const { return m_; }

  /// Environment labels; only valid for one-hot blocks.
  const std::vector<int>& labels() const;
  /// Dense values; only valid for continuous blocks.
  const Matrix& values() const;

  Matrix to_dense() const;
  Vector row(Index i) const;

  /// Per-environment counts (one-hot only).
  std::vector<Index> counts() const;
  /// Column means of the instrument matrix (environment shares for one-hot).
  Vector mean() const;

  InstrumentBlock subset(std::span<const Index> rows) const;
  /// Relabel environments (one-hot) or permute columns (continuous): new column
  /// perm[j] receives old column j.
  InstrumentBlock permuted(std::span<const int> perm) const;

 private:
  InstrumentKind kind_ = InstrumentKind::Continuous;
  int m_ = 0;
  std::vector<int> labels_;
  Matrix values_;
};

/**
 * Two unpaired samples: {(I_i, Y_i)} of size n and {(I~_j, X~_j)} of size n~.
 * Covariates and outcomes are never observed for the same unit.
 */
struct UnpairedDataset {
  InstrumentBlock y_instruments;
  Vector y;
  InstrumentBlock x_instruments;
  Matrix x;

  InstrumentKind kind() const { return x_instruments.kind(); }
  int m() const { return x_instruments.dim(); }
  int d() const { return static_cast<int>(x.cols()); }
  Index n() const { return y.size(); }
  Index n_tilde() const { return x.rows(); }
  Index total() const { return n() + n_tilde(); }

  /// Throws Error when the dataset violates its structural invariants.
  void validate() const;
};

}  // namespace upiv
