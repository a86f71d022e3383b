#pragma once

#include <atomic>
#include <concepts>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "sketchpack/errors.hpp"
#include "sketchpack/rng.hpp"
#include "sketchpack/spectrum.hpp"

namespace sketchpack {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Counts of vectors multiplied by A and by A*.
struct LedgerCounts {
  std::uint64_t count_A = 0;
  std::uint64_t count_At = 0;

  std::uint64_t total() const noexcept { return count_A + count_At; }
  friend LedgerCounts operator-(const LedgerCounts& a, const LedgerCounts& b) {
    return {a.count_A - b.count_A, a.count_At - b.count_At};
  }
  friend LedgerCounts operator+(const LedgerCounts& a, const LedgerCounts& b) {
    return {a.count_A + b.count_A, a.count_At + b.count_At};
  }
  friend bool operator==(const LedgerCounts&, const LedgerCounts&) = default;
};

class MatvecLedger {
 public:
  void record_apply(std::uint64_t width) noexcept {
    count_A_.fetch_add(width, std::memory_order_relaxed);
  }
  void record_adjoint(std::uint64_t width) noexcept {
    count_At_.fetch_add(width, std::memory_order_relaxed);
  }
  LedgerCounts snapshot() const noexcept {
    return {count_A_.load(std::memory_order_relaxed),
            count_At_.load(std::memory_order_relaxed)};
  }

 private:
  std::atomic<std::uint64_t> count_A_{0};
  std::atomic<std::uint64_t> count_At_{0};
};

/// Structural facts an operator can declare. trace and frobenius_norm are
/// exact values when present.
struct OperatorTraits {
  bool symmetric = false;
  bool psd = false;
  std::optional<double> trace;
  std::optional<double> frobenius_norm;
};

template <class T>
concept BlockOperator = requires(const T& op, const Matrix& x) {
  { op.rows() } -> std::convertible_to<Index>;
  { op.cols() } -> std::convertible_to<Index>;
  { op.apply(x) } -> std::convertible_to<Matrix>;
};

template <class T>
concept AdjointBlockOperator = BlockOperator<T> && requires(const T& op, const Matrix& x) {
  { op.apply_adjoint(x) } -> std::convertible_to<Matrix>;
};

template <class T>
concept DenseRealizable = requires(const T& op) {
  { op.to_dense() } -> std::convertible_to<Matrix>;
};

/// Type-erased operator accessed only through block products. Copies share
/// the underlying operator and ledger.
class LinearOperator {
 public:
  template <BlockOperator Op>
  explicit LinearOperator(Op op, OperatorTraits traits = {})
      : impl_(std::make_shared<Model<Op>>(std::move(op))),
        ledger_(std::make_shared<MatvecLedger>()),
        traits_(std::move(traits)) {
    rows_ = impl_->rows();
    cols_ = impl_->cols();
    if (traits_.symmetric && rows_ != cols_)
      throw std::invalid_argument("symmetric operator must be square");
  }

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  bool has_adjoint() const noexcept { return impl_->has_adjoint(); }
  const OperatorTraits& traits() const noexcept { return traits_; }

  Matrix apply(const Matrix& block) const {
    if (block.rows() != cols_)
      throw DimensionMismatch("apply: block has " + std::to_string(block.rows()) +
                              " rows, operator has " + std::to_string(cols_) + " columns");
    ledger_->record_apply(static_cast<std::uint64_t>(block.cols()));
    if (block.cols() == 0) return Matrix(rows_, 0);
    return impl_->apply(block);
  }

  Matrix apply_adjoint(const Matrix& block) const {
    if (!has_adjoint()) throw std::logic_error("operator has no adjoint");
    if (block.rows() != rows_)
      throw DimensionMismatch("apply_adjoint: block has " + std::to_string(block.rows()) +
                              " rows, operator has " + std::to_string(rows_) + " rows");
    ledger_->record_adjoint(static_cast<std::uint64_t>(block.cols()));
    if (block.cols() == 0) return Matrix(cols_, 0);
    return impl_->apply_adjoint(block);
  }

  LedgerCounts ledger() const noexcept { return ledger_->snapshot(); }

  /// Same operator with its own zeroed ledger (for evaluation-side products).
  LinearOperator with_fresh_ledger() const {
    LinearOperator copy = *this;
    copy.ledger_ = std::make_shared<MatvecLedger>();
    return copy;
  }

  /// Explicit matrix when the wrapped operator can produce one cheaply.
  std::optional<Matrix> dense() const { return impl_->to_dense(); }

 private:
  struct Concept {
    virtual ~Concept() = default;
    virtual Index rows() const = 0;
    virtual Index cols() const = 0;
    virtual bool has_adjoint() const = 0;
    virtual Matrix apply(const Matrix&) const = 0;
    virtual Matrix apply_adjoint(const Matrix&) const = 0;
    virtual std::optional<Matrix> to_dense() const = 0;
  };

  template <class Op>
  struct Model final : Concept {
    explicit Model(Op o) : op(std::move(o)) {}
    Index rows() const override { return static_cast<Index>(op.rows()); }
    Index cols() const override { return static_cast<Index>(op.cols()); }
    bool has_adjoint() const override { return AdjointBlockOperator<Op>; }
    Matrix apply(const Matrix& x) const override { return op.apply(x); }
    Matrix apply_adjoint(const Matrix& x) const override {
      if constexpr (AdjointBlockOperator<Op>) {
        return op.apply_adjoint(x);
      } else {
        throw std::logic_error("operator has no adjoint");
      }
    }
    std::optional<Matrix> to_dense() const override {
      if constexpr (DenseRealizable<Op>) {
        return Matrix(op.to_dense());
      } else {
        return std::nullopt;
      }
    }
    Op op;
  };

  std::shared_ptr<const Concept> impl_;
  std::shared_ptr<MatvecLedger> ledger_;
  OperatorTraits traits_;
  Index rows_ = 0;
  Index cols_ = 0;
};

inline LedgerCounts ledger_snapshot(const LinearOperator& op) { return op.ledger(); }

namespace detail {

struct DiagonalOp {
  Vector d;
  Index rows() const { return d.size(); }
  Index cols() const { return d.size(); }
  Matrix apply(const Matrix& x) const { return d.asDiagonal() * x; }
  Matrix apply_adjoint(const Matrix& x) const { return d.asDiagonal() * x; }
  Matrix to_dense() const { return Matrix(d.asDiagonal()); }
};

struct DenseOp {
  std::shared_ptr<const Matrix> m;
  Index rows() const { return m->rows(); }
  Index cols() const { return m->cols(); }
  Matrix apply(const Matrix& x) const { return (*m) * x; }
  Matrix apply_adjoint(const Matrix& x) const { return m->transpose() * x; }
  Matrix to_dense() const { return *m; }
};

inline bool is_symmetric(const Matrix& m, double rel_tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
  if (scale == 0.0) return true;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// Cholesky of the symmetric part plus a relative shift of 1e-10.
inline bool is_psd(const Matrix& m) {
  if (!is_symmetric(m)) return false;
  if (m.size() == 0) return true;
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;
  Matrix s = 0.5 * (m + m.transpose());
  s.diagonal().array() += 1e-10 * scale * static_cast<double>(m.rows());
  Eigen::LLT<Matrix> llt(s);
  return llt.info() == Eigen::Success;
}

}  // namespace detail

/// Square psd operator diag(spec).
inline LinearOperator diag_operator(const Spectrum& spec) {
  if (spec.empty()) throw std::invalid_argument("diag_operator: empty spectrum");
  OperatorTraits traits;
  traits.symmetric = true;
  traits.psd = true;
  traits.trace = spec.vector().sum();
  traits.frobenius_norm = spec.vector().norm();
  return LinearOperator(detail::DiagonalOp{spec.vector()}, traits);
}

/// Explicit matrix; symmetry and positive semidefiniteness are detected.
inline LinearOperator dense_operator(Matrix m) {
  OperatorTraits traits;
  traits.frobenius_norm = m.norm();
  traits.symmetric = detail::is_symmetric(m);
  if (traits.symmetric) {
    traits.trace = m.trace();
    traits.psd = detail::is_psd(m);
  }
  return LinearOperator(detail::DenseOp{std::make_shared<const Matrix>(std::move(m))},
                        traits);
}

/// Explicit matrix with caller-declared traits (no detection pass).
inline LinearOperator dense_operator(Matrix m, OperatorTraits traits) {
  if (!traits.frobenius_norm) traits.frobenius_norm = m.norm();
  if (traits.symmetric && !traits.trace) traits.trace = m.trace();
  return LinearOperator(detail::DenseOp{std::make_shared<const Matrix>(std::move(m))},
                        traits);
}

/// base + noise_std * G with G standard Gaussian (column-major draw order).
inline Matrix noisy_dense(const Matrix& base, double noise_std, RngState& rng) {
  if (noise_std < 0.0) throw std::invalid_argument("noise_std must be nonnegative");
  if (noise_std == 0.0) return base;
  return base + noise_std * gaussian_matrix(rng, base.rows(), base.cols());
}

inline void require_adjoint(const LinearOperator& op, const char* who) {
  if (!op.has_adjoint())
    throw std::invalid_argument(std::string(who) + " requires an operator with an adjoint");
}

inline void require_psd(const LinearOperator& op, const char* who) {
  if (op.rows() != op.cols())
    throw std::invalid_argument(std::string(who) + " requires a square operator");
  if (!op.traits().psd)
    throw std::invalid_argument(std::string(who) +
                                " requires a symmetric positive semidefinite operator");
}

}  // namespace sketchpack
