#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>

#include <Eigen/Dense>

#include "sketchpack/errors.hpp"
#include "sketchpack/linop.hpp"
#include "sketchpack/spectrum.hpp"

namespace sketchpack {

enum class Orthogonalization { stabilized, householder };

inline const char* to_string(Orthogonalization kind) {
  return kind == Orthogonalization::stabilized ? "stabilized" : "householder";
}

/// Q has orthonormal columns. R is upper triangular for qr_econ and a general
/// rank(Q) x cols matrix for stabilized_qr.
struct QRPair {
  Matrix Q;
  Matrix R;
  Index rank() const noexcept { return Q.cols(); }
};

struct SVDResult {
  Matrix U;
  Spectrum S;
  Matrix V;
};

constexpr double kEpsMach = std::numeric_limits<double>::epsilon();

namespace detail {

struct RawSVD {
  Matrix U;
  Vector S;
  Matrix V;
};

// Square or short-wide input of moderate size.
inline RawSVD direct_svd(const Matrix& m) {
  RawSVD out;
  if (std::max(m.rows(), m.cols()) <= 48) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.U = svd.matrixU();
    out.S = svd.singularValues();
    out.V = svd.matrixV();
  } else {
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.U = svd.matrixU();
    out.S = svd.singularValues();
    out.V = svd.matrixV();
  }
  return out;
}

inline Matrix thin_q(const Eigen::HouseholderQR<Matrix>& qr, Index rows, Index cols) {
  Matrix q = Matrix::Identity(rows, cols);
  qr.householderQ().applyThisOnTheLeft(q);
  return q;
}

// Tall inputs go through a Householder QR so the SVD runs on the small R.
inline RawSVD thin_svd(const Matrix& m) {
  const Index rows = m.rows();
  const Index cols = m.cols();
  if (rows == 0 || cols == 0) {
    return {Matrix(rows, 0), Vector(0), Matrix(cols, 0)};
  }
  if (rows < cols) {
    RawSVD t = thin_svd(m.transpose());
    return {std::move(t.V), std::move(t.S), std::move(t.U)};
  }
  if (rows >= 2 * cols && cols > 0) {
    Eigen::HouseholderQR<Matrix> qr(m);
    Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    RawSVD small = direct_svd(r);
    small.U = thin_q(qr, rows, cols) * small.U;
    return small;
  }
  return direct_svd(m);
}

inline double spectral_norm_of_block(const Matrix& x) {
  if (x.size() == 0) return 0.0;
  if (x.cols() == 1) return x.norm();
  const Matrix gram = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

}  // namespace detail

/// Householder economy QR. Requires rows >= cols.
inline QRPair qr_econ(const Matrix& m) {
  const Index rows = m.rows();
  const Index cols = m.cols();
  if (rows < cols) throw std::invalid_argument("qr_econ requires rows >= cols");
  if (cols == 0) return {Matrix(rows, 0), Matrix(0, 0)};
  Eigen::HouseholderQR<Matrix> qr(m);
  QRPair out;
  out.Q = detail::thin_q(qr, rows, cols);
  out.R = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  return out;
}

inline double default_threshold_factor(Index rows, Index cols) {
  return static_cast<double>(std::max(rows, cols)) * kEpsMach;
}

/// SVD-based range finder. Keeps singular triplets with
/// sigma_i > threshold_factor * reference_scale, where reference_scale
/// defaults to sigma_1(M). Q = kept left vectors, R = diag(sigma) V^T.
inline QRPair stabilized_qr(const Matrix& m,
                            std::optional<double> threshold_factor = std::nullopt,
                            std::optional<double> reference_scale = std::nullopt) {
  const Index rows = m.rows();
  const Index cols = m.cols();
  const double factor = threshold_factor.value_or(default_threshold_factor(rows, cols));
  if (!(factor > 0.0)) throw std::invalid_argument("threshold_factor must be positive");
  if (rows == 0 || cols == 0) return {Matrix(rows, 0), Matrix(0, cols)};
  detail::RawSVD svd = detail::thin_svd(m);
  const double sigma1 = svd.S.size() ? svd.S(0) : 0.0;
  const double threshold = factor * reference_scale.value_or(sigma1);
  Index keep = 0;
  while (keep < svd.S.size() && svd.S(keep) > threshold && svd.S(keep) > 0.0) ++keep;
  QRPair out;
  out.Q = svd.U.leftCols(keep);
  out.R = svd.S.head(keep).asDiagonal() * svd.V.leftCols(keep).transpose();
  return out;
}

inline QRPair orthonormalize(const Matrix& m, Orthogonalization kind,
                             std::optional<double> threshold_factor = std::nullopt,
                             std::optional<double> reference_scale = std::nullopt) {
  if (kind == Orthogonalization::householder) return qr_econ(m);
  return stabilized_qr(m, threshold_factor, reference_scale);
}

/// Q: orthonormal basis of the new directions; coeffs: first-pass projection
/// basis^T X_new; R: factor of the final QR of the twice-deflated block.
struct BlockOrthResult {
  Matrix Q;
  Matrix coeffs;
  Matrix R;
};

/// Two passes of block Gram-Schmidt against an orthonormal basis (given as
/// contiguous columns), each followed by QR, so the second pass acts on
/// orthonormal columns. Under stabilized QR the first rank threshold is
/// relative to sigma_1 of the undeflated X_new, so a block already inside
/// span(basis) yields zero columns. R = R_2 R_1.
inline BlockOrthResult block_orthogonalize(const Matrix& x_new,
                                           const Eigen::Ref<const Matrix>& basis,
                                           Orthogonalization kind = Orthogonalization::stabilized,
                                           std::optional<double> threshold_factor = std::nullopt) {
  if (basis.cols() > 0 && basis.rows() != x_new.rows())
    throw DimensionMismatch("block_orthogonalize: row count mismatch");
  BlockOrthResult out;
  const double factor =
      threshold_factor.value_or(default_threshold_factor(x_new.rows(), x_new.cols()));
  if (basis.cols() == 0) {
    out.coeffs = Matrix(0, x_new.cols());
    QRPair qr = kind == Orthogonalization::stabilized
                    ? stabilized_qr(x_new, factor, detail::spectral_norm_of_block(x_new))
                    : qr_econ(x_new);
    out.Q = std::move(qr.Q);
    out.R = std::move(qr.R);
    return out;
  }
  out.coeffs = basis.transpose() * x_new;
  Matrix x = x_new;
  x.noalias() -= basis * out.coeffs;
  QRPair first = kind == Orthogonalization::stabilized
                     ? stabilized_qr(x, factor, detail::spectral_norm_of_block(x_new))
                     : qr_econ(x);
  Matrix y = std::move(first.Q);
  const Matrix second = basis.transpose() * y;
  y.noalias() -= basis * second;
  // y has near-unit columns; the threshold is relative to 1.
  QRPair last = kind == Orthogonalization::stabilized ? stabilized_qr(y, factor, 1.0) : qr_econ(y);
  out.Q = std::move(last.Q);
  out.R = last.R * first.R;
  return out;
}

/// List-of-blocks form; blocks are concatenated and treated as one basis.
inline BlockOrthResult block_orthogonalize(const Matrix& x_new, std::span<const Matrix> blocks,
                                           Orthogonalization kind = Orthogonalization::stabilized,
                                           std::optional<double> threshold_factor = std::nullopt) {
  Index total = 0;
  for (const Matrix& b : blocks) total += b.cols();
  Matrix basis(x_new.rows(), total);
  Index at = 0;
  for (const Matrix& b : blocks) {
    if (b.rows() != x_new.rows()) throw DimensionMismatch("block_orthogonalize: row count mismatch");
    basis.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  return block_orthogonalize(x_new, basis, kind, threshold_factor);
}

/// Upper-triangular C with C^T C = sym(S).
inline Matrix psd_factor(const Matrix& s) {
  if (s.rows() != s.cols()) throw std::invalid_argument("psd_factor requires a square matrix");
  if (s.rows() == 0) return Matrix(0, 0);
  const Matrix sym = 0.5 * (s + s.transpose());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() != Eigen::Success)
    throw FactorizationFailure("psd_factor: non-positive pivot");
  Matrix c = llt.matrixU();
  for (Index i = 0; i < c.rows(); ++i)
    if (!(c(i, i) > 0.0) || !std::isfinite(c(i, i)))
      throw FactorizationFailure("psd_factor: non-positive pivot");
  return c;
}

inline SVDResult svd_econ(const Matrix& m) {
  detail::RawSVD raw = detail::thin_svd(m);
  // Clip rounding-level disorder so the Spectrum invariant holds.
  for (Index i = 1; i < raw.S.size(); ++i) raw.S(i) = std::min(raw.S(i), raw.S(i - 1));
  return {std::move(raw.U), Spectrum(std::move(raw.S)), std::move(raw.V)};
}

/// Growable set of orthonormal columns stored contiguously.
class BlockBasis {
 public:
  BlockBasis() = default;
  BlockBasis(Index rows, Index capacity) : storage_(rows, std::max<Index>(capacity, 0)) {}

  Index rows() const noexcept { return storage_.rows(); }
  Index cols() const noexcept { return used_; }
  const std::vector<Index>& widths() const noexcept { return widths_; }

  auto view() const { return storage_.leftCols(used_); }
  Matrix matrix() const { return storage_.leftCols(used_); }
  auto block(std::size_t i) const {
    Index start = 0;
    for (std::size_t j = 0; j < i; ++j) start += widths_[j];
    return storage_.middleCols(start, widths_[i]);
  }

  void append(const Matrix& q) {
    if (q.rows() != storage_.rows()) throw DimensionMismatch("BlockBasis::append: row mismatch");
    if (used_ + q.cols() > storage_.cols()) {
      const Index grow = std::max(used_ + q.cols(), 2 * storage_.cols());
      storage_.conservativeResize(Eigen::NoChange, grow);
    }
    storage_.middleCols(used_, q.cols()) = q;
    used_ += q.cols();
    widths_.push_back(q.cols());
  }

 private:
  Matrix storage_;
  Index used_ = 0;
  std::vector<Index> widths_;
};

}  // namespace sketchpack
