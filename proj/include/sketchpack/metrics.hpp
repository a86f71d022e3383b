#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "sketchpack/approx.hpp"
#include "sketchpack/factor.hpp"
#include "sketchpack/linop.hpp"
#include "sketchpack/nystrom.hpp"

namespace sketchpack {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ErrorReport {
  double spectral = 0.0;
  double frobenius = 0.0;
  /// Schatten-1 (nuclear) norm of the residual.
  double trace = 0.0;
  /// spectral / sigma_{r+1}.
  double relative_to_sigma = 0.0;
  LedgerCounts matvecs;
};

inline Matrix to_dense(const SVDApprox& a) { return a.U * a.S.vector().asDiagonal() * a.V.transpose(); }
inline Matrix to_dense(const EigApprox& a) { return a.U * a.L.vector().asDiagonal() * a.U.transpose(); }

/// All singular values of a dense matrix, nonincreasing.
inline Vector singular_values(const Matrix& m) {
  if (m.size() == 0) return Vector(0);
  Vector s;
  if (detail::is_symmetric(m, 1e-14)) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    s = es.eigenvalues().cwiseAbs();
  } else {
    Eigen::BDCSVD<Matrix> svd(m);
    s = svd.singularValues();
  }
  std::sort(s.data(), s.data() + s.size(), std::greater<double>());
  return s;
}

/// Schatten-p norm of a value vector; p = kInf gives the maximum.
inline double schatten_norm(const Vector& values, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("Schatten index must be >= 1");
  if (values.size() == 0) return 0.0;
  const double top = values.cwiseAbs().maxCoeff();
  if (std::isinf(p) || top == 0.0) return top;
  if (p == 1.0) return values.cwiseAbs().sum();
  if (p == 2.0) return values.norm();
  return top * std::pow((values.cwiseAbs() / top).array().pow(p).sum(), 1.0 / p);
}

namespace detail {
inline void check_shape(const Matrix& a_ref, Index rows, Index cols) {
  if (a_ref.rows() != rows || a_ref.cols() != cols)
    throw DimensionMismatch("reference matrix and approximation have different shapes");
}
}  // namespace detail

inline double schatten_error(const Matrix& a_ref, const SVDApprox& a, double p) {
  detail::check_shape(a_ref, a.U.rows(), a.V.rows());
  return schatten_norm(singular_values(a_ref - to_dense(a)), p);
}

inline double schatten_error(const Matrix& a_ref, const EigApprox& a, double p) {
  detail::check_shape(a_ref, a.U.rows(), a.U.rows());
  return schatten_norm(singular_values(a_ref - to_dense(a)), p);
}

/// Dense evaluation of the three residual norms. sigma_ref is sigma_{r+1}(A).
template <class Approx>
ErrorReport error_report(const Matrix& a_ref, const Approx& a, double sigma_ref) {
  const Matrix dense = to_dense(a);
  detail::check_shape(a_ref, dense.rows(), dense.cols());
  const Vector s = singular_values(a_ref - dense);
  ErrorReport out;
  out.spectral = schatten_norm(s, kInf);
  out.frobenius = schatten_norm(s, 2.0);
  out.trace = schatten_norm(s, 1.0);
  if (sigma_ref > 0) out.relative_to_sigma = out.spectral / sigma_ref;
  else out.relative_to_sigma = out.spectral > 0 ? kInf : 0.0;
  out.matvecs = a.matvecs;
  return out;
}

/// Best rank-r error: Schatten-p norm of (sigma_{r+1}, sigma_{r+2}, ...).
inline double optimal_error(const Spectrum& spec, Index r, double p) {
  if (r < 0 || r >= spec.size()) throw std::invalid_argument("optimal_error requires r < length");
  return spec.tail_norm(r, p);
}

/// ||P_1 - P_2|| for the projectors onto the first r columns of two
/// orthonormal sets, computed as ||(I - Q_1 Q_1^T) Q_2||.
inline double subspace_error_vectors(const Matrix& vectors, const Matrix& reference, Index r) {
  if (r < 0 || vectors.cols() < r || reference.cols() < r)
    throw std::invalid_argument("subspace_error: fewer than r vectors");
  if (vectors.rows() != reference.rows()) throw DimensionMismatch("subspace_error: row mismatch");
  if (r == 0) return 0.0;
  const auto q1 = vectors.leftCols(r);
  const auto q2 = reference.leftCols(r);
  const Matrix d = q2 - q1 * (q1.transpose() * q2);
  return std::min(1.0, detail::spectral_norm_of_block(d));
}

inline double subspace_error(const SVDApprox& a, const Matrix& reference, Index r) {
  return subspace_error_vectors(a.V, reference, r);
}
inline double subspace_error(const EigApprox& a, const Matrix& reference, Index r) {
  return subspace_error_vectors(a.U, reference, r);
}

enum class ResidualForm { shortcut, full };

/// r_i = sqrt(||(A - Ahat)^T u_i||^2 + ||(A - Ahat) v_i||^2) from fresh
/// products. The shortcut form drops the term known to vanish for one-sided
/// projections.
inline std::vector<double> triplet_residuals(const LinearOperator& op, const SVDApprox& a, Index r,
                                             ResidualForm form = ResidualForm::shortcut) {
  if (r < 0 || r > a.rank()) throw std::invalid_argument("triplet_residuals: r exceeds rank");
  const auto u = a.U.leftCols(r);
  const auto v = a.V.leftCols(r);
  const Vector s = a.S.vector().head(r);
  const bool need_right = form == ResidualForm::full || a.side != ProjectionSide::right;
  const bool need_left = form == ResidualForm::full || a.side != ProjectionSide::left;
  std::vector<double> out(static_cast<std::size_t>(r), 0.0);
  if (need_right) {
    const Matrix e = op.apply(v) - u * s.asDiagonal();
    for (Index j = 0; j < r; ++j) out[static_cast<std::size_t>(j)] += e.col(j).squaredNorm();
  }
  if (need_left) {
    require_adjoint(op, "triplet_residuals");
    const Matrix e = op.apply_adjoint(u) - v * s.asDiagonal();
    for (Index j = 0; j < r; ++j) out[static_cast<std::size_t>(j)] += e.col(j).squaredNorm();
  }
  for (double& x : out) x = std::sqrt(x);
  return out;
}

/// Symmetric case: both halves equal ||A u_i - lambda_i u_i||.
inline std::vector<double> triplet_residuals(const LinearOperator& op, const EigApprox& a, Index r,
                                             ResidualForm form = ResidualForm::shortcut) {
  if (r < 0 || r > a.rank()) throw std::invalid_argument("triplet_residuals: r exceeds rank");
  const auto u = a.U.leftCols(r);
  const Vector l = a.L.vector().head(r);
  const Matrix e = op.apply(u) - u * l.asDiagonal();
  std::vector<double> out(static_cast<std::size_t>(r));
  for (Index j = 0; j < r; ++j) {
    double sq = 2.0 * e.col(j).squaredNorm();
    if (form == ResidualForm::full && op.has_adjoint()) {
      const Matrix et = op.apply_adjoint(u.col(j)) - l(j) * u.col(j);
      sq = e.col(j).squaredNorm() + et.squaredNorm();
    }
    out[static_cast<std::size_t>(j)] = std::sqrt(sq);
  }
  return out;
}

inline SVDApprox truncate(const SVDApprox& a, Index r) {
  if (r < 0 || r > a.rank()) throw std::invalid_argument("truncate: r exceeds rank");
  SVDApprox out = a;
  out.U = a.U.leftCols(r);
  out.V = a.V.leftCols(r);
  // Truncating Pi_U A (or A Pi_V) keeps it one-sided: U_r^T A = S_r V_r^T.
  out.S = Spectrum(Vector(a.S.vector().head(r)));
  return out;
}

inline EigApprox truncate(const EigApprox& a, Index r) {
  if (r < 0 || r > a.rank()) throw std::invalid_argument("truncate: r exceeds rank");
  EigApprox out = a;
  out.U = a.U.leftCols(r);
  out.L = Spectrum(Vector(a.L.vector().head(r)));
  return out;
}

struct NormEstimate {
  /// Ritz estimate of the norm (a lower bound).
  double value = 0.0;
  /// sqrt(theta + ||residual||): an upper bound on the eigenvalue theta tracks.
  double upper = 0.0;
  bool converged = false;
  Index basis_size = 0;
};

struct LanczosOptions {
  Index block = 4;
  Index max_basis = 800;
  /// Converged once the top Ritz residual is <= tol * theta.
  double tol = 1e-7;
  std::uint64_t seed = 0x6c616e637a6f73ULL;
};

/// Largest eigenvalue of a symmetric psd operator given by g, by block
/// Lanczos with full reorthogonalization and periodic Rayleigh-Ritz.
template <class ApplyG>
NormEstimate top_eigenvalue_psd(Index n, ApplyG&& g, const LanczosOptions& opts = {}) {
  NormEstimate out;
  if (n == 0) return out;
  RngState rng(opts.seed);
  const Index max_basis = std::min(opts.max_basis, n);
  const Index b = std::max<Index>(1, std::min(opts.block, n));
  BlockBasis basis(n, max_basis + b);
  BlockBasis images(n, max_basis + b);
  Matrix h(0, 0);
  Matrix q = stabilized_qr(gaussian_matrix(rng, n, b)).Q;
  double theta = 0.0;
  // Rayleigh-Ritz runs on a geometric schedule of basis sizes, so its cubic
  // cost stays within a constant factor of the final solve.
  Index next_check = b;
  // Updates the estimate from the current basis; returns the Ritz residual.
  auto ritz = [&]() {
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    const Index top = h.rows() - 1;
    theta = std::max(0.0, es.eigenvalues()(top));
    const Vector y = es.eigenvectors().col(top);
    const double res = (images.view() * y - theta * (basis.view() * y)).norm();
    out.value = std::sqrt(theta);
    out.upper = std::sqrt(theta + res);
    out.basis_size = basis.cols();
    return res;
  };
  while (q.cols() > 0) {
    const Matrix w = g(q);
    const Index old = basis.cols();
    const Index add = q.cols();
    // H_new = [[H, B^T W], [W^T B, Q^T W]] using B^T W computed once.
    const Matrix cross = old > 0 ? Matrix(basis.view().transpose() * w) : Matrix(0, add);
    Matrix grown(old + add, old + add);
    grown.topLeftCorner(old, old) = h;
    grown.topRightCorner(old, add) = cross;
    grown.bottomLeftCorner(add, old) = cross.transpose();
    const Matrix diag = q.transpose() * w;
    grown.bottomRightCorner(add, add) = 0.5 * (diag + diag.transpose());
    h = std::move(grown);
    basis.append(q);
    images.append(w);

    const bool full = basis.cols() >= max_basis;
    if (basis.cols() >= next_check || full) {
      if (ritz() <= opts.tol * theta || theta == 0.0) {
        out.converged = true;
        return out;
      }
      if (full) return out;
      next_check = std::max(basis.cols() + b, basis.cols() + basis.cols() / 5);
    }
    // Next block: images orthogonalized against the whole basis.
    BlockOrthResult nb = block_orthogonalize(w, basis.view(), Orthogonalization::stabilized);
    q = nb.Q.leftCols(std::min<Index>(nb.Q.cols(), max_basis - basis.cols()));
  }
  if (out.basis_size != basis.cols()) ritz();
  out.converged = true;  // invariant subspace: Ritz values are exact
  return out;
}

/// ||A - Ahat|| without forming the residual, via products with A and A^T.
inline NormEstimate residual_spectral_norm(const LinearOperator& op, const SVDApprox& a,
                                           const LanczosOptions& opts = {}) {
  require_adjoint(op, "residual_spectral_norm");
  const LinearOperator eval = op.with_fresh_ledger();
  const Vector s = a.S.vector();
  auto g = [&](const Matrix& x) {
    // (A - U S V^T)^T (A - U S V^T) x
    const Matrix rx = eval.apply(x) - a.U * (s.asDiagonal() * (a.V.transpose() * x));
    return Matrix(eval.apply_adjoint(rx) - a.V * (s.asDiagonal() * (a.U.transpose() * rx)));
  };
  return top_eigenvalue_psd(op.cols(), g, opts);
}

/// For psd A and a Nystrom approximation the residual is psd, so its largest
/// eigenvalue is its norm; no squaring is needed.
inline NormEstimate residual_spectral_norm(const LinearOperator& op, const EigApprox& a,
                                           const LanczosOptions& opts = {}) {
  const LinearOperator eval = op.with_fresh_ledger();
  const Vector l = a.L.vector();
  auto g = [&](const Matrix& x) {
    return Matrix(eval.apply(x) - a.U * (l.asDiagonal() * (a.U.transpose() * x)));
  };
  NormEstimate e = top_eigenvalue_psd(op.cols(), g, opts);
  // top_eigenvalue_psd reports square roots; undo for this unsquared operator.
  e.value = e.value * e.value;
  e.upper = e.upper * e.upper;
  return e;
}

struct SeedStats {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t count = 0;
  std::vector<std::uint64_t> seeds;
};

inline SeedStats aggregate(const std::vector<double>& values,
                           std::vector<std::uint64_t> seeds = {}) {
  SeedStats out;
  out.count = values.size();
  out.seeds = std::move(seeds);
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    const double var = ss / static_cast<double>(values.size() - 1);
    out.standard_error = std::sqrt(var / static_cast<double>(values.size()));
  }
  return out;
}

}  // namespace sketchpack
