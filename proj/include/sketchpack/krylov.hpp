#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sketchpack/approx.hpp"
#include "sketchpack/factor.hpp"
#include "sketchpack/linop.hpp"

namespace sketchpack {

/// Odd blocks X_1, X_3, ... span the left space; even blocks Y_2, Y_4, ...
/// the right space. core_R = Y_even^T A^T X_odd and core_S = X_odd^T A Y_even,
/// each block upper triangular, for the blocks absorbed so far.
struct KrylovBasis {
  BlockBasis odd;
  BlockBasis even;
  Matrix core_R;
  Matrix core_S;
};

namespace detail {

inline int krylov_cap(const LinearOperator& op, Index k, int requested) {
  if (requested > 0) return requested;
  const Index limit = std::min(op.rows(), op.cols()) + 2 * k;
  return static_cast<int>(std::max<Index>(2, limit / std::max<Index>(k, 1)));
}

// [[top, new_cols], [0, new_rows]]: append a column block of first-pass
// coefficients and the diagonal factor of the new basis block.
inline Matrix grow_core(const Matrix& core, const Matrix& coeffs, const Matrix& diag_block) {
  const Index old_rows = core.rows();
  const Index old_cols = core.cols();
  const Index add_cols = coeffs.cols();
  const Index add_rows = diag_block.rows();
  Matrix out = Matrix::Zero(old_rows + add_rows, old_cols + add_cols);
  out.topLeftCorner(old_rows, old_cols) = core;
  if (old_rows > 0) out.topRightCorner(old_rows, add_cols) = coeffs;
  if (add_rows > 0) out.bottomRightCorner(add_rows, add_cols) = diag_block;
  return out;
}

}  // namespace detail

/// Ahat = Pi_K A with K = span[X_1 ... X_q]; q products with A and q with A^T.
inline SVDApprox rbki_simple(const LinearOperator& op, const Matrix& omega, int q,
                             const RunOptions& opts = {}) {
  require_adjoint(op, "rbki_simple");
  detail::check_omega(op, omega, "rbki_simple");
  if (q < 1) throw std::invalid_argument("rbki_simple: q must be at least 1");
  const LedgerCounts start = op.ledger();
  const Index k = omega.cols();
  BlockBasis x_basis(op.rows(), k * q);
  BlockBasis y_products(op.cols(), k * q);  // [Y_1 ... Y_q], not orthonormal
  Matrix y = omega;
  int m = 0;
  for (int i = 0; i < q; ++i) {
    const Matrix raw = op.apply(y);
    ++m;
    BlockOrthResult b =
        block_orthogonalize(raw, x_basis.view(), opts.orthogonalization, opts.threshold_factor);
    if (b.Q.cols() == 0) break;
    x_basis.append(b.Q);
    y = op.apply_adjoint(b.Q);
    ++m;
    y_products.append(y);
  }
  // svd([Y_1 ... Y_q]^T) = Uhat S V^T
  SVDResult svd = svd_econ(y_products.matrix());
  SVDApprox out;
  out.U = x_basis.view() * svd.V;
  out.S = std::move(svd.S);
  out.V = std::move(svd.U);
  out.matvecs = op.ledger() - start;
  out.multiplications = m;
  out.side = ProjectionSide::left;
  out.block_widths = x_basis.widths();
  return out;
}

inline SVDApprox rbki_simple(const LinearOperator& op, Index k, int q, RngState& rng,
                             const RunOptions& opts = {}) {
  if (k < 1) throw std::invalid_argument("rbki_simple: k must be at least 1");
  return rbki_simple(op, gaussian_matrix(rng, op.cols(), k), q, opts);
}

inline SVDApprox rbki_adaptive(const LinearOperator& op, const Matrix& omega, int r, double eps,
                               const RunOptions& opts);

/// Block Krylov iteration stopping after any number of multiplications.
/// Even step i: Ahat = Pi_X A with core R^T. Odd step i >= 3: Ahat = A Pi_Y
/// with core S. Step 1 returns A Pi_Omega (Omega orthonormalized first).
inline SVDApprox rbki_extended(const LinearOperator& op, const Matrix& omega, const StopRule& stop,
                               const RunOptions& opts = {}) {
  require_adjoint(op, "rbki_extended");
  detail::check_omega(op, omega, "rbki_extended");
  validate(stop);
  if (const auto* res = std::get_if<ResidualTolerance>(&stop))
    return rbki_adaptive(op, omega, res->r, res->eps, opts);
  if (std::holds_alternative<TraceTolerance>(stop))
    throw std::invalid_argument("trace stopping applies to Nystrom methods only");

  const LedgerCounts start = op.ledger();
  const Index k = omega.cols();
  const int cap = detail::krylov_cap(op, k, opts.max_multiplications);
  const auto kind = opts.orthogonalization;
  const auto tf = opts.threshold_factor;
  const auto fixed = std::get_if<FixedMultiplications>(&stop);
  const auto fro = std::get_if<FroTolerance>(&stop);
  const double fro_sq = fro ? std::pow(detail::frobenius_of(*fro, op), 2) : 0.0;
  const Index capacity = k * ((fixed ? fixed->m : cap) / 2 + 2);

  KrylovBasis kb{BlockBasis(op.rows(), capacity), BlockBasis(op.cols(), capacity), Matrix(0, 0),
                 Matrix()};
  const Matrix y0 = orthonormalize(omega, kind, tf).Q;
  QRPair first = orthonormalize(op.apply(y0), kind, tf);
  kb.odd.append(first.Q);
  const Matrix first_core = first.R;  // X_1^T A Y_0
  kb.core_S = Matrix(kb.odd.cols(), 0);
  int m = 1;
  std::vector<Index> widths = {first.Q.cols()};
  Matrix last_odd = first.Q;
  Matrix last_even;
  bool saturated = first.Q.cols() == 0;

  auto current = [&]() {
    SVDApprox a;
    if (m == 1) {
      a = detail::assemble(kb.odd.matrix(), first_core, y0);
      a.side = ProjectionSide::right;
    } else if (m % 2 == 0) {
      a = detail::assemble(kb.odd.matrix(), kb.core_R.transpose(), kb.even.matrix());
      a.side = ProjectionSide::left;
    } else {
      a = detail::assemble(kb.odd.matrix(), kb.core_S, kb.even.matrix());
      a.side = ProjectionSide::right;
    }
    a.matvecs = op.ledger() - start;
    a.multiplications = m;
    a.block_widths = widths;
    return a;
  };
  auto core_norm_sq = [&]() {
    if (m == 1) return first_core.squaredNorm();
    return (m % 2 == 0) ? kb.core_R.squaredNorm() : kb.core_S.squaredNorm();
  };
  auto done = [&]() {
    if (fixed) return m >= fixed->m;
    return fro_sq - core_norm_sq() < fro->eps * fro->eps * fro_sq;
  };

  if (opts.observer) opts.observer(current());
  while (!saturated && !done()) {
    if (!fixed && m >= cap)
      throw TerminationCapReached<SVDApprox>("rbki_extended: multiplication cap reached",
                                             current());
    ++m;
    if (m % 2 == 0) {
      BlockOrthResult b = block_orthogonalize(op.apply_adjoint(last_odd), kb.even.view(), kind, tf);
      kb.core_R = detail::grow_core(kb.core_R, b.coeffs, b.R);
      kb.even.append(b.Q);
      widths.push_back(b.Q.cols());
      last_even = std::move(b.Q);
      saturated = last_even.cols() == 0;
    } else {
      BlockOrthResult b = block_orthogonalize(op.apply(last_even), kb.odd.view(), kind, tf);
      kb.core_S = detail::grow_core(kb.core_S, b.coeffs, b.R);
      kb.odd.append(b.Q);
      widths.push_back(b.Q.cols());
      last_odd = std::move(b.Q);
      saturated = last_odd.cols() == 0;
    }
    if (opts.observer) opts.observer(current());
  }
  return current();
}

inline SVDApprox rbki_extended(const LinearOperator& op, Index k, const StopRule& stop,
                               RngState& rng, const RunOptions& opts = {}) {
  if (k < 1) throw std::invalid_argument("rbki_extended: k must be at least 1");
  return rbki_extended(op, gaussian_matrix(rng, op.cols(), k), stop, opts);
}

/// Block Krylov iteration with residual tracking. After step i the tracked
/// residual columns are (A - Ahat) v_j (even i) or (A - Ahat)^T u_j (odd i);
/// the other half of the triplet residual vanishes for the one-sided
/// projection formed at that step. Stops when the first r columns all have
/// norm <= eps. Products: one with A and one with A^T to start, then one per
/// step.
inline SVDApprox rbki_adaptive(const LinearOperator& op, const Matrix& omega, int r, double eps,
                               const RunOptions& opts = {}) {
  require_adjoint(op, "rbki_adaptive");
  detail::check_omega(op, omega, "rbki_adaptive");
  if (r < 1) throw std::invalid_argument("rbki_adaptive: r must be at least 1");
  if (!(eps > 0)) throw std::invalid_argument("rbki_adaptive: eps must be positive");

  const LedgerCounts start = op.ledger();
  const Index k = omega.cols();
  const int cap = detail::krylov_cap(op, k, opts.max_multiplications);
  const auto kind = opts.orthogonalization;
  const auto tf = opts.threshold_factor;
  const Index capacity = k * (cap / 2 + 2);

  KrylovBasis kb{BlockBasis(op.rows(), capacity), BlockBasis(op.cols(), capacity), Matrix(0, 0),
                 Matrix()};
  BlockBasis w_products(op.cols(), capacity);  // A^T X_odd
  BlockBasis z_products(op.rows(), capacity);  // A Y_even

  QRPair first = orthonormalize(op.apply(omega), kind, tf);
  kb.odd.append(first.Q);
  kb.core_S = Matrix(kb.odd.cols(), 0);
  Matrix w_next = op.apply_adjoint(first.Q);
  w_products.append(w_next);
  Matrix z_next;
  std::vector<Index> widths = {first.Q.cols()};

  int i = 1;
  SVDApprox current;
  std::vector<double> residuals;
  auto form = [&](bool even_step, const Matrix& residual_basis_products) {
    const Matrix core = even_step ? Matrix(kb.core_R.transpose()) : kb.core_S;
    SVDResult svd = svd_econ(core);
    const Matrix X = kb.odd.matrix();
    const Matrix Y = kb.even.matrix();
    current = SVDApprox{};
    current.U = X * svd.U;
    current.V = Y * svd.V;
    current.S = svd.S;
    const Vector& sig = svd.S.vector();
    Matrix e;
    if (even_step) {
      e = residual_basis_products * svd.V - current.U * sig.asDiagonal();
    } else {
      e = residual_basis_products * svd.U - current.V * sig.asDiagonal();
    }
    residuals.assign(static_cast<std::size_t>(e.cols()), 0.0);
    for (Index j = 0; j < e.cols(); ++j) residuals[static_cast<std::size_t>(j)] = e.col(j).norm();
    current.side = even_step ? ProjectionSide::left : ProjectionSide::right;
    current.multiplications = i;
    current.block_widths = widths;
    current.matvecs = op.ledger() - start;
  };
  auto certified = [&]() {
    if (static_cast<Index>(residuals.size()) < r) return false;
    for (int j = 0; j < r; ++j)
      if (residuals[static_cast<std::size_t>(j)] > eps) return false;
    return true;
  };

  bool saturated = first.Q.cols() == 0;
  while (true) {
    if (i >= cap || saturated) {
      if (i > 1 && certified()) break;
      if (i == 1) current = detail::assemble(kb.odd.matrix(), Matrix::Zero(first.Q.cols(), 0),
                                             Matrix(op.cols(), 0));
      current.matvecs = op.ledger() - start;
      throw TerminationCapReached<SVDApprox>(
          saturated ? "rbki_adaptive: Krylov space saturated before the residual target"
                    : "rbki_adaptive: multiplication cap reached",
          current, residuals);
    }
    ++i;
    if (i % 2 == 0) {
      BlockOrthResult b = block_orthogonalize(w_next, kb.even.view(), kind, tf);
      kb.core_R = detail::grow_core(kb.core_R, b.coeffs, b.R);
      kb.even.append(b.Q);
      widths.push_back(b.Q.cols());
      saturated = b.Q.cols() == 0;
      z_next = op.apply(b.Q);
      z_products.append(z_next);
      form(true, z_products.matrix());
    } else {
      BlockOrthResult b = block_orthogonalize(z_next, kb.odd.view(), kind, tf);
      kb.core_S = detail::grow_core(kb.core_S, b.coeffs, b.R);
      kb.odd.append(b.Q);
      widths.push_back(b.Q.cols());
      saturated = b.Q.cols() == 0;
      w_next = op.apply_adjoint(b.Q);
      w_products.append(w_next);
      form(false, w_products.matrix());
    }
    if (certified()) break;
  }
  current.matvecs = op.ledger() - start;
  return current;
}

inline SVDApprox rbki_adaptive(const LinearOperator& op, Index k, int r, double eps, RngState& rng,
                               const RunOptions& opts = {}) {
  if (k < 1) throw std::invalid_argument("rbki_adaptive: k must be at least 1");
  return rbki_adaptive(op, gaussian_matrix(rng, op.cols(), k), r, eps, opts);
}

}  // namespace sketchpack
