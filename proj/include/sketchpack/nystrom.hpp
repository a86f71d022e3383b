#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sketchpack/approx.hpp"
#include "sketchpack/factor.hpp"
#include "sketchpack/krylov.hpp"
#include "sketchpack/linop.hpp"
#include "sketchpack/rng.hpp"

namespace sketchpack {

/// Ahat = U diag(L) U^T, psd.
struct EigApprox {
  Matrix U;
  Spectrum L;
  double shift_used = 0.0;
  LedgerCounts matvecs;
  int multiplications = 0;
  std::vector<Index> block_widths;

  Index rank() const noexcept { return L.size(); }
};

struct NystromOptions {
  Orthogonalization orthogonalization = Orthogonalization::stabilized;
  std::optional<double> threshold_factor;
  /// Fixed shift; unset selects eps_mach * tr(A).
  std::optional<double> shift;
  int max_shift_retries = 5;
  /// Girard-Hutchinson probes used when tr(A) is not known exactly.
  int trace_probes = 10;
  /// Cap for tolerance-based rules; 0 selects the method default.
  int max_multiplications = 0;
  std::function<void(const EigApprox&)> observer;
};

namespace detail {

inline double estimate_trace(const LinearOperator& op, int probes, RngState& rng) {
  if (op.traits().trace) return *op.traits().trace;
  if (probes < 1) throw std::invalid_argument("trace estimation needs at least one probe");
  const Matrix z = gaussian_matrix(rng, op.cols(), probes);
  const Matrix az = op.apply(z);
  return (z.cwiseProduct(az)).sum() / static_cast<double>(probes);
}

// Draws the shift-estimation probes from a stream split off rng, so the test
// matrix drawn from rng itself does not depend on whether probes were needed.
inline double resolve_shift(const LinearOperator& op, const NystromOptions& opts,
                            const RngState& rng) {
  if (opts.shift) {
    if (*opts.shift < 0) throw std::invalid_argument("Nystrom shift must be nonnegative");
    return *opts.shift;
  }
  RngState probe_rng = rng.split(0x7472616365ULL);
  const double trace = estimate_trace(op, opts.trace_probes, probe_rng);
  return kEpsMach * std::max(trace, 0.0);
}

inline double next_shift(double shift, const Matrix& gram) {
  if (shift > 0) return 2.0 * shift;
  const double scale = std::max(std::abs(gram.trace()), std::numeric_limits<double>::min());
  return kEpsMach * scale;
}

struct NystromCore {
  Matrix U;
  Vector lambda;
  double shift = 0.0;
};

// Given M and Y_shift = (A + shift I) M, returns the eigenpairs of
// Y C^{-1} C^{-T} Y^T - shift I (clamped at 0), C = chol(M^T Y). On failure the
// shift is doubled and Y_shift updated without new products.
inline NystromCore nystrom_from_products(const Matrix& m, Matrix y_shift, double shift,
                                         int retries) {
  for (int attempt = 0;; ++attempt) {
    const Matrix gram = m.transpose() * y_shift;
    try {
      const Matrix c = psd_factor(gram);
      const Matrix z = c.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(y_shift);
      RawSVD svd = thin_svd(z);
      NystromCore out;
      out.U = std::move(svd.U);
      out.lambda = (svd.S.array().square() - shift).cwiseMax(0.0).matrix();
      out.shift = shift;
      return out;
    } catch (const FactorizationFailure&) {
      if (attempt >= retries)
        throw NystromUnstable("Nystrom core stayed indefinite after " + std::to_string(retries) +
                              " shift retries");
      const double bigger = next_shift(shift, gram);
      y_shift += (bigger - shift) * m;
      shift = bigger;
    }
  }
}

inline EigApprox to_eig(NystromCore core) {
  EigApprox out;
  for (Index i = 1; i < core.lambda.size(); ++i)
    core.lambda(i) = std::min(core.lambda(i), core.lambda(i - 1));
  out.U = std::move(core.U);
  out.L = Spectrum(std::move(core.lambda));
  out.shift_used = core.shift;
  return out;
}

}  // namespace detail

/// A<M> = (AM)(M^T A M)^+ (AM)^T evaluated with a stabilizing shift.
inline EigApprox nystrom_compress(const LinearOperator& op, const Matrix& m, double shift,
                                  int max_shift_retries = 5) {
  require_psd(op, "nystrom_compress");
  if (m.rows() != op.cols()) throw DimensionMismatch("nystrom_compress: M has wrong row count");
  if (shift < 0) throw std::invalid_argument("nystrom_compress: shift must be nonnegative");
  const LedgerCounts start = op.ledger();
  Matrix y = op.apply(m);
  if (shift != 0.0) y += shift * m;
  EigApprox out = detail::to_eig(detail::nystrom_from_products(m, std::move(y), shift,
                                                               max_shift_retries));
  out.matvecs = op.ledger() - start;
  out.multiplications = 1;
  out.block_widths = {m.cols()};
  return out;
}

inline EigApprox nyssvd(const LinearOperator& op, const Matrix& omega, double shift,
                        int max_shift_retries = 5) {
  return nystrom_compress(op, omega, shift, max_shift_retries);
}

inline EigApprox nyssvd(const LinearOperator& op, Index k, RngState& rng,
                        const NystromOptions& opts = {}) {
  require_psd(op, "nyssvd");
  if (k < 1 || k > op.rows()) throw std::invalid_argument("nyssvd: k must be in [1, n]");
  const LedgerCounts start = op.ledger();
  const RngState base = rng;
  const Matrix omega = gaussian_matrix(rng, op.cols(), k);
  const double shift = detail::resolve_shift(op, opts, base);
  EigApprox out = nystrom_compress(op, omega, shift, opts.max_shift_retries);
  out.matvecs = op.ledger() - start;
  return out;
}

namespace detail {

inline double nystrom_trace_target(const TraceTolerance& rule, const LinearOperator& op) {
  if (rule.trace_A) return *rule.trace_A;
  if (op.traits().trace) return *op.traits().trace;
  throw std::invalid_argument("trace stopping needs tr(A); supply it in the rule");
}

inline void check_nystrom_rule(const StopRule& stop, const char* who) {
  validate(stop);
  if (std::holds_alternative<FroTolerance>(stop))
    throw std::invalid_argument(std::string(who) +
                                ": use trace stopping; the Frobenius identity needs a projection");
}

}  // namespace detail

inline EigApprox nysbki_adaptive(const LinearOperator& op, const Matrix& omega, int r, double eps,
                                 const NystromOptions& opts, const RngState& rng);

/// Power iteration X = orth(Y), Y = A X; Nystrom compression of the final pair.
inline EigApprox nyssi(const LinearOperator& op, const Matrix& omega, const StopRule& stop,
                       const NystromOptions& opts, const RngState& rng) {
  require_psd(op, "nyssi");
  if (omega.rows() != op.cols()) throw DimensionMismatch("nyssi: test matrix has wrong row count");
  detail::check_nystrom_rule(stop, "nyssi");
  if (std::holds_alternative<ResidualTolerance>(stop))
    throw std::invalid_argument("nyssi does not support residual stopping");
  const LedgerCounts start = op.ledger();
  const double shift = detail::resolve_shift(op, opts, rng);
  const auto fixed = std::get_if<FixedMultiplications>(&stop);
  const auto tr = std::get_if<TraceTolerance>(&stop);
  const double trace_A = tr ? detail::nystrom_trace_target(*tr, op) : 0.0;
  const int cap = opts.max_multiplications > 0 ? opts.max_multiplications : 200;

  Matrix y = omega;
  Matrix x;
  int m = 0;
  std::vector<Index> widths;
  auto current = [&]() {
    EigApprox a = detail::to_eig(
        detail::nystrom_from_products(x, y + shift * x, shift, opts.max_shift_retries));
    a.matvecs = op.ledger() - start;
    a.multiplications = m;
    a.block_widths = widths;
    return a;
  };
  while (true) {
    x = orthonormalize(y, opts.orthogonalization, opts.threshold_factor).Q;
    y = op.apply(x);
    ++m;
    widths.push_back(x.cols());
    const bool want_approx = opts.observer || tr;
    if (want_approx) {
      EigApprox a = current();
      if (opts.observer) opts.observer(a);
      if (tr && trace_A - a.L.vector().sum() < tr->eps * trace_A) return a;
      if (tr && m >= cap)
        throw TerminationCapReached<EigApprox>("nyssi: multiplication cap reached", a);
    }
    if (fixed && m >= fixed->m) break;
    if (x.cols() == 0) break;
  }
  return current();
}

inline EigApprox nyssi(const LinearOperator& op, Index k, const StopRule& stop, RngState& rng,
                       const NystromOptions& opts = {}) {
  if (k < 1) throw std::invalid_argument("nyssi: k must be at least 1");
  const RngState base = rng;
  const Matrix omega = gaussian_matrix(rng, op.cols(), k);
  return nyssi(op, omega, stop, opts, base);
}

/// Nystrom approximation on span[Omega, A Omega, ..., A^{m-1} Omega]. Every
/// product output joins the basis after two passes of orthogonalization.
inline EigApprox nysbki(const LinearOperator& op, const Matrix& omega, const StopRule& stop,
                        const NystromOptions& opts, const RngState& rng) {
  require_psd(op, "nysbki");
  if (omega.rows() != op.cols()) throw DimensionMismatch("nysbki: test matrix has wrong row count");
  detail::check_nystrom_rule(stop, "nysbki");
  if (const auto* res = std::get_if<ResidualTolerance>(&stop))
    return nysbki_adaptive(op, omega, res->r, res->eps, opts, rng);
  const LedgerCounts start = op.ledger();
  double shift = detail::resolve_shift(op, opts, rng);
  const auto fixed = std::get_if<FixedMultiplications>(&stop);
  const auto tr = std::get_if<TraceTolerance>(&stop);
  const double trace_A = tr ? detail::nystrom_trace_target(*tr, op) : 0.0;
  const Index k = omega.cols();
  const int cap = detail::krylov_cap(op, k, opts.max_multiplications);
  const Index capacity = k * ((fixed ? fixed->m : cap) + 1);

  BlockBasis x_basis(op.rows(), capacity);
  BlockBasis y_shifted(op.rows(), capacity);  // (A + shift I) X_j
  Matrix y = omega;
  int m = 0;
  auto current = [&]() {
    detail::NystromCore core = detail::nystrom_from_products(
        x_basis.matrix(), y_shifted.matrix(), shift, opts.max_shift_retries);
    EigApprox a = detail::to_eig(std::move(core));
    a.matvecs = op.ledger() - start;
    a.multiplications = m;
    a.block_widths = x_basis.widths();
    return a;
  };
  while (true) {
    BlockOrthResult b =
        block_orthogonalize(y, x_basis.view(), opts.orthogonalization, opts.threshold_factor);
    if (b.Q.cols() == 0) break;
    x_basis.append(b.Q);
    y = op.apply(b.Q);
    ++m;
    y_shifted.append(y + shift * b.Q);
    if (opts.observer || tr) {
      EigApprox a = current();
      if (opts.observer) opts.observer(a);
      if (tr && trace_A - a.L.vector().sum() < tr->eps * trace_A) return a;
      if (tr && m >= cap)
        throw TerminationCapReached<EigApprox>("nysbki: multiplication cap reached", a);
    }
    if (fixed && m >= fixed->m) break;
  }
  return current();
}

inline EigApprox nysbki(const LinearOperator& op, Index k, const StopRule& stop, RngState& rng,
                        const NystromOptions& opts = {}) {
  if (k < 1) throw std::invalid_argument("nysbki: k must be at least 1");
  const RngState base = rng;
  const Matrix omega = gaussian_matrix(rng, op.cols(), k);
  return nysbki(op, omega, stop, opts, base);
}

/// Nystrom block Krylov iteration with residual tracking. Invariant:
/// (A + shift I)[X_0 ... X_{i-1}] = [X_0 ... X_i] S_i. After step i the
/// tracked columns are A u_j - lambda_j u_j = (A - Ahat) u_j, and the triplet
/// residual is sqrt(2) times their norm; the run stops when that is <= eps for
/// the first r pairs. One product per step plus one to start.
inline EigApprox nysbki_adaptive(const LinearOperator& op, const Matrix& omega, int r, double eps,
                                 const NystromOptions& opts, const RngState& rng) {
  require_psd(op, "nysbki_adaptive");
  if (omega.rows() != op.cols())
    throw DimensionMismatch("nysbki_adaptive: test matrix has wrong row count");
  if (r < 1) throw std::invalid_argument("nysbki_adaptive: r must be at least 1");
  if (!(eps > 0)) throw std::invalid_argument("nysbki_adaptive: eps must be positive");
  const LedgerCounts start = op.ledger();
  double shift = detail::resolve_shift(op, opts, rng);
  const Index k = omega.cols();
  const int cap = detail::krylov_cap(op, k, opts.max_multiplications);
  const Index capacity = k * (cap + 2);
  const auto kind = opts.orthogonalization;
  const auto tf = opts.threshold_factor;

  BlockBasis x_basis(op.rows(), capacity);
  BlockBasis products(op.rows(), capacity);  // A X_j, unshifted
  x_basis.append(orthonormalize(omega, kind, tf).Q);
  Matrix y_next = op.apply(x_basis.matrix());
  products.append(y_next);
  Matrix last_x = x_basis.matrix();
  Matrix s_core(x_basis.cols(), 0);

  int i = 0;
  EigApprox current;
  std::vector<double> residuals;
  bool saturated = last_x.cols() == 0;
  auto certified = [&]() {
    if (static_cast<Index>(residuals.size()) < r) return false;
    for (int j = 0; j < r; ++j)
      if (residuals[static_cast<std::size_t>(j)] > eps) return false;
    return true;
  };

  while (!saturated) {
    if (i >= cap) {
      current.matvecs = op.ledger() - start;
      throw TerminationCapReached<EigApprox>("nysbki_adaptive: multiplication cap reached",
                                             current, residuals);
    }
    ++i;
    const Matrix x_raw = y_next + shift * last_x;
    const Index old_cols = x_basis.cols();
    BlockOrthResult b = block_orthogonalize(x_raw, x_basis.view(), kind, tf);
    s_core = detail::grow_core(s_core, b.coeffs, b.R);
    x_basis.append(b.Q);
    saturated = b.Q.cols() == 0;

    // Square core X^T (A + shift I) X over the first i blocks, then Nystrom.
    Matrix c;
    for (int attempt = 0;; ++attempt) {
      Matrix gram = s_core.topRows(old_cols);
      try {
        c = psd_factor(gram);
        break;
      } catch (const FactorizationFailure&) {
        if (attempt >= opts.max_shift_retries)
          throw NystromUnstable("nysbki_adaptive: core stayed indefinite after shift retries");
        const double bigger = detail::next_shift(shift, gram);
        s_core.topRows(old_cols).diagonal().array() += bigger - shift;
        shift = bigger;
      }
    }
    const Matrix z = c.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(s_core);
    detail::RawSVD svd = detail::thin_svd(z);
    Vector lambda = (svd.S.array().square() - shift).cwiseMax(0.0).matrix();
    for (Index j = 1; j < lambda.size(); ++j) lambda(j) = std::min(lambda(j), lambda(j - 1));

    current = EigApprox{};
    current.U = x_basis.matrix() * svd.U;
    current.shift_used = shift;

    last_x = b.Q;
    if (!saturated) {
      y_next = op.apply(last_x);
      products.append(y_next);
    }
    const Matrix e = products.matrix().leftCols(x_basis.cols()) * svd.U -
                     current.U * lambda.asDiagonal();
    residuals.assign(static_cast<std::size_t>(e.cols()), 0.0);
    for (Index j = 0; j < e.cols(); ++j)
      residuals[static_cast<std::size_t>(j)] = std::sqrt(2.0) * e.col(j).norm();
    current.L = Spectrum(std::move(lambda));
    current.multiplications = i;
    current.block_widths = x_basis.widths();
    current.matvecs = op.ledger() - start;
    if (certified()) return current;
  }
  throw TerminationCapReached<EigApprox>(
      "nysbki_adaptive: Krylov space saturated before the residual target", current, residuals);
}

inline EigApprox nysbki_adaptive(const LinearOperator& op, Index k, int r, double eps,
                                 RngState& rng, const NystromOptions& opts = {}) {
  if (k < 1) throw std::invalid_argument("nysbki_adaptive: k must be at least 1");
  const RngState base = rng;
  const Matrix omega = gaussian_matrix(rng, op.cols(), k);
  return nysbki_adaptive(op, omega, r, eps, opts, base);
}

}  // namespace sketchpack
