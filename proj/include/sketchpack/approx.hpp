#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "sketchpack/factor.hpp"
#include "sketchpack/linop.hpp"
#include "sketchpack/rng.hpp"

namespace sketchpack {

struct FixedMultiplications {
  int m = 1;
};
/// Stop once ||A||_F^2 - ||Ahat||_F^2 < eps^2 ||A||_F^2.
struct FroTolerance {
  double eps = 0.0;
  std::optional<double> fro_norm_A;
};
/// Stop once tr(A) - tr(Ahat) < eps tr(A); Nystrom runs only.
struct TraceTolerance {
  double eps = 0.0;
  std::optional<double> trace_A;
};
/// Stop once the first r triplet residuals are <= eps; adaptive Krylov runs.
struct ResidualTolerance {
  int r = 1;
  double eps = 0.0;
};

using StopRule = std::variant<FixedMultiplications, FroTolerance, TraceTolerance, ResidualTolerance>;

inline void validate(const StopRule& rule) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FixedMultiplications>) {
          if (s.m < 1) throw std::invalid_argument("FixedMultiplications requires m >= 1");
        } else if constexpr (std::is_same_v<T, ResidualTolerance>) {
          if (s.r < 1) throw std::invalid_argument("ResidualTolerance requires r >= 1");
          if (!(s.eps > 0)) throw std::invalid_argument("ResidualTolerance requires eps > 0");
        } else {
          if (!(s.eps > 0)) throw std::invalid_argument("tolerance requires eps > 0");
        }
      },
      rule);
}

inline std::string describe(const StopRule& rule) {
  std::ostringstream out;
  out.precision(17);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FixedMultiplications>) out << "fixed:" << s.m;
        else if constexpr (std::is_same_v<T, FroTolerance>) out << "fro:" << s.eps;
        else if constexpr (std::is_same_v<T, TraceTolerance>) out << "trace:" << s.eps;
        else out << "residual:" << s.r << "," << s.eps;
      },
      rule);
  return out.str();
}

/// Which one-sided identity the approximation satisfies.
///   left:      Ahat = Pi_U A
///   right:     Ahat = A Pi_V
///   two_sided: neither is known to hold exactly
enum class ProjectionSide { left, right, two_sided };

/// Ahat = U diag(S) V^T with orthonormal U, V.
struct SVDApprox {
  Matrix U;
  Spectrum S;
  Matrix V;
  /// Products consumed by the run that produced this approximation.
  LedgerCounts matvecs;
  /// Multiplications with A or A^T, counting the first one.
  int multiplications = 0;
  ProjectionSide side = ProjectionSide::two_sided;
  /// Widths of the blocks that entered the bases, in the order they were built.
  std::vector<Index> block_widths;

  Index rank() const noexcept { return S.size(); }
};

struct RunOptions {
  Orthogonalization orthogonalization = Orthogonalization::stabilized;
  std::optional<double> threshold_factor;
  /// Cap for tolerance-based rules; 0 selects the method default.
  int max_multiplications = 0;
  /// Called with the current approximation after every multiplication.
  std::function<void(const SVDApprox&)> observer;
};

namespace detail {

inline SVDApprox assemble(const Matrix& left_basis, const Matrix& core,
                          const Matrix& right_basis) {
  SVDResult svd = svd_econ(core);
  SVDApprox out;
  out.U = left_basis * svd.U;
  out.V = right_basis * svd.V;
  out.S = std::move(svd.S);
  return out;
}

inline void check_rank(const LinearOperator& op, Index k, const char* who) {
  if (k < 1) throw std::invalid_argument(std::string(who) + ": k must be at least 1");
  if (k > std::min(op.rows(), op.cols()))
    throw std::invalid_argument(std::string(who) + ": k exceeds min(rows, cols)");
}

inline void check_omega(const LinearOperator& op, const Matrix& omega, const char* who) {
  if (omega.rows() != op.cols())
    throw DimensionMismatch(std::string(who) + ": test matrix has wrong row count");
  if (omega.cols() < 1) throw std::invalid_argument(std::string(who) + ": empty test matrix");
}

inline double frobenius_of(const FroTolerance& rule, const LinearOperator& op) {
  if (rule.fro_norm_A) return *rule.fro_norm_A;
  if (op.traits().frobenius_norm) return *op.traits().frobenius_norm;
  throw std::invalid_argument("Frobenius stopping needs ||A||_F; supply it in the rule");
}

}  // namespace detail

/// Pi_{A Omega} A from a given test matrix Omega.
inline SVDApprox rsvd(const LinearOperator& op, const Matrix& omega, const RunOptions& opts = {}) {
  require_adjoint(op, "rsvd");
  detail::check_omega(op, omega, "rsvd");
  const LedgerCounts start = op.ledger();
  QRPair x = orthonormalize(op.apply(omega), opts.orthogonalization, opts.threshold_factor);
  const Matrix y = op.apply_adjoint(x.Q);
  // svd(Y^T) = Uhat S V^T  <=>  svd(Y) = V S Uhat^T
  SVDResult svd = svd_econ(y);
  SVDApprox out;
  out.U = x.Q * svd.V;
  out.S = std::move(svd.S);
  out.V = std::move(svd.U);
  out.matvecs = op.ledger() - start;
  out.multiplications = 2;
  out.side = ProjectionSide::left;
  out.block_widths = {x.Q.cols()};
  return out;
}

inline SVDApprox rsvd(const LinearOperator& op, Index k, RngState& rng, const RunOptions& opts = {}) {
  detail::check_rank(op, k, "rsvd");
  return rsvd(op, gaussian_matrix(rng, op.cols(), k), opts);
}

/// q rounds of X = orth(A Y), Y = A^T X starting from Y = Omega.
inline SVDApprox rsi_simple(const LinearOperator& op, const Matrix& omega, int q,
                            const RunOptions& opts = {}) {
  require_adjoint(op, "rsi_simple");
  detail::check_omega(op, omega, "rsi_simple");
  if (q < 1) throw std::invalid_argument("rsi_simple: q must be at least 1");
  const LedgerCounts start = op.ledger();
  Matrix y = omega;
  Matrix x;
  for (int i = 0; i < q; ++i) {
    x = orthonormalize(op.apply(y), opts.orthogonalization, opts.threshold_factor).Q;
    y = op.apply_adjoint(x);
  }
  SVDResult svd = svd_econ(y);
  SVDApprox out;
  out.U = x * svd.V;
  out.S = std::move(svd.S);
  out.V = std::move(svd.U);
  out.matvecs = op.ledger() - start;
  out.multiplications = 2 * q;
  out.side = ProjectionSide::left;
  out.block_widths = {x.cols()};
  return out;
}

inline SVDApprox rsi_simple(const LinearOperator& op, Index k, int q, RngState& rng,
                            const RunOptions& opts = {}) {
  if (k < 1) throw std::invalid_argument("rsi_simple: k must be at least 1");
  return rsi_simple(op, gaussian_matrix(rng, op.cols(), k), q, opts);
}

/// Alternating subspace iteration that stops after any number of
/// multiplications. The start block is orthonormalized first so the m = 1
/// approximation A Pi_Omega is defined; this leaves the spaces of later steps
/// unchanged. Invariant per step: Ahat = X T Y^T with T = S (odd step, from
/// X S = A Y) or T = R^T (even step, from Y R = A^T X).
inline SVDApprox rsi_extended(const LinearOperator& op, const Matrix& omega, const StopRule& stop,
                              const RunOptions& opts = {}) {
  require_adjoint(op, "rsi_extended");
  detail::check_omega(op, omega, "rsi_extended");
  validate(stop);
  if (std::holds_alternative<ResidualTolerance>(stop))
    throw std::invalid_argument("rsi_extended does not support residual stopping");
  if (std::holds_alternative<TraceTolerance>(stop))
    throw std::invalid_argument("trace stopping applies to Nystrom methods only");

  const LedgerCounts start = op.ledger();
  const int cap = opts.max_multiplications > 0 ? opts.max_multiplications : 200;
  const auto kind = opts.orthogonalization;

  Matrix y = orthonormalize(omega, kind, opts.threshold_factor).Q;
  QRPair first = orthonormalize(op.apply(y), kind, opts.threshold_factor);
  Matrix x = std::move(first.Q);
  Matrix core = std::move(first.R);  // cols(x) x cols(y)
  int m = 1;
  std::vector<Index> widths = {x.cols()};

  const auto fixed = std::get_if<FixedMultiplications>(&stop);
  const auto fro = std::get_if<FroTolerance>(&stop);
  const double fro_sq = fro ? std::pow(detail::frobenius_of(*fro, op), 2) : 0.0;

  auto current = [&]() {
    SVDApprox a = detail::assemble(x, core, y);
    a.matvecs = op.ledger() - start;
    a.multiplications = m;
    a.side = (m % 2 == 1) ? ProjectionSide::right : ProjectionSide::left;
    a.block_widths = widths;
    return a;
  };
  auto done = [&]() {
    if (fixed) return m >= fixed->m;
    return fro_sq - core.squaredNorm() < fro->eps * fro->eps * fro_sq;
  };

  if (opts.observer) opts.observer(current());
  while (!done()) {
    if (!fixed && m >= cap)
      throw TerminationCapReached<SVDApprox>("rsi_extended: multiplication cap reached", current());
    ++m;
    if (m % 2 == 0) {
      QRPair r = orthonormalize(op.apply_adjoint(x), kind, opts.threshold_factor);
      y = std::move(r.Q);
      core = r.R.transpose();
      widths.push_back(y.cols());
    } else {
      QRPair s = orthonormalize(op.apply(y), kind, opts.threshold_factor);
      x = std::move(s.Q);
      core = std::move(s.R);
      widths.push_back(x.cols());
    }
    if (opts.observer) opts.observer(current());
    if (core.size() == 0) break;
  }
  return current();
}

inline SVDApprox rsi_extended(const LinearOperator& op, Index k, const StopRule& stop,
                              RngState& rng, const RunOptions& opts = {}) {
  if (k < 1) throw std::invalid_argument("rsi_extended: k must be at least 1");
  return rsi_extended(op, gaussian_matrix(rng, op.cols(), k), stop, opts);
}

}  // namespace sketchpack
