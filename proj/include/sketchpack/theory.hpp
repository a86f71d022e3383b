#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "sketchpack/errors.hpp"
#include "sketchpack/linop.hpp"
#include "sketchpack/spectrum.hpp"

namespace sketchpack {

// ---------------------------------------------------------------------------
// Chebyshev polynomials of the first kind on x >= 0.

/// T_q(x) = cos(q acos x) on [0, 1], cosh(q acosh x) for x >= 1.
/// Overflows to +inf for very large q acosh(x); use log_chebyshev there.
inline double chebyshev(int q, double x) {
  if (q < 0) throw std::invalid_argument("chebyshev: q must be nonnegative");
  if (!(x >= 0.0)) throw std::invalid_argument("chebyshev: x must be nonnegative");
  if (q == 0) return 1.0;
  if (q == 1) return x;
  if (x <= 1.0) return std::cos(q * std::acos(x));
  return std::cosh(q * std::acosh(x));
}

/// log T_q(x) for x >= 1, finite whenever q acosh(x) is.
inline double log_chebyshev(int q, double x) {
  if (q < 0) throw std::invalid_argument("log_chebyshev: q must be nonnegative");
  if (!(x >= 1.0)) throw std::invalid_argument("log_chebyshev: x must be at least 1");
  const double y = q * std::acosh(x);
  // log cosh y = y + log1p(exp(-2y)) - log 2
  return y + std::log1p(std::exp(-2.0 * y)) - std::numbers::ln2;
}

/// Exact functional inverse on [1, inf): cosh(acosh(x) / q).
inline double chebyshev_inverse(int q, double x) {
  if (q < 1) throw std::invalid_argument("chebyshev_inverse: q must be at least 1");
  if (!(x >= 1.0)) throw std::invalid_argument("chebyshev_inverse: x must be at least 1");
  return std::cosh(std::acosh(x) / q);
}

/// exp(0.5 (log(2x) / q)^2), an upper bound for chebyshev_inverse(q, x).
inline double chebyshev_inv_bound(int q, double x) {
  if (q < 1) throw std::invalid_argument("chebyshev_inv_bound: q must be at least 1");
  if (!(x >= 1.0)) throw std::invalid_argument("chebyshev_inv_bound: x must be at least 1");
  const double a = std::log(2.0 * x) / q;
  return std::exp(0.5 * a * a);
}

/// log of 0.5 exp(2 q sqrt(gamma)), the lower bound for T_q((1+gamma)/(1-gamma)).
inline double log_chebyshev_gap_lower_bound(int q, double gamma) {
  return 2.0 * q * std::sqrt(gamma) - std::numbers::ln2;
}

/// phi(x) = x T_q(x^power)^2 with power in {1/2, 1/4}.
inline double chebyshev_phi(int q, double power, double x) {
  const double t = chebyshev(q, std::pow(x, power));
  return x * t * t;
}

/// Central-difference derivative of chebyshev_phi with one Richardson step,
/// h = 1e-5 max(1, x).
inline double chebyshev_phi_derivative(int q, double power, double x) {
  const double h = 1e-5 * std::max(1.0, x);
  auto central = [&](double step) {
    return (chebyshev_phi(q, power, x + step) - chebyshev_phi(q, power, x - step)) / (2.0 * step);
  };
  const double coarse = central(h);
  const double fine = central(0.5 * h);
  return (4.0 * fine - coarse) / 3.0;
}

/// phi(y) - [phi(x) + phi'(x) (y - x)]; nonnegative when the tangent at x
/// supports phi at y.
inline double supporting_line_gap(int q, double power, double x, double y) {
  const double fx = chebyshev_phi(q, power, x);
  const double slope = chebyshev_phi_derivative(q, power, x);
  return chebyshev_phi(q, power, y) - (fx + slope * (y - x));
}

// ---------------------------------------------------------------------------
// Parallel sums.

/// a:b = ab / (a + b), with 0:0 = 0.
inline double parallel_sum(double a, double b) {
  if (!(a >= 0.0) || !(b >= 0.0)) throw std::invalid_argument("parallel_sum: inputs must be >= 0");
  if (a + b == 0.0) return 0.0;
  return a * b / (a + b);
}

namespace detail {

inline void require_psd_within(const Matrix& m, const char* name) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string("parallel_sum: ") + name + " is not square");
  const Matrix sym = 0.5 * (m + m.transpose());
  if ((m - sym).norm() > 1e-10 * std::max(1.0, m.norm()))
    throw std::invalid_argument(std::string("parallel_sum: ") + name + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  if (m.rows() > 0 && es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
    throw std::invalid_argument(std::string("parallel_sum: ") + name + " is not psd");
}

/// F with F F^T = sym(M); negative eigenvalues are clamped to zero.
inline Matrix psd_root_factor(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace detail

/// A:B = A - A (A + B)^+ A for psd A, B. With A = F F^T, B = G G^T and the
/// thin SVD [F G] = U S [V_F; V_G]^T, A:B = U S (V_F^T V_F)(V_G^T V_G) S U^T,
/// which is free of the cancellation in the defining formula. Singular values
/// at or below n eps s_1 are treated as zero; the result is symmetrized.
inline Matrix parallel_sum(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("parallel_sum: shape mismatch");
  detail::require_psd_within(a, "A");
  detail::require_psd_within(b, "B");
  const Index n = a.rows();
  if (n == 0) return a;
  Matrix h(n, 2 * n);
  h << detail::psd_root_factor(a), detail::psd_root_factor(b);
  Eigen::BDCSVD<Matrix> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double cut = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * sv(0);
  Index keep = 0;
  while (keep < sv.size() && sv(keep) > cut) ++keep;
  const Matrix us = svd.matrixU().leftCols(keep) * sv.head(keep).asDiagonal();
  const Matrix vf = svd.matrixV().topRows(n).leftCols(keep);
  const Matrix vg = svd.matrixV().bottomRows(n).leftCols(keep);
  const Matrix p = vf.transpose() * vf;
  const Matrix q = vg.transpose() * vg;
  const Matrix mid = 0.5 * (p * q + q * p);
  const Matrix out = us * mid * us.transpose();
  return 0.5 * (out + out.transpose());
}

// ---------------------------------------------------------------------------
// Bound evaluators. Every tail is an exact sum over the given spectrum.

enum class BoundMethod { rsvd, rsi, rbki, nyssvd, nyssi, nysbki };

/// expectation: mean Schatten-p bound (k >= r + 2)
/// tail:        high-probability Schatten-p bound with parameters u, t (k >= r)
/// frobenius:   mean Frobenius (trace for Nystrom) bound with cases k = r, r + 1, >= r + 2
/// spectral:    mean spectral-norm bound (k >= r + 2)
/// schatten4:   root fourth Schatten-4 moment (Frobenius second moment for Nystrom), k >= r + 4
/// spectral4:   root fourth spectral moment (second for Nystrom), k >= r + 4
enum class BoundVariant { expectation, tail, frobenius, spectral, schatten4, spectral4 };

/// What BoundReport::value measures.
///   mean_squared_error  bound on E||A - Ahat||^2 in the stated norm (or a root higher moment at that scale)
///   squared_error       bound holding with the reported failure probability
///   mean_error          Nystrom analogue on the first-power scale
///   error               Nystrom high-probability analogue
///   log_error_ratio     bound on log(E||A - Ahat||^2 / sigma_{r+1}^2)
enum class BoundQuantity { mean_squared_error, squared_error, mean_error, error, log_error_ratio };

inline const char* to_string(BoundMethod m) {
  switch (m) {
    case BoundMethod::rsvd: return "rsvd";
    case BoundMethod::rsi: return "rsi";
    case BoundMethod::rbki: return "rbki";
    case BoundMethod::nyssvd: return "nyssvd";
    case BoundMethod::nyssi: return "nyssi";
    case BoundMethod::nysbki: return "nysbki";
  }
  return "unknown";
}

inline BoundMethod bound_method_from_string(std::string_view s) {
  if (s == "rsvd") return BoundMethod::rsvd;
  if (s == "rsi") return BoundMethod::rsi;
  if (s == "rbki") return BoundMethod::rbki;
  if (s == "nyssvd") return BoundMethod::nyssvd;
  if (s == "nyssi") return BoundMethod::nyssi;
  if (s == "nysbki") return BoundMethod::nysbki;
  throw std::invalid_argument("unknown method: " + std::string(s));
}

inline const char* to_string(BoundVariant v) {
  switch (v) {
    case BoundVariant::expectation: return "expectation";
    case BoundVariant::tail: return "tail";
    case BoundVariant::frobenius: return "frobenius";
    case BoundVariant::spectral: return "spectral";
    case BoundVariant::schatten4: return "schatten4";
    case BoundVariant::spectral4: return "spectral4";
  }
  return "unknown";
}

inline BoundVariant bound_variant_from_string(std::string_view s) {
  if (s == "expectation") return BoundVariant::expectation;
  if (s == "tail") return BoundVariant::tail;
  if (s == "frobenius") return BoundVariant::frobenius;
  if (s == "spectral") return BoundVariant::spectral;
  if (s == "schatten4") return BoundVariant::schatten4;
  if (s == "spectral4") return BoundVariant::spectral4;
  throw std::invalid_argument("unknown bound variant: " + std::string(s));
}

inline const char* to_string(BoundQuantity q) {
  switch (q) {
    case BoundQuantity::mean_squared_error: return "mean_squared_error";
    case BoundQuantity::squared_error: return "squared_error";
    case BoundQuantity::mean_error: return "mean_error";
    case BoundQuantity::error: return "error";
    case BoundQuantity::log_error_ratio: return "log_error_ratio";
  }
  return "unknown";
}

inline BoundQuantity bound_quantity_from_string(std::string_view s) {
  if (s == "mean_squared_error") return BoundQuantity::mean_squared_error;
  if (s == "squared_error") return BoundQuantity::squared_error;
  if (s == "mean_error") return BoundQuantity::mean_error;
  if (s == "error") return BoundQuantity::error;
  if (s == "log_error_ratio") return BoundQuantity::log_error_ratio;
  throw std::invalid_argument("unknown bound quantity: " + std::string(s));
}

inline bool is_nystrom(BoundMethod m) {
  return m == BoundMethod::nyssvd || m == BoundMethod::nyssi || m == BoundMethod::nysbki;
}

/// r, s, k are counts; m counts multiplications; p is a Schatten index in
/// [1, inf]; u, t parameterize the tail variant.
struct BoundQuery {
  Spectrum spectrum;
  int k = 0;
  int r = 0;
  int m = 0;
  int s = 0;
  double p = std::numeric_limits<double>::infinity();
  BoundMethod method = BoundMethod::rsvd;
  BoundVariant variant = BoundVariant::expectation;
  double u = 0.0;
  double t = 0.0;
};

/// value >= 0 except for log_error_ratio, which may be any real >= 0.
/// relative: value / sigma_{r+1}^2 on the squared scale, value / sigma_{r+1}
/// on the Nystrom first-power scale, exp(value) for log_error_ratio.
struct BoundReport {
  double value = 0.0;
  double relative = 0.0;
  BoundQuantity quantity = BoundQuantity::mean_squared_error;
  std::optional<double> failure_probability;
  std::optional<double> gap;
  BoundQuery query;
  std::map<std::string, double> tail_sums;
};

namespace detail {

inline void check_common(const BoundQuery& q, const char* who) {
  const auto n = q.spectrum.size();
  if (q.r < 1) throw BoundInapplicable(std::string(who) + ": r must be at least 1");
  if (q.r >= n) throw BoundInapplicable(std::string(who) + ": r must be below the spectrum length");
  if (!(q.p >= 1.0)) throw BoundInapplicable(std::string(who) + ": Schatten index must be >= 1");
}

inline double scaled(double value, double sigma, double power) {
  const double ref = std::pow(sigma, power);
  if (ref > 0.0) return value / ref;
  return value == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

/// log(sum_{i>r} sigma_i^2 / sigma_{r+1}^2) by log-sum-exp.
inline double log_tail_ratio(const Spectrum& spec, int r) {
  const double top = spec[r];
  double acc = 0.0;
  for (Index i = r; i < spec.size(); ++i) {
    const double ratio = spec[i] / top;
    acc += ratio * ratio;
  }
  // Every ratio is <= 1, so the plain sum cannot overflow; acc >= 1.
  return std::log(acc);
}

/// log(exp(a) + exp(b)).
inline double log_add_exp(double a, double b) {
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

inline double rmt_failure_probability(int r, int k, double u, double t) {
  return std::exp(-(u - 2.0) / 4.0) +
         std::sqrt(std::numbers::pi * r) * std::pow(t / std::numbers::e, -(k - r + 1) / 2.0);
}

// Shared core for the RSVD and NysSVD families. `power` is the exponent
// applied to Schatten norms of the tail: 2 for RSVD, 1 for NysSVD; `cross`
// is the tail norm (Frobenius for RSVD, trace for NysSVD) raised to `power`.
inline BoundReport sketch_bound(const BoundQuery& q, bool nystrom) {
  const char* who = nystrom ? "nyssvd_bound" : "rsvd_bound";
  check_common(q, who);
  if (!nystrom && q.p < 2.0) throw BoundInapplicable(std::string(who) + ": requires p >= 2");
  const Spectrum& sp = q.spectrum;
  const int r = q.r;
  const int k = q.k;
  const double power = nystrom ? 1.0 : 2.0;
  const double sigma = sp[r];
  const double cross = nystrom ? sp.tail_norm(r, 1.0) : std::pow(sp.tail_norm(r, 2.0), 2);
  const double head = nystrom ? (sp.norm(1.0) - cross) : (std::pow(sp.norm(2.0), 2) - cross);

  BoundReport out;
  out.query = q;
  out.tail_sums["tail_cross"] = cross;
  out.tail_sums["head_cross"] = head;
  out.tail_sums["sigma_r_plus_1"] = sigma;

  const BoundQuantity mean_q = nystrom ? BoundQuantity::mean_error : BoundQuantity::mean_squared_error;
  auto need = [&](int min_k) {
    if (k < r + min_k)
      throw BoundInapplicable(std::string(who) + ": k = " + std::to_string(k) + " below r + " +
                              std::to_string(min_k) + " for variant " + to_string(q.variant));
  };

  switch (q.variant) {
    case BoundVariant::expectation: {
      need(2);
      const double opt = std::pow(sp.tail_norm(r, q.p), power);
      out.tail_sums["optimal"] = opt;
      out.value = opt + static_cast<double>(r) / (k - r - 1) * cross;
      out.quantity = mean_q;
      break;
    }
    case BoundVariant::tail: {
      need(0);
      if (!(q.u >= 0.0) || !(q.t >= 0.0))
        throw BoundInapplicable(std::string(who) + ": u and t must be nonnegative");
      const double opt = std::pow(sp.tail_norm(r, q.p), power);
      out.tail_sums["optimal"] = opt;
      out.value = opt + q.u * q.t * r / (k - r + 1) * cross;
      out.quantity = nystrom ? BoundQuantity::error : BoundQuantity::squared_error;
      out.failure_probability = rmt_failure_probability(r, k, q.u, q.t);
      break;
    }
    case BoundVariant::frobenius: {
      need(0);
      double ratio = 0.0;
      if (cross == 0.0) {
        ratio = 1.0;
      } else if (k >= r + 2) {
        ratio = 1.0 + static_cast<double>(r) / (k - r - 1);
      } else if (k == r + 1) {
        ratio = 1.0 + r * std::log1p(head / cross);
      } else {
        ratio = 1.0 + r * std::sqrt(std::numbers::pi * head / (2.0 * cross));
      }
      out.tail_sums["ratio"] = ratio;
      out.value = ratio * cross;
      out.quantity = mean_q;
      break;
    }
    case BoundVariant::spectral: {
      need(2);
      const double sig = std::pow(sigma, power);
      out.value = (1.0 + 2.0 * r / (k - r - 1)) * (sig + std::numbers::e * std::numbers::e / (k - r) * cross);
      out.quantity = mean_q;
      break;
    }
    case BoundVariant::schatten4: {
      need(4);
      // RSVD: ||tail||_4^2; NysSVD: ||tail||_F.
      const double base = nystrom ? sp.tail_norm(r, 2.0) : std::pow(sp.tail_norm(r, 4.0), 2);
      out.value = (1.0 + static_cast<double>(r + 1) / (k - r - 3)) * (base + cross / std::sqrt(k - r));
      out.quantity = mean_q;
      break;
    }
    case BoundVariant::spectral4: {
      need(4);
      const double sig = std::pow(sigma, power);
      out.value = (1.0 + 2.0 * (r + 1) / (k - r - 3)) *
                  (sig + std::sqrt(3.0) * std::numbers::e * std::numbers::e / (k - r) * cross);
      out.quantity = mean_q;
      break;
    }
  }
  out.relative = scaled(out.value, sigma, power);
  return out;
}

}  // namespace detail

/// Bounds for RSVD with k Gaussian test vectors. Schatten p >= 2.
inline BoundReport rsvd_bound(const BoundQuery& q) {
  if (q.method != BoundMethod::rsvd) throw BoundInapplicable("rsvd_bound: method must be rsvd");
  return detail::sketch_bound(q, false);
}

/// Bounds for NysSVD on a psd matrix: first-power errors, trace-norm tails.
inline BoundReport nyssvd_bound(const BoundQuery& q) {
  if (q.method != BoundMethod::nyssvd) throw BoundInapplicable("nyssvd_bound: method must be nyssvd");
  return detail::sketch_bound(q, true);
}

/// Sum of sigma_i^2 / sigma_{r+1}^2 over i > r enters every gapless bound.
/// Returns log(E||A - Ahat||^2 / sigma_{r+1}^2) bounds.
///   rsi     log(1 + c T) / (m - 1)                   m >= 2
///   rbki    [log(4 + 4 c T)]^2 / (4 (m - 2)^2)       m >= 3
///   nyssi   log(1 + c T) / (m - 1/2)                 m >= 1
///   nysbki  [log(4 + 4 c T)]^2 / (8 (m - 3/2)^2)     m >= 2
/// with c = r / (k - r - 1).
inline BoundReport gapless_bound(const BoundQuery& q) {
  detail::check_common(q, "gapless_bound");
  const int r = q.r;
  const int k = q.k;
  if (k < r + 2) throw BoundInapplicable("gapless_bound: requires k >= r + 2");
  if (!(q.spectrum[r] > 0.0)) throw BoundInapplicable("gapless_bound: requires sigma_{r+1} > 0");
  const double log_t = detail::log_tail_ratio(q.spectrum, r);
  const double log_c = std::log(static_cast<double>(r) / (k - r - 1));
  const double log1_ct = detail::log_add_exp(0.0, log_c + log_t);
  const double m = q.m;

  BoundReport out;
  out.query = q;
  out.quantity = BoundQuantity::log_error_ratio;
  out.tail_sums["log_tail_ratio"] = log_t;
  out.tail_sums["sigma_r_plus_1"] = q.spectrum[r];
  switch (q.method) {
    case BoundMethod::rsi:
      if (q.m < 2) throw BoundInapplicable("gapless_bound: rsi requires m >= 2");
      out.value = log1_ct / (m - 1.0);
      break;
    case BoundMethod::rbki: {
      if (q.m < 3) throw BoundInapplicable("gapless_bound: rbki requires m >= 3");
      const double l = std::log(4.0) + log1_ct;
      out.value = l * l / (4.0 * (m - 2.0) * (m - 2.0));
      break;
    }
    case BoundMethod::nyssi:
      if (q.m < 1) throw BoundInapplicable("gapless_bound: nyssi requires m >= 1");
      out.value = log1_ct / (m - 0.5);
      break;
    case BoundMethod::nysbki: {
      if (q.m < 2) throw BoundInapplicable("gapless_bound: nysbki requires m >= 2");
      const double l = std::log(4.0) + log1_ct;
      out.value = l * l / (8.0 * (m - 1.5) * (m - 1.5));
      break;
    }
    default:
      throw BoundInapplicable("gapless_bound: method must be rsi, rbki, nyssi or nysbki");
  }
  out.relative = std::exp(out.value);
  return out;
}

/// gamma = (sigma_r - sigma_s) / (sigma_r + sigma_s), 1-based r < s.
inline double singular_value_gap(const Spectrum& spec, int r, int s) {
  if (r < 1 || s <= r || s > spec.size()) throw BoundInapplicable("gap requires 1 <= r < s <= n");
  const double a = spec[r - 1];
  const double b = spec[s - 1];
  if (a + b == 0.0) return 0.0;
  return (a - b) / (a + b);
}

/// Squared Schatten-p error bound
///   ||A - [A]_r||_p^2 + pref (s - 1)/(k - s) ||A - [A]_{s-1}||_F^2
/// with pref = e^{-4(m-2)g} (rsi), 4 e^{-4(m-2) sqrt g} (rbki),
/// e^{-4(m-3/2)g} (nyssi), 4 e^{-4(m-3/2) sqrt(2g)} (nysbki).
/// Requires k >= s + 1 and m >= 2.
inline BoundReport gapped_bound(const BoundQuery& q) {
  detail::check_common(q, "gapped_bound");
  const int r = q.r;
  const int s = q.s;
  const int k = q.k;
  if (s <= r || s > q.spectrum.size()) throw BoundInapplicable("gapped_bound: requires r < s <= n");
  if (k < s + 1) throw BoundInapplicable("gapped_bound: requires k >= s + 1");
  if (q.m < 2) throw BoundInapplicable("gapped_bound: requires m >= 2");
  const double g = singular_value_gap(q.spectrum, r, s);
  const double m = q.m;
  double pref = 0.0;
  switch (q.method) {
    case BoundMethod::rsi:
      if (q.p < 2.0) throw BoundInapplicable("gapped_bound: rsi requires p >= 2");
      pref = std::exp(-4.0 * (m - 2.0) * g);
      break;
    case BoundMethod::rbki:
      if (q.p < 2.0) throw BoundInapplicable("gapped_bound: rbki requires p >= 2");
      pref = 4.0 * std::exp(-4.0 * (m - 2.0) * std::sqrt(g));
      break;
    case BoundMethod::nyssi:
      pref = std::exp(-4.0 * (m - 1.5) * g);
      break;
    case BoundMethod::nysbki:
      pref = 4.0 * std::exp(-4.0 * (m - 1.5) * std::sqrt(2.0 * g));
      break;
    default:
      throw BoundInapplicable("gapped_bound: method must be rsi, rbki, nyssi or nysbki");
  }
  const double opt = std::pow(q.spectrum.tail_norm(r, q.p), 2);
  const double tail_f = std::pow(q.spectrum.tail_norm(s - 1, 2.0), 2);
  BoundReport out;
  out.query = q;
  out.quantity = BoundQuantity::mean_squared_error;
  out.gap = g;
  out.tail_sums["optimal"] = opt;
  out.tail_sums["tail_frobenius_sq_s_minus_1"] = tail_f;
  out.tail_sums["prefactor"] = pref;
  out.tail_sums["sigma_r_plus_1"] = q.spectrum[r];
  out.value = opt + pref * static_cast<double>(s - 1) / (k - s) * tail_f;
  out.relative = detail::scaled(out.value, q.spectrum[r], 2.0);
  return out;
}

/// Tightest gapped bound over s in {r+1, ..., min(k-1, r+span, n)}.
inline BoundReport gapped_bound_scan(BoundQuery q, int span = 25) {
  const int hi = std::min<int>({q.k - 1, q.r + span, static_cast<int>(q.spectrum.size())});
  std::optional<BoundReport> best;
  for (int s = q.r + 1; s <= hi; ++s) {
    q.s = s;
    BoundReport rep = gapped_bound(q);
    if (!best || rep.value < best->value) best = std::move(rep);
  }
  if (!best) throw BoundInapplicable("gapped_bound_scan: no admissible s");
  return *best;
}

/// Dispatch on method and variant: SVD families use their own evaluators;
/// iterative methods use gapped_bound when s > 0, gapless_bound otherwise.
inline BoundReport evaluate_bound(const BoundQuery& q) {
  switch (q.method) {
    case BoundMethod::rsvd: return rsvd_bound(q);
    case BoundMethod::nyssvd: return nyssvd_bound(q);
    default: return q.s > 0 ? gapped_bound(q) : gapless_bound(q);
  }
}

}  // namespace sketchpack
