#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "sketchpack/linop.hpp"
#include "sketchpack/rng.hpp"

namespace sketchpack {

/// Monte Carlo targets for Gaussian moment identities and tail bounds.
///   inverse_trace          E tr (G G^T)^{-1} = r / (k - r - 1),     G r x k, r <= k - 2
///   inverse_trace_tail     P{tr (G G^T)^{-1} > e t r/(k-r+1)} <= sqrt(pi r/(k-r+1)) t^{-(k-r+1)/2}
///   frobenius_product      E ||S G T||_F^2 = ||S||_F^2 ||T||_F^2
///   schatten4_product      E ||S G T||_4^4 = ||S||_4^4 ||T||_F^4 + ||T||_4^4 ||S||_F^4 + ||S||_4^4 ||T||_4^4
///   spectral_product       (E ||S G T||^2)^{1/2} <= ||S|| ||T||_F + ||T|| ||S||_F
///   gaussian_product_mean  E ||S G H^+||_F^2 = r/(k - r - 1) ||S||_F^2,  G (rows S) x k, H r x k
///   gaussian_product_tail  P{||S G H^+||_F^2 > u t r/(k-r+1) ||S||_F^2}
///                            <= e^{-(u-2)/4} + sqrt(pi r) (t/e)^{-(k-r+1)/2}
enum class RmtTarget {
  inverse_trace,
  inverse_trace_tail,
  frobenius_product,
  schatten4_product,
  spectral_product,
  gaussian_product_mean,
  gaussian_product_tail
};

inline const char* to_string(RmtTarget t) {
  switch (t) {
    case RmtTarget::inverse_trace: return "inverse_trace";
    case RmtTarget::inverse_trace_tail: return "inverse_trace_tail";
    case RmtTarget::frobenius_product: return "frobenius_product";
    case RmtTarget::schatten4_product: return "schatten4_product";
    case RmtTarget::spectral_product: return "spectral_product";
    case RmtTarget::gaussian_product_mean: return "gaussian_product_mean";
    case RmtTarget::gaussian_product_tail: return "gaussian_product_tail";
  }
  return "unknown";
}

inline RmtTarget rmt_target_from_string(std::string_view s) {
  if (s == "inverse_trace") return RmtTarget::inverse_trace;
  if (s == "inverse_trace_tail") return RmtTarget::inverse_trace_tail;
  if (s == "frobenius_product") return RmtTarget::frobenius_product;
  if (s == "schatten4_product") return RmtTarget::schatten4_product;
  if (s == "spectral_product") return RmtTarget::spectral_product;
  if (s == "gaussian_product_mean") return RmtTarget::gaussian_product_mean;
  if (s == "gaussian_product_tail") return RmtTarget::gaussian_product_tail;
  throw std::invalid_argument("unknown RMT target: " + std::string(s));
}

inline bool is_equality(RmtTarget t) {
  return t == RmtTarget::inverse_trace || t == RmtTarget::frobenius_product ||
         t == RmtTarget::schatten4_product || t == RmtTarget::gaussian_product_mean;
}

/// r, k size the Gaussian factors; S, T are the fixed matrices of the
/// product targets; u, t parameterize the tail targets.
struct RmtParams {
  int r = 1;
  int k = 2;
  Matrix S;
  Matrix T;
  double u = 8.0;
  double t = std::numbers::e;
};

struct RmtReport {
  RmtTarget target = RmtTarget::inverse_trace;
  bool equality = true;
  double estimate = 0.0;
  double exact_or_bound = 0.0;
  double standard_error = 0.0;
  long trials = 0;
  bool pass = false;
};

namespace detail {

inline double schatten4_pow4(const Matrix& m) {
  const Matrix gram = m.transpose() * m;
  return gram.squaredNorm();
}

inline double spectral_norm_dense(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

inline double inverse_gram_trace(const Matrix& g) {
  const Matrix gram = g * g.transpose();
  Eigen::LLT<Matrix> llt(gram);
  return llt.solve(Matrix::Identity(gram.rows(), gram.cols())).trace();
}

inline void check_rmt(RmtTarget target, const RmtParams& p, long trials) {
  if (trials < 100) throw std::invalid_argument("mc_verify_rmt: trials must be at least 100");
  auto need_st = [&]() {
    if (p.S.size() == 0 || p.T.size() == 0)
      throw std::invalid_argument("mc_verify_rmt: S and T must be nonempty");
    if (p.S.cols() <= 0 || p.T.rows() <= 0)
      throw std::invalid_argument("mc_verify_rmt: S and T must be nonempty");
  };
  switch (target) {
    case RmtTarget::inverse_trace:
      if (p.r < 1 || p.r > p.k - 2) throw std::invalid_argument("inverse_trace requires 1 <= r <= k - 2");
      break;
    case RmtTarget::inverse_trace_tail:
      if (p.r < 1 || p.r > p.k) throw std::invalid_argument("inverse_trace_tail requires 1 <= r <= k");
      if (!(p.t > 0)) throw std::invalid_argument("inverse_trace_tail requires t > 0");
      break;
    case RmtTarget::frobenius_product:
    case RmtTarget::schatten4_product:
    case RmtTarget::spectral_product:
      need_st();
      break;
    case RmtTarget::gaussian_product_mean:
      if (p.S.size() == 0) throw std::invalid_argument("gaussian_product_mean requires S");
      if (p.r < 1 || p.r > p.k - 2) throw std::invalid_argument("gaussian_product_mean requires 1 <= r <= k - 2");
      break;
    case RmtTarget::gaussian_product_tail:
      if (p.S.size() == 0) throw std::invalid_argument("gaussian_product_tail requires S");
      if (p.r < 1 || p.r > p.k) throw std::invalid_argument("gaussian_product_tail requires 1 <= r <= k");
      if (!(p.u >= 0) || !(p.t > 0)) throw std::invalid_argument("gaussian_product_tail requires u >= 0, t > 0");
      break;
  }
}

// One sample of the target's random variable.
inline double rmt_sample(RmtTarget target, const RmtParams& p, RngState& rng) {
  switch (target) {
    case RmtTarget::inverse_trace:
      return inverse_gram_trace(gaussian_matrix(rng, p.r, p.k));
    case RmtTarget::inverse_trace_tail: {
      const double level = std::numbers::e * p.t * p.r / (p.k - p.r + 1);
      return inverse_gram_trace(gaussian_matrix(rng, p.r, p.k)) > level ? 1.0 : 0.0;
    }
    case RmtTarget::frobenius_product: {
      const Matrix g = gaussian_matrix(rng, p.S.cols(), p.T.rows());
      return (p.S * g * p.T).squaredNorm();
    }
    case RmtTarget::schatten4_product: {
      const Matrix g = gaussian_matrix(rng, p.S.cols(), p.T.rows());
      return schatten4_pow4(p.S * g * p.T);
    }
    case RmtTarget::spectral_product: {
      const Matrix g = gaussian_matrix(rng, p.S.cols(), p.T.rows());
      const double s = spectral_norm_dense(p.S * g * p.T);
      return s * s;
    }
    case RmtTarget::gaussian_product_mean:
    case RmtTarget::gaussian_product_tail: {
      const Matrix g = gaussian_matrix(rng, p.S.cols(), p.k);
      const Matrix h = gaussian_matrix(rng, p.r, p.k);
      // H^+ = H^T (H H^T)^{-1} for full row rank H.
      const Matrix hht = h * h.transpose();
      const Matrix pinv = h.transpose() * Eigen::LLT<Matrix>(hht).solve(Matrix::Identity(p.r, p.r));
      const double v = (p.S * g * pinv).squaredNorm();
      if (target == RmtTarget::gaussian_product_mean) return v;
      const double level = p.u * p.t * p.r / (p.k - p.r + 1) * p.S.squaredNorm();
      return v > level ? 1.0 : 0.0;
    }
  }
  return 0.0;
}

inline double rmt_reference(RmtTarget target, const RmtParams& p) {
  const double r = p.r;
  const double k = p.k;
  switch (target) {
    case RmtTarget::inverse_trace: return r / (k - r - 1.0);
    case RmtTarget::inverse_trace_tail:
      return std::sqrt(std::numbers::pi * r / (k - r + 1.0)) * std::pow(p.t, -(k - r + 1.0) / 2.0);
    case RmtTarget::frobenius_product: return p.S.squaredNorm() * p.T.squaredNorm();
    case RmtTarget::schatten4_product: {
      const double s4 = schatten4_pow4(p.S);
      const double t4 = schatten4_pow4(p.T);
      const double sf = p.S.squaredNorm();
      const double tf = p.T.squaredNorm();
      return s4 * tf * tf + t4 * sf * sf + s4 * t4;
    }
    case RmtTarget::spectral_product:
      return spectral_norm_dense(p.S) * p.T.norm() + spectral_norm_dense(p.T) * p.S.norm();
    case RmtTarget::gaussian_product_mean: return r / (k - r - 1.0) * p.S.squaredNorm();
    case RmtTarget::gaussian_product_tail:
      return std::exp(-(p.u - 2.0) / 4.0) +
             std::sqrt(std::numbers::pi * r) * std::pow(p.t / std::numbers::e, -(k - r + 1.0) / 2.0);
  }
  return 0.0;
}

}  // namespace detail

/// Trial i draws from rng.split(i), so results do not depend on `threads`.
/// Equalities pass iff |estimate - exact| <= 3 SE; inequalities pass iff
/// estimate <= bound. spectral_product reports the root mean square and its
/// delta-method standard error.
inline RmtReport mc_verify_rmt(RmtTarget target, const RmtParams& params, long trials,
                               const RngState& rng, unsigned threads = 1) {
  detail::check_rmt(target, params, trials);
  std::vector<double> samples(static_cast<std::size_t>(trials));
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(trials)));
  auto run = [&](unsigned w) {
    for (long i = w; i < trials; i += workers) {
      RngState local = rng.split(static_cast<std::uint64_t>(i));
      samples[static_cast<std::size_t>(i)] = detail::rmt_sample(target, params, local);
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& th : pool) th.join();
  }
  // Fixed summation order keeps the result independent of the thread count.
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(trials);
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= static_cast<double>(trials - 1);
  double se = std::sqrt(var / static_cast<double>(trials));

  RmtReport out;
  out.target = target;
  out.equality = is_equality(target);
  out.trials = trials;
  out.exact_or_bound = detail::rmt_reference(target, params);
  if (target == RmtTarget::spectral_product) {
    const double root = std::sqrt(mean);
    se = root > 0.0 ? se / (2.0 * root) : 0.0;
    mean = root;
  }
  out.estimate = mean;
  out.standard_error = se;
  out.pass = out.equality ? std::abs(mean - out.exact_or_bound) <= 3.0 * se
                          : mean <= out.exact_or_bound;
  return out;
}

}  // namespace sketchpack
