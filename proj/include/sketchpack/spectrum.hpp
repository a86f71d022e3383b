#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace sketchpack {

/// Nonincreasing, nonnegative, finite values.
class Spectrum {
 public:
  Spectrum() = default;

  explicit Spectrum(Eigen::VectorXd values) : values_(std::move(values)) {
    validate();
  }

  explicit Spectrum(const std::vector<double>& values)
      : values_(Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                  static_cast<Eigen::Index>(values.size()))) {
    validate();
  }

  Eigen::Index size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.size() == 0; }
  /// 0-based access: (*this)[0] is sigma_1.
  double operator[](Eigen::Index i) const { return values_(i); }
  const Eigen::VectorXd& vector() const noexcept { return values_; }
  std::vector<double> to_std() const {
    return std::vector<double>(values_.data(), values_.data() + values_.size());
  }

  /// sum_{i > r} sigma_i^power (1-based i).
  double tail_power_sum(Eigen::Index r, double power) const {
    double total = 0.0;
    for (Eigen::Index i = r; i < values_.size(); ++i)
      total += std::pow(values_(i), power);
    return total;
  }

  /// Schatten-p norm of the values beyond the first r (p may be infinity).
  double tail_norm(Eigen::Index r, double p) const {
    if (r >= values_.size()) return 0.0;
    if (std::isinf(p)) return values_(r);
    if (p == 2.0) return std::sqrt(values_.tail(values_.size() - r).squaredNorm());
    if (p == 1.0) return values_.tail(values_.size() - r).sum();
    // Scale by the largest term so high powers stay in range.
    const double top = values_(r);
    if (top == 0.0) return 0.0;
    double total = 0.0;
    for (Eigen::Index i = r; i < values_.size(); ++i)
      total += std::pow(values_(i) / top, p);
    return top * std::pow(total, 1.0 / p);
  }

  double norm(double p) const { return tail_norm(0, p); }

 private:
  void validate() const {
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
      const double v = values_(i);
      if (!std::isfinite(v) || v < 0.0)
        throw std::invalid_argument("spectrum values must be finite and nonnegative");
      if (i > 0 && v > values_(i - 1))
        throw std::invalid_argument("spectrum values must be nonincreasing (index " +
                                    std::to_string(i) + ")");
    }
  }

  Eigen::VectorXd values_;
};

enum class SpectrumKind { exp_step, exp25, noisy_slow, flat, custom };

struct SpectrumParams {
  double flat_value = 1.0;
  std::vector<double> custom;
};

inline const char* to_string(SpectrumKind kind) {
  switch (kind) {
    case SpectrumKind::exp_step: return "exp_step";
    case SpectrumKind::exp25: return "exp25";
    case SpectrumKind::noisy_slow: return "noisy_slow";
    case SpectrumKind::flat: return "flat";
    case SpectrumKind::custom: return "custom";
  }
  return "unknown";
}

inline SpectrumKind spectrum_kind_from_string(std::string_view name) {
  if (name == "exp_step") return SpectrumKind::exp_step;
  if (name == "exp25") return SpectrumKind::exp25;
  if (name == "noisy_slow") return SpectrumKind::noisy_slow;
  if (name == "flat") return SpectrumKind::flat;
  if (name == "custom") return SpectrumKind::custom;
  throw std::invalid_argument("unknown spectrum kind: " + std::string(name));
}

/// Formulas use 1-based i:
///   exp_step    sigma_i = exp(-0.1 (i-1))
///   exp25       sigma_i = exp(-i/25)
///   noisy_slow  sigma_i = max(exp(-i/25), (1 - i/n)/25)
///   flat        sigma_i = params.flat_value
inline Spectrum make_spectrum(SpectrumKind kind, std::size_t n,
                              const SpectrumParams& params = {}) {
  if (kind == SpectrumKind::custom) return Spectrum(params.custom);
  if (n < 1) throw std::invalid_argument("spectrum length must be at least 1");
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  const double nn = static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double i = static_cast<double>(j + 1);
    switch (kind) {
      case SpectrumKind::exp_step: v(j) = std::exp(-0.1 * (i - 1.0)); break;
      case SpectrumKind::exp25: v(j) = std::exp(-i / 25.0); break;
      case SpectrumKind::noisy_slow:
        v(j) = std::max(std::exp(-i / 25.0), (1.0 - i / nn) / 25.0);
        break;
      case SpectrumKind::flat: v(j) = params.flat_value; break;
      case SpectrumKind::custom: break;
    }
  }
  return Spectrum(std::move(v));
}

}  // namespace sketchpack
