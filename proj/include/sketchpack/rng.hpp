#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include <Eigen/Dense>

namespace sketchpack {

// Generator: SplitMix64 used as a counter-based stream. Word j of the stream
// with seed s is mix64(s + (j+1)*0x9E3779B97F4A7C15). Uniforms take the top
// 53 bits shifted into (0,1); normals come from the Box-Muller transform, two
// per pair of uniforms, cosine branch first.
class RngState {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit RngState(std::uint64_t seed = 0) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  /// Number of 64-bit words consumed so far.
  std::uint64_t position() const noexcept { return position_; }

  static constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() noexcept {
    ++position_;
    return mix64(seed_ + position_ * kGamma);
  }

  /// Uniform on the open interval (0,1).
  double next_uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform integer in [0, bound).
  std::uint64_t next_below(std::uint64_t bound) noexcept {
    return static_cast<std::uint64_t>(next_uniform() * static_cast<double>(bound)) %
           bound;
  }

  /// Independent stream keyed by (seed, stream id); does not advance *this.
  RngState split(std::uint64_t stream) const noexcept {
    return RngState(mix64(seed_ ^ mix64(stream + kGamma)));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t position_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Column-major fill with independent N(0,1) entries.
inline Eigen::MatrixXd gaussian_matrix(RngState& rng, Eigen::Index rows,
                                       Eigen::Index cols) {
  Eigen::MatrixXd out(rows, cols);
  double* data = out.data();
  const Eigen::Index total = rows * cols;
  for (Eigen::Index i = 0; i < total; ++i) data[i] = rng.next_normal();
  return out;
}

}  // namespace sketchpack
