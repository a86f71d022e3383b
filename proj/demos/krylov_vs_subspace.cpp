// Mean relative spectral error against multiplications for RSI and RBKI on
// the slow-decay spectrum, with the gapless bound for each.
#include <cstdio>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

#include "sketchpack/sketchpack.hpp"

using namespace sketchpack;

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 1000;
  const int seeds = argc > 2 ? std::atoi(argv[2]) : 5;
  const int r = 75;
  const Index k = 100;
  const int m_max = 10;
  const Spectrum spec = make_spectrum(SpectrumKind::noisy_slow, n);
  const LinearOperator op = diag_operator(spec);
  const Matrix a = spec.vector().asDiagonal();
  const double sigma = spec[r];

  std::vector<double> rsi_sum(m_max + 1, 0.0), rbki_sum(m_max + 1, 0.0);
  for (int s = 0; s < seeds; ++s) {
    RngState rng(static_cast<std::uint64_t>(s));
    const Matrix omega = gaussian_matrix(rng, op.cols(), k);
    RunOptions o1;
    o1.observer = [&](const SVDApprox& x) { rsi_sum[x.multiplications] += schatten_error(a, x, kInf) / sigma; };
    rsi_extended(op, omega, FixedMultiplications{m_max}, o1);
    RunOptions o2;
    o2.observer = [&](const SVDApprox& x) { rbki_sum[x.multiplications] += schatten_error(a, x, kInf) / sigma; };
    rbki_extended(op, omega, FixedMultiplications{m_max}, o2);
  }
  std::printf("%3s %10s %10s %12s %12s\n", "m", "rsi", "rbki", "rsi_bound", "rbki_bound");
  for (int m = 2; m <= m_max; ++m) {
    BoundQuery q;
    q.spectrum = spec;
    q.k = static_cast<int>(k);
    q.r = r;
    q.m = m;
    q.method = BoundMethod::rsi;
    const double b_rsi = std::sqrt(gapless_bound(q).relative);
    double b_rbki = std::numeric_limits<double>::quiet_NaN();
    if (m >= 3) {
      q.method = BoundMethod::rbki;
      b_rbki = std::sqrt(gapless_bound(q).relative);
    }
    std::printf("%3d %10.4f %10.4f %12.4f %12.4f\n", m, rsi_sum[m] / seeds, rbki_sum[m] / seeds, b_rsi, b_rbki);
  }
  return 0;
}
