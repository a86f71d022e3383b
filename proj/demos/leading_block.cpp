// Leading 4x4 block of a rank-k RSVD of diag(1, e^-0.1, e^-0.2, ...), next to
// the same block for RBKI on the noisy dense variant B = A + Z.
#include <cstdio>
#include <cstdlib>

#include "sketchpack/sketchpack.hpp"

using namespace sketchpack;

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 500;
  const Index k = argc > 2 ? std::strtol(argv[2], nullptr, 10) : 50;
  const Spectrum spec = make_spectrum(SpectrumKind::exp_step, n);
  RngState rng(7);

  const SVDApprox a = rsvd(diag_operator(spec), k, rng);
  const Matrix ahat = to_dense(a);
  std::printf("RSVD on diag, k=%ld\n", static_cast<long>(k));
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) std::printf(" %7.3f", ahat(i, j));
    std::printf("\n");
  }

  RngState noise_rng(11);
  const Matrix b = noisy_dense(Matrix(spec.vector().asDiagonal()), 0.002, noise_rng);
  const SVDApprox bk = rbki_extended(dense_operator(b), k, FixedMultiplications{5}, rng);
  const Matrix bhat = to_dense(bk);
  const Vector sv = singular_values(b);
  std::printf("RBKI on B, k=%ld, 5 multiplications\n", static_cast<long>(k));
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) std::printf(" %7.3f", bhat(i, j));
    std::printf("\n");
  }
  const double err = schatten_error(b, bk, kInf);
  std::printf("||B - Bhat|| / sigma_{k+1}(B) = %.4f\n", err / sv(k));
  return 0;
}
