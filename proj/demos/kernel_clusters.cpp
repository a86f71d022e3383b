// Spectral clustering of three Gaussian blobs with the matrix-free kernel.
#include <cstdio>
#include <cstdlib>

#include "sketchpack/sketchpack.hpp"

using namespace sketchpack;

int main(int argc, char** argv) {
  const int per_blob = argc > 1 ? std::atoi(argv[1]) : 500;
  Matrix centers(3, 2);
  centers << 0.0, 0.0, 10.0, 0.0, 5.0, 8.0;
  RngState rng(3);
  std::vector<int> truth;
  const PointSet pts = gaussian_blobs(centers, per_blob, 1.0, rng, &truth);
  ClusterOptions opts;
  opts.block_size = 10;
  opts.eps = 1e-4;
  opts.dense_reference = pts.n() <= 3000;
  const ClusterResult res = spectral_cluster(pts, 1.0, 3, 3, opts, &truth);
  std::printf("n=%ld purity=%.4f matvecs=%llu multiplications=%d\n", static_cast<long>(pts.n()),
              res.purity.value_or(-1.0), static_cast<unsigned long long>(res.matvecs.count_A),
              res.multiplications);
  if (res.eigvec_subspace_error) std::printf("top-3 subspace error vs dense: %.3e\n", *res.eigvec_subspace_error);
  std::printf("eigenvalues:");
  for (Index i = 0; i < res.eigenvalues.size(); ++i) std::printf(" %.6f", res.eigenvalues(i));
  std::printf("\n");
  return 0;
}
