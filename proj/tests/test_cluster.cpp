#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "sketchpack/cluster.hpp"
#include "sketchpack/metrics.hpp"

using namespace sketchpack;

namespace {

PointSet points_from(const Matrix& m) {
  PointSet p;
  p.coords = m;
  return p;
}

PointSet blob_points(std::uint64_t seed, Index per_blob, std::vector<int>* labels) {
  Matrix centers(3, 2);
  centers << 0.0, 0.0, 6.0, 0.0, 3.0, 5.0;
  RngState rng(seed);
  return gaussian_blobs(centers, per_blob, 0.5, rng, labels);
}

}  // namespace

TEST(ParsePoints, EmptyInputIsAnError) {
  std::istringstream in("");
  EXPECT_THROW(parse_points(in), ParseError);
  std::istringstream blank("\n\n");
  EXPECT_THROW(parse_points(blank), ParseError);
}

TEST(ParsePoints, ReadsRows) {
  std::istringstream in("1,2\n3,4\n");
  const PointSet p = parse_points(in);
  ASSERT_EQ(p.n(), 2);
  ASSERT_EQ(p.d(), 2);
  EXPECT_EQ(p.coords(0, 0), 1.0);
  EXPECT_EQ(p.coords(0, 1), 2.0);
  EXPECT_EQ(p.coords(1, 0), 3.0);
  EXPECT_EQ(p.coords(1, 1), 4.0);
}

TEST(ParsePoints, SkipsHeader) {
  std::istringstream in("x,y\n1,2\n3,4\n");
  const PointSet p = parse_points(in);
  EXPECT_EQ(p.n(), 2);
  ASSERT_EQ(p.header.size(), 2u);
  EXPECT_EQ(p.header[0], "x");
}

TEST(ParsePoints, ReportsLineOfBadRow) {
  std::istringstream ragged("1,2\n3\n");
  try {
    parse_points(ragged);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream text("1,2\n3,abc\n");
  EXPECT_THROW(parse_points(text), ParseError);
}

TEST(Kernel, SinglePoint) {
  const auto op = kernel_operator(points_from(Matrix::Constant(1, 3, 2.0)), 1.0);
  const auto d = op.dense();
  ASSERT_TRUE(d.has_value());
  EXPECT_DOUBLE_EQ((*d)(0, 0), 1.0);
}

TEST(Kernel, IdenticalPointsGiveOnes) {
  const auto op = kernel_operator(points_from(Matrix::Constant(4, 2, -1.5)), 0.7);
  EXPECT_LE((*op.dense() - Matrix::Ones(4, 4)).norm(), 1e-14);
}

TEST(Kernel, EntryAtDistanceSigmaRootTwo) {
  const double sigma = 0.8;
  Matrix m(2, 2);
  m << 0.0, 0.0, sigma, sigma;
  const auto d = *kernel_operator(points_from(m), sigma).dense();
  EXPECT_NEAR(d(0, 1), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(d(1, 0), std::exp(-1.0), 1e-15);
  EXPECT_EQ(d(0, 0), 1.0);
}

TEST(Kernel, RejectsNonPositiveBandwidth) {
  EXPECT_THROW(kernel_operator(points_from(Matrix::Zero(3, 2)), 0.0), std::invalid_argument);
}

TEST(NormalizedKernel, IdenticalPairHasHalfEntries) {
  const auto nk = normalized_kernel(points_from(Matrix::Zero(2, 2)), 1.0);
  const Matrix d = *nk.op.dense();
  EXPECT_LE((d - Matrix::Constant(2, 2, 0.5)).norm(), 1e-15);
  Eigen::SelfAdjointEigenSolver<Matrix> es(d);
  EXPECT_NEAR(es.eigenvalues()(0), 0.0, 1e-14);
  EXPECT_NEAR(es.eigenvalues()(1), 1.0, 1e-14);
}

TEST(NormalizedKernel, TopEigenpairAndSpectrumRange) {
  std::vector<int> labels;
  const PointSet pts = blob_points(4, 20, &labels);
  const auto nk = normalized_kernel(pts, 1.0);
  const Matrix d = *nk.op.dense();
  Eigen::SelfAdjointEigenSolver<Matrix> es(d);
  const Index n = d.rows();
  EXPECT_NEAR(es.eigenvalues()(n - 1), 1.0, 1e-12);
  EXPECT_GE(es.eigenvalues()(0), -1e-12);
  // D^{1/2} 1 is the top eigenvector.
  const Vector v = nk.degrees.cwiseSqrt();
  EXPECT_LE((d * v - v).norm(), 1e-12 * v.norm());
}

TEST(Kernel, TiledMatchesDense) {
  std::vector<int> labels;
  const PointSet pts = blob_points(5, 40, &labels);
  KernelOptions tiled;
  tiled.dense_cap = 10;
  tiled.tile = 17;
  tiled.threads = 3;
  const auto dense_op = kernel_operator(pts, 1.2);
  const auto tiled_op = kernel_operator(pts, 1.2, tiled);
  ASSERT_TRUE(dense_op.dense().has_value());
  EXPECT_FALSE(tiled_op.dense().has_value());
  RngState rng(1);
  const Matrix x = gaussian_matrix(rng, pts.n(), 4);
  const Matrix a = dense_op.apply(x);
  EXPECT_LE((a - tiled_op.apply(x)).norm(), 1e-10 * a.norm());
  EXPECT_LE((a - tiled_op.apply_adjoint(x)).norm(), 1e-10 * a.norm());

  const auto nd = normalized_kernel(pts, 1.2);
  const auto nt = normalized_kernel(pts, 1.2, tiled);
  EXPECT_LE((nd.degrees - nt.degrees).norm(), 1e-10 * nd.degrees.norm());
  const Matrix b = nd.op.apply(x);
  EXPECT_LE((b - nt.op.apply(x)).norm(), 1e-10 * b.norm());
}

TEST(Kernel, TiledIndependentOfThreadCount) {
  std::vector<int> labels;
  const PointSet pts = blob_points(6, 30, &labels);
  KernelOptions one{.dense_cap = 1, .tile = 13, .threads = 1};
  KernelOptions four{.dense_cap = 1, .tile = 13, .threads = 4};
  RngState rng(2);
  const Matrix x = gaussian_matrix(rng, pts.n(), 3);
  const Matrix a = kernel_operator(pts, 1.0, one).apply(x);
  const Matrix b = kernel_operator(pts, 1.0, four).apply(x);
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
}

TEST(KMeans, RecoversSeparatedGroups) {
  Matrix rows(6, 1);
  rows << 0.0, 0.1, 0.2, 10.0, 10.1, 10.2;
  const auto res = kmeans(rows, 2, 3);
  EXPECT_EQ(res.labels[0], res.labels[1]);
  EXPECT_EQ(res.labels[1], res.labels[2]);
  EXPECT_EQ(res.labels[3], res.labels[4]);
  EXPECT_EQ(res.labels[4], res.labels[5]);
  EXPECT_NE(res.labels[0], res.labels[3]);
  EXPECT_TRUE(res.converged);
  EXPECT_NEAR(res.objective_history.back(), 4 * 0.01, 1e-12);
}

TEST(KMeans, IdenticalPoints) {
  const auto res = kmeans(Matrix::Constant(5, 2, 1.0), 3, 0);
  EXPECT_EQ(res.labels.size(), 5u);
  EXPECT_NEAR(res.objective_history.back(), 0.0, 1e-15);
  for (int l : res.labels) {
    EXPECT_GE(l, 0);
    EXPECT_LT(l, 3);
  }
}

TEST(KMeans, ObjectiveIsMonotone) {
  RngState rng(12);
  const Matrix rows = gaussian_matrix(rng, 300, 3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto res = kmeans(rows, 6, seed);
    for (std::size_t i = 1; i < res.objective_history.size(); ++i)
      EXPECT_LE(res.objective_history[i], res.objective_history[i - 1] * (1.0 + 1e-12));
  }
}

TEST(KMeans, RejectsBadClusterCount) {
  EXPECT_THROW(kmeans(Matrix::Zero(3, 2), 0, 0), std::invalid_argument);
  EXPECT_THROW(kmeans(Matrix::Zero(3, 2), 4, 0), std::invalid_argument);
}

TEST(Purity, CountsMajorityLabels) {
  EXPECT_DOUBLE_EQ(purity({0, 0, 1, 1}, {5, 5, 7, 7}), 1.0);
  EXPECT_DOUBLE_EQ(purity({0, 0, 0, 0}, {1, 1, 2, 2}), 0.5);
  EXPECT_THROW(purity({0}, {0, 1}), DimensionMismatch);
}

TEST(SpectralCluster, SingleCluster) {
  std::vector<int> labels;
  const PointSet pts = blob_points(7, 15, &labels);
  const auto res = spectral_cluster(pts, 1.0, 1, 1);
  for (int l : res.labels) EXPECT_EQ(l, 0);
  ASSERT_GE(res.eigenvalues.size(), 1);
  EXPECT_NEAR(res.eigenvalues(0), 1.0, 1e-4);
}

TEST(SpectralCluster, DuplicatedPointsShareLabels) {
  Matrix m(8, 2);
  m << 0, 0, 0, 0, 0, 0, 0, 0, 9, 9, 9, 9, 9, 9, 9, 9;
  ClusterOptions opts;
  opts.solver = EigSolver::dense;
  const auto res = spectral_cluster(points_from(m), 1.0, 2, 2, opts);
  for (int i = 1; i < 4; ++i) EXPECT_EQ(res.labels[i], res.labels[0]);
  for (int i = 5; i < 8; ++i) EXPECT_EQ(res.labels[i], res.labels[4]);
  EXPECT_NE(res.labels[0], res.labels[4]);
}

TEST(SpectralCluster, BlobsAreRecovered) {
  std::vector<int> truth;
  const PointSet pts = blob_points(8, 100, &truth);
  ClusterOptions opts;
  opts.dense_reference = true;
  opts.block_size = 10;
  opts.eps = 1e-4;
  const auto res = spectral_cluster(pts, 1.0, 3, 3, opts, &truth);
  ASSERT_TRUE(res.purity.has_value());
  EXPECT_GE(*res.purity, 0.99);
  ASSERT_TRUE(res.eigvec_subspace_error.has_value());
  EXPECT_LE(*res.eigvec_subspace_error, 1e-3);
  EXPECT_GT(res.matvecs.count_A, 0u);
}

TEST(SpectralCluster, DenseAndIterativeAgree) {
  std::vector<int> truth;
  const PointSet pts = blob_points(9, 60, &truth);
  ClusterOptions dense_opts;
  dense_opts.solver = EigSolver::dense;
  const auto a = spectral_cluster(pts, 1.0, 3, 3, dense_opts, &truth);
  const auto b = spectral_cluster(pts, 1.0, 3, 3, {}, &truth);
  EXPECT_GE(*a.purity, 0.99);
  EXPECT_GE(*b.purity, 0.99);
  EXPECT_LE((a.eigenvalues - b.eigenvalues).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SpectralCluster, ArgumentErrors) {
  const PointSet pts = points_from(Matrix::Zero(3, 2));
  EXPECT_THROW(spectral_cluster(pts, 1.0, 0, 1), std::invalid_argument);
  EXPECT_THROW(spectral_cluster(pts, 1.0, 1, 0), std::invalid_argument);
  EXPECT_THROW(spectral_cluster(pts, 1.0, 4, 1), std::invalid_argument);
}
