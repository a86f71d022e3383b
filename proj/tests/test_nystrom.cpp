#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sketchpack/sketchpack.hpp"

using namespace sketchpack;

namespace {

// Operator without declared trace or dense storage.
struct MatrixFree {
  Matrix a;
  Index rows() const { return a.rows(); }
  Index cols() const { return a.cols(); }
  Matrix apply(const Matrix& x) const { return a * x; }
};

Matrix random_psd(RngState& rng, Index n, double decay) {
  const Matrix g = gaussian_matrix(rng, n, n);
  Vector d(n);
  for (Index i = 0; i < n; ++i) d(i) = std::exp(-decay * static_cast<double>(i));
  Matrix a = g * d.asDiagonal() * g.transpose();
  return 0.5 * (a + a.transpose());
}

Matrix low_rank_psd(RngState& rng, Index n, Index rank) {
  const Matrix u = qr_econ(gaussian_matrix(rng, n, rank)).Q;
  Vector l(rank);
  for (Index i = 0; i < rank; ++i) l(i) = 1.0 + static_cast<double>(rank - i);
  Matrix a = u * l.asDiagonal() * u.transpose();
  return 0.5 * (a + a.transpose());
}

// For psd A of rank r with eigenvectors U and a test basis M with U^T M
// invertible, the shifted Nystrom error is, to first order in the shift nu,
// nu * ||U_perp^T M (U^T M)^{-1}||_2^2. Returns that factor.
double shift_amplification(const Matrix& a, Index rank, const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const Matrix u = es.eigenvectors().rightCols(rank);
  const Matrix inside = u.transpose() * m;
  const Matrix outside = m - u * inside;
  const Matrix ratio = outside * inside.inverse();
  const double top = Eigen::JacobiSVD<Matrix>(ratio).singularValues()(0);
  return top * top;
}

void expect_psd_output(const EigApprox& a) {
  const Index r = a.rank();
  EXPECT_LE((a.U.transpose() * a.U - Matrix::Identity(r, r)).cwiseAbs().maxCoeff(), 1e-10);
  for (Index i = 0; i < r; ++i) EXPECT_GE(a.L[i], 0.0);
  for (Index i = 1; i < r; ++i) EXPECT_LE(a.L[i], a.L[i - 1]);
}

}  // namespace

TEST(NystromCompress, CapturesSingleColumn) {
  const LinearOperator op = diag_operator(Spectrum(std::vector<double>{3, 1, 0}));
  Matrix m = Matrix::Zero(3, 1);
  m(0, 0) = 1.0;
  const EigApprox a = nystrom_compress(op, m, 0.0);
  Matrix want = Matrix::Zero(3, 3);
  want(0, 0) = 3.0;
  EXPECT_LT((to_dense(a) - want).norm(), 1e-14);
}

TEST(NystromCompress, TopEigenspaceIsOptimal) {
  const Spectrum spec = make_spectrum(SpectrumKind::exp25, 60);
  const Matrix a = spec.vector().asDiagonal();
  const EigApprox x = nystrom_compress(diag_operator(spec), Matrix::Identity(60, 5), 0.0);
  EXPECT_NEAR(schatten_error(a, x, kInf), spec[5], 1e-12);
}

TEST(NystromCompress, DominatesProjection) {
  RngState rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix a = random_psd(rng, 50, 0.2);
    const Matrix m = gaussian_matrix(rng, 50, 10);
    const EigApprox nys = nystrom_compress(dense_operator(a), m, 0.0);
    const Matrix q = qr_econ(m).Q;
    const Matrix proj = q * (q.transpose() * a);
    for (double p : {1.0, 2.0, kInf}) {
      const double lhs = schatten_norm(singular_values(a - to_dense(nys)), p);
      const double rhs = schatten_norm(singular_values(a - proj), p);
      EXPECT_LE(lhs, rhs + 1e-10 * std::max(1.0, a.trace())) << p;
    }
    expect_psd_output(nys);
  }
}

TEST(NystromCompress, RejectsNonPsd) {
  RngState rng(2);
  const LinearOperator op = dense_operator(gaussian_matrix(rng, 10, 10));
  EXPECT_THROW(nystrom_compress(op, Matrix::Identity(10, 2), 0.0), std::invalid_argument);
  EXPECT_THROW(nystrom_compress(diag_operator(make_spectrum(SpectrumKind::flat, 10)),
                                Matrix::Identity(10, 2), -1.0),
               std::invalid_argument);
}

TEST(NystromCompress, ShiftRetryOnSingularGram) {
  // M beyond the rank makes M^T A M singular; a zero shift forces retries.
  std::vector<double> v(20, 0.0);
  v[0] = 1.0;
  const LinearOperator op = diag_operator(Spectrum(v));
  RngState rng(3);
  const Matrix m = gaussian_matrix(rng, 20, 4);
  const EigApprox a = nystrom_compress(op, m, 1e-14);
  EXPECT_GE(a.shift_used, 1e-14);
  EXPECT_NEAR(a.L[0], 1.0, 1e-8);
  for (Index i = 1; i < a.rank(); ++i) EXPECT_LE(a.L[i], 1e-8);
}

TEST(Nyssvd, ExactForRankK) {
  RngState rng(4);
  const Matrix a = low_rank_psd(rng, 80, 6);
  const LinearOperator op = dense_operator(a);
  RngState omega_rng = rng;
  const Matrix omega = gaussian_matrix(omega_rng, 80, 6);
  const double gain = shift_amplification(a, 6, omega);
  const EigApprox x = nyssvd(op, 6, rng);
  EXPECT_LT(schatten_error(a, x, kInf), 10.0 * x.shift_used * (1.0 + gain));
  // An explicit shift dominates rounding, so the first-order factor is sharp.
  NystromOptions big;
  big.shift = 1e-9 * a.trace();
  RngState again(4);
  low_rank_psd(again, 80, 6);
  const EigApprox y = nyssvd(op, 6, again, big);
  const double err = schatten_error(a, y, kInf);
  EXPECT_LT(err, 1.1 * *big.shift * gain);
  EXPECT_GT(err, 0.9 * *big.shift * gain);
  expect_psd_output(x);
}

TEST(Nyssvd, LedgerIncludesTraceProbes) {
  RngState rng(5);
  const Matrix a = random_psd(rng, 40, 0.3);
  OperatorTraits traits;
  traits.symmetric = true;
  traits.psd = true;  // no trace: forces the probe estimate
  const LinearOperator op(MatrixFree{a}, traits);
  NystromOptions opts;
  const EigApprox x = nyssvd(op, 7, rng, opts);
  EXPECT_EQ(x.matvecs, (LedgerCounts{7u + static_cast<std::uint64_t>(opts.trace_probes), 0u}));
  const LinearOperator known = dense_operator(a);
  ASSERT_TRUE(known.traits().trace.has_value());
  const EigApprox y = nyssvd(known, 7, rng, opts);
  EXPECT_EQ(y.matvecs, (LedgerCounts{7u, 0u}));
}

TEST(Nyssvd, AutoShiftScalesWithTrace) {
  const Spectrum spec = make_spectrum(SpectrumKind::exp25, 100);
  RngState rng(6);
  const EigApprox x = nyssvd(diag_operator(spec), 10, rng);
  EXPECT_DOUBLE_EQ(x.shift_used, kEpsMach * spec.vector().sum());
}

TEST(Nyssi, OneMultiplicationMatchesNyssvd) {
  const Spectrum spec = make_spectrum(SpectrumKind::noisy_slow, 200);
  RngState a(7), b(7);
  const EigApprox x = nyssvd(diag_operator(spec), 10, a);
  const EigApprox y = nyssi(diag_operator(spec), 10, FixedMultiplications{1}, b);
  ASSERT_EQ(x.rank(), y.rank());
  for (Index i = 0; i < x.rank(); ++i) EXPECT_NEAR(x.L[i], y.L[i], 1e-10);
}

TEST(Nyssi, RecoversDominantEigenvalue) {
  std::vector<double> v(50, 1e-3);
  v[0] = 4.0;
  RngState rng(8);
  const EigApprox x = nyssi(diag_operator(Spectrum(v)), 2, FixedMultiplications{3}, rng);
  EXPECT_NEAR(x.L[0], 4.0, 1e-9);
}

TEST(Nyssi, MorePowersNeverHurtPerSeed) {
  const Spectrum spec = make_spectrum(SpectrumKind::noisy_slow, 300);
  const Matrix a = spec.vector().asDiagonal();
  const LinearOperator op = diag_operator(spec);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    RngState rng(seed);
    const Matrix omega = gaussian_matrix(rng, 300, 10);
    const RngState unused(seed);
    const double e2 = schatten_error(a, nyssi(op, omega, FixedMultiplications{2}, {}, unused), kInf);
    const double e4 = schatten_error(a, nyssi(op, omega, FixedMultiplications{4}, {}, unused), kInf);
    EXPECT_LE(e4, e2 + 1e-10);
  }
}

TEST(Nysbki, OneMultiplicationMatchesNyssvd) {
  const Spectrum spec = make_spectrum(SpectrumKind::noisy_slow, 200);
  RngState a(9), b(9);
  const EigApprox x = nyssvd(diag_operator(spec), 10, a);
  const EigApprox y = nysbki(diag_operator(spec), 10, FixedMultiplications{1}, b);
  ASSERT_EQ(x.rank(), y.rank());
  for (Index i = 0; i < x.rank(); ++i) EXPECT_NEAR(x.L[i], y.L[i], 1e-9);
}

TEST(Nysbki, DominatesNyssiPerSeed) {
  const Spectrum spec = make_spectrum(SpectrumKind::noisy_slow, 300);
  const Matrix a = spec.vector().asDiagonal();
  const LinearOperator op = diag_operator(spec);
  const double tr = spec.vector().sum();
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    RngState rng(seed);
    const Matrix omega = gaussian_matrix(rng, 300, 8);
    const RngState unused(seed);
    for (int m : {2, 3, 4, 5}) {
      const EigApprox bk = nysbki(op, omega, FixedMultiplications{m}, {}, unused);
      const EigApprox si = nyssi(op, omega, FixedMultiplications{m}, {}, unused);
      EXPECT_LE(schatten_error(a, bk, 1.0), schatten_error(a, si, 1.0) + 1e-9 * tr) << m;
      expect_psd_output(bk);
    }
  }
}

TEST(Nysbki, ExactForRankAtMostMk) {
  RngState rng(10);
  const Matrix a = low_rank_psd(rng, 90, 12);
  RngState omega_rng = rng;
  const Matrix omega = gaussian_matrix(omega_rng, 90, 4);
  // The Nystrom factor depends only on span[omega, A omega, A^2 omega].
  Matrix krylov(90, 12);
  krylov << omega, a * omega, a * a * omega;
  const double gain = shift_amplification(a, 12, qr_econ(krylov).Q);
  const EigApprox x = nysbki(dense_operator(a), 4, FixedMultiplications{3}, rng);
  EXPECT_LT(schatten_error(a, x, kInf), 10.0 * x.shift_used * (1.0 + gain));
  EXPECT_LE(x.rank(), 12);
}

TEST(Nysbki, LedgerIsMk) {
  const Spectrum spec = make_spectrum(SpectrumKind::exp25, 300);
  for (int m = 1; m <= 6; ++m) {
    RngState rng(11);
    const EigApprox x = nysbki(diag_operator(spec), 6, FixedMultiplications{m}, rng);
    EXPECT_EQ(x.matvecs, (LedgerCounts{static_cast<std::uint64_t>(6 * m), 0u}));
  }
}

TEST(Nysbki, TraceStop) {
  const Spectrum spec = make_spectrum(SpectrumKind::exp_step, 300);
  const double tr = spec.vector().sum();
  RngState rng(12);
  const EigApprox x = nysbki(diag_operator(spec), 10, TraceTolerance{1e-6, tr}, rng);
  EXPECT_LT(tr - x.L.vector().sum(), 1e-6 * tr);
  EXPECT_LT(schatten_error(Matrix(spec.vector().asDiagonal()), x, 1.0), 1e-6 * tr * (1 + 1e-6));
}

TEST(NysbkiAdaptive, ExactRankStopsEarly) {
  RngState rng(13);
  const Matrix a = low_rank_psd(rng, 70, 4);
  const EigApprox x = nysbki_adaptive(dense_operator(a), 6, 4, 1e-8, rng);
  EXPECT_LE(x.multiplications, 2);
  const auto res = triplet_residuals(dense_operator(a), x, 4, ResidualForm::full);
  for (double r : res) EXPECT_LE(r, 10.0 * std::max(x.shift_used, 1e-15) + 1e-12);
}

TEST(NysbkiAdaptive, RecomputedResidualsWithinTolerance) {
  RngState rng(14);
  const Matrix a = random_psd(rng, 200, 0.15);
  const LinearOperator op = dense_operator(a);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    RngState s(seed);
    const EigApprox x = nysbki_adaptive(op, 8, 5, 1e-6, s);
    const auto full = triplet_residuals(op.with_fresh_ledger(), x, 5, ResidualForm::full);
    const auto sym = triplet_residuals(op.with_fresh_ledger(), x, 5, ResidualForm::shortcut);
    for (int i = 0; i < 5; ++i) {
      EXPECT_LE(full[i], 1e-6);
      EXPECT_NEAR(full[i], sym[i], 1e-10);
    }
  }
}

TEST(Nystrom, RefusesGeneralOperator) {
  RngState rng(15);
  const LinearOperator op = dense_operator(gaussian_matrix(rng, 20, 20));
  EXPECT_THROW(nyssvd(op, 3, rng), std::invalid_argument);
  EXPECT_THROW(nyssi(op, 3, FixedMultiplications{2}, rng), std::invalid_argument);
  EXPECT_THROW(nysbki(op, 3, FixedMultiplications{2}, rng), std::invalid_argument);
  EXPECT_THROW(nysbki_adaptive(op, 3, 2, 1e-3, rng), std::invalid_argument);
}

TEST(Nystrom, NeedsNoAdjoint) {
  struct SymApplyOnly {
    Vector d;
    Index rows() const { return d.size(); }
    Index cols() const { return d.size(); }
    Matrix apply(const Matrix& x) const { return d.asDiagonal() * x; }
  };
  const Spectrum spec = make_spectrum(SpectrumKind::exp25, 100);
  OperatorTraits traits;
  traits.symmetric = true;
  traits.psd = true;
  traits.trace = spec.vector().sum();
  const LinearOperator op(SymApplyOnly{spec.vector()}, traits);
  RngState rng(16);
  const EigApprox x = nysbki(op, 5, FixedMultiplications{4}, rng);
  EXPECT_EQ(x.matvecs.count_At, 0u);
  EXPECT_GT(x.rank(), 0);
}
