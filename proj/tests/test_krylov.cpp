#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sketchpack/sketchpack.hpp"

using namespace sketchpack;

TEST(RbkiSimple, OneBlockMatchesRsvd) {
  const LinearOperator op = diag_operator(make_spectrum(SpectrumKind::noisy_slow, 300));
  RngState a(1), b(1);
  const SVDApprox x = rsvd(op, 10, a);
  const SVDApprox y = rbki_simple(op, 10, 1, b);
  ASSERT_EQ(x.rank(), y.rank());
  for (Index i = 0; i < x.rank(); ++i) EXPECT_NEAR(x.S[i], y.S[i], 1e-10 * x.S[0]);
}

TEST(RbkiSimple, ExactForLowRank) {
  std::vector<double> v(20, 0.0);
  v[0] = 5;
  v[1] = 4;
  const Spectrum spec(v);
  RngState rng(2);
  const SVDApprox a = rbki_simple(diag_operator(spec), 2, 2, rng);
  ASSERT_GE(a.rank(), 2);
  EXPECT_NEAR(a.S[0], 5.0, 1e-12);
  EXPECT_NEAR(a.S[1], 4.0, 1e-12);
}

TEST(RbkiSimple, LedgerIsQkEachWay) {
  for (int q = 1; q <= 5; ++q) {
    const LinearOperator op = diag_operator(make_spectrum(SpectrumKind::exp25, 400));
    RngState rng(3);
    const SVDApprox a = rbki_simple(op, 8, q, rng);
    EXPECT_EQ(a.matvecs, (LedgerCounts{static_cast<std::uint64_t>(8 * q), static_cast<std::uint64_t>(8 * q)}));
    EXPECT_LE(a.rank(), 8 * q);
  }
}

TEST(RbkiExtended, TwoMultiplicationsIsRsvd) {
  const LinearOperator op = diag_operator(make_spectrum(SpectrumKind::exp25, 300));
  RngState a(4), b(4);
  const SVDApprox x = rsvd(op, 10, a);
  const SVDApprox y = rbki_extended(op, 10, FixedMultiplications{2}, b);
  ASSERT_EQ(x.rank(), y.rank());
  for (Index i = 0; i < x.rank(); ++i) EXPECT_NEAR(x.S[i], y.S[i], 1e-10 * x.S[0]);
}

TEST(RbkiExtended, NoisyIllustrativeMatchesBestRank) {
  const std::size_t n = 2000;
  const Spectrum spec = make_spectrum(SpectrumKind::exp_step, n);
  RngState noise(5);
  const Matrix b = noisy_dense(Matrix(spec.vector().asDiagonal()), 0.002, noise);
  RngState rng(6);
  const SVDApprox a = rbki_extended(dense_operator(b), 100, FixedMultiplications{5}, rng);
  Eigen::BDCSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Matrix best = svd.matrixU().leftCols(100) * svd.singularValues().head(100).asDiagonal() *
                      svd.matrixV().leftCols(100).transpose();
  const Matrix mine = to_dense(a);
  EXPECT_LT((mine.topLeftCorner(4, 4) - best.topLeftCorner(4, 4)).cwiseAbs().maxCoeff(), 5e-4);
}

TEST(RbkiExtended, DominatesRsiPerSeed) {
  const Spectrum spec = make_spectrum(SpectrumKind::noisy_slow, 400);
  const LinearOperator op = diag_operator(spec);
  const Matrix a = spec.vector().asDiagonal();
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    RngState rng(seed);
    const Matrix omega = gaussian_matrix(rng, 400, 10);
    for (int m : {2, 3, 4, 5, 6}) {
      const SVDApprox rb = rbki_extended(op, omega, FixedMultiplications{m});
      const SVDApprox rs = rsi_extended(op, omega, FixedMultiplications{m});
      for (double p : {1.0, 2.0, kInf})
        EXPECT_LE(schatten_error(a, rb, p), schatten_error(a, rs, p) + 1e-10 * spec[0]) << m << " " << p;
    }
  }
}

TEST(RbkiExtended, FlatSpectrumUnitError) {
  RngState rng(7);
  const SVDApprox a = rbki_extended(diag_operator(make_spectrum(SpectrumKind::flat, 500)), 10,
                                    FixedMultiplications{6}, rng);
  EXPECT_NEAR(schatten_error(Matrix::Identity(500, 500), a, kInf), 1.0, 1e-10);
}

TEST(RbkiExtended, ErrorNonincreasingInMultiplications) {
  const Spectrum spec = make_spectrum(SpectrumKind::noisy_slow, 300);
  const Matrix a = spec.vector().asDiagonal();
  RngState rng(8);
  std::vector<double> errs;
  RunOptions opts;
  opts.observer = [&](const SVDApprox& x) { errs.push_back(schatten_error(a, x, kInf)); };
  rbki_extended(diag_operator(spec), 8, FixedMultiplications{9}, rng, opts);
  ASSERT_EQ(errs.size(), 9u);
  for (std::size_t i = 1; i < errs.size(); ++i) EXPECT_LE(errs[i], errs[i - 1] + 1e-10 * spec[0]) << i;
}

TEST(RbkiExtended, LedgerIsMk) {
  for (int m = 1; m <= 8; ++m) {
    const LinearOperator op = dense_operator(Matrix(make_spectrum(SpectrumKind::exp25, 200).vector().asDiagonal()));
    RngState rng(9);
    const SVDApprox a = rbki_extended(op, 7, FixedMultiplications{m}, rng);
    EXPECT_EQ(a.matvecs.count_A + a.matvecs.count_At, static_cast<std::uint64_t>(7 * m));
    EXPECT_EQ(a.block_widths.size(), static_cast<std::size_t>(m));
  }
}

TEST(RbkiExtended, DeflationNarrowsBlocks) {
  std::vector<double> v(60, 0.0);
  for (int i = 0; i < 6; ++i) v[i] = 1.0 / (1 + i);
  RngState rng(10);
  const SVDApprox a = rbki_extended(diag_operator(Spectrum(v)), 4, FixedMultiplications{8}, rng);
  Index total = 0;
  for (Index w : a.block_widths) total += w;
  EXPECT_LE(a.rank(), 6);
  EXPECT_LT(schatten_error(Matrix(Spectrum(v).vector().asDiagonal()), a, kInf), 1e-10);
  EXPECT_LT(a.block_widths.back(), 4);
  (void)total;
}

TEST(RbkiExtended, FrobeniusStop) {
  const Spectrum spec = make_spectrum(SpectrumKind::exp_step, 400);
  const double fro = spec.norm(2.0);
  RngState rng(11);
  const SVDApprox a = rbki_extended(diag_operator(spec), 10, FroTolerance{0.05, fro}, rng);
  const double direct = schatten_error(Matrix(spec.vector().asDiagonal()), a, 2.0);
  EXPECT_LT(direct, 0.05 * fro * (1 + 1e-8));
}

TEST(RbkiAdaptive, ExactRankStopsAtTwo) {
  std::vector<double> v(80, 0.0);
  for (int i = 0; i < 5; ++i) v[i] = 5.0 - i;
  RngState rng(12);
  const SVDApprox a = rbki_adaptive(diag_operator(Spectrum(v)), 8, 5, 1e-8, rng);
  EXPECT_EQ(a.multiplications, 2);
  const auto res = triplet_residuals(diag_operator(Spectrum(v)), a, 5, ResidualForm::full);
  for (double r : res) EXPECT_LT(r, 1e-10 * 5.0);
}

TEST(RbkiAdaptive, RecomputedResidualsWithinTolerance) {
  const Spectrum spec = make_spectrum(SpectrumKind::exp25, 600);
  RngState noise(13);
  const Matrix b = noisy_dense(Matrix(spec.vector().asDiagonal()), 1e-3, noise);
  const LinearOperator op = dense_operator(b);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    RngState rng(seed);
    const double eps = 1e-6;
    const SVDApprox a = rbki_adaptive(op, 10, 4, eps, rng);
    const auto res = triplet_residuals(op.with_fresh_ledger(), a, 4, ResidualForm::full);
    for (double r : res) EXPECT_LE(r, eps) << seed;
  }
}

TEST(RbkiAdaptive, TrackedResidualMatchesDirect) {
  const Spectrum spec = make_spectrum(SpectrumKind::exp_step, 500);
  const LinearOperator op = diag_operator(spec);
  RngState rng(14);
  const SVDApprox a = rbki_adaptive(op, 8, 3, 1e-7, rng);
  const auto shortcut = triplet_residuals(op.with_fresh_ledger(), a, 3, ResidualForm::shortcut);
  const auto full = triplet_residuals(op.with_fresh_ledger(), a, 3, ResidualForm::full);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(shortcut[i], full[i], 1e-8 * spec[0]);
}

TEST(RbkiAdaptive, FastDecayTerminatesQuickly) {
  const Spectrum spec = make_spectrum(SpectrumKind::exp_step, 2000);
  RngState rng(15);
  const SVDApprox a = rbki_adaptive(diag_operator(spec), 10, 5, 1e-6, rng);
  EXPECT_LE(a.multiplications, 10);
}

TEST(RbkiAdaptive, CapReachedCarriesResiduals) {
  RngState rng(16);
  RunOptions opts;
  opts.max_multiplications = 4;
  try {
    rbki_adaptive(diag_operator(make_spectrum(SpectrumKind::noisy_slow, 100)), 5, 3, 1e-12, rng, opts);
    FAIL() << "expected TerminationCapReached";
  } catch (const TerminationCapReached<SVDApprox>& e) {
    EXPECT_FALSE(e.residuals().empty());
  }
}

TEST(RbkiExtended, ResidualRuleRoutesToAdaptive) {
  const Spectrum spec = make_spectrum(SpectrumKind::exp_step, 300);
  RngState a(17), b(17);
  const SVDApprox x = rbki_extended(diag_operator(spec), 8, ResidualTolerance{3, 1e-6}, a);
  const SVDApprox y = rbki_adaptive(diag_operator(spec), 8, 3, 1e-6, b);
  EXPECT_EQ(x.multiplications, y.multiplications);
  EXPECT_THROW(rbki_extended(diag_operator(spec), 8, TraceTolerance{1e-3, std::nullopt}, a),
               std::invalid_argument);
}
