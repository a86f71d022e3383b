#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sketchpack/sketchpack.hpp"

using namespace sketchpack;

namespace {

Spectrum vals(std::vector<double> v) { return Spectrum(v); }

void expect_valid(const SVDApprox& a) {
  const Index r = a.rank();
  ASSERT_EQ(a.U.cols(), r);
  ASSERT_EQ(a.V.cols(), r);
  EXPECT_LE((a.U.transpose() * a.U - Matrix::Identity(r, r)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((a.V.transpose() * a.V - Matrix::Identity(r, r)).cwiseAbs().maxCoeff(), 1e-10);
  for (Index i = 1; i < r; ++i) EXPECT_LE(a.S[i], a.S[i - 1]);
  EXPECT_LE(r, std::min(a.U.rows(), a.V.rows()));
}

}  // namespace

TEST(Rsvd, LeadingBlockOfExpStep) {
  const Spectrum spec = make_spectrum(SpectrumKind::exp_step, 2000);
  RngState rng(1);
  const SVDApprox a = rsvd(diag_operator(spec), 100, rng);
  expect_valid(a);
  const Matrix block = a.U.topRows(4) * a.S.vector().asDiagonal() * a.V.topRows(4).transpose();
  const double want[] = {1.000, 0.905, 0.819, 0.741};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(block(i, i), want[i], 5e-4);
    for (int j = 0; j < 4; ++j)
      if (i != j) EXPECT_NEAR(block(i, j), 0.0, 5e-4);
  }
}

TEST(Rsvd, ExactWhenRankAtMostK) {
  const LinearOperator op = diag_operator(vals({5, 0, 0}));
  RngState rng(2);
  const SVDApprox a = rsvd(op, 2, rng);
  EXPECT_LT(schatten_error(Matrix(vals({5, 0, 0}).vector().asDiagonal()), a, kInf), 1e-12);
}

TEST(Rsvd, IdentityLeavesUnitError) {
  const LinearOperator op = diag_operator(make_spectrum(SpectrumKind::flat, 200));
  RngState rng(3);
  const SVDApprox a = rsvd(op, 10, rng);
  EXPECT_NEAR(schatten_error(Matrix::Identity(200, 200), a, kInf), 1.0, 1e-10);
}

TEST(Rsvd, RejectsBadRank) {
  const LinearOperator op = diag_operator(make_spectrum(SpectrumKind::flat, 5));
  RngState rng(4);
  EXPECT_THROW(rsvd(op, 0, rng), std::invalid_argument);
  EXPECT_THROW(rsvd(op, 6, rng), std::invalid_argument);
}

TEST(Rsvd, LedgerIsTwoK) {
  const LinearOperator op = diag_operator(make_spectrum(SpectrumKind::exp25, 100));
  RngState rng(5);
  const SVDApprox a = rsvd(op, 9, rng);
  EXPECT_EQ(a.matvecs, (LedgerCounts{9, 9}));
}

TEST(RsiSimple, QOneMatchesRsvd) {
  const LinearOperator op = diag_operator(make_spectrum(SpectrumKind::exp25, 300));
  RngState a(6), b(6);
  const SVDApprox x = rsvd(op, 12, a);
  const SVDApprox y = rsi_simple(op, 12, 1, b);
  ASSERT_EQ(x.rank(), y.rank());
  for (Index i = 0; i < x.rank(); ++i) EXPECT_NEAR(x.S[i], y.S[i], 1e-10 * x.S[i]);
}

TEST(RsiSimple, ExactRecoveryAndLedger) {
  const LinearOperator op = diag_operator(vals({5, 0, 0}));
  RngState rng(7);
  const SVDApprox a = rsi_simple(op, 2, 3, rng);
  EXPECT_LT(schatten_error(Matrix(vals({5, 0, 0}).vector().asDiagonal()), a, kInf), 1e-12);
  const LinearOperator big = diag_operator(make_spectrum(SpectrumKind::exp25, 100));
  const SVDApprox b = rsi_simple(big, 7, 3, rng);
  EXPECT_EQ(b.matvecs, (LedgerCounts{21, 21}));
  expect_valid(b);
}

TEST(RsiSimple, MorePowersNeverHurtPerSeed) {
  const Spectrum spec = make_spectrum(SpectrumKind::noisy_slow, 2000);
  const LinearOperator op = diag_operator(spec);
  const Matrix a = spec.vector().asDiagonal();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    RngState rng(seed);
    const Matrix omega = gaussian_matrix(rng, 2000, 100);
    const double e1 = schatten_error(a, rsi_simple(op, omega, 1), kInf);
    const double e3 = schatten_error(a, rsi_simple(op, omega, 3), kInf);
    EXPECT_LE(e3, e1 + 1e-10 * spec[0]) << seed;
  }
}

TEST(RsiExtended, TwoMultiplicationsIsRsvd) {
  const LinearOperator op = diag_operator(make_spectrum(SpectrumKind::noisy_slow, 300));
  RngState a(8), b(8);
  const SVDApprox x = rsvd(op, 10, a);
  const SVDApprox y = rsi_extended(op, 10, FixedMultiplications{2}, b);
  ASSERT_EQ(x.rank(), y.rank());
  for (Index i = 0; i < x.rank(); ++i) EXPECT_NEAR(x.S[i], y.S[i], 1e-10 * x.S[0]);
  EXPECT_LT((x.U * x.U.transpose() - y.U * y.U.transpose()).norm(), 1e-9);
}

TEST(RsiExtended, FullRankExactAtThree) {
  const Matrix a = vals({4, 1}).vector().asDiagonal();
  RngState rng(9);
  const SVDApprox x = rsi_extended(dense_operator(a), 2, FixedMultiplications{3}, rng);
  EXPECT_LT(schatten_error(a, x, kInf), 1e-12);
}

TEST(RsiExtended, AnyMultiplicationCountConsumesMk) {
  const LinearOperator op = diag_operator(make_spectrum(SpectrumKind::exp25, 200));
  for (int m = 1; m <= 7; ++m) {
    RngState rng(10);
    const SVDApprox a = rsi_extended(op.with_fresh_ledger(), 6, FixedMultiplications{m}, rng);
    EXPECT_EQ(a.multiplications, m);
    EXPECT_EQ(a.matvecs.count_A + a.matvecs.count_At, static_cast<std::uint64_t>(m * 6));
    EXPECT_EQ(a.matvecs.count_A, static_cast<std::uint64_t>((m + 1) / 2 * 6));
    expect_valid(a);
  }
}

TEST(RsiExtended, FrobeniusStopMeetsTarget) {
  const Spectrum spec = make_spectrum(SpectrumKind::exp_step, 400);
  const double fro = spec.norm(2.0);
  RngState rng(11);
  // Tail energy past rank 30 is e^{-6} of the total, below the 1% target.
  const SVDApprox a = rsi_extended(diag_operator(spec), 30, FroTolerance{0.1, fro}, rng);
  const double captured = a.S.vector().squaredNorm();
  EXPECT_LT(fro * fro - captured, 0.01 * fro * fro);
  const double direct = schatten_error(Matrix(spec.vector().asDiagonal()), a, 2.0);
  EXPECT_NEAR(direct * direct, fro * fro - captured, 1e-8 * fro * fro);
}

TEST(RsiExtended, FrobeniusStopUsesOperatorNormWhenUnset) {
  const Spectrum spec = make_spectrum(SpectrumKind::exp_step, 400);
  RngState a(12), b(12);
  const SVDApprox x = rsi_extended(diag_operator(spec), 30, FroTolerance{0.1, std::nullopt}, a);
  const SVDApprox y = rsi_extended(diag_operator(spec), 30, FroTolerance{0.1, spec.norm(2.0)}, b);
  EXPECT_EQ(x.multiplications, y.multiplications);
}

TEST(RsiExtended, UnreachableToleranceReportsBestSoFar) {
  const LinearOperator op = diag_operator(make_spectrum(SpectrumKind::flat, 50));
  RngState rng(13);
  RunOptions opts;
  opts.max_multiplications = 6;
  try {
    rsi_extended(op, 5, FroTolerance{1e-3, std::nullopt}, rng, opts);
    FAIL() << "expected TerminationCapReached";
  } catch (const TerminationCapReached<SVDApprox>& e) {
    EXPECT_EQ(e.best().multiplications, 6);
    EXPECT_EQ(e.best().rank(), 5);
  }
}

TEST(RsiExtended, NestedSketchesMonotone) {
  const Spectrum spec = make_spectrum(SpectrumKind::noisy_slow, 400);
  const LinearOperator op = diag_operator(spec);
  const Matrix a = spec.vector().asDiagonal();
  RngState rng(14);
  const Matrix omega = gaussian_matrix(rng, 400, 20);
  for (double p : {1.0, 2.0, kInf}) {
    double prev = std::numeric_limits<double>::infinity();
    for (Index k = 5; k <= 20; k += 5) {
      const double e = schatten_error(a, rsvd(op, omega.leftCols(k)), p);
      EXPECT_LE(e, prev + 1e-10 * spec[0]);
      prev = e;
    }
  }
}

TEST(RsiExtended, HouseholderMatchesStabilizedOnWellConditioned) {
  const LinearOperator op = diag_operator(make_spectrum(SpectrumKind::exp25, 300));
  RunOptions h;
  h.orthogonalization = Orthogonalization::householder;
  RngState a(15), b(15);
  const SVDApprox x = rsi_extended(op, 10, FixedMultiplications{4}, a);
  const SVDApprox y = rsi_extended(op, 10, FixedMultiplications{4}, b, h);
  ASSERT_EQ(x.rank(), y.rank());
  for (Index i = 0; i < x.rank(); ++i) EXPECT_NEAR(x.S[i], y.S[i], 1e-10 * x.S[0]);
}

TEST(StopRule, ValidatesAndDescribes) {
  EXPECT_THROW(validate(FixedMultiplications{0}), std::invalid_argument);
  EXPECT_THROW(validate(FroTolerance{0.0, std::nullopt}), std::invalid_argument);
  EXPECT_THROW(validate(ResidualTolerance{0, 1e-3}), std::invalid_argument);
  EXPECT_NO_THROW(validate(ResidualTolerance{3, 1e-3}));
  EXPECT_FALSE(describe(FixedMultiplications{5}).empty());
  EXPECT_NE(describe(FixedMultiplications{5}), describe(FixedMultiplications{6}));
}

TEST(Rsvd, RejectsOperatorWithoutAdjoint) {
  struct ApplyOnly {
    Index rows() const { return 4; }
    Index cols() const { return 4; }
    Matrix apply(const Matrix& x) const { return x; }
  };
  const LinearOperator op{ApplyOnly{}};
  RngState rng(16);
  EXPECT_FALSE(op.has_adjoint());
  EXPECT_THROW(rsvd(op, 2, rng), std::logic_error);
}
