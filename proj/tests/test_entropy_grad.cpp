#include <gtest/gtest.h>

#include <cmath>

#include "mveb/entropy_grad.hpp"
#include "mveb/experiments.hpp"

using namespace mveb;

namespace {

SteinConfig rbf() {
  SteinConfig c;
  c.kernel.family = KernelFamily::rbf;
  return c;
}

EntropyGradCheckOptions analytic_source() {
  EntropyGradCheckOptions o;
  o.score_source = ScoreSource::analytic_oracle;
  return o;
}

}  // namespace

TEST(EntropySurrogate, ZeroScoreGivesZero) {
  Rng rng(1);
  const Matrix z = experiments::standard_gaussian(5, 3, rng);
  const EntropySurrogate s = entropy_surrogate(z, ScoreMatrix::analytic(Matrix::Zero(5, 3)));
  EXPECT_EQ(s.value, 0.0);
  EXPECT_EQ(s.score_source, ScoreSource::analytic_oracle);
}

TEST(EntropySurrogate, UnitRowsAgainstThemselvesGiveOne) {
  Rng rng(2);
  Matrix z(7, 4);
  for (int i = 0; i < 7; ++i) z.row(i) = sample_uniform_sphere(4, rng).transpose();
  EXPECT_NEAR(entropy_surrogate(z, ScoreMatrix::analytic(z)).value, 1.0, 1e-15);
}

TEST(EntropySurrogate, LinearInScore) {
  Rng rng(3);
  const Matrix z = experiments::standard_gaussian(6, 2, rng);
  const Matrix s1 = experiments::standard_gaussian(6, 2, rng);
  const Matrix s2 = experiments::standard_gaussian(6, 2, rng);
  const double lhs = entropy_surrogate(z, ScoreMatrix::analytic(2.5 * s1 - 0.75 * s2)).value;
  const double rhs = 2.5 * entropy_surrogate(z, ScoreMatrix::analytic(s1)).value -
                     0.75 * entropy_surrogate(z, ScoreMatrix::analytic(s2)).value;
  EXPECT_NEAR(lhs, rhs, 1e-14);
}

TEST(EntropySurrogate, GradientIsScoreOverBatch) {
  Rng rng(4);
  const Matrix z = experiments::standard_gaussian(8, 3, rng);
  const ScoreMatrix s = ScoreMatrix::analytic(experiments::standard_gaussian(8, 3, rng));
  const Matrix g = entropy_surrogate_grad(z, s);
  EXPECT_LT((g - s.values / 8.0).cwiseAbs().maxCoeff(), 1e-16);
  // Moving z while holding S fixed changes the value by exactly g : dz.
  const Matrix dz = experiments::standard_gaussian(8, 3, rng) * 1e-3;
  const double delta = entropy_surrogate(Matrix(z + dz), s).value - entropy_surrogate(z, s).value;
  EXPECT_NEAR(delta, g.cwiseProduct(dz).sum(), 1e-15);
}

TEST(EntropySurrogate, RejectsAttachedScore) {
  ScoreMatrix s = ScoreMatrix::analytic(Matrix::Ones(2, 2));
  s.detached = false;
  EXPECT_THROW(entropy_surrogate(Matrix::Ones(2, 2), s), InvalidArgument);
  EXPECT_THROW(entropy_surrogate_grad(Matrix::Ones(2, 2), s), InvalidArgument);
}

TEST(EntropySurrogate, ShapeMismatch) {
  EXPECT_THROW(entropy_surrogate(Matrix::Ones(3, 2), ScoreMatrix::analytic(Matrix::Ones(2, 2))), InvalidArgument);
}

TEST(AnalyticEntropy, IdentityInTwoDimensions) {
  const LinearGaussianEntropy h = analytic_entropy_linear_gaussian(Matrix::Identity(2, 2));
  // mpmath: log(2 pi e)
  EXPECT_NEAR(h.entropy, 2.8378770664093454836, 1e-14);
  EXPECT_LT((h.grad - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(AnalyticEntropy, ScaledOneDimensional) {
  const LinearGaussianEntropy h = analytic_entropy_linear_gaussian(Matrix::Constant(1, 1, 2.0));
  // mpmath: 0.5 log(2 pi e) + log 2
  EXPECT_NEAR(h.entropy, 2.1120857137646180512, 1e-14);
  EXPECT_NEAR(h.grad(0, 0), 0.5, 1e-16);
}

TEST(AnalyticEntropy, NegativeDeterminantUsesAbsoluteValue) {
  Matrix a(2, 2);
  a << 0, 3, 2, 0;  // det = -6
  EXPECT_NEAR(analytic_entropy_linear_gaussian(a).entropy, 2.8378770664093454836 + std::log(6.0), 1e-14);
}

TEST(AnalyticEntropy, GradientMatchesFiniteDifferences) {
  Rng rng(11);
  const Matrix a = experiments::standard_gaussian(4, 4, rng) + 2.0 * Matrix::Identity(4, 4);
  const Matrix g = analytic_entropy_linear_gaussian(a).grad;
  const double h = 1e-6;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      Matrix up = a, down = a;
      up(i, j) += h;
      down(i, j) -= h;
      const double fd =
          (analytic_entropy_linear_gaussian(up).entropy - analytic_entropy_linear_gaussian(down).entropy) / (2 * h);
      EXPECT_NEAR(fd, g(i, j), 1e-6) << i << ' ' << j;
    }
}

TEST(AnalyticEntropy, RejectsSingularAndNonSquare) {
  EXPECT_THROW(analytic_entropy_linear_gaussian(Matrix::Zero(2, 2)), InvalidArgument);
  EXPECT_THROW(analytic_entropy_linear_gaussian(Matrix::Ones(2, 3)), InvalidArgument);
}

TEST(DrawBaseGaussian, MomentMatchedHasIdentityCovariance) {
  Rng rng(12);
  const Matrix v = draw_base_gaussian(200, 3, rng, true);
  EXPECT_LT(v.colwise().mean().norm(), 1e-13);
  EXPECT_LT((v.transpose() * v / 200.0 - Matrix::Identity(3, 3)).norm(), 1e-12);
  EXPECT_THROW(draw_base_gaussian(3, 3, rng, true), InvalidArgument);
}

TEST(EntropyGradCheck, AnalyticScoreRecoversGradient) {
  Matrix a(3, 3);
  a << 1.2, 0.3, -0.1, 0.0, 0.8, 0.4, 0.2, -0.3, 1.5;
  Rng rng(13);
  EXPECT_LT(entropy_grad_check(a, 4096, rbf(), rng, analytic_source()).relative_error, 1e-3);
}

TEST(EntropyGradCheck, SteinScoreWithinFrozenBound) {
  // Calibrated median over seeds at M = 2048: 0.0034 (d=2), 0.0048 (d=3),
  // 0.0058 (d=4). Bound frozen at 0.02.
  Rng rng(43);
  EXPECT_LE(entropy_grad_check(Matrix::Identity(3, 3), 2048, rbf(), rng).relative_error, 0.02);
}

TEST(EntropyGradCheck, ErrorShrinksFromM64ToM1024) {
  double small = 0.0, large = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng a(seed), b(seed);
    small += entropy_grad_check(Matrix::Identity(2, 2), 64, rbf(), a).relative_error;
    large += entropy_grad_check(Matrix::Identity(2, 2), 1024, rbf(), b).relative_error;
  }
  EXPECT_LE(large, small);
}

TEST(EntropyGradCheck, NonIdentityMapWithinFivePercent) {
  Matrix a(2, 2);
  a << 1.5, 0.5, 0.0, 0.7;
  Rng rng(21);
  EXPECT_LT(entropy_grad_check(a, 2048, rbf(), rng).relative_error, 0.05);
}

TEST(EntropyGradCheck, FlippedSignIsDetected) {
  EntropyGradCheckOptions o = analytic_source();
  o.flip_score_sign = true;
  Rng rng(22);
  EXPECT_NEAR(entropy_grad_check(Matrix::Identity(2, 2), 512, rbf(), rng, o).relative_error, 2.0, 1e-10);
}
