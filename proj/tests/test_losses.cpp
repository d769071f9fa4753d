#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "mveb/experiments.hpp"
#include "mveb/losses.hpp"

using namespace mveb;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(xs.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : xs) {
    Eigen::Index j = 0;
    for (double x : r) m(i, j++) = x;
    ++i;
  }
  return m;
}

Matrix sphere_rows(int m, int d, Rng& rng) {
  Matrix z(m, d);
  for (int i = 0; i < m; ++i) z.row(i) = sample_uniform_sphere(d, rng).transpose();
  return z;
}

// Central differences of f with respect to every entry of z1 and z2.
PairGrad numeric_grad(const std::function<double(const Matrix&, const Matrix&)>& f, const Matrix& z1,
                      const Matrix& z2, double h = 1e-6) {
  PairGrad g{Matrix(z1.rows(), z1.cols()), Matrix(z2.rows(), z2.cols())};
  for (Eigen::Index i = 0; i < z1.rows(); ++i)
    for (Eigen::Index j = 0; j < z1.cols(); ++j) {
      Matrix up = z1, down = z1;
      up(i, j) += h;
      down(i, j) -= h;
      g.d_z1(i, j) = (f(up, z2) - f(down, z2)) / (2 * h);
      up = z2;
      down = z2;
      up(i, j) += h;
      down(i, j) -= h;
      g.d_z2(i, j) = (f(z1, up) - f(z1, down)) / (2 * h);
    }
  return g;
}

double max_gap(const PairGrad& a, const PairGrad& b) {
  return std::max((a.d_z1 - b.d_z1).cwiseAbs().maxCoeff(), (a.d_z2 - b.d_z2).cwiseAbs().maxCoeff());
}

}  // namespace

TEST(Alignment, IdenticalAntipodalOrthogonal) {
  Rng rng(1);
  const Matrix z = sphere_rows(6, 4, rng);
  EXPECT_NEAR(alignment(z, z), 1.0, 1e-15);
  EXPECT_NEAR(alignment(z, Matrix(-z)), -1.0, 1e-15);
  EXPECT_EQ(alignment(rows({{1, 0}, {0, 1}}), rows({{0, 1}, {-1, 0}})), 0.0);
}

TEST(Alignment, PermutingPairsTogetherIsInvariant) {
  Rng rng(2);
  const Matrix z1 = sphere_rows(5, 3, rng), z2 = sphere_rows(5, 3, rng);
  const Matrix p1 = z1.colwise().reverse(), p2 = z2.colwise().reverse();
  EXPECT_NEAR(alignment(p1, p2), alignment(z1, z2), 1e-15);
}

TEST(Alignment, RejectsMismatchedBatches) {
  EXPECT_THROW(alignment(Matrix::Ones(2, 2), Matrix::Ones(3, 2)), InvalidArgument);
  EXPECT_THROW(alignment(Matrix(0, 2), Matrix(0, 2)), InvalidArgument);
}

TEST(MvebLoss, BetaZeroIsNegativeAlignment) {
  Rng rng(3);
  const Matrix z1 = sphere_rows(8, 3, rng), z2 = sphere_rows(8, 3, rng);
  const ScoreMatrix s = ScoreMatrix::analytic(sphere_rows(8, 3, rng));
  const LossTerms t = mveb_loss(z1, z2, s, s, 0.0);
  EXPECT_EQ(t.total, -t.alignment);
}

TEST(MvebLoss, SmallArithmeticExample) {
  const Matrix z1 = rows({{1, 0}, {0, 1}});
  const Matrix z2 = rows({{1, 0}, {1, 0}});
  const ScoreMatrix zero = ScoreMatrix::analytic(Matrix::Zero(2, 2));
  const LossTerms t = mveb_loss(z1, z2, zero, zero, 0.01);
  EXPECT_EQ(t.alignment, 0.5);
  EXPECT_EQ(t.total, -0.5);
  EXPECT_EQ(t.entropy_surr_1, 0.0);
  EXPECT_EQ(t.entropy_surr_2, 0.0);
  EXPECT_EQ(t.beta, 0.01);
}

TEST(MvebLoss, MatchesDirectRecomputationWithSteinScores) {
  Rng rng(5);
  const Matrix z1 = sphere_rows(32, 4, rng), z2 = sphere_rows(32, 4, rng);
  const ScoreMatrix s1 = stein_estimate(z1, SteinConfig{}), s2 = stein_estimate(z2, SteinConfig{});
  const double beta = 0.3;
  double align = 0.0, e1 = 0.0, e2 = 0.0;
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 4; ++j) {
      align += z1(i, j) * z2(i, j);
      e1 += s1.values(i, j) * z1(i, j);
      e2 += s2.values(i, j) * z2(i, j);
    }
  align /= 32;
  e1 /= 32;
  e2 /= 32;
  const LossTerms t = mveb_loss(z1, z2, s1, s2, beta);
  EXPECT_NEAR(t.alignment, align, 1e-12);
  EXPECT_NEAR(t.entropy_surr_1, e1, 1e-12);
  EXPECT_NEAR(t.entropy_surr_2, e2, 1e-12);
  EXPECT_NEAR(t.total, -align + 0.5 * beta * (e1 + e2), 1e-12);
}

TEST(MvebLoss, RejectsNegativeBetaAndAttachedScores) {
  const Matrix z = rows({{1, 0}});
  const ScoreMatrix s = ScoreMatrix::analytic(rows({{0, 1}}));
  EXPECT_THROW(mveb_loss(z, z, s, s, -0.1), InvalidArgument);
  ScoreMatrix attached = s;
  attached.detached = false;
  EXPECT_THROW(mveb_loss(z, z, attached, s, 0.1), InvalidArgument);
}

TEST(MvebLoss, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  const Matrix z1 = sphere_rows(6, 3, rng), z2 = sphere_rows(6, 3, rng);
  const ScoreMatrix s1 = ScoreMatrix::analytic(experiments::standard_gaussian(6, 3, rng));
  const ScoreMatrix s2 = ScoreMatrix::analytic(experiments::standard_gaussian(6, 3, rng));
  const auto f = [&](const Matrix& a, const Matrix& b) { return mveb_loss(a, b, s1, s2, 0.7).total; };
  EXPECT_LT(max_gap(numeric_grad(f, z1, z2), mveb_loss_grad(z1, z2, s1, s2, 0.7)), 1e-9);
}

TEST(InfoNce, TwoSampleClosedForm) {
  const Matrix z = rows({{1, 0}, {0, 1}});
  // mpmath: -log(e / (e + 1))
  EXPECT_NEAR(infonce_loss(z, z, 1.0), 0.31326168751822283405, 1e-15);
}

TEST(InfoNce, IdenticalEmbeddingsGiveLogM) {
  const Matrix z = Matrix::Constant(7, 2, std::sqrt(0.5));
  EXPECT_NEAR(infonce_loss(z, z, 0.3), std::log(7.0), 1e-13);
}

TEST(InfoNce, MatchesBruteForceSoftmax) {
  Rng rng(7);
  const Matrix z1 = sphere_rows(9, 5, rng), z2 = sphere_rows(9, 5, rng);
  const double tau = 0.4;
  double loss = 0.0;
  for (int i = 0; i < 9; ++i) {
    double denom = 0.0;
    for (int j = 0; j < 9; ++j) denom += std::exp(z1.row(i).dot(z2.row(j)) / tau);
    loss += -std::log(std::exp(z1.row(i).dot(z2.row(i)) / tau) / denom);
  }
  EXPECT_NEAR(infonce_loss(z1, z2, tau), loss / 9, 1e-12);
}

TEST(InfoNce, StableAtTinyTemperature) {
  Rng rng(8);
  const Matrix z1 = sphere_rows(5, 3, rng), z2 = sphere_rows(5, 3, rng);
  EXPECT_TRUE(std::isfinite(infonce_loss(z1, z2, 1e-4)));
}

TEST(InfoNce, Validation) {
  EXPECT_THROW(infonce_loss(rows({{1, 0}}), rows({{1, 0}}), 1.0), InvalidArgument);
  EXPECT_THROW(infonce_loss(Matrix::Identity(2, 2), Matrix::Identity(2, 2), 0.0), InvalidArgument);
}

TEST(InfoNce, GradientMatchesFiniteDifferences) {
  Rng rng(9);
  const Matrix z1 = sphere_rows(6, 4, rng), z2 = sphere_rows(6, 4, rng);
  const auto f = [](const Matrix& a, const Matrix& b) { return infonce_loss(a, b, 0.5); };
  EXPECT_LT(max_gap(numeric_grad(f, z1, z2), infonce_loss_grad(z1, z2, 0.5)), 1e-8);
}

TEST(InfoNceLimit, OrthogonalNegativesGiveZeroLse) {
  const Matrix z = rows({{1, 0, 0}, {0, 1, 0}});
  const Matrix neg = rows({{0, 0, 1}, {0, 0, -1}});
  EXPECT_NEAR(infonce_limit_terms(z, z, neg, 1.0).lse, 0.0, 1e-15);
}

TEST(InfoNceLimit, AlignedTermAtTemperatureTwo) {
  Rng rng(10);
  const Matrix z = sphere_rows(4, 3, rng);
  EXPECT_NEAR(infonce_limit_terms(z, z, z, 2.0).aligned, -0.5, 1e-15);
}

TEST(InfoNceLimit, LseMatchesDirectSum) {
  Rng rng(11);
  const Matrix z1 = sphere_rows(3, 4, rng), neg = sphere_rows(10, 4, rng);
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    double mean = 0.0;
    for (int k = 0; k < 10; ++k) mean += std::exp(neg.row(k).dot(z1.row(i)) / 0.5) / 10;
    expected += std::log(mean) / 3;
  }
  EXPECT_NEAR(infonce_limit_terms(z1, z1, neg, 0.5).lse, expected, 1e-13);
}

TEST(InfoNceLimit, GapShrinksWithBatchSize) {
  const experiments::NoisyPairSource src;
  const auto gaps = experiments::infonce_limit_gaps({8, 64, 1024}, 8, 0.5, 2000, src);
  ASSERT_EQ(gaps.size(), 3u);
  EXPECT_GT(gaps[0], gaps[1]);
  EXPECT_GT(gaps[1], gaps[2]);
}

TEST(Decorrelation, SingleSampleExample) {
  const Matrix z = rows({{1, 0}});
  EXPECT_EQ(decorrelation_loss(z, z, 1.0), 0.0);
}

TEST(Decorrelation, LambdaZeroIsNegativeAlignment) {
  Rng rng(12);
  const Matrix z1 = sphere_rows(5, 3, rng), z2 = sphere_rows(5, 3, rng);
  EXPECT_EQ(decorrelation_loss(z1, z2, 0.0), -alignment(z1, z2));
}

TEST(Decorrelation, OrthonormalBatchQuadraticTerm) {
  Rng rng(13);
  const Matrix q = experiments::random_rotation(6, rng);
  // F = I / 6, so every sample contributes 1/6.
  EXPECT_NEAR(decorrelation_loss(q, q, 1.0), -1.0 + 1.0 / 6.0, 1e-14);
  EXPECT_NEAR(decorrelation_loss(q, q, 2.5), -1.0 + 2.5 / 6.0, 1e-14);
}

TEST(Decorrelation, GradientMatchesFiniteDifferences) {
  Rng rng(14);
  const Matrix z1 = sphere_rows(7, 3, rng), z2 = sphere_rows(7, 3, rng);
  const auto f = [](const Matrix& a, const Matrix& b) { return decorrelation_loss(a, b, 1.3); };
  EXPECT_LT(max_gap(numeric_grad(f, z1, z2), decorrelation_loss_grad(z1, z2, 1.3)), 1e-9);
  EXPECT_THROW(decorrelation_loss(z1, z2, -1.0), InvalidArgument);
}

TEST(BaselineConfig, Validation) {
  BaselineConfig c;
  EXPECT_NO_THROW(c.validate());
  c.temperature = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = BaselineConfig{};
  c.decorrelation_lambda = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}
