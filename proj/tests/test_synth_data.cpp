#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "mveb/experiments.hpp"
#include "mveb/synth_data.hpp"

using namespace mveb;

namespace {

Matrix sphere_rows(int m, int d, Rng& rng) {
  Matrix z(m, d);
  for (int i = 0; i < m; ++i) z.row(i) = sample_uniform_sphere(d, rng).transpose();
  return z;
}

double probe_raw(const GenConfig& g, int m) {
  ViewGenerator tr(g, 11), te(g, 12);
  const auto a = tr.next(m), b = te.next(m);
  return linear_probe(a.v1, a.labels, b.v1, b.labels);
}

}  // namespace

TEST(GenConfig, Validation) {
  GenConfig g;
  EXPECT_NO_THROW(g.validate());
  g.num_classes = 0;
  EXPECT_THROW(g.validate(), ConfigError);
  g = GenConfig{};
  g.noise_scale = -0.1;
  EXPECT_THROW(ViewGenerator{g}, ConfigError);
}

TEST(ViewGenerator, ShapesAndLabelRange) {
  ViewGenerator gen(GenConfig{});
  const ViewPairBatch b = gen.next(100);
  EXPECT_EQ(b.v1.rows(), 100);
  EXPECT_EQ(b.v1.cols(), 32);
  EXPECT_EQ(b.v2.cols(), 32);
  EXPECT_EQ(b.latent.cols(), 8);
  ASSERT_EQ(b.labels.size(), 100u);
  for (int lab : b.labels) {
    EXPECT_GE(lab, 0);
    EXPECT_LT(lab, 8);
  }
  EXPECT_THROW(gen.next(0), InvalidArgument);
}

TEST(ViewGenerator, SameSeedSameStreamIsIdentical) {
  ViewGenerator a(GenConfig{}, 3), b(GenConfig{}, 3);
  const auto x = a.next(50), y = b.next(50);
  EXPECT_EQ(x.v1, y.v1);
  EXPECT_EQ(x.v2, y.v2);
  EXPECT_EQ(x.labels, y.labels);
}

TEST(ViewGenerator, StreamsShareStructureNotSamples) {
  ViewGenerator a(GenConfig{}, 0), b(GenConfig{}, 1);
  EXPECT_EQ(a.prototypes(), b.prototypes());
  EXPECT_EQ(a.shared_map(), b.shared_map());
  EXPECT_NE(a.next(10).v1, b.next(10).v1);
  GenConfig other;
  other.seed = 1;
  EXPECT_NE(ViewGenerator(other).shared_map(), a.shared_map());
}

TEST(ViewGenerator, NoiselessViewsCoincideAndDependOnlyOnLatent) {
  GenConfig g;
  g.nuisance_scale = 0.0;
  g.noise_scale = 0.0;
  g.class_jitter = 0.0;
  ViewGenerator gen(g);
  const ViewPairBatch b = gen.next(64);
  EXPECT_EQ(b.v1, b.v2);
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j)
      if (b.labels[i] == b.labels[j]) EXPECT_EQ(b.v1.row(i), b.v1.row(j));
}

TEST(ViewGenerator, PrototypesAreUnitAndSeparated) {
  ViewGenerator gen(GenConfig{});
  const Matrix& p = gen.prototypes();
  ASSERT_EQ(p.rows(), 8);
  const double max_cos = std::cos(kPrototypeMinAngleDeg * std::numbers::pi / 180.0);
  for (int i = 0; i < 8; ++i) {
    EXPECT_NEAR(p.row(i).norm(), 1.0, 1e-12);
    for (int j = i + 1; j < 8; ++j) EXPECT_LE(p.row(i).dot(p.row(j)), max_cos + 1e-12);
  }
}

TEST(ViewGenerator, SeveredSharedPathProbesAtChance) {
  GenConfig g;
  g.shared_scale = 0.0;
  // Measured 0.1306 with 8 classes.
  EXPECT_NEAR(probe_raw(g, 4096), 0.125, 0.03);
}

TEST(ViewGenerator, RawProbeCeiling) {
  // Dataset ceiling for the default config, probe sets of 4096: 0.9036.
  const double acc = probe_raw(GenConfig{}, 4096);
  EXPECT_GT(acc, 0.5);
  EXPECT_NEAR(acc, 0.903564453125, 1e-9);
}

TEST(Dataset, RoundTripIsExact) {
  GenConfig g;
  g.input_dim = 5;
  g.latent_dim = 3;
  ViewGenerator gen(g, 4);
  const ViewPairBatch b = gen.next(20);
  std::stringstream buf;
  write_dataset(buf, b, g, 4);
  const ViewPairBatch back = read_dataset(buf);
  EXPECT_EQ(back.v1, b.v1);
  EXPECT_EQ(back.v2, b.v2);
  EXPECT_EQ(back.labels, b.labels);
  EXPECT_EQ(back.latent, b.latent);
}

TEST(Dataset, RejectsMalformedInput) {
  std::stringstream bad("mveb-dataset 2\n");
  EXPECT_THROW(read_dataset(bad), InvalidArgument);
  std::stringstream truncated("mveb-dataset 1\nm 2 input_dim 1 latent_dim 1 seed 0 stream 0\nv1\n1\n");
  EXPECT_THROW(read_dataset(truncated), InvalidArgument);
}

TEST(LinearProbe, SeparableTrainSetAsTest) {
  Matrix z(40, 2);
  std::vector<int> labels(40);
  for (int i = 0; i < 40; ++i) {
    labels[i] = i % 2;
    z(i, 0) = (labels[i] ? 1.0 : -1.0) * (1.0 + 0.05 * i);
    z(i, 1) = 0.01 * i;
  }
  ProbeConfig c;
  c.l2 = 0.0;
  EXPECT_EQ(linear_probe(z, labels, z, labels, c), 1.0);
}

TEST(LinearProbe, OneHotFeatures) {
  const int m = 60, classes = 5;
  Matrix z = Matrix::Zero(m, classes);
  std::vector<int> labels(m);
  for (int i = 0; i < m; ++i) {
    labels[i] = (i * 7) % classes;
    z(i, labels[i]) = 1.0;
  }
  EXPECT_EQ(linear_probe(z, labels, z, labels), 1.0);
}

TEST(LinearProbe, ShuffledLabelsAtChance) {
  Rng rng(3);
  const int m = 2000;
  const Matrix train = experiments::standard_gaussian(m, 8, rng);
  const Matrix test = experiments::standard_gaussian(m, 8, rng);
  std::uniform_int_distribution<int> cls(0, 3);
  std::vector<int> ltr(m), lte(m);
  for (auto& l : ltr) l = cls(rng);
  for (auto& l : lte) l = cls(rng);
  EXPECT_NEAR(linear_probe(train, ltr, test, lte), 0.25, 0.05);
}

TEST(LinearProbe, Validation) {
  const Matrix z = Matrix::Ones(3, 2);
  EXPECT_THROW(linear_probe(z, {0, 1}, z, {0, 1, 0}), InvalidArgument);
  EXPECT_THROW(linear_probe(z, {0, 0, 0}, z, {0, 1, 0}), InvalidArgument);
  EXPECT_THROW(linear_probe(z, {0, -1, 0}, z, {0, 1, 0}), InvalidArgument);
}

TEST(Uniformity, IdenticalPointsGiveZero) {
  Matrix z(5, 3);
  z.rowwise() = Eigen::RowVector3d(0, 0.6, 0.8);
  EXPECT_EQ(uniformity_metric(z), 0.0);
}

TEST(Uniformity, AntipodalPair) {
  Matrix z(2, 2);
  z << 1, 0, -1, 0;
  EXPECT_NEAR(uniformity_metric(z), -8.0, 1e-15);
}

TEST(Uniformity, MatchesBruteForceOnS15) {
  Rng rng(4);
  const Matrix z = sphere_rows(512, 16, rng);
  double sum = 0.0;
  int pairs = 0;
  for (int i = 0; i < 512; ++i)
    for (int j = i + 1; j < 512; ++j, ++pairs) sum += std::exp(-2.0 * (z.row(i) - z.row(j)).squaredNorm());
  EXPECT_NEAR(uniformity_metric(z), std::log(sum / pairs), 1e-12);
}

TEST(Spread, ConstantBatchIsZero) {
  EXPECT_EQ(embedding_spread(Matrix::Constant(4, 3, 0.5)), 0.0);
}

TEST(Spread, AntipodalAxisPair) {
  Matrix z(2, 2);
  z << 1, 0, -1, 0;
  EXPECT_EQ(embedding_spread(z), 0.5);
}

TEST(Spread, UniformSphereInSixteenDimensions) {
  Rng rng(5);
  EXPECT_NEAR(embedding_spread(sphere_rows(1024, 16, rng)), 0.25, 0.03);
}

TEST(AlignmentMetric, MeanSquaredDistance) {
  Matrix a(2, 2), b(2, 2);
  a << 1, 0, 0, 1;
  b << 1, 0, 0, -1;
  EXPECT_EQ(alignment_metric(a, b), 2.0);
  EXPECT_EQ(alignment_metric(a, a), 0.0);
  EXPECT_THROW(alignment_metric(a, Matrix(3, 2)), InvalidArgument);
}
