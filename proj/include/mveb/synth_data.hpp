#pragma once

// Synthetic two-view data with a shared class-structured latent and
// view-private nuisance, plus representation metrics (linear probe,
// uniformity, spread).
//
//   c ~ U{0..C-1},  y = proto_c + jitter * N(0, I)
//   v_k = shared * W_s y + nuisance * W_k n_k + noise * eps_k,   k = 1, 2
//
// W_s, W_1, W_2 and the prototypes are fixed by the seed. Batches are drawn
// from a stream seeded by (seed, stream id), so training and probe sets
// share structure but not samples.
//
// Dataset dump format (text):
//
//   mveb-dataset 1
//   m <m> input_dim <n> latent_dim <l> seed <s> stream <k>
//   v1 followed by m*n values, v2 followed by m*n values,
//   labels followed by m integers, latent followed by m*l values
//
// Rows are row-major, values at 17 significant digits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "mveb/error.hpp"
#include "mveb/sphere_vmf.hpp"

namespace mveb {

struct GenConfig {
  int num_classes = 8;
  int latent_dim = 8;
  int input_dim = 32;
  double shared_scale = 1.0;
  double nuisance_scale = 1.0;
  double noise_scale = 0.1;
  /// Within-class spread of the latent around its prototype.
  double class_jitter = 0.3;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require_config(num_classes >= 1, "num_classes must be >= 1");
    detail::require_config(latent_dim >= 1, "latent_dim must be >= 1");
    detail::require_config(input_dim >= 1, "input_dim must be >= 1");
    detail::require_config(shared_scale >= 0.0, "shared_scale must be >= 0");
    detail::require_config(nuisance_scale >= 0.0, "nuisance_scale must be >= 0");
    detail::require_config(noise_scale >= 0.0, "noise_scale must be >= 0");
    detail::require_config(class_jitter >= 0.0, "class_jitter must be >= 0");
  }
};

struct ViewPairBatch {
  Matrix v1;
  Matrix v2;
  std::vector<int> labels;
  Matrix latent;

  Eigen::Index size() const noexcept { return v1.rows(); }
};

/// Minimum pairwise angle between class prototypes in latent space.
inline constexpr double kPrototypeMinAngleDeg = 60.0;

class ViewGenerator {
 public:
  explicit ViewGenerator(const GenConfig& cfg, std::uint64_t stream = 0) : cfg_(cfg), stream_(stream) {
    cfg_.validate();
    Rng structure(cfg_.seed);
    prototypes_ = make_prototypes(structure);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto random_map = [&](int rows, int cols) {
      Matrix w(rows, cols);
      const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) w(r, c) = scale * normal(structure);
      return w;
    };
    shared_map_ = random_map(cfg_.input_dim, cfg_.latent_dim);
    nuisance_map_1_ = random_map(cfg_.input_dim, cfg_.latent_dim);
    nuisance_map_2_ = random_map(cfg_.input_dim, cfg_.latent_dim);
    // splitmix-style mixing keeps stream seeds far apart.
    std::uint64_t s = cfg_.seed + 0x9E3779B97F4A7C15ull * (stream_ + 1);
    s = (s ^ (s >> 30)) * 0xBF58476D1CE4E5B9ull;
    s = (s ^ (s >> 27)) * 0x94D049BB133111EBull;
    sampler_.seed(s ^ (s >> 31));
  }

  const GenConfig& config() const noexcept { return cfg_; }
  const Matrix& prototypes() const noexcept { return prototypes_; }
  const Matrix& shared_map() const noexcept { return shared_map_; }

  ViewPairBatch next(int m) {
    detail::require(m >= 1, "generate requires m >= 1");
    std::uniform_int_distribution<int> cls(0, cfg_.num_classes - 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int l = cfg_.latent_dim;
    const int n = cfg_.input_dim;
    ViewPairBatch b;
    b.labels.resize(static_cast<std::size_t>(m));
    b.latent.resize(m, l);
    b.v1.resize(m, n);
    b.v2.resize(m, n);
    Vector y(l), n1(l), n2(l), e1(n), e2(n);
    for (int i = 0; i < m; ++i) {
      const int c = cls(sampler_);
      for (int k = 0; k < l; ++k) y[k] = prototypes_(c, k) + cfg_.class_jitter * normal(sampler_);
      for (int k = 0; k < l; ++k) n1[k] = normal(sampler_);
      for (int k = 0; k < l; ++k) n2[k] = normal(sampler_);
      for (int k = 0; k < n; ++k) e1[k] = normal(sampler_);
      for (int k = 0; k < n; ++k) e2[k] = normal(sampler_);
      const Vector base = cfg_.shared_scale * (shared_map_ * y);
      b.v1.row(i) = (base + cfg_.nuisance_scale * (nuisance_map_1_ * n1) + cfg_.noise_scale * e1).transpose();
      b.v2.row(i) = (base + cfg_.nuisance_scale * (nuisance_map_2_ * n2) + cfg_.noise_scale * e2).transpose();
      b.latent.row(i) = y.transpose();
      b.labels[static_cast<std::size_t>(i)] = c;
    }
    return b;
  }

 private:
  // Unit prototypes drawn by rejection until every pair is >= 60 degrees
  // apart. Falls back to the best set found if the constraint is infeasible.
  Matrix make_prototypes(Rng& rng) const {
    const int c = cfg_.num_classes;
    const int l = cfg_.latent_dim;
    const double max_cos = std::cos(kPrototypeMinAngleDeg * std::numbers::pi / 180.0) + 1e-12;
    Matrix protos(c, l);
    if (l == 1) {
      for (int i = 0; i < c; ++i) protos(i, 0) = i % 2 == 0 ? 1.0 : -1.0;
      return protos;
    }
    for (int i = 0; i < c; ++i) {
      Vector best;
      double best_cos = 2.0;
      for (int attempt = 0; attempt < 10000; ++attempt) {
        Vector cand = sample_uniform_sphere(l, rng);
        double worst = -1.0;
        for (int j = 0; j < i; ++j) worst = std::max(worst, protos.row(j).dot(cand));
        if (worst < best_cos) {
          best_cos = worst;
          best = cand;
        }
        if (worst <= max_cos) break;
      }
      protos.row(i) = best.transpose();
    }
    return protos;
  }

  GenConfig cfg_;
  std::uint64_t stream_;
  Matrix prototypes_;
  Matrix shared_map_;
  Matrix nuisance_map_1_;
  Matrix nuisance_map_2_;
  Rng sampler_;
};

/// First batch of stream 0; deterministic in (cfg, m).
inline ViewPairBatch generate(const GenConfig& cfg, int m) {
  ViewGenerator gen(cfg);
  return gen.next(m);
}

inline constexpr const char* kDatasetMagic = "mveb-dataset";
inline constexpr int kDatasetVersion = 1;

inline void write_dataset(std::ostream& os, const ViewPairBatch& b, const GenConfig& cfg, std::uint64_t stream) {
  os << kDatasetMagic << ' ' << kDatasetVersion << '\n';
  os << "m " << b.size() << " input_dim " << b.v1.cols() << " latent_dim " << b.latent.cols() << " seed "
     << cfg.seed << " stream " << stream << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  auto rows = [&os](const char* name, const Matrix& x) {
    os << name << '\n';
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) os << (c ? " " : "") << x(r, c);
      os << '\n';
    }
  };
  rows("v1", b.v1);
  rows("v2", b.v2);
  os << "labels\n";
  for (std::size_t i = 0; i < b.labels.size(); ++i) os << (i ? " " : "") << b.labels[i];
  os << '\n';
  rows("latent", b.latent);
}

inline ViewPairBatch read_dataset(std::istream& is) {
  auto fail = [](const std::string& what) { throw InvalidArgument("malformed dataset: " + what); };
  std::string magic, k1, k2, k3, k4, k5;
  int version = 0;
  Eigen::Index m = 0, n = 0, l = 0;
  std::uint64_t seed = 0, stream = 0;
  if (!(is >> magic >> version) || magic != kDatasetMagic || version != kDatasetVersion) fail("bad header");
  if (!(is >> k1 >> m >> k2 >> n >> k3 >> l >> k4 >> seed >> k5 >> stream) || k1 != "m" || m < 1 || n < 1 || l < 1)
    fail("bad dimensions line");
  auto rows = [&](const char* name, Eigen::Index r, Eigen::Index c) {
    std::string tag;
    if (!(is >> tag) || tag != name) fail(std::string("expected section ") + name);
    Matrix x(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j)
        if (!(is >> x(i, j))) fail(std::string("truncated section ") + name);
    return x;
  };
  ViewPairBatch b;
  b.v1 = rows("v1", m, n);
  b.v2 = rows("v2", m, n);
  std::string tag;
  if (!(is >> tag) || tag != "labels") fail("expected section labels");
  b.labels.resize(static_cast<std::size_t>(m));
  for (auto& lab : b.labels)
    if (!(is >> lab)) fail("truncated labels");
  b.latent = rows("latent", m, l);
  return b;
}

/// Multinomial logistic regression probe: full-batch gradient descent with an
/// l2 penalty on the weights. Returns test accuracy.
struct ProbeConfig {
  int steps = 500;
  double lr = 0.1;
  double l2 = 1e-3;
};

inline double linear_probe(const Matrix& train_z, const std::vector<int>& train_labels, const Matrix& test_z,
                           const std::vector<int>& test_labels, const ProbeConfig& cfg = {}) {
  detail::require(train_z.rows() == static_cast<Eigen::Index>(train_labels.size()), "probe: train shape mismatch");
  detail::require(test_z.rows() == static_cast<Eigen::Index>(test_labels.size()), "probe: test shape mismatch");
  detail::require(train_z.cols() == test_z.cols(), "probe: feature dimension mismatch");
  detail::require(train_z.rows() >= 1 && test_z.rows() >= 1, "probe: empty set");
  detail::require(cfg.l2 >= 0.0 && cfg.lr > 0.0 && cfg.steps >= 0, "probe: invalid optimizer settings");
  for (int lab : train_labels) detail::require(lab >= 0, "probe: negative label");
  for (int lab : test_labels) detail::require(lab >= 0, "probe: negative label");

  const int classes = 1 + std::max(*std::max_element(train_labels.begin(), train_labels.end()),
                                   *std::max_element(test_labels.begin(), test_labels.end()));
  std::vector<int> seen(static_cast<std::size_t>(classes), 0);
  for (int lab : train_labels) seen[static_cast<std::size_t>(lab)] = 1;
  detail::require(std::accumulate(seen.begin(), seen.end(), 0) >= 2, "probe: training set has a single class");

  const Eigen::Index m = train_z.rows();
  const Eigen::Index d = train_z.cols();
  Matrix onehot = Matrix::Zero(m, classes);
  for (Eigen::Index i = 0; i < m; ++i) onehot(i, train_labels[static_cast<std::size_t>(i)]) = 1.0;

  Matrix w = Matrix::Zero(d, classes);
  Eigen::RowVectorXd bias = Eigen::RowVectorXd::Zero(classes);
  for (int step = 0; step < cfg.steps; ++step) {
    Matrix logits = (train_z * w).rowwise() + bias;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double peak = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - peak).exp().matrix();
      logits.row(i) /= logits.row(i).sum();
    }
    const Matrix err = (logits - onehot) / static_cast<double>(m);
    w -= cfg.lr * (train_z.transpose() * err + cfg.l2 * w);
    bias -= cfg.lr * err.colwise().sum();
  }

  const Matrix scores = (test_z * w).rowwise() + bias;
  int correct = 0;
  for (Eigen::Index i = 0; i < test_z.rows(); ++i) {
    Eigen::Index arg = 0;
    scores.row(i).maxCoeff(&arg);
    if (static_cast<int>(arg) == test_labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_z.rows());
}

/// log mean over distinct pairs of exp(-2 ||z_i - z_j||^2).
inline double uniformity_metric(const Matrix& z) {
  detail::require(z.rows() >= 2, "uniformity_metric requires at least 2 samples");
  const Eigen::Index m = z.rows();
  const Vector sq = z.rowwise().squaredNorm();
  const Matrix inner = z * z.transpose();
  // Terms are <= 1, so summing directly in linear space is safe down to
  // exp(-8) per pair on the unit sphere.
  double sum = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double d2 = std::max(0.0, sq[i] + sq[j] - 2.0 * inner(i, j));
      sum += std::exp(-2.0 * d2);
    }
  const double pairs = 0.5 * static_cast<double>(m) * static_cast<double>(m - 1);
  return std::log(sum / pairs);
}

/// Mean over coordinates of the population standard deviation across rows.
inline double embedding_spread(const Matrix& z) {
  detail::require(z.rows() >= 2, "embedding_spread requires at least 2 samples");
  const Eigen::RowVectorXd mean = z.colwise().mean();
  const Matrix centered = z.rowwise() - mean;
  const Eigen::RowVectorXd var = centered.colwise().squaredNorm() / static_cast<double>(z.rows());
  return var.array().sqrt().mean();
}

/// Mean squared distance between paired embeddings, E ||z1 - z2||^2.
inline double alignment_metric(const Matrix& z1, const Matrix& z2) {
  detail::require(z1.rows() == z2.rows() && z1.cols() == z2.cols() && z1.rows() >= 1,
                  "alignment_metric: shape mismatch");
  return (z1 - z2).rowwise().squaredNorm().mean();
}

}  // namespace mveb
