#pragma once

// Seeded numerical experiments shared by `mveb verify` and the acceptance
// suite. Each routine returns raw observations; thresholds live with the
// callers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <utility>
#include <random>
#include <vector>

#include "mveb/encoder.hpp"
#include "mveb/info_oracle.hpp"
#include "mveb/losses.hpp"
#include "mveb/sphere_vmf.hpp"
#include "mveb/stein_score.hpp"

namespace mveb::experiments {

inline Matrix standard_gaussian(int m, int d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(m, d);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = normal(rng);
  return x;
}

/// Random orthogonal matrix (QR of a Gaussian matrix with sign fix).
inline Matrix random_rotation(int d, Rng& rng) {
  const Matrix g = standard_gaussian(d, d, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
inline std::pair<Vector, Vector> gauss_legendre(int n) {
  detail::require(n >= 1, "gauss_legendre requires n >= 1");
  Vector x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double step = p1 / dp;
      t -= step;
      if (std::abs(step) < 1e-16) break;
    }
    x[i] = t;
    w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
  return {x, w};
}

/// Integral of exp(vmf_log_density) over S^2 on a Gauss-Legendre (cos theta)
/// by uniform (phi) product grid.
inline double sphere_density_mass(const VmfDistribution& q, int n_theta = 64, int n_phi = 128) {
  detail::require(q.dim() == 3, "sphere_density_mass is defined on S^2");
  const auto [t, w] = gauss_legendre(n_theta);
  const double dphi = 2.0 * std::numbers::pi / n_phi;
  double total = 0.0;
  for (int i = 0; i < n_theta; ++i) {
    const double s = std::sqrt(std::max(0.0, 1.0 - t[i] * t[i]));
    for (int j = 0; j < n_phi; ++j) {
      const double phi = j * dphi;
      Vector z(3);
      z << s * std::cos(phi), s * std::sin(phi), t[i];
      total += w[i] * dphi * std::exp(vmf_log_density(normalize(z), q));
    }
  }
  return total;
}

struct SteinGaussianStats {
  double mean_cosine = 0.0;
  double mse = 0.0;
};

/// Stein estimates on N(0, I) samples scored against the exact score -x,
/// averaged over seeds 0..seeds-1.
inline SteinGaussianStats stein_gaussian(int d, int m, int seeds, const SteinConfig& cfg) {
  SteinGaussianStats out;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(static_cast<std::uint64_t>(s));
    const Matrix x = standard_gaussian(m, d, rng);
    const ScoreError e = score_error(stein_estimate(x, cfg), -x);
    out.mean_cosine += e.mean_cosine;
    out.mse += e.mse;
  }
  out.mean_cosine /= seeds;
  out.mse /= seeds;
  return out;
}

/// Mean cosine between tangent-projected Stein estimates and the tangential
/// vMF score on S^{d-1}, averaged over seeds.
inline double stein_vmf_tangent_cosine(int d, double kappa, int m, int seeds, const SteinConfig& cfg) {
  Vector mu = Vector::Zero(d);
  mu[d - 1] = 1.0;
  const VmfDistribution q(normalize(mu), kappa);
  double total = 0.0;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(static_cast<std::uint64_t>(s));
    const Matrix z = vmf_sample_matrix(q, rng, m);
    const ScoreMatrix est = stein_estimate(z, cfg);
    Matrix truth(m, d);
    for (int i = 0; i < m; ++i)
      truth.row(i) = vmf_tangent_score(Embedding::from_unit(z.row(i).transpose()), q).transpose();
    total += score_error(project_to_tangent(z, est.values), truth).mean_cosine;
  }
  return total / seeds;
}

/// Largest |R S(X) - S(R X)| entry for a random rotation R (rbf kernel).
inline double stein_rotation_defect(int d, int m, std::uint64_t seed, const SteinConfig& cfg) {
  Rng rng(seed);
  const Matrix x = standard_gaussian(m, d, rng);
  const Matrix r = random_rotation(d, rng);
  const Matrix rotated = x * r.transpose();
  const Matrix a = stein_estimate(x, cfg).values * r.transpose();
  const Matrix b = stein_estimate(rotated, cfg).values;
  return (a - b).cwiseAbs().maxCoeff();
}

/// Two samples whose rows are paired noisy views of a common uniform point
/// on S^{d-1}: z_k = normalize(x + sigma n_k).
struct NoisyPairSource {
  int dim = 8;
  double sigma = 0.3;

  Matrix uniform(int m, Rng& rng) const {
    Matrix x(m, dim);
    for (int i = 0; i < m; ++i) x.row(i) = sample_uniform_sphere(dim, rng).transpose();
    return x;
  }
  Matrix view(const Matrix& x, Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix y = x;
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      for (Eigen::Index j = 0; j < y.cols(); ++j) y(i, j) += sigma * normal(rng);
    return normalize_rows(y);
  }
};

/// Seed-averaged gap L_N - log N - (aligned + lse) for each N, with the
/// limit's inner expectation taken over `negatives` fresh samples.
inline std::vector<double> infonce_limit_gaps(const std::vector<int>& ns, int seeds, double tau, int negatives,
                                              const NoisyPairSource& src = {}) {
  std::vector<double> gaps;
  for (int n : ns) {
    double g = 0.0;
    for (int s = 0; s < seeds; ++s) {
      Rng rng(static_cast<std::uint64_t>(s) * 7919u + static_cast<std::uint64_t>(n));
      const Matrix x = src.uniform(n, rng);
      const Matrix z1 = src.view(x, rng);
      const Matrix z2 = src.view(x, rng);
      const Matrix neg = src.view(src.uniform(negatives, rng), rng);
      const InfoNceLimitTerms t = infonce_limit_terms(z1, z2, neg, tau);
      g += infonce_loss(z1, z2, tau) - std::log(static_cast<double>(n)) - (t.aligned + t.lse);
    }
    gaps.push_back(std::abs(g / seeds));
  }
  return gaps;
}

struct GradCheck {
  double max_relative_error = 0.0;
  std::size_t parameters = 0;
};

/// Smooth test loss on a batch of embeddings, L = sum R.z + 1/2 sum_i (z_i.c)^2.
struct ProbeLoss {
  Matrix r;
  Vector c;

  double value(const Matrix& z) const {
    return z.cwiseProduct(r).sum() + 0.5 * (z * c).squaredNorm();
  }
  Matrix grad(const Matrix& z) const { return r + (z * c) * c.transpose(); }
};

/// Central finite differences over every parameter of `model` against
/// backward(). Per-parameter error |g - fd| / max(|g|, |fd|, 1e-3).
inline GradCheck encoder_gradient_check(const EncoderModel& model, const Matrix& v, const ProbeLoss& loss,
                                        double h = 1e-5) {
  const ForwardResult f = forward(model, v);
  GradientTape tape(model);
  backward(model, f.cache, loss.grad(f.z), tape);
  const Vector analytic = tape.flat();

  EncoderModel probe = model;
  const Vector base = model.flat_parameters();
  GradCheck out;
  out.parameters = static_cast<std::size_t>(base.size());
  Vector p = base;
  for (Eigen::Index k = 0; k < base.size(); ++k) {
    p[k] = base[k] + h;
    probe.set_flat_parameters(p);
    const double up = loss.value(forward(probe, v).z);
    p[k] = base[k] - h;
    probe.set_flat_parameters(p);
    const double down = loss.value(forward(probe, v).z);
    p[k] = base[k];
    const double fd = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(fd), std::abs(analytic[k]), 1e-3});
    out.max_relative_error = std::max(out.max_relative_error, std::abs(fd - analytic[k]) / scale);
  }
  return out;
}

struct IdentitySweep {
  double max_gap_conditional_mi = 0.0;
  double max_gap_mi = 0.0;
  double max_chain_rule_gap = 0.0;
  double min_quantity = 0.0;  // smallest entropy / MI seen (nonnegativity)
};

/// MI identities on `count` random joints with alphabet sizes in [2, 8].
inline IdentitySweep mi_identity_sweep(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> size(2, 8);
  IdentitySweep out;
  out.min_quantity = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) {
    const info::DiscreteJoint j3 = info::random_joint({size(rng), size(rng), size(rng)}, rng);
    const info::DiscreteJoint j2 = info::random_joint({size(rng), size(rng)}, rng);
    out.max_gap_conditional_mi = std::max(out.max_gap_conditional_mi, info::verify_conditional_mi_identity(j3).gap);
    out.max_gap_mi = std::max(out.max_gap_mi, info::verify_mi_identity(j2).gap);
    const double chain = info::entropy(j3, {0, 1}) - info::entropy(j3, {0}) - info::conditional_entropy(j3, {1}, {0});
    out.max_chain_rule_gap = std::max(out.max_chain_rule_gap, std::abs(chain));
    for (double q : {info::entropy(j3, {0}), info::conditional_entropy(j3, {0}, {1, 2}), info::mutual_info(j3, {0}, {2}),
                     info::conditional_mutual_info(j3, {0}, {1}, {2}), info::mutual_info(j2, {0}, {1})})
      out.min_quantity = std::min(out.min_quantity, q);
  }
  return out;
}

struct BoundSweep {
  double max_kl_gap = 0.0;
  /// Smallest cross_entropy - cond_entropy over q != p (must be > 0).
  double min_slack = 0.0;
  /// Largest |slack| when q is the true conditional (must be ~0).
  double max_equal_slack = 0.0;
  int violations = 0;
};

inline BoundSweep variational_bound_sweep(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> size(2, 8);
  BoundSweep out;
  out.min_slack = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) {
    const std::size_t nz = size(rng);
    const std::size_t nv = size(rng);
    const info::DiscreteJoint p = info::random_joint({nz, nv}, rng);
    const info::ConditionalTable q = info::random_conditional(nv, nz, rng);
    out.max_kl_gap = std::max(out.max_kl_gap, info::verify_kl_decomposition(p, q).gap);
    const info::VariationalBound b = info::variational_bound_check(p, q);
    if (!(b.cond_entropy < b.cross_entropy)) ++out.violations;
    out.min_slack = std::min(out.min_slack, b.slack);
    const info::VariationalBound eq = info::variational_bound_check(p, info::conditional_table(p));
    out.max_equal_slack = std::max(out.max_equal_slack, std::abs(eq.slack));
    if (eq.cross_entropy < eq.cond_entropy - 1e-12) ++out.violations;
  }
  return out;
}

}  // namespace mveb::experiments
