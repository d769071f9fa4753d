#pragma once

// Hypersphere geometry and the von Mises-Fisher distribution on S^{d-1}.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mveb/error.hpp"

namespace mveb {

using Vector = Eigen::VectorXd;
/// Batches are stored one sample per row.
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Tolerance on | ||z|| - 1 | accepted for an embedding.
inline constexpr double kUnitNormTolerance = 1e-9;

class Embedding;
inline Embedding normalize(const Vector& x);

/// An l2-normalized point on the unit hypersphere S^{d-1}, d >= 2.
class Embedding {
 public:
  /// Wraps an already-normalized vector; throws if the norm is off by more
  /// than kUnitNormTolerance or d < 2.
  static Embedding from_unit(Vector coords) {
    detail::require(coords.size() >= 2, "embedding dimension must be >= 2");
    detail::require(std::abs(coords.norm() - 1.0) < kUnitNormTolerance,
                    "embedding is not unit norm");
    return Embedding(std::move(coords));
  }

  const Vector& coords() const noexcept { return coords_; }
  Eigen::Index dim() const noexcept { return coords_.size(); }
  double operator[](Eigen::Index i) const { return coords_[i]; }
  double dot(const Embedding& other) const { return coords_.dot(other.coords_); }

 private:
  explicit Embedding(Vector coords) : coords_(std::move(coords)) {}
  Vector coords_;

  friend Embedding normalize(const Vector& x);
};

/// x / ||x||. Zero input is an error rather than an epsilon rescue.
inline Embedding normalize(const Vector& x) {
  detail::require(x.size() >= 2, "embedding dimension must be >= 2");
  const double n = x.norm();
  if (!(n > 0.0)) throw InvalidArgument("zero vector");
  return Embedding(x / n);
}

/// Row-wise normalize; every row must be nonzero.
inline Matrix normalize_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double n = x.row(i).norm();
    if (!(n > 0.0)) throw InvalidArgument("zero vector in row " + std::to_string(i));
    out.row(i) = x.row(i) / n;
  }
  return out;
}

/// Stacks embeddings as rows.
inline Matrix stack(const std::vector<Embedding>& zs) {
  detail::require(!zs.empty(), "cannot stack an empty list");
  Matrix out(static_cast<Eigen::Index>(zs.size()), zs.front().dim());
  for (std::size_t i = 0; i < zs.size(); ++i) {
    detail::require(zs[i].dim() == out.cols(), "dimension mismatch among embeddings");
    out.row(static_cast<Eigen::Index>(i)) = zs[i].coords().transpose();
  }
  return out;
}

/// Removes the radial component of each row of `v` relative to the matching
/// row of `z`: row_i <- (I - z_i z_i^T) v_i.
inline Matrix project_to_tangent(const Matrix& z, const Matrix& v) {
  detail::require(z.rows() == v.rows() && z.cols() == v.cols(), "project_to_tangent: shape mismatch");
  Matrix out = v;
  for (Eigen::Index i = 0; i < z.rows(); ++i) out.row(i) -= z.row(i) * z.row(i).dot(v.row(i));
  return out;
}

/// log(2 pi^{d/2} / Gamma(d/2)), the log surface area of S^{d-1}.
inline double log_surface_area(int d) {
  detail::require(d >= 2, "log_surface_area requires d >= 2");
  const double h = 0.5 * d;
  return std::log(2.0) + h * std::log(std::numbers::pi) - std::lgamma(h);
}

namespace detail {

inline double log_bessel_i_series(double nu, double x) {
  // log of sum_k (x/2)^{2k+nu} / (k! Gamma(k+nu+1)), summed in log space.
  const double log_half_x = std::log(0.5 * x);
  std::vector<double> logs;
  logs.reserve(256);
  double peak = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 2000; ++k) {
    const double lt = (2.0 * k + nu) * log_half_x - std::lgamma(k + 1.0) - std::lgamma(k + nu + 1.0);
    logs.push_back(lt);
    peak = std::max(peak, lt);
    // Terms decrease monotonically once k exceeds x/2; stop when negligible.
    if (k > 0.5 * x && lt < peak - 40.0) break;
  }
  double s = 0.0;
  for (double lt : logs) s += std::exp(lt - peak);
  return peak + std::log(s);
}

// Debye uniform expansion of I_nu(nu * z), nu > 0, through the u_4 term.
inline double log_bessel_i_uniform(double nu, double x) {
  const double z = x / nu;
  const double root = std::sqrt(1.0 + z * z);
  const double eta = root + std::log(z / (1.0 + root));
  const double t = 1.0 / root;
  const double t2 = t * t;
  const double u1 = t * (3.0 - 5.0 * t2) / 24.0;
  const double u2 = t2 * (81.0 - 462.0 * t2 + 385.0 * t2 * t2) / 1152.0;
  const double u3 =
      t * t2 * (30375.0 - 369603.0 * t2 + 765765.0 * t2 * t2 - 425425.0 * t2 * t2 * t2) / 414720.0;
  const double t4 = t2 * t2;
  const double u4 = t4 *
                    (4465125.0 - 94121676.0 * t2 + 349922430.0 * t4 - 446185740.0 * t4 * t2 +
                     185910725.0 * t4 * t4) /
                    39813120.0;
  const double corr = 1.0 + u1 / nu + u2 / (nu * nu) + u3 / (nu * nu * nu) + u4 / (nu * nu * nu * nu);
  return nu * eta - 0.5 * std::log(2.0 * std::numbers::pi * nu) - 0.5 * std::log(root) + std::log(corr);
}

// Hankel large-argument expansion; used for nu = 0 where the Debye form is singular.
inline double log_bessel_i_hankel(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 12; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= -(mu - odd * odd) / (k * 8.0 * x);
    sum += term;
  }
  return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(sum);
}

}  // namespace detail

/// Argument above which log_bessel_i switches from the power series to the
/// asymptotic expansion.
inline constexpr double kBesselSeriesCutoff = 1000.0;

/// log I_nu(x) for nu >= 0, x >= 0. Series below kBesselSeriesCutoff, uniform
/// asymptotic expansion above it.
inline double log_bessel_i(double nu, double x) {
  detail::require(nu >= 0.0 && x >= 0.0, "log_bessel_i requires nu >= 0 and x >= 0");
  if (x == 0.0) return nu == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (x < kBesselSeriesCutoff) return detail::log_bessel_i_series(nu, x);
  if (nu == 0.0) return detail::log_bessel_i_hankel(nu, x);
  return detail::log_bessel_i_uniform(nu, x);
}

/// vMF distribution with mean direction mu and concentration kappa >= 0.
/// kappa = 0 is the uniform distribution on the sphere.
class VmfDistribution {
 public:
  VmfDistribution(Embedding mu, double kappa) : mu_(std::move(mu)), kappa_(kappa) {
    detail::require(kappa >= 0.0 && std::isfinite(kappa), "vMF concentration must be finite and >= 0");
  }

  const Embedding& mu() const noexcept { return mu_; }
  double kappa() const noexcept { return kappa_; }
  int dim() const noexcept { return static_cast<int>(mu_.dim()); }

  /// log C_d(kappa) = (d/2-1) log kappa - (d/2) log 2pi - log I_{d/2-1}(kappa).
  double log_normalizer() const {
    const int d = dim();
    if (kappa_ == 0.0) return -log_surface_area(d);
    const double nu = 0.5 * d - 1.0;
    return nu * std::log(kappa_) - 0.5 * d * std::log(2.0 * std::numbers::pi) - log_bessel_i(nu, kappa_);
  }

  /// Mean resultant length A_d(kappa) = I_{d/2}(kappa) / I_{d/2-1}(kappa).
  double mean_resultant_length() const {
    if (kappa_ == 0.0) return 0.0;
    const double nu = 0.5 * dim() - 1.0;
    return std::exp(log_bessel_i(nu + 1.0, kappa_) - log_bessel_i(nu, kappa_));
  }

 private:
  Embedding mu_;
  double kappa_;
};

/// log C_d(kappa) + kappa mu^T z. The formula is also evaluated for off-sphere
/// points by vmf_log_density_ambient so finite differences can be taken.
inline double vmf_log_density_ambient(const Vector& z, const VmfDistribution& q) {
  detail::require(z.size() == q.dim(), "vmf_log_density: dimension mismatch");
  return q.log_normalizer() + q.kappa() * q.mu().coords().dot(z);
}

inline double vmf_log_density(const Embedding& z, const VmfDistribution& q) {
  return vmf_log_density_ambient(z.coords(), q);
}

/// Gradient of the log density in ambient coordinates: kappa mu.
inline Vector vmf_ambient_score(const Embedding& z, const VmfDistribution& q) {
  detail::require(z.dim() == q.dim(), "vmf_ambient_score: dimension mismatch");
  return q.kappa() * q.mu().coords();
}

/// Riemannian score on the sphere: kappa (I - z z^T) mu.
inline Vector vmf_tangent_score(const Embedding& z, const VmfDistribution& q) {
  detail::require(z.dim() == q.dim(), "vmf_tangent_score: dimension mismatch");
  const Vector& mu = q.mu().coords();
  const Vector& zc = z.coords();
  return q.kappa() * (mu - zc * zc.dot(mu));
}

/// Uniform draw from S^{d-1} via a normalized standard Gaussian.
inline Vector sample_uniform_sphere(int d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(d);
  for (;;) {
    for (int i = 0; i < d; ++i) x[i] = normal(rng);
    const double n = x.norm();
    if (n > 1e-12) return x / n;
  }
}

/// m i.i.d. draws, one per row, using Wood's rejection sampler for the
/// component along mu and a uniform tangent direction.
inline Matrix vmf_sample_matrix(const VmfDistribution& q, Rng& rng, int m) {
  detail::require(m >= 1, "vmf_sample requires m >= 1");
  const int d = q.dim();
  const double kappa = q.kappa();
  const Vector& mu = q.mu().coords();
  Matrix out(m, d);
  if (kappa == 0.0) {
    for (int i = 0; i < m; ++i) out.row(i) = sample_uniform_sphere(d, rng).transpose();
    return out;
  }

  const double dm1 = d - 1.0;
  // b = (-2k + sqrt(4k^2 + (d-1)^2)) / (d-1), written to avoid cancellation.
  const double b = dm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);
  std::gamma_distribution<double> gamma(0.5 * dm1, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (int i = 0; i < m; ++i) {
    double w = 0.0;
    for (;;) {
      const double g1 = gamma(rng);
      const double g2 = gamma(rng);
      const double beta = g1 / (g1 + g2);
      w = (1.0 - (1.0 + b) * beta) / (1.0 - (1.0 - b) * beta);
      const double u = unif(rng);
      if (kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
    }
    Vector tangent(d);
    double tn = 0.0;
    do {
      for (int k = 0; k < d; ++k) tangent[k] = normal(rng);
      tangent -= mu * mu.dot(tangent);
      tn = tangent.norm();
    } while (tn < 1e-12);
    tangent /= tn;
    Vector z = w * mu + std::sqrt(std::max(0.0, 1.0 - w * w)) * tangent;
    out.row(i) = (z / z.norm()).transpose();
  }
  return out;
}

inline std::vector<Embedding> vmf_sample(const VmfDistribution& q, Rng& rng, int m) {
  const Matrix rows = vmf_sample_matrix(q, rng, m);
  std::vector<Embedding> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) out.push_back(Embedding::from_unit(rows.row(i).transpose()));
  return out;
}

}  // namespace mveb
