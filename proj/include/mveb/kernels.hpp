#pragma once

// vMF and RBF kernels, Gram matrices, kernel-gradient sums and the median
// bandwidth heuristic used by the Stein score estimator.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mveb/error.hpp"
#include "mveb/sphere_vmf.hpp"

namespace mveb {

enum class KernelFamily { vmf, rbf };
enum class BandwidthMode { fixed, median_heuristic };

inline const char* to_string(KernelFamily f) { return f == KernelFamily::vmf ? "vmf" : "rbf"; }
inline const char* to_string(BandwidthMode m) {
  return m == BandwidthMode::fixed ? "fixed" : "median_heuristic";
}

/// Kernel family plus bandwidth policy. `bandwidth` is Delta for vmf and
/// sigma^2 for rbf; it is only read when mode == fixed.
struct KernelSpec {
  KernelFamily family = KernelFamily::vmf;
  double bandwidth = 1.0;
  BandwidthMode mode = BandwidthMode::median_heuristic;
  double bandwidth_floor = 1e-3;

  void validate() const {
    detail::require_config(bandwidth_floor > 0.0, "kernel bandwidth_floor must be > 0");
    if (mode == BandwidthMode::fixed)
      detail::require_config(bandwidth > 0.0, "fixed kernel bandwidth must be > 0");
  }
};

inline double vmf_kernel(const Vector& z, const Vector& z2, double delta) {
  detail::require(delta > 0.0, "vmf kernel bandwidth must be > 0");
  detail::require(z.size() == z2.size(), "vmf kernel: dimension mismatch");
  return std::exp(z.dot(z2) / delta);
}

inline double vmf_kernel(const Embedding& z, const Embedding& z2, double delta) {
  return vmf_kernel(z.coords(), z2.coords(), delta);
}

inline double rbf_kernel(const Vector& x, const Vector& y, double sigma2) {
  detail::require(sigma2 > 0.0, "rbf kernel bandwidth must be > 0");
  detail::require(x.size() == y.size(), "rbf kernel: dimension mismatch");
  return std::exp(-(x - y).squaredNorm() / (2.0 * sigma2));
}

namespace detail {

// Median of a list; even counts take the midpoint of the central pair.
inline double median_of(std::vector<double> values) {
  require(!values.empty(), "median of empty list");
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace detail

/// Median over distinct pairs i<j of the cosine distance 1 - z_i.z_j,
/// clamped below by `floor`. A single sample has no pairs and gets `floor`.
inline double median_bandwidth(const Matrix& z, double floor) {
  detail::require(z.rows() >= 1, "median_bandwidth requires at least 1 sample");
  detail::require(floor > 0.0, "bandwidth floor must be > 0");
  if (z.rows() == 1) return floor;
  const Matrix inner = z * z.transpose();
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(z.rows() * (z.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = i + 1; j < z.rows(); ++j) dist.push_back(1.0 - inner(i, j));
  return std::max(detail::median_of(std::move(dist)), floor);
}

inline double median_bandwidth(const std::vector<Embedding>& z, double floor) {
  return median_bandwidth(stack(z), floor);
}

/// Median over distinct pairs of ||x_i - x_j||^2, clamped below by `floor`.
/// This is the sigma^2 the rbf kernel uses under the median heuristic.
inline double median_squared_distance(const Matrix& x, double floor) {
  detail::require(x.rows() >= 1, "median heuristic requires at least 1 sample");
  detail::require(floor > 0.0, "bandwidth floor must be > 0");
  if (x.rows() == 1) return floor;
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(x.rows() * (x.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) dist.push_back((x.row(i) - x.row(j)).squaredNorm());
  return std::max(detail::median_of(std::move(dist)), floor);
}

inline double resolve_bandwidth(const Matrix& z, const KernelSpec& spec) {
  spec.validate();
  if (spec.mode == BandwidthMode::fixed) return spec.bandwidth;
  return spec.family == KernelFamily::vmf ? median_bandwidth(z, spec.bandwidth_floor)
                                          : median_squared_distance(z, spec.bandwidth_floor);
}

struct GramMatrix {
  Matrix values;
  KernelSpec kernel;
  /// Bandwidth actually used (the median when the heuristic was requested).
  double resolved_bandwidth = 0.0;
};

/// K_ij = k(z_i, z_j) with a bandwidth that has already been resolved.
inline Matrix gram_values(const Matrix& z, KernelFamily family, double bandwidth) {
  detail::require(z.rows() >= 1, "gram requires at least one sample");
  detail::require(bandwidth > 0.0, "kernel bandwidth must be > 0");
  const Eigen::Index m = z.rows();
  Matrix k(m, m);
  if (family == KernelFamily::vmf) {
    const Matrix inner = z * z.transpose();
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) k(i, j) = std::exp(inner(i, j) / bandwidth);
  } else {
    for (Eigen::Index i = 0; i < m; ++i) {
      k(i, i) = 1.0;
      for (Eigen::Index j = i + 1; j < m; ++j) {
        const double v = std::exp(-(z.row(i) - z.row(j)).squaredNorm() / (2.0 * bandwidth));
        k(i, j) = v;
        k(j, i) = v;
      }
    }
  }
  return k;
}

inline GramMatrix gram(const Matrix& z, const KernelSpec& spec) {
  detail::require(z.rows() >= 1, "gram requires at least one sample");
  const double bw = resolve_bandwidth(z, spec);
  return GramMatrix{gram_values(z, spec.family, bw), spec, bw};
}

inline GramMatrix gram(const std::vector<Embedding>& z, const KernelSpec& spec) {
  return gram(stack(z), spec);
}

/// Entry (i, j) = (1/M) sum_m d k(z_i, z_m) / d (z_m)_j, given the Gram
/// matrix already evaluated at the same samples and bandwidth.
inline Matrix gram_grad_sum(const Matrix& z, const GramMatrix& k) {
  detail::require(k.values.rows() == z.rows() && k.values.cols() == z.rows(),
                  "gram_grad_sum: Gram shape does not match samples");
  const double m = static_cast<double>(z.rows());
  const double bw = k.resolved_bandwidth;
  const Vector row_sums = k.values.rowwise().sum();
  if (k.kernel.family == KernelFamily::vmf) {
    // d/dz_m exp(z_i.z_m / D) = k(z_i, z_m) z_i / D
    return (row_sums / (m * bw)).asDiagonal() * z;
  }
  // d/dy exp(-|x-y|^2 / 2s) = k(x, y) (x - y) / s
  return (row_sums.asDiagonal() * z - k.values * z) / (m * bw);
}

inline Matrix gram_grad_sum(const Matrix& z, const KernelSpec& spec) {
  return gram_grad_sum(z, gram(z, spec));
}

}  // namespace mveb
