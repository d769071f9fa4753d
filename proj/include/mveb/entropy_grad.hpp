#pragma once

// Score-based differential-entropy gradient.
//
// For z = f(v) with v independent of the parameters, grad_phi H(z) =
// -E[ grad_z log q(z) . d f / d phi ]. The surrogate
//
//   value = (1/M) sum_i S_i . z_i      (S held constant)
//
// therefore has parameter-gradient equal to a Monte Carlo estimate of
// -grad_phi H. A training loss that adds +beta * value descends on -H, i.e.
// it maximizes the entropy.

#include <cmath>
#include <numbers>

#include "mveb/error.hpp"
#include "mveb/sphere_vmf.hpp"
#include "mveb/stein_score.hpp"

namespace mveb {

struct EntropySurrogate {
  double value = 0.0;
  ScoreSource score_source = ScoreSource::stein;
  bool detached = true;
};

inline EntropySurrogate entropy_surrogate(const Matrix& z, const ScoreMatrix& s) {
  detail::require(s.detached, "entropy_surrogate: score must be detached from the parameters");
  detail::require(z.rows() == s.values.rows() && z.cols() == s.values.cols(),
                  "entropy_surrogate: shape mismatch");
  detail::require(z.rows() >= 1, "entropy_surrogate: empty batch");
  EntropySurrogate out;
  out.value = z.cwiseProduct(s.values).sum() / static_cast<double>(z.rows());
  out.score_source = s.source;
  return out;
}

/// d value / d z: the score rows scaled by 1/M. Nothing flows into S.
inline Matrix entropy_surrogate_grad(const Matrix& z, const ScoreMatrix& s) {
  detail::require(s.detached, "entropy_surrogate: score must be detached from the parameters");
  detail::require(z.rows() == s.values.rows() && z.cols() == s.values.cols(),
                  "entropy_surrogate: shape mismatch");
  return s.values / static_cast<double>(z.rows());
}

struct LinearGaussianEntropy {
  double entropy = 0.0;
  /// d entropy / d A = A^{-T}.
  Matrix grad;
};

/// Entropy of z = A v with v ~ N(0, I): (d/2) log(2 pi e) + log|det A|.
inline LinearGaussianEntropy analytic_entropy_linear_gaussian(const Matrix& a) {
  detail::require(a.rows() == a.cols() && a.rows() >= 1, "linear-Gaussian map must be square");
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw InvalidArgument("linear-Gaussian map is singular");
  const double d = static_cast<double>(a.rows());
  // log|det A| from the LU diagonal avoids overflow in det().
  double log_abs_det = 0.0;
  const Matrix& packed = lu.matrixLU();
  for (Eigen::Index i = 0; i < a.rows(); ++i) log_abs_det += std::log(std::abs(packed(i, i)));
  LinearGaussianEntropy out;
  out.entropy = 0.5 * d * std::log(2.0 * std::numbers::pi * std::numbers::e) + log_abs_det;
  out.grad = lu.inverse().transpose();
  return out;
}

struct EntropyGradCheckOptions {
  ScoreSource score_source = ScoreSource::stein;
  /// Center and whiten the base draws so their sample covariance is exactly
  /// I. Without it the comparison is dominated by O(1/sqrt(M)) sampling error
  /// of the base covariance rather than by the score.
  bool moment_match = true;
  /// Negates the score before it reaches the surrogate (mutation fixture).
  bool flip_score_sign = false;
};

struct EntropyGradCheck {
  double relative_error = 0.0;
  /// Parameter-gradient of the surrogate with respect to A.
  Matrix surrogate_grad;
  /// -grad_A H, the value the surrogate gradient should approach.
  Matrix expected_grad;
};

/// Draws M standard-normal rows in d dimensions, optionally moment-matched.
inline Matrix draw_base_gaussian(int m, int d, Rng& rng, bool moment_match) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix v(m, d);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) v(i, j) = normal(rng);
  if (!moment_match) return v;
  detail::require(m > d, "moment matching needs more samples than dimensions");
  v.rowwise() -= v.colwise().mean();
  const Matrix cov = v.transpose() * v / static_cast<double>(m);
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("moment matching: degenerate base sample");
  // v <- v L^{-T} so that v^T v / m = I.
  const Matrix lower = llt.matrixL();
  return lower.triangularView<Eigen::Lower>().solve(v.transpose()).transpose();
}

/// Runs v -> z = A v -> score -> surrogate -> d/dA and compares against the
/// closed-form -grad_A H(z). Returns the relative Frobenius error.
inline EntropyGradCheck entropy_grad_check(const Matrix& a, int m, const SteinConfig& cfg, Rng& rng,
                                           const EntropyGradCheckOptions& opts = {}) {
  detail::require(m >= 2, "entropy_grad_check requires at least two samples");
  const LinearGaussianEntropy truth = analytic_entropy_linear_gaussian(a);
  const int d = static_cast<int>(a.rows());

  const Matrix v = draw_base_gaussian(m, d, rng, opts.moment_match);
  const Matrix z = v * a.transpose();

  ScoreMatrix s;
  if (opts.score_source == ScoreSource::stein) {
    s = stein_estimate(z, cfg);
  } else {
    // grad_z log N(0, A A^T) = -(A A^T)^{-1} z = -A^{-T} v.
    s = ScoreMatrix::analytic(-v * truth.grad.transpose());
  }
  if (opts.flip_score_sign) s.values = -s.values;

  // Backprop of the surrogate through z_i = A v_i: dA = sum_i (dz_i) v_i^T.
  const Matrix dz = entropy_surrogate_grad(z, s);
  EntropyGradCheck out;
  out.surrogate_grad = dz.transpose() * v;
  out.expected_grad = -truth.grad;
  out.relative_error = (out.surrogate_grad - out.expected_grad).norm() / out.expected_grad.norm();
  return out;
}

}  // namespace mveb
