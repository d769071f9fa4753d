#pragma once

// Stein gradient estimator: nonparametric score estimates at a batch of
// samples via kernel ridge regression,
//
//   G = -M (K + eta I)^{-1} B,   B_ij = (1/M) sum_m d k(x_i, x_m) / d (x_m)_j.
//
// The estimator assumes the kernel is in the Stein class of the sampling
// density; that boundary condition cannot be checked from samples and is
// taken as given.

#include <cmath>
#include <string>

#include "mveb/error.hpp"
#include "mveb/kernels.hpp"
#include "mveb/sphere_vmf.hpp"

namespace mveb {

struct SteinConfig {
  KernelSpec kernel{};
  double ridge_eta = 0.1;

  void validate() const {
    kernel.validate();
    detail::require_config(ridge_eta > 0.0 && std::isfinite(ridge_eta), "stein ridge_eta must be > 0");
  }
};

enum class ScoreSource { stein, analytic_oracle };

/// Row i estimates grad_z log q at sample i.
struct ScoreMatrix {
  Matrix values;
  double resolved_bandwidth = 0.0;
  double ridge_eta = 0.0;
  ScoreSource source = ScoreSource::stein;
  /// Scores entering a loss must be constants with respect to the encoder
  /// parameters. Anything built from a differentiable path sets this false.
  bool detached = true;

  /// Wraps a known score (e.g. a closed-form oracle) as a detached matrix.
  static ScoreMatrix analytic(Matrix values) {
    ScoreMatrix s;
    s.values = std::move(values);
    s.source = ScoreSource::analytic_oracle;
    return s;
  }
};

/// Samples are the rows of `x`; they are treated as ambient vectors even
/// when they lie on the sphere.
inline ScoreMatrix stein_estimate(const Matrix& x, const SteinConfig& cfg) {
  cfg.validate();
  detail::require(x.rows() >= 1 && x.cols() >= 1, "stein_estimate requires a nonempty batch");
  const double m = static_cast<double>(x.rows());

  GramMatrix k = gram(x, cfg.kernel);
  if (!k.values.allFinite())
    throw NumericalError("stein_estimate: kernel overflow at bandwidth " + std::to_string(k.resolved_bandwidth));
  const Matrix b = gram_grad_sum(x, k);
  k.values.diagonal().array() += cfg.ridge_eta;
  Eigen::LLT<Matrix> llt(k.values);
  if (llt.info() != Eigen::Success)
    throw NumericalError("stein_estimate: Cholesky factorization of K + eta I failed");

  ScoreMatrix out;
  out.values = -m * llt.solve(b);
  out.resolved_bandwidth = k.resolved_bandwidth;
  out.ridge_eta = cfg.ridge_eta;
  if (!out.values.allFinite()) throw NumericalError("stein_estimate: non-finite score");
  return out;
}

inline ScoreMatrix stein_estimate(const std::vector<Embedding>& z, const SteinConfig& cfg) {
  return stein_estimate(stack(z), cfg);
}

struct ScoreError {
  double mse = 0.0;
  double mean_cosine = 0.0;
  /// Rows whose reference score is zero; excluded from mean_cosine.
  int skipped_rows = 0;
};

inline ScoreError score_error(const Matrix& est, const Matrix& truth) {
  detail::require(est.rows() == truth.rows() && est.cols() == truth.cols(), "score_error: shape mismatch");
  detail::require(est.size() > 0, "score_error: empty input");
  ScoreError out;
  out.mse = (est - truth).squaredNorm() / static_cast<double>(est.size());
  double cos_sum = 0.0;
  int counted = 0;
  for (Eigen::Index i = 0; i < est.rows(); ++i) {
    const double tn = truth.row(i).norm();
    if (tn == 0.0) {
      ++out.skipped_rows;
      continue;
    }
    const double en = est.row(i).norm();
    cos_sum += en == 0.0 ? 0.0 : est.row(i).dot(truth.row(i)) / (en * tn);
    ++counted;
  }
  out.mean_cosine = counted > 0 ? cos_sum / counted : 0.0;
  return out;
}

inline ScoreError score_error(const ScoreMatrix& est, const Matrix& truth) {
  return score_error(est.values, truth);
}

}  // namespace mveb
