#pragma once

// Multi-view entropy bottleneck loss and the two baselines it is compared
// with (InfoNCE and the unified alignment + decorrelation form). Every loss
// comes with its gradient with respect to the embedding batches so the
// encoder can backpropagate without a general autodiff engine.
//
// Sign convention: all totals are minimized.

#include <cmath>
#include <limits>

#include "mveb/entropy_grad.hpp"
#include "mveb/error.hpp"
#include "mveb/sphere_vmf.hpp"
#include "mveb/stein_score.hpp"

namespace mveb {

struct LossTerms {
  double alignment = 0.0;
  double entropy_surr_1 = 0.0;
  double entropy_surr_2 = 0.0;
  double total = 0.0;
  double beta = 0.0;
};

struct BaselineConfig {
  double temperature = 0.2;
  double decorrelation_lambda = 1.0;

  void validate() const {
    detail::require_config(temperature > 0.0, "temperature must be > 0");
    detail::require_config(decorrelation_lambda >= 0.0, "decorrelation_lambda must be >= 0");
  }
};

/// Gradients of a scalar loss with respect to both embedding batches.
struct PairGrad {
  Matrix d_z1;
  Matrix d_z2;
};

namespace detail {
inline void require_paired(const Matrix& z1, const Matrix& z2) {
  require(z1.rows() == z2.rows() && z1.cols() == z2.cols(), "paired batches must have equal shape");
  require(z1.rows() >= 1, "empty batch");
}
}  // namespace detail

/// Mean inner product of diagonal positive pairs, (1/M) sum_i z1_i . z2_i.
inline double alignment(const Matrix& z1, const Matrix& z2) {
  detail::require_paired(z1, z2);
  return z1.cwiseProduct(z2).sum() / static_cast<double>(z1.rows());
}

inline PairGrad alignment_grad(const Matrix& z1, const Matrix& z2) {
  detail::require_paired(z1, z2);
  const double m = static_cast<double>(z1.rows());
  return {z2 / m, z1 / m};
}

/// total = -alignment + beta/2 (surr_1 + surr_2).
inline LossTerms assemble_mveb(double align, double surr1, double surr2, double beta) {
  detail::require(beta >= 0.0, "beta must be >= 0");
  LossTerms t;
  t.alignment = align;
  t.entropy_surr_1 = surr1;
  t.entropy_surr_2 = surr2;
  t.beta = beta;
  t.total = -align + 0.5 * beta * (surr1 + surr2);
  return t;
}

inline LossTerms mveb_loss(const Matrix& z1, const Matrix& z2, const ScoreMatrix& s1, const ScoreMatrix& s2,
                           double beta) {
  detail::require(beta >= 0.0, "beta must be >= 0");
  return assemble_mveb(alignment(z1, z2), entropy_surrogate(z1, s1).value, entropy_surrogate(z2, s2).value,
                       beta);
}

inline PairGrad mveb_loss_grad(const Matrix& z1, const Matrix& z2, const ScoreMatrix& s1, const ScoreMatrix& s2,
                               double beta) {
  detail::require(beta >= 0.0, "beta must be >= 0");
  PairGrad g = alignment_grad(z1, z2);
  g.d_z1 = -g.d_z1 + 0.5 * beta * entropy_surrogate_grad(z1, s1);
  g.d_z2 = -g.d_z2 + 0.5 * beta * entropy_surrogate_grad(z2, s2);
  return g;
}

namespace detail {
// Row-wise log-sum-exp of a logits matrix.
inline Vector row_logsumexp(const Matrix& logits) {
  Vector out(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double peak = logits.row(i).maxCoeff();
    out[i] = peak + std::log((logits.row(i).array() - peak).exp().sum());
  }
  return out;
}
}  // namespace detail

/// Batch InfoNCE with anchors z1_i, positive z2_i and the other z2_j as
/// negatives: mean_i [ -s_ii + log sum_j exp(s_ij) ], s_ij = z1_i.z2_j / tau.
inline double infonce_loss(const Matrix& z1, const Matrix& z2, double tau) {
  detail::require_paired(z1, z2);
  detail::require(z1.rows() >= 2, "infonce_loss requires at least 2 samples");
  detail::require(tau > 0.0, "temperature must be > 0");
  const Matrix logits = z1 * z2.transpose() / tau;
  const Vector lse = detail::row_logsumexp(logits);
  return (lse - logits.diagonal()).mean();
}

inline PairGrad infonce_loss_grad(const Matrix& z1, const Matrix& z2, double tau) {
  detail::require_paired(z1, z2);
  detail::require(z1.rows() >= 2, "infonce_loss requires at least 2 samples");
  detail::require(tau > 0.0, "temperature must be > 0");
  const double m = static_cast<double>(z1.rows());
  const Matrix logits = z1 * z2.transpose() / tau;
  const Vector lse = detail::row_logsumexp(logits);
  Matrix coeff = (logits.colwise() - lse).array().exp().matrix();  // softmax rows
  coeff.diagonal().array() -= 1.0;
  coeff /= m * tau;
  return {coeff * z2, coeff.transpose() * z1};
}

/// The two terms the InfoNCE loss minus log N converges to as N grows.
struct InfoNceLimitTerms {
  /// -(1/tau) mean positive-pair inner product.
  double aligned = 0.0;
  /// mean over anchors z1_i of log mean_k exp(neg_k . z1_i / tau).
  double lse = 0.0;
};

inline InfoNceLimitTerms infonce_limit_terms(const Matrix& z1, const Matrix& z2, const Matrix& negatives,
                                             double tau) {
  detail::require_paired(z1, z2);
  detail::require(negatives.rows() >= 1, "infonce_limit_terms requires negatives");
  detail::require(negatives.cols() == z1.cols(), "negatives dimension mismatch");
  detail::require(tau > 0.0, "temperature must be > 0");
  InfoNceLimitTerms out;
  out.aligned = -alignment(z1, z2) / tau;
  const Matrix logits = z1 * negatives.transpose() / tau;
  const Vector lse = detail::row_logsumexp(logits);
  out.lse = lse.mean() - std::log(static_cast<double>(negatives.rows()));
  return out;
}

/// -alignment + lambda (1/M) sum_i z1_i^T F z1_i with F = (1/M) sum_j z1_j z1_j^T.
inline double decorrelation_loss(const Matrix& z1, const Matrix& z2, double lambda) {
  detail::require_paired(z1, z2);
  detail::require(lambda >= 0.0, "decorrelation lambda must be >= 0");
  const double m = static_cast<double>(z1.rows());
  const Matrix f = z1.transpose() * z1 / m;
  const double quad = (z1 * f).cwiseProduct(z1).sum() / m;
  return -alignment(z1, z2) + lambda * quad;
}

inline PairGrad decorrelation_loss_grad(const Matrix& z1, const Matrix& z2, double lambda) {
  detail::require_paired(z1, z2);
  detail::require(lambda >= 0.0, "decorrelation lambda must be >= 0");
  const double m = static_cast<double>(z1.rows());
  PairGrad g = alignment_grad(z1, z2);
  const Matrix f = z1.transpose() * z1 / m;
  // quad = (1/M^2) sum_ij (z_i.z_j)^2, so d quad / d z_i = (4/M) F z_i.
  g.d_z1 = -g.d_z1 + lambda * (4.0 / m) * (z1 * f);
  g.d_z2 = -g.d_z2;
  return g;
}

}  // namespace mveb
