#pragma once

// Exact information theory over small finite joint distributions. All
// quantities are in nats; 0 log 0 is taken as 0.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mveb/error.hpp"
#include "mveb/sphere_vmf.hpp"

namespace mveb::info {

using Axes = std::vector<int>;

inline constexpr double kMassTolerance = 1e-12;

/// Joint probability tensor over named discrete axes, stored row-major
/// (last axis fastest).
class DiscreteJoint {
 public:
  DiscreteJoint(std::vector<std::size_t> shape, std::vector<double> probs, std::vector<std::string> names = {})
      : shape_(std::move(shape)), probs_(std::move(probs)), names_(std::move(names)) {
    detail::require(!shape_.empty(), "joint needs at least one axis");
    std::size_t n = 1;
    for (std::size_t s : shape_) {
      detail::require(s >= 1, "axis sizes must be >= 1");
      n *= s;
    }
    detail::require(probs_.size() == n, "probability table size does not match shape");
    double total = 0.0;
    for (double p : probs_) {
      detail::require(p >= 0.0 && std::isfinite(p), "probabilities must be finite and >= 0");
      total += p;
    }
    detail::require(std::abs(total - 1.0) < kMassTolerance, "probabilities must sum to 1");
    if (names_.empty())
      for (std::size_t i = 0; i < shape_.size(); ++i) names_.push_back("x" + std::to_string(i));
    detail::require(names_.size() == shape_.size(), "one name per axis");
  }

  /// Normalizes nonnegative weights into a joint.
  static DiscreteJoint from_weights(std::vector<std::size_t> shape, std::vector<double> weights,
                                    std::vector<std::string> names = {}) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    detail::require(total > 0.0, "weights must have positive mass");
    for (double& w : weights) w /= total;
    // Re-normalize away the last ulp of rounding so the mass check is exact.
    const double again = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double& w : weights) w /= again;
    return DiscreteJoint(std::move(shape), std::move(weights), std::move(names));
  }

  std::size_t arity() const noexcept { return shape_.size(); }
  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  /// Multi-index of flat position `flat`.
  std::vector<std::size_t> unravel(std::size_t flat) const {
    std::vector<std::size_t> idx(shape_.size());
    for (std::size_t a = shape_.size(); a-- > 0;) {
      idx[a] = flat % shape_[a];
      flat /= shape_[a];
    }
    return idx;
  }

  double at(const std::vector<std::size_t>& idx) const {
    detail::require(idx.size() == shape_.size(), "index arity mismatch");
    std::size_t flat = 0;
    for (std::size_t a = 0; a < shape_.size(); ++a) {
      detail::require(idx[a] < shape_[a], "index out of range");
      flat = flat * shape_[a] + idx[a];
    }
    return probs_[flat];
  }

  /// Marginal over `axes`, in the order given.
  DiscreteJoint marginal(const Axes& axes) const {
    check_axes(axes);
    detail::require(!axes.empty(), "marginal needs at least one axis");
    std::vector<std::size_t> shape;
    std::vector<std::string> names;
    for (int a : axes) {
      shape.push_back(shape_[static_cast<std::size_t>(a)]);
      names.push_back(names_[static_cast<std::size_t>(a)]);
    }
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    std::vector<double> out(n, 0.0);
    for (std::size_t flat = 0; flat < probs_.size(); ++flat) {
      const auto idx = unravel(flat);
      std::size_t o = 0;
      for (std::size_t k = 0; k < axes.size(); ++k) o = o * shape[k] + idx[static_cast<std::size_t>(axes[k])];
      out[o] += probs_[flat];
    }
    return DiscreteJoint(std::move(shape), std::move(out), std::move(names));
  }

  void check_axes(const Axes& axes) const {
    std::set<int> seen;
    for (int a : axes) {
      if (a < 0 || static_cast<std::size_t>(a) >= shape_.size())
        throw InvalidArgument("invalid axis " + std::to_string(a));
      if (!seen.insert(a).second) throw InvalidArgument("axis listed twice: " + std::to_string(a));
    }
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> probs_;
  std::vector<std::string> names_;
};

namespace detail {
using mveb::detail::require;

// Summed in sorted order so equal multisets of probabilities give bitwise
// equal entropies regardless of axis layout.
inline double plogp_sum(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

inline void require_disjoint(const Axes& a, const Axes& b) {
  for (int x : a)
    if (std::find(b.begin(), b.end(), x) != b.end())
      throw InvalidArgument("axis sets overlap on axis " + std::to_string(x));
}

inline Axes join(Axes a, const Axes& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace detail

/// Shannon entropy of the marginal on `axes`; the empty set has entropy 0.
inline double entropy(const DiscreteJoint& j, const Axes& axes) {
  j.check_axes(axes);
  if (axes.empty()) return 0.0;
  return detail::plogp_sum(j.marginal(axes).probs());
}

/// H(T | G) = H(T, G) - H(G).
inline double conditional_entropy(const DiscreteJoint& j, const Axes& target, const Axes& given) {
  detail::require_disjoint(target, given);
  return entropy(j, detail::join(target, given)) - entropy(j, given);
}

/// I(A; B) = H(A) + H(B) - H(A, B).
inline double mutual_info(const DiscreteJoint& j, const Axes& a, const Axes& b) {
  detail::require_disjoint(a, b);
  return entropy(j, a) + entropy(j, b) - entropy(j, detail::join(a, b));
}

/// I(A; B | C) = H(A | C) - H(A | B, C).
inline double conditional_mutual_info(const DiscreteJoint& j, const Axes& a, const Axes& b, const Axes& given) {
  detail::require_disjoint(a, b);
  detail::require_disjoint(a, given);
  detail::require_disjoint(b, given);
  return conditional_entropy(j, a, given) - conditional_entropy(j, a, detail::join(b, given));
}

struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
};

/// Axes (z, v1, v2): I(z; v1 | v2) against H(z | v2) - H(z | v1, v2).
/// The left side is computed from its own definition (a KL sum over the
/// joint), not from the entropies on the right.
inline IdentityCheck verify_conditional_mi_identity(const DiscreteJoint& j) {
  detail::require(j.arity() == 3, "verify_conditional_mi_identity expects a (z, v1, v2) joint");
  const DiscreteJoint zv2 = j.marginal({0, 2});
  const DiscreteJoint v1v2 = j.marginal({1, 2});
  const DiscreteJoint v2 = j.marginal({2});
  double lhs = 0.0;
  for (std::size_t flat = 0; flat < j.probs().size(); ++flat) {
    const double p = j.probs()[flat];
    if (p <= 0.0) continue;
    const auto idx = j.unravel(flat);
    // p(z,v1,v2) p(v2) / (p(z,v2) p(v1,v2))
    const double ratio = p * v2.at({idx[2]}) / (zv2.at({idx[0], idx[2]}) * v1v2.at({idx[1], idx[2]}));
    lhs += p * std::log(ratio);
  }
  IdentityCheck out;
  out.lhs = lhs;
  out.rhs = conditional_entropy(j, {0}, {2}) - conditional_entropy(j, {0}, {1, 2});
  out.gap = std::abs(out.lhs - out.rhs);
  return out;
}

/// Axes (z, v): I(z; v) from its KL definition against H(z) - H(z | v).
inline IdentityCheck verify_mi_identity(const DiscreteJoint& j) {
  detail::require(j.arity() == 2, "verify_mi_identity expects a (z, v) joint");
  const DiscreteJoint pz = j.marginal({0});
  const DiscreteJoint pv = j.marginal({1});
  double lhs = 0.0;
  for (std::size_t flat = 0; flat < j.probs().size(); ++flat) {
    const double p = j.probs()[flat];
    if (p <= 0.0) continue;
    const auto idx = j.unravel(flat);
    lhs += p * std::log(p / (pz.at({idx[0]}) * pv.at({idx[1]})));
  }
  IdentityCheck out;
  out.lhs = lhs;
  out.rhs = entropy(j, {0}) - conditional_entropy(j, {0}, {1});
  out.gap = std::abs(out.lhs - out.rhs);
  return out;
}

/// Conditional table q(z | v2): row v2 holds a distribution over z.
using ConditionalTable = Matrix;

namespace detail {
inline void check_conditional(const DiscreteJoint& p, const ConditionalTable& q) {
  require(p.arity() == 2, "expected a (z, v2) joint");
  require(q.rows() == static_cast<Eigen::Index>(p.shape()[1]) && q.cols() == static_cast<Eigen::Index>(p.shape()[0]),
          "conditional table shape must be |V2| x |Z|");
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    require((q.row(r).array() >= 0.0).all(), "conditional table has negative entries");
    require(std::abs(q.row(r).sum() - 1.0) < 1e-12, "conditional table rows must sum to 1");
  }
  for (std::size_t z = 0; z < p.shape()[0]; ++z)
    for (std::size_t v = 0; v < p.shape()[1]; ++v)
      if (p.at({z, v}) > 0.0 && q(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(z)) <= 0.0)
        throw InvalidArgument("q(z|v2) has zero mass where p(z, v2) > 0: KL is infinite");
}
}  // namespace detail

/// E_{p(v2)} KL(p(z|v2) || q(z|v2)) computed per condition, against
/// E_p[log p(z|v2)] - E_p[log q(z|v2)].
inline IdentityCheck verify_kl_decomposition(const DiscreteJoint& p, const ConditionalTable& q) {
  detail::check_conditional(p, q);
  const DiscreteJoint pv = p.marginal({1});
  const std::size_t nz = p.shape()[0];
  const std::size_t nv = p.shape()[1];
  IdentityCheck out;
  double e_log_p = 0.0;
  double e_log_q = 0.0;
  for (std::size_t v = 0; v < nv; ++v) {
    const double pv_v = pv.at({v});
    if (pv_v <= 0.0) continue;
    double kl = 0.0;
    for (std::size_t z = 0; z < nz; ++z) {
      const double pj = p.at({z, v});
      if (pj <= 0.0) continue;
      const double pc = pj / pv_v;
      const double qc = q(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(z));
      kl += pc * std::log(pc / qc);
      e_log_p += pj * std::log(pc);
      e_log_q += pj * std::log(qc);
    }
    out.lhs += pv_v * kl;
  }
  out.rhs = e_log_p - e_log_q;
  out.gap = std::abs(out.lhs - out.rhs);
  return out;
}

struct VariationalBound {
  /// H(z | v2)
  double cond_entropy = 0.0;
  /// -E_p[log q(z | v2)], an upper bound on cond_entropy.
  double cross_entropy = 0.0;
  /// cross_entropy - cond_entropy = E_{p(v2)} KL(p || q) >= 0.
  double slack = 0.0;
};

inline VariationalBound variational_bound_check(const DiscreteJoint& p, const ConditionalTable& q) {
  detail::check_conditional(p, q);
  VariationalBound out;
  out.cond_entropy = conditional_entropy(p, {0}, {1});
  for (std::size_t z = 0; z < p.shape()[0]; ++z)
    for (std::size_t v = 0; v < p.shape()[1]; ++v) {
      const double pj = p.at({z, v});
      if (pj > 0.0) out.cross_entropy -= pj * std::log(q(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(z)));
    }
  out.slack = out.cross_entropy - out.cond_entropy;
  return out;
}

/// The true conditional p(z | v2) as a table; rows with p(v2) = 0 are uniform.
inline ConditionalTable conditional_table(const DiscreteJoint& p) {
  detail::require(p.arity() == 2, "expected a (z, v2) joint");
  const std::size_t nz = p.shape()[0];
  const std::size_t nv = p.shape()[1];
  ConditionalTable q(static_cast<Eigen::Index>(nv), static_cast<Eigen::Index>(nz));
  for (std::size_t v = 0; v < nv; ++v) {
    double mass = 0.0;
    for (std::size_t z = 0; z < nz; ++z) mass += p.at({z, v});
    for (std::size_t z = 0; z < nz; ++z)
      q(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(z)) =
          mass > 0.0 ? p.at({z, v}) / mass : 1.0 / static_cast<double>(nz);
  }
  return q;
}

/// Random full-support joint: normalized i.i.d. Exp(1) weights.
inline DiscreteJoint random_joint(const std::vector<std::size_t>& shape, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  std::vector<double> w(n);
  for (double& x : w) x = expo(rng);
  return DiscreteJoint::from_weights(shape, std::move(w));
}

/// Random conditional table with full support (rows are normalized Exp(1)).
inline ConditionalTable random_conditional(std::size_t n_given, std::size_t n_target, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  ConditionalTable q(static_cast<Eigen::Index>(n_given), static_cast<Eigen::Index>(n_target));
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    for (Eigen::Index c = 0; c < q.cols(); ++c) q(r, c) = expo(rng);
    q.row(r) /= q.row(r).sum();
  }
  return q;
}

/// Joint over (z, v1, v2) where z = encoder(v1, v2) deterministically.
inline DiscreteJoint deterministic_encoding(const DiscreteJoint& views, std::size_t z_size,
                                            const std::vector<std::vector<std::size_t>>& encoder) {
  detail::require(views.arity() == 2, "views joint must have axes (v1, v2)");
  const std::size_t n1 = views.shape()[0];
  const std::size_t n2 = views.shape()[1];
  detail::require(encoder.size() == n1, "encoder table must have one row per v1 value");
  std::vector<double> probs(z_size * n1 * n2, 0.0);
  for (std::size_t a = 0; a < n1; ++a) {
    detail::require(encoder[a].size() == n2, "encoder table must have one column per v2 value");
    for (std::size_t b = 0; b < n2; ++b) {
      const std::size_t z = encoder[a][b];
      detail::require(z < z_size, "encoder output out of range");
      probs[(z * n1 + a) * n2 + b] = views.at({a, b});
    }
  }
  return DiscreteJoint({z_size, n1, n2}, std::move(probs), {"z", "v1", "v2"});
}

}  // namespace mveb::info
