#pragma once

// Property suite behind `mveb verify`: every cross-module invariant as a
// seeded check reporting module, property, observed value and bound.

#include <chrono>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "mveb/encoder.hpp"
#include "mveb/entropy_grad.hpp"
#include "mveb/error.hpp"
#include "mveb/experiments.hpp"
#include "mveb/info_oracle.hpp"
#include "mveb/kernels.hpp"
#include "mveb/losses.hpp"
#include "mveb/sphere_vmf.hpp"
#include "mveb/stein_score.hpp"
#include "mveb/synth_data.hpp"
#include "mveb/train.hpp"

namespace mveb {

struct VerifyOptions {
  /// Ridge used by every Stein-based property.
  double ridge_eta = 0.1;
  /// Mutation fixture: negate scores inside the entropy-gradient checks.
  bool flip_score_sign = false;
  /// Also run the 2000-step wiring comparison (minutes).
  bool include_training = false;
};

enum class Comparison { less, less_equal, greater };

inline const char* to_string(Comparison c) {
  switch (c) {
    case Comparison::less: return "<";
    case Comparison::less_equal: return "<=";
    case Comparison::greater: return ">";
  }
  return "?";
}

enum class PropertyStatus { passed, failed, config_error, error };

inline const char* to_string(PropertyStatus s) {
  switch (s) {
    case PropertyStatus::passed: return "PASS";
    case PropertyStatus::failed: return "FAIL";
    case PropertyStatus::config_error: return "CONFIG-ERROR";
    case PropertyStatus::error: return "ERROR";
  }
  return "?";
}

struct PropertyResult {
  std::string module;
  std::string property;
  double observed = std::numeric_limits<double>::quiet_NaN();
  double bound = 0.0;
  Comparison comparison = Comparison::less;
  PropertyStatus status = PropertyStatus::failed;
  std::string message;
  double seconds = 0.0;
};

struct VerifyReport {
  std::vector<PropertyResult> results;

  bool all_passed() const {
    for (const auto& r : results)
      if (r.status != PropertyStatus::passed) return false;
    return true;
  }
  bool has_config_error() const {
    for (const auto& r : results)
      if (r.status == PropertyStatus::config_error) return true;
    return false;
  }
  /// 0 all passed, 2 any config error, 1 otherwise.
  int exit_code() const {
    if (has_config_error()) return 2;
    return all_passed() ? 0 : 1;
  }
  const PropertyResult* find(const std::string& module, const std::string& property) const {
    for (const auto& r : results)
      if (r.module == module && r.property == property) return &r;
    return nullptr;
  }
};

inline void write_report(std::ostream& os, const VerifyReport& report) {
  os << std::setprecision(6);
  for (const auto& r : report.results) {
    os << to_string(r.status) << ' ' << r.module << '/' << r.property;
    if (r.status == PropertyStatus::passed || r.status == PropertyStatus::failed)
      os << " observed=" << r.observed << " bound" << to_string(r.comparison) << r.bound;
    if (!r.message.empty()) os << " (" << r.message << ')';
    os << " [" << std::fixed << std::setprecision(2) << r.seconds << "s]" << std::defaultfloat << std::setprecision(6)
       << '\n';
  }
  std::size_t passed = 0;
  for (const auto& r : report.results) passed += r.status == PropertyStatus::passed;
  os << passed << '/' << report.results.size() << " properties passed\n";
}

namespace detail {

class SuiteRunner {
 public:
  explicit SuiteRunner(VerifyReport& report) : report_(report) {}

  void check(std::string module, std::string property, Comparison cmp, double bound,
             const std::function<double()>& observe) {
    PropertyResult r;
    r.module = std::move(module);
    r.property = std::move(property);
    r.comparison = cmp;
    r.bound = bound;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      r.observed = observe();
      bool ok = false;
      switch (cmp) {
        case Comparison::less: ok = r.observed < bound; break;
        case Comparison::less_equal: ok = r.observed <= bound; break;
        case Comparison::greater: ok = r.observed > bound; break;
      }
      r.status = ok ? PropertyStatus::passed : PropertyStatus::failed;
    } catch (const ConfigError& e) {
      r.status = PropertyStatus::config_error;
      r.message = e.what();
    } catch (const std::exception& e) {
      r.status = PropertyStatus::error;
      r.message = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report_.results.push_back(std::move(r));
  }

 private:
  VerifyReport& report_;
};

inline double bitwise_mismatch(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return 1.0;
  double count = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (std::memcmp(a.data() + i, b.data() + i, sizeof(double)) != 0) count += 1.0;
  return count;
}

inline SteinConfig rbf_stein(double eta) {
  SteinConfig cfg;
  cfg.kernel.family = KernelFamily::rbf;
  cfg.ridge_eta = eta;
  return cfg;
}

inline SteinConfig vmf_stein(double eta) {
  SteinConfig cfg;
  cfg.kernel.family = KernelFamily::vmf;
  cfg.ridge_eta = eta;
  return cfg;
}

inline Matrix random_sphere_batch(int m, int d, Rng& rng) {
  Matrix z(m, d);
  for (int i = 0; i < m; ++i) z.row(i) = sample_uniform_sphere(d, rng).transpose();
  return z;
}

inline void sphere_properties(SuiteRunner& run) {
  run.check("sphere_vmf", "samples_unit_norm", Comparison::less, kUnitNormTolerance, [] {
    Rng rng(11);
    double worst = 0.0;
    for (int d : {2, 3, 8, 16})
      for (double kappa : {0.0, 1.0, 10.0, 100.0}) {
        const VmfDistribution q(normalize(sample_uniform_sphere(d, rng)), kappa);
        const Matrix z = vmf_sample_matrix(q, rng, 500);
        worst = std::max(worst, (z.rowwise().norm().array() - 1.0).abs().maxCoeff());
      }
    return worst;
  });
  run.check("sphere_vmf", "kappa0_density_constant", Comparison::less_equal, 0.0, [] {
    Rng rng(12);
    double worst = 0.0;
    for (int d : {2, 3, 5, 16}) {
      const VmfDistribution q(normalize(Vector::Ones(d)), 0.0);
      for (int i = 0; i < 100; ++i) {
        const double lp = vmf_log_density(normalize(sample_uniform_sphere(d, rng)), q);
        worst = std::max(worst, std::abs(lp + log_surface_area(d)));
      }
    }
    return worst;
  });
  run.check("sphere_vmf", "s2_quadrature_mass", Comparison::less, 1e-4, [] {
    Vector mu(3);
    mu << 0.3, -0.5, 0.8;
    double worst = 0.0;
    for (double kappa : {0.0, 2.0, 10.0})
      worst = std::max(worst, std::abs(experiments::sphere_density_mass(VmfDistribution(normalize(mu), kappa)) - 1.0));
    return worst;
  });
  run.check("sphere_vmf", "ambient_score_matches_fd", Comparison::less, 1e-6, [] {
    Rng rng(13);
    double worst = 0.0;
    const double h = 1e-5;
    for (int d : {3, 8}) {
      const VmfDistribution q(normalize(sample_uniform_sphere(d, rng)), 4.0);
      for (int trial = 0; trial < 20; ++trial) {
        const Embedding z = normalize(sample_uniform_sphere(d, rng));
        const Vector s = vmf_ambient_score(z, q);
        for (int j = 0; j < d; ++j) {
          Vector up = z.coords(), down = z.coords();
          up[j] += h;
          down[j] -= h;
          const double fd = (vmf_log_density_ambient(up, q) - vmf_log_density_ambient(down, q)) / (2.0 * h);
          worst = std::max(worst, std::abs(fd - s[j]));
        }
      }
    }
    return worst;
  });
}

inline void kernel_properties(SuiteRunner& run, double eta) {
  run.check("kernels", "gram_symmetric_positive_pd", Comparison::less_equal, 0.0, [eta] {
    Rng rng(21);
    double violations = 0.0;
    for (KernelFamily fam : {KernelFamily::vmf, KernelFamily::rbf})
      for (int m : {2, 16, 128}) {
        KernelSpec spec;
        spec.family = fam;
        const Matrix z = random_sphere_batch(m, 8, rng);
        const GramMatrix k = gram(z, spec);
        if (!(k.values - k.values.transpose()).isZero(0.0)) violations += 1.0;
        if (!(k.values.array() > 0.0).all()) violations += 1.0;
        SteinConfig sc;
        sc.ridge_eta = eta;
        sc.validate();
        Matrix reg = k.values;
        reg.diagonal().array() += eta;
        if (Eigen::LLT<Matrix>(reg).info() != Eigen::Success) violations += 1.0;
      }
    return violations;
  });
  run.check("kernels", "median_bandwidth_invariance", Comparison::less, 1e-12, [] {
    Rng rng(22);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix z = random_sphere_batch(64, 8, rng);
      const double base = median_bandwidth(z, 1e-3);
      std::vector<int> perm(64);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      Matrix zp(64, 8);
      for (int i = 0; i < 64; ++i) zp.row(i) = z.row(perm[static_cast<std::size_t>(i)]);
      const Matrix r = experiments::random_rotation(8, rng);
      worst = std::max(worst, std::abs(median_bandwidth(zp, 1e-3) - base));
      worst = std::max(worst, std::abs(median_bandwidth(Matrix(z * r.transpose()), 1e-3) - base));
    }
    return worst;
  });
  run.check("kernels", "gram_grad_sum_matches_fd", Comparison::less, 1e-6, [] {
    Rng rng(23);
    double worst = 0.0;
    const double h = 1e-6;
    for (KernelFamily fam : {KernelFamily::vmf, KernelFamily::rbf}) {
      const Matrix z = random_sphere_batch(12, 5, rng);
      KernelSpec spec;
      spec.family = fam;
      const GramMatrix k = gram(z, spec);
      const Matrix b = gram_grad_sum(z, k);
      const double bw = k.resolved_bandwidth;
      auto kern = [&](const Vector& x, const Vector& y) {
        return fam == KernelFamily::vmf ? vmf_kernel(x, y, bw) : rbf_kernel(x, y, bw);
      };
      for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
          double fd = 0.0;
          for (Eigen::Index m = 0; m < z.rows(); ++m) {
            Vector up = z.row(m).transpose(), down = up;
            up[j] += h;
            down[j] -= h;
            fd += (kern(z.row(i).transpose(), up) - kern(z.row(i).transpose(), down)) / (2.0 * h);
          }
          worst = std::max(worst, std::abs(fd / static_cast<double>(z.rows()) - b(i, j)));
        }
    }
    return worst;
  });
}

inline void stein_properties(SuiteRunner& run, double eta) {
  run.check("stein_score", "gaussian_mean_cosine_d8_m512", Comparison::greater, 0.9,
            [eta] { return experiments::stein_gaussian(8, 512, 10, rbf_stein(eta)).mean_cosine; });
  run.check("stein_score", "mse_m512_minus_m64_d4", Comparison::less, 0.0, [eta] {
    return experiments::stein_gaussian(4, 512, 10, rbf_stein(eta)).mse -
           experiments::stein_gaussian(4, 64, 10, rbf_stein(eta)).mse;
  });
  run.check("stein_score", "rotation_equivariance", Comparison::less, 1e-8, [eta] {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed)
      worst = std::max(worst, experiments::stein_rotation_defect(6, 128, seed, rbf_stein(eta)));
    return worst;
  });
  run.check("stein_score", "vmf_tangent_cosine_s2_kappa4", Comparison::greater, 0.8,
            [eta] { return experiments::stein_vmf_tangent_cosine(3, 4.0, 512, 10, vmf_stein(eta)); });
  run.check("stein_score", "bitwise_determinism", Comparison::less_equal, 0.0, [eta] {
    Rng rng(31);
    const Matrix z = random_sphere_batch(96, 8, rng);
    return bitwise_mismatch(stein_estimate(z, vmf_stein(eta)).values, stein_estimate(z, vmf_stein(eta)).values);
  });
}

inline void entropy_properties(SuiteRunner& run, const VerifyOptions& opts) {
  run.check("entropy_grad", "surrogate_linear_in_score", Comparison::less, 1e-12, [] {
    Rng rng(41);
    const Matrix z = random_sphere_batch(64, 8, rng);
    const Matrix s1 = experiments::standard_gaussian(64, 8, rng);
    const Matrix s2 = experiments::standard_gaussian(64, 8, rng);
    const double a = 0.7, b = -1.9;
    const double lhs = entropy_surrogate(z, ScoreMatrix::analytic(a * s1 + b * s2)).value;
    const double rhs =
        a * entropy_surrogate(z, ScoreMatrix::analytic(s1)).value + b * entropy_surrogate(z, ScoreMatrix::analytic(s2)).value;
    return std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs));
  });
  run.check("entropy_grad", "analytic_score_grad_m4096", Comparison::less, 1e-3, [&opts] {
    Rng rng(42);
    Matrix a(3, 3);
    a << 1.2, 0.3, -0.1, 0.0, 0.8, 0.4, 0.2, -0.3, 1.5;
    EntropyGradCheckOptions o;
    o.score_source = ScoreSource::analytic_oracle;
    o.flip_score_sign = opts.flip_score_sign;
    return entropy_grad_check(a, 4096, rbf_stein(opts.ridge_eta), rng, o).relative_error;
  });
  run.check("entropy_grad", "stein_score_grad_m2048", Comparison::less_equal, 0.02, [&opts] {
    Rng rng(43);
    EntropyGradCheckOptions o;
    o.flip_score_sign = opts.flip_score_sign;
    return entropy_grad_check(Matrix::Identity(3, 3), 2048, rbf_stein(opts.ridge_eta), rng, o).relative_error;
  });
  run.check("entropy_grad", "detached_score_contract", Comparison::less_equal, 0.0, [&opts] {
    Rng rng(44);
    const Matrix z = random_sphere_batch(64, 8, rng);
    const ScoreMatrix est = stein_estimate(z, vmf_stein(opts.ridge_eta));
    const ScoreMatrix copy = ScoreMatrix::analytic(est.values);
    double violations = bitwise_mismatch(entropy_surrogate_grad(z, est), entropy_surrogate_grad(z, copy));
    ScoreMatrix attached = est;
    attached.detached = false;
    try {
      (void)entropy_surrogate(z, attached);
      violations += 1.0;
    } catch (const InvalidArgument&) {
    }
    return violations;
  });
}

inline void loss_properties(SuiteRunner& run) {
  run.check("losses", "total_decomposition_exact", Comparison::less_equal, 0.0, [] {
    Rng rng(51);
    const Matrix z1 = random_sphere_batch(32, 8, rng), z2 = random_sphere_batch(32, 8, rng);
    const ScoreMatrix s1 = ScoreMatrix::analytic(experiments::standard_gaussian(32, 8, rng));
    const ScoreMatrix s2 = ScoreMatrix::analytic(experiments::standard_gaussian(32, 8, rng));
    double worst = 0.0;
    for (double beta : {0.0, 0.01, 1.0, 3.5}) {
      const LossTerms t = mveb_loss(z1, z2, s1, s2, beta);
      worst = std::max(worst, std::abs(t.total - (-t.alignment + 0.5 * t.beta * (t.entropy_surr_1 + t.entropy_surr_2))));
    }
    return worst;
  });
  run.check("losses", "beta0_pair_permutation_invariance", Comparison::less, 1e-12, [] {
    Rng rng(52);
    const Matrix z1 = random_sphere_batch(40, 6, rng), z2 = random_sphere_batch(40, 6, rng);
    std::vector<int> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix p1(40, 6), p2(40, 6);
    for (int i = 0; i < 40; ++i) {
      p1.row(i) = z1.row(perm[static_cast<std::size_t>(i)]);
      p2.row(i) = z2.row(perm[static_cast<std::size_t>(i)]);
    }
    const ScoreMatrix s = ScoreMatrix::analytic(Matrix::Zero(40, 6));
    return std::abs(mveb_loss(z1, z2, s, s, 0.0).total - mveb_loss(p1, p2, s, s, 0.0).total);
  });
  run.check("losses", "infonce_bounds", Comparison::less_equal, 0.0, [] {
    Rng rng(53);
    double violations = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const Matrix z1 = random_sphere_batch(16, 4, rng), z2 = random_sphere_batch(16, 4, rng);
      if (infonce_loss(z1, z2, 0.3) < 0.0) violations += 1.0;
    }
    const Matrix same = Matrix::Ones(16, 4) * 0.5;
    if (std::abs(infonce_loss(same, same, 0.3) - std::log(16.0)) > 1e-12) violations += 1.0;
    return violations;
  });
  run.check("losses", "infonce_limit_gap_max_increase", Comparison::less_equal, 0.0, [] {
    const std::vector<double> g = experiments::infonce_limit_gaps({8, 32, 128, 512, 1024}, 10, 0.5, 2000);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < g.size(); ++k) worst = std::max(worst, g[k] - g[k - 1]);
    return worst;
  });
}

inline void encoder_properties(SuiteRunner& run) {
  run.check("encoder", "forward_unit_norm", Comparison::less, kUnitNormTolerance, [] {
    Rng rng(61);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      EncoderModel model = EncoderModel::mlp({32, 64, 64, 16}, rng);
      Vector p = model.flat_parameters();
      p *= std::pow(10.0, trial - 2);
      model.set_flat_parameters(p);
      const Matrix z = forward(model, experiments::standard_gaussian(64, 32, rng)).z;
      worst = std::max(worst, (z.rowwise().norm().array() - 1.0).abs().maxCoeff());
    }
    return worst;
  });
  run.check("encoder", "backward_matches_fd", Comparison::less, 1e-4, [] {
    Rng rng(62);
    EncoderModel model = EncoderModel::mlp({32, 64, 64, 16}, rng);
    Vector p = model.flat_parameters();
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += 0.01 * std::normal_distribution<double>(0.0, 1.0)(rng);
    model.set_flat_parameters(p);
    experiments::ProbeLoss loss{experiments::standard_gaussian(4, 16, rng), experiments::standard_gaussian(1, 16, rng).row(0).transpose()};
    return experiments::encoder_gradient_check(model, experiments::standard_gaussian(4, 32, rng), loss).max_relative_error;
  });
  run.check("encoder", "ema_fixed_point", Comparison::less_equal, 0.0, [] {
    Rng rng(63);
    const EncoderModel online = EncoderModel::mlp({8, 16, 4}, rng);
    double violations = 0.0;
    for (double base : {0.0, 0.5, 0.996, 1.0}) {
      TargetBranch target(online, base, MomentumSchedule::cosine_increase);
      for (int step = 0; step <= 10; ++step) ema_update(target, online, step, 10);
      if (!(target.params == online)) violations += 1.0;
    }
    return violations;
  });
  run.check("encoder", "tape_bitwise_determinism", Comparison::less_equal, 0.0, [] {
    auto tape_once = [] {
      Rng rng(64);
      const EncoderModel model = EncoderModel::mlp({16, 32, 8}, rng);
      const Matrix v1 = experiments::standard_gaussian(32, 16, rng), v2 = experiments::standard_gaussian(32, 16, rng);
      const ForwardResult f1 = forward(model, v1), f2 = forward(model, v2);
      const ScoreMatrix s1 = stein_estimate(f1.z, SteinConfig{}), s2 = stein_estimate(f2.z, SteinConfig{});
      const PairGrad g = mveb_loss_grad(f1.z, f2.z, s1, s2, 0.01);
      GradientTape tape(model);
      backward(model, f1.cache, g.d_z1, tape);
      backward(model, f2.cache, g.d_z2, tape);
      return Matrix(tape.flat());
    };
    return bitwise_mismatch(tape_once(), tape_once());
  });
}

inline void synth_properties(SuiteRunner& run) {
  run.check("synth_data", "generate_bitwise_determinism", Comparison::less_equal, 0.0, [] {
    GenConfig cfg;
    cfg.seed = 7;
    const ViewPairBatch a = generate(cfg, 200), b = generate(cfg, 200);
    return bitwise_mismatch(a.v1, b.v1) + bitwise_mismatch(a.v2, b.v2) + bitwise_mismatch(a.latent, b.latent) +
           (a.labels == b.labels ? 0.0 : 1.0);
  });
  run.check("synth_data", "uniformity_rotation_permutation_invariance", Comparison::less, 1e-12, [] {
    Rng rng(71);
    const Matrix z = random_sphere_batch(100, 8, rng);
    const double base = uniformity_metric(z);
    const Matrix rotated = z * experiments::random_rotation(8, rng).transpose();
    Matrix reversed = z.colwise().reverse();
    return std::max(std::abs(uniformity_metric(rotated) - base), std::abs(uniformity_metric(reversed) - base));
  });
  run.check("synth_data", "noiseless_views_align_exactly", Comparison::less, 1e-12, [] {
    GenConfig cfg;
    cfg.nuisance_scale = 0.0;
    cfg.noise_scale = 0.0;
    const ViewPairBatch b = generate(cfg, 100);
    Rng rng(72);
    const Matrix map = experiments::standard_gaussian(cfg.input_dim, 6, rng);
    const Matrix z1 = normalize_rows(b.v1 * map), z2 = normalize_rows(b.v2 * map);
    return std::abs(1.0 - alignment(z1, z2));
  });
}

inline void info_properties(SuiteRunner& run) {
  const auto sweep = std::make_shared<experiments::IdentitySweep>();
  run.check("info_oracle", "mi_identities_1000_joints", Comparison::less, 1e-12, [sweep] {
    *sweep = experiments::mi_identity_sweep(1000, 81);
    return std::max(sweep->max_gap_conditional_mi, sweep->max_gap_mi);
  });
  run.check("info_oracle", "chain_rule", Comparison::less, 1e-12, [sweep] { return sweep->max_chain_rule_gap; });
  run.check("info_oracle", "nonnegativity_min_quantity", Comparison::greater, -1e-12,
            [sweep] { return sweep->min_quantity; });
  run.check("info_oracle", "deterministic_encoder_zero_cond_entropy", Comparison::less_equal, 0.0, [] {
    Rng rng(82);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n1 = 2 + trial % 5, n2 = 2 + (trial / 5) % 5, nz = 2 + trial % 7;
      const info::DiscreteJoint views = info::random_joint({n1, n2}, rng);
      std::uniform_int_distribution<std::size_t> pick(0, nz - 1);
      std::vector<std::vector<std::size_t>> enc(n1, std::vector<std::size_t>(n2));
      for (auto& row : enc)
        for (auto& z : row) z = pick(rng);
      const info::DiscreteJoint j = info::deterministic_encoding(views, nz, enc);
      worst = std::max(worst, std::abs(info::conditional_entropy(j, {0}, {1, 2})));
    }
    return worst;
  });
  const auto bound = std::make_shared<experiments::BoundSweep>();
  run.check("info_oracle", "kl_decomposition_200_pairs", Comparison::less, 1e-12, [bound] {
    *bound = experiments::variational_bound_sweep(200, 83);
    return bound->max_kl_gap;
  });
  run.check("info_oracle", "variational_bound_violations", Comparison::less_equal, 0.0,
            [bound] { return static_cast<double>(bound->violations); });
  run.check("info_oracle", "bound_equality_when_q_equals_p", Comparison::less, 1e-12,
            [bound] { return bound->max_equal_slack; });
}

inline TrainConfig short_train_config(double eta) {
  TrainConfig cfg;
  cfg.steps = 30;
  cfg.batch_size = 64;
  cfg.log_interval = 10;
  cfg.probe_train_size = 256;
  cfg.probe_test_size = 128;
  cfg.probe.steps = 50;
  cfg.stein.ridge_eta = eta;
  return cfg;
}

inline void harness_properties(SuiteRunner& run, const VerifyOptions& opts) {
  run.check("harness_cli", "train_metrics_bitwise_determinism", Comparison::less_equal, 0.0, [&opts] {
    const TrainConfig cfg = short_train_config(opts.ridge_eta);
    auto stream = [&cfg] {
      std::string out;
      train(cfg, [&out](const MetricsRecord& r) { out += format_record(r) + '\n'; });
      return out;
    };
    return stream() == stream() ? 0.0 : 1.0;
  });
  run.check("harness_cli", "short_runs_finite", Comparison::less_equal, 0.0, [&opts] {
    double bad = 0.0;
    for (LossKind kind : {LossKind::mveb, LossKind::infonce, LossKind::decorrelation})
      for (Wiring w : {Wiring::symmetric, Wiring::momentum_target}) {
        TrainConfig cfg = short_train_config(opts.ridge_eta);
        cfg.loss_kind = kind;
        cfg.wiring = w;
        try {
          for (const auto& r : train(cfg).records)
            if (!std::isfinite(r.loss.total)) bad += 1.0;
        } catch (const NumericalError&) {
          bad += 1.0;
        }
      }
    return bad;
  });
  if (!opts.include_training) return;
  for (Wiring w : {Wiring::symmetric, Wiring::momentum_target})
    run.check("harness_cli", std::string("no_collapse_spread_") + to_string(w), Comparison::greater, 0.1,
              [&opts, w] {
                TrainConfig cfg;
                cfg.wiring = w;
                cfg.stein.ridge_eta = opts.ridge_eta;
                return train(cfg).records.back().spread;
              });
}

}  // namespace detail

inline VerifyReport verify_suite(const VerifyOptions& opts = {}) {
  VerifyReport report;
  detail::SuiteRunner run(report);
  detail::info_properties(run);
  detail::sphere_properties(run);
  detail::kernel_properties(run, opts.ridge_eta);
  detail::stein_properties(run, opts.ridge_eta);
  detail::entropy_properties(run, opts);
  detail::loss_properties(run);
  detail::encoder_properties(run);
  detail::synth_properties(run);
  detail::harness_properties(run, opts);
  return report;
}

}  // namespace mveb
