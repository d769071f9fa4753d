#pragma once

// Training loop for the two-view encoder: per step, draw a batch, embed both
// views, estimate scores on each branch, evaluate the loss and its gradient,
// backpropagate, take an SGD step and (momentum-target wiring) update the
// EMA branch.

#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mveb/encoder.hpp"
#include "mveb/error.hpp"
#include "mveb/losses.hpp"
#include "mveb/stein_score.hpp"
#include "mveb/synth_data.hpp"

namespace mveb {

enum class Wiring { symmetric, momentum_target };
enum class LossKind { mveb, infonce, decorrelation };

inline const char* to_string(Wiring w) { return w == Wiring::symmetric ? "symmetric" : "momentum_target"; }
inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::mveb: return "mveb";
    case LossKind::infonce: return "infonce";
    case LossKind::decorrelation: return "decorrelation";
  }
  return "?";
}

struct TrainConfig {
  double beta = 0.01;
  int batch_size = 256;
  int steps = 2000;
  double lr = 0.05;
  double sgd_momentum = 0.9;
  double weight_decay = 1e-4;
  Wiring wiring = Wiring::symmetric;
  double ema_base = 0.996;
  SteinConfig stein{};
  GenConfig data{};
  LossKind loss_kind = LossKind::mveb;
  BaselineConfig baseline{};
  std::uint64_t seed = 0;

  int hidden_width = 64;
  int embed_dim = 16;
  int log_interval = 100;
  /// Probe accuracy is measured every probe_interval steps and at the end;
  /// 0 means only at the end.
  int probe_interval = 0;
  int probe_train_size = 2048;
  int probe_test_size = 1024;
  ProbeConfig probe{};

  void validate() const {
    detail::require_config(beta >= 0.0 && std::isfinite(beta), "beta must be >= 0");
    detail::require_config(batch_size >= 2, "batch_size must be >= 2");
    detail::require_config(steps >= 1, "steps must be >= 1");
    detail::require_config(lr >= 0.0, "lr must be >= 0");
    detail::require_config(sgd_momentum >= 0.0 && sgd_momentum < 1.0, "sgd_momentum must be in [0, 1)");
    detail::require_config(weight_decay >= 0.0, "weight_decay must be >= 0");
    detail::require_config(ema_base >= 0.0 && ema_base <= 1.0, "ema_base must be in [0, 1]");
    detail::require_config(hidden_width >= 1, "hidden_width must be >= 1");
    detail::require_config(embed_dim >= 2, "embed_dim must be >= 2");
    detail::require_config(log_interval >= 1, "log_interval must be >= 1");
    detail::require_config(probe_interval >= 0, "probe_interval must be >= 0");
    detail::require_config(probe_train_size >= 2 && probe_test_size >= 1, "probe set sizes too small");
    detail::require_config(probe.steps >= 0 && probe.lr > 0.0 && probe.l2 >= 0.0, "invalid probe settings");
    stein.validate();
    data.validate();
    baseline.validate();
  }
};

struct MetricsRecord {
  int step = 0;
  LossTerms loss{};
  double alignment_metric = 0.0;
  double uniformity = 0.0;
  double spread = 0.0;
  std::optional<double> probe_accuracy;
  double resolved_bandwidth = 0.0;
};

struct TrainResult {
  EncoderModel model;
  std::vector<MetricsRecord> records;
};

/// Generator stream ids. Probe sets do not depend on the training seed so
/// runs with different seeds are scored on the same data.
inline constexpr std::uint64_t kProbeTrainStream = 1;
inline constexpr std::uint64_t kProbeTestStream = 2;
inline std::uint64_t training_stream(std::uint64_t seed) { return 1000 + seed; }

inline EncoderModel make_encoder(const TrainConfig& cfg) {
  Rng init(cfg.seed);
  return EncoderModel::mlp({cfg.data.input_dim, cfg.hidden_width, cfg.hidden_width, cfg.embed_dim}, init);
}

/// Probe accuracy of view-1 embeddings from `model` on the fixed probe sets.
inline double probe_accuracy(const EncoderModel& model, const TrainConfig& cfg) {
  ViewGenerator train_gen(cfg.data, kProbeTrainStream);
  ViewGenerator test_gen(cfg.data, kProbeTestStream);
  const ViewPairBatch tr = train_gen.next(cfg.probe_train_size);
  const ViewPairBatch te = test_gen.next(cfg.probe_test_size);
  return linear_probe(forward(model, tr.v1).z, tr.labels, forward(model, te.v1).z, te.labels, cfg.probe);
}

using MetricsObserver = std::function<void(const MetricsRecord&)>;

inline TrainResult train(const TrainConfig& cfg, const MetricsObserver& observer = {}) {
  cfg.validate();
  EncoderModel model = make_encoder(cfg);
  std::optional<TargetBranch> target;
  if (cfg.wiring == Wiring::momentum_target)
    target.emplace(model, cfg.ema_base, MomentumSchedule::cosine_increase);
  std::optional<SgdOptimizer> opt;
  if (cfg.lr > 0.0) opt.emplace(cfg.lr, cfg.sgd_momentum, cfg.weight_decay);

  ViewGenerator gen(cfg.data, training_stream(cfg.seed));
  GradientTape tape(model);
  TrainResult result;

  for (int step = 0; step < cfg.steps; ++step) {
    const ViewPairBatch batch = gen.next(cfg.batch_size);
    const ForwardResult f1 = forward(model, batch.v1);
    const ForwardResult f2 = forward(model, batch.v2);
    const bool momentum = target.has_value();
    // In momentum-target wiring the alignment partner of z1 is the target's
    // embedding of view 2; the online pass of view 2 still feeds H(z2).
    const Matrix z2_align = momentum ? forward(target->params, batch.v2).z : f2.z;

    LossTerms terms;
    PairGrad grad;
    double bandwidth = 0.0;
    switch (cfg.loss_kind) {
      case LossKind::mveb: {
        const PairGrad ag = alignment_grad(f1.z, z2_align);
        grad.d_z1 = -ag.d_z1;
        grad.d_z2 = momentum ? Matrix(Matrix::Zero(f2.z.rows(), f2.z.cols())) : Matrix(-ag.d_z2);
        if (cfg.beta > 0.0) {
          const ScoreMatrix s1 = stein_estimate(f1.z, cfg.stein);
          const ScoreMatrix s2 = stein_estimate(f2.z, cfg.stein);
          bandwidth = s1.resolved_bandwidth;
          terms = assemble_mveb(alignment(f1.z, z2_align), entropy_surrogate(f1.z, s1).value,
                                entropy_surrogate(f2.z, s2).value, cfg.beta);
          grad.d_z1 += 0.5 * cfg.beta * entropy_surrogate_grad(f1.z, s1);
          grad.d_z2 += 0.5 * cfg.beta * entropy_surrogate_grad(f2.z, s2);
        } else {
          // beta = 0 gives the scores no weight. Skipping the estimator also
          // keeps collapsed batches (bandwidth at its floor) from overflowing
          // the vMF kernel.
          bandwidth = resolve_bandwidth(f1.z, cfg.stein.kernel);
          terms = assemble_mveb(alignment(f1.z, z2_align), 0.0, 0.0, 0.0);
        }
        break;
      }
      case LossKind::infonce: {
        terms.alignment = alignment(f1.z, z2_align);
        terms.total = infonce_loss(f1.z, z2_align, cfg.baseline.temperature);
        grad = infonce_loss_grad(f1.z, z2_align, cfg.baseline.temperature);
        if (momentum) grad.d_z2.setZero();
        break;
      }
      case LossKind::decorrelation: {
        terms.alignment = alignment(f1.z, z2_align);
        terms.total = decorrelation_loss(f1.z, z2_align, cfg.baseline.decorrelation_lambda);
        grad = decorrelation_loss_grad(f1.z, z2_align, cfg.baseline.decorrelation_lambda);
        if (momentum) grad.d_z2.setZero();
        break;
      }
    }
    if (!std::isfinite(terms.total) || !grad.d_z1.allFinite() || !grad.d_z2.allFinite())
      throw NumericalError("non-finite loss at step " + std::to_string(step + 1));

    tape.zero();
    backward(model, f1.cache, grad.d_z1, tape);
    backward(model, f2.cache, grad.d_z2, tape);
    if (opt) opt->step(model, tape);
    if (target) ema_update(*target, model, step + 1, cfg.steps);

    const int done = step + 1;
    const bool last = done == cfg.steps;
    if (done % cfg.log_interval == 0 || last) {
      MetricsRecord rec;
      rec.step = done;
      rec.loss = terms;
      rec.alignment_metric = alignment_metric(f1.z, z2_align);
      rec.uniformity = uniformity_metric(f1.z);
      rec.spread = embedding_spread(f1.z);
      rec.resolved_bandwidth = bandwidth;
      if (last || (cfg.probe_interval > 0 && done % cfg.probe_interval == 0))
        rec.probe_accuracy = probe_accuracy(model, cfg);
      if (observer) observer(rec);
      result.records.push_back(rec);
    }
  }
  result.model = std::move(model);
  return result;
}

/// One line per record: `step=<n>` followed by named numeric fields,
/// printed at full precision so identical runs produce identical text.
inline std::string format_record(const MetricsRecord& r) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "step=" << r.step << " alignment=" << r.loss.alignment << " entropy_surr_1=" << r.loss.entropy_surr_1
     << " entropy_surr_2=" << r.loss.entropy_surr_2 << " total=" << r.loss.total << " beta=" << r.loss.beta
     << " alignment_metric=" << r.alignment_metric << " uniformity=" << r.uniformity << " spread=" << r.spread;
  if (r.probe_accuracy) os << " probe_accuracy=" << *r.probe_accuracy;
  os << " resolved_bandwidth=" << r.resolved_bandwidth;
  return os.str();
}

struct SweepRow {
  double beta = 0.0;
  MetricsRecord final;
};

inline std::vector<SweepRow> beta_sweep(const TrainConfig& cfg, const std::vector<double>& betas,
                                        const std::function<void(const SweepRow&)>& on_row = {}) {
  detail::require_config(!betas.empty(), "beta sweep needs at least one beta");
  std::vector<SweepRow> rows;
  for (double b : betas) {
    TrainConfig run = cfg;
    run.beta = b;
    TrainResult r = train(run);
    rows.push_back(SweepRow{b, r.records.back()});
    if (on_row) on_row(rows.back());
  }
  return rows;
}

/// Comma-separated summary table with a header row.
inline void write_summary(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "beta,total,alignment,alignment_metric,uniformity,spread,probe_accuracy\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& row : rows) {
    const auto& f = row.final;
    os << row.beta << ',' << f.loss.total << ',' << f.loss.alignment << ',' << f.alignment_metric << ','
       << f.uniformity << ',' << f.spread << ',' << f.probe_accuracy.value_or(std::nan("")) << '\n';
  }
}

}  // namespace mveb
