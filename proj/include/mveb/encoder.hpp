#pragma once

// Small MLP encoder with a sphere-normalized output, hand-written reverse
// mode, momentum SGD, and an EMA target copy.
//
// Checkpoint format (text, one token stream, whitespace separated):
//
//   mveb-checkpoint 1
//   layers <L>
//   layer <out> <in> <relu|identity>
//   <out*in weight values, row-major>
//   <out bias values>
//   ... repeated L times
//
// Values are written with 17 significant digits so a save/load round trip is
// exact.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mveb/error.hpp"
#include "mveb/sphere_vmf.hpp"

namespace mveb {

enum class Activation { relu, identity };

inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::identity;
};

class EncoderModel {
 public:
  EncoderModel() = default;
  explicit EncoderModel(std::vector<Layer> layers) : layers_(std::move(layers)) { check_shapes(); }

  /// Affine + ReLU for every hidden width, final affine, then normalize.
  /// widths = {input, hidden..., output}. He-normal weights, zero biases.
  static EncoderModel mlp(const std::vector<int>& widths, Rng& rng) {
    detail::require(widths.size() >= 2, "mlp needs at least input and output widths");
    std::vector<Layer> layers;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const int in = widths[l];
      const int out = widths[l + 1];
      detail::require(in >= 1 && out >= 1, "layer widths must be >= 1");
      Layer layer;
      layer.weight.resize(out, in);
      const double scale = std::sqrt(2.0 / in);
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) layer.weight(r, c) = scale * normal(rng);
      layer.bias = Vector::Zero(out);
      layer.activation = l + 2 == widths.size() ? Activation::identity : Activation::relu;
      layers.push_back(std::move(layer));
    }
    return EncoderModel(std::move(layers));
  }

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& layers() noexcept { return layers_; }
  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  /// Parameters in checkpoint order (per layer: weight row-major, then bias).
  Vector flat_parameters() const {
    Vector out(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    for (const auto& l : layers_) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out[k++] = l.weight(r, c);
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) out[k++] = l.bias[r];
    }
    return out;
  }

  void set_flat_parameters(const Vector& p) {
    detail::require(p.size() == static_cast<Eigen::Index>(parameter_count()), "parameter vector size mismatch");
    Eigen::Index k = 0;
    for (auto& l : layers_) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = p[k++];
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = p[k++];
    }
  }

  bool same_shape(const EncoderModel& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].weight.rows() != other.layers_[i].weight.rows() ||
          layers_[i].weight.cols() != other.layers_[i].weight.cols() ||
          layers_[i].activation != other.layers_[i].activation)
        return false;
    }
    return true;
  }

  friend bool operator==(const EncoderModel& a, const EncoderModel& b) {
    return a.same_shape(b) && a.flat_parameters() == b.flat_parameters();
  }

 private:
  void check_shapes() const {
    detail::require(!layers_.empty(), "encoder needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      detail::require(layers_[i].bias.size() == layers_[i].weight.rows(), "bias size must equal layer output");
      if (i > 0)
        detail::require(layers_[i].weight.cols() == layers_[i - 1].weight.rows(), "layer shapes do not chain");
    }
    detail::require(layers_.back().weight.rows() >= 2, "output dimension must be >= 2");
  }

  std::vector<Layer> layers_;
};

/// Activations retained by forward for the backward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;       // input to each layer
  std::vector<Matrix> pre;          // pre-activation of each layer
  Matrix unnormalized;              // u, output of the final affine layer
  Vector norms;                     // ||u|| per row
  Matrix output;                    // z = u / ||u||

  bool empty() const noexcept { return inputs.empty(); }
};

struct ForwardResult {
  Matrix z;
  ForwardCache cache;
};

/// z = normalize(MLP(v)) per row of `v`.
inline ForwardResult forward(const EncoderModel& model, const Matrix& v) {
  detail::require(v.cols() == model.input_dim(), "encoder input dimension mismatch");
  detail::require(v.rows() >= 1, "encoder input batch is empty");
  ForwardResult r;
  Matrix h = v;
  for (const auto& layer : model.layers()) {
    r.cache.inputs.push_back(h);
    Matrix pre = (h * layer.weight.transpose()).rowwise() + layer.bias.transpose();
    h = layer.activation == Activation::relu ? Matrix(pre.cwiseMax(0.0)) : pre;
    r.cache.pre.push_back(std::move(pre));
  }
  r.cache.norms = h.rowwise().norm();
  for (Eigen::Index i = 0; i < h.rows(); ++i)
    if (!(r.cache.norms[i] > 0.0))
      throw NumericalError("encoder pre-normalization output is zero for row " + std::to_string(i));
  r.cache.output = r.cache.norms.cwiseInverse().asDiagonal() * h;
  r.cache.unnormalized = std::move(h);
  r.z = r.cache.output;
  return r;
}

/// Per-parameter gradient accumulators with the same shapes as the model.
class GradientTape {
 public:
  GradientTape() = default;
  explicit GradientTape(const EncoderModel& model) {
    for (const auto& l : model.layers())
      grads_.push_back(Layer{Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size()),
                             l.activation});
  }

  const std::vector<Layer>& layers() const noexcept { return grads_; }
  std::vector<Layer>& layers() noexcept { return grads_; }

  void zero() {
    for (auto& g : grads_) {
      g.weight.setZero();
      g.bias.setZero();
    }
  }

  bool matches(const EncoderModel& model) const {
    if (grads_.size() != model.layers().size()) return false;
    for (std::size_t i = 0; i < grads_.size(); ++i)
      if (grads_[i].weight.rows() != model.layers()[i].weight.rows() ||
          grads_[i].weight.cols() != model.layers()[i].weight.cols())
        return false;
    return true;
  }

  /// Same ordering as EncoderModel::flat_parameters.
  Vector flat() const {
    std::size_t n = 0;
    for (const auto& g : grads_) n += static_cast<std::size_t>(g.weight.size() + g.bias.size());
    Vector out(static_cast<Eigen::Index>(n));
    Eigen::Index k = 0;
    for (const auto& g : grads_) {
      for (Eigen::Index r = 0; r < g.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < g.weight.cols(); ++c) out[k++] = g.weight(r, c);
      for (Eigen::Index r = 0; r < g.bias.size(); ++r) out[k++] = g.bias[r];
    }
    return out;
  }

 private:
  std::vector<Layer> grads_;
};

/// Accumulates dL/dphi into `tape` given dL/dz in `upstream`. The
/// normalization layer contributes the Jacobian (I - z z^T) / ||u||.
inline void backward(const EncoderModel& model, const ForwardCache& cache, const Matrix& upstream,
                     GradientTape& tape) {
  if (cache.empty()) throw InvalidArgument("backward called without a forward cache");
  detail::require(tape.matches(model), "gradient tape does not match the model");
  detail::require(cache.inputs.size() == model.layers().size(), "forward cache does not match the model");
  detail::require(upstream.rows() == cache.output.rows() && upstream.cols() == cache.output.cols(),
                  "upstream gradient shape mismatch");

  const Matrix& z = cache.output;
  const Vector radial = z.cwiseProduct(upstream).rowwise().sum();
  Matrix grad = cache.norms.cwiseInverse().asDiagonal() * (upstream - radial.asDiagonal() * z);

  for (std::size_t idx = model.layers().size(); idx-- > 0;) {
    const Layer& layer = model.layers()[idx];
    if (layer.activation == Activation::relu) grad = grad.cwiseProduct((cache.pre[idx].array() > 0.0).cast<double>().matrix());
    Layer& g = tape.layers()[idx];
    g.weight.noalias() += grad.transpose() * cache.inputs[idx];
    g.bias += grad.colwise().sum().transpose();
    if (idx > 0) grad = grad * layer.weight;
  }
}

/// Classical momentum SGD: v <- mu v + (g + wd w); w <- w - lr v.
class SgdOptimizer {
 public:
  SgdOptimizer(double lr, double momentum, double weight_decay)
      : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
    detail::require(lr > 0.0, "learning rate must be > 0");
    detail::require(momentum >= 0.0 && momentum < 1.0, "momentum must be in [0, 1)");
    detail::require(weight_decay >= 0.0, "weight decay must be >= 0");
  }

  void step(EncoderModel& model, const GradientTape& tape) {
    detail::require(tape.matches(model), "gradient tape does not match the model");
    if (velocity_.layers().empty()) velocity_ = GradientTape(model);
    for (std::size_t i = 0; i < model.layers().size(); ++i) {
      Layer& w = model.layers()[i];
      const Layer& g = tape.layers()[i];
      Layer& v = velocity_.layers()[i];
      v.weight = momentum_ * v.weight + g.weight + weight_decay_ * w.weight;
      v.bias = momentum_ * v.bias + g.bias + weight_decay_ * w.bias;
      w.weight -= lr_ * v.weight;
      w.bias -= lr_ * v.bias;
    }
  }

 private:
  double lr_;
  double momentum_;
  double weight_decay_;
  GradientTape velocity_;
};

enum class MomentumSchedule { constant, cosine_increase };

/// EMA copy of the online encoder. Never receives optimizer gradients.
struct TargetBranch {
  EncoderModel params;
  double base_momentum = 0.996;
  MomentumSchedule schedule = MomentumSchedule::cosine_increase;

  TargetBranch(EncoderModel online_copy, double momentum, MomentumSchedule sched)
      : params(std::move(online_copy)), base_momentum(momentum), schedule(sched) {
    detail::require(momentum >= 0.0 && momentum <= 1.0, "target momentum must be in [0, 1]");
  }

  /// m(step) = 1 - (1 - m0)(cos(pi step / T) + 1) / 2 under cosine_increase.
  double momentum_at(int step, int total_steps) const {
    detail::require(total_steps >= 1, "total_steps must be >= 1");
    detail::require(step >= 0 && step <= total_steps, "ema step outside [0, total_steps]");
    if (schedule == MomentumSchedule::constant) return base_momentum;
    const double c = std::cos(std::numbers::pi * step / static_cast<double>(total_steps));
    return 1.0 - (1.0 - base_momentum) * (c + 1.0) / 2.0;
  }
};

/// target <- m target + (1 - m) online, written as o + m (t - o) so that
/// m = 0 and online == target are exact; m = 1 leaves target untouched.
inline void ema_update(TargetBranch& target, const EncoderModel& online, int step, int total_steps) {
  detail::require(target.params.same_shape(online), "ema_update: model shapes differ");
  const double m = target.momentum_at(step, total_steps);
  if (m == 1.0) return;
  for (std::size_t i = 0; i < online.layers().size(); ++i) {
    Layer& t = target.params.layers()[i];
    const Layer& o = online.layers()[i];
    t.weight = o.weight + m * (t.weight - o.weight);
    t.bias = o.bias + m * (t.bias - o.bias);
  }
}

inline constexpr const char* kCheckpointMagic = "mveb-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline void write_checkpoint(std::ostream& os, const EncoderModel& model) {
  os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  os << "layers " << model.layers().size() << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& l : model.layers()) {
    os << "layer " << l.weight.rows() << ' ' << l.weight.cols() << ' ' << to_string(l.activation) << '\n';
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) os << (c ? " " : "") << l.weight(r, c);
      os << '\n';
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) os << (r ? " " : "") << l.bias[r];
    os << '\n';
  }
}

inline EncoderModel read_checkpoint(std::istream& is) {
  auto fail = [](const std::string& what) { throw InvalidArgument("malformed checkpoint: " + what); };
  std::string magic, tag;
  int version = 0;
  std::size_t count = 0;
  if (!(is >> magic >> version) || magic != kCheckpointMagic) fail("bad header");
  if (version != kCheckpointVersion) fail("unsupported version " + std::to_string(version));
  if (!(is >> tag >> count) || tag != "layers" || count == 0) fail("bad layer count");
  std::vector<Layer> layers;
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::Index rows = 0, cols = 0;
    std::string act;
    if (!(is >> tag >> rows >> cols >> act) || tag != "layer" || rows < 1 || cols < 1) fail("bad layer header");
    Layer l;
    if (act == "relu") l.activation = Activation::relu;
    else if (act == "identity") l.activation = Activation::identity;
    else fail("unknown activation '" + act + "'");
    l.weight.resize(rows, cols);
    l.bias.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        if (!(is >> l.weight(r, c))) fail("truncated weights");
    for (Eigen::Index r = 0; r < rows; ++r)
      if (!(is >> l.bias[r])) fail("truncated bias");
    layers.push_back(std::move(l));
  }
  return EncoderModel(std::move(layers));
}

inline void save_checkpoint(const std::string& path, const EncoderModel& model) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open checkpoint for writing: " + path);
  write_checkpoint(os, model);
}

inline EncoderModel load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open checkpoint: " + path);
  return read_checkpoint(is);
}

}  // namespace mveb
