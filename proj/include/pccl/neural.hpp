#pragma once

// Fully connected networks with rectifier hidden layers, exact reverse-mode
// gradients (parameters and inputs), Adam/SGD updates and Polyak averaging.
//
// Batches are column-major: one column per sample.

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>  // nlohmann/json (vendored)

#include "pccl/errors.hpp"

namespace pccl {

enum class OutputActivation { Identity, Tanh };

inline std::string to_string(OutputActivation a) {
  return a == OutputActivation::Tanh ? "tanh" : "identity";
}

inline OutputActivation output_activation_from_string(const std::string& s) {
  if (s == "tanh") return OutputActivation::Tanh;
  if (s == "identity") return OutputActivation::Identity;
  throw InvalidConfig("unknown output activation '" + s + "'");
}

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

// Gradient (or any other per-parameter quantity) laid out like an Mlp.
struct ParamSet {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;

  bool all_finite() const {
    for (const auto& w : weights) if (!w.allFinite()) return false;
    for (const auto& b : bias) if (!b.allFinite()) return false;
    return true;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& w : weights) if (w.size()) m = std::max(m, w.cwiseAbs().maxCoeff());
    for (const auto& b : bias) if (b.size()) m = std::max(m, b.cwiseAbs().maxCoeff());
    return m;
  }
};

struct ForwardCache {
  std::uint64_t stamp = 0;
  // activations[0] is the input; activations[l] feeds layer l.
  std::vector<Eigen::MatrixXd> activations;
  std::vector<Eigen::MatrixXd> pre_activations;
  Eigen::MatrixXd output;
};

namespace detail {
inline std::uint64_t next_stamp() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}
}  // namespace detail

class Mlp {
 public:
  Mlp() = default;

  // `widths` = {input, hidden..., output}. Parameters start at zero.
  Mlp(std::vector<int> widths, OutputActivation out)
      : widths_(std::move(widths)), out_(out), stamp_(detail::next_stamp()) {
    if (widths_.size() < 2) throw ShapeError("Mlp needs at least input and output widths");
    for (int w : widths_) {
      if (w < 1) throw ShapeError("Mlp layer widths must be positive");
    }
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      layers_.push_back({Eigen::MatrixXd::Zero(widths_[l + 1], widths_[l]),
                         Eigen::VectorXd::Zero(widths_[l + 1])});
    }
  }

  // He-uniform for rectifier layers; fan-in uniform scaled by `final_scale`
  // for the output layer. Biases start at zero.
  void initialize(std::mt19937_64& rng, double final_scale = 1.0) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const double fan_in = static_cast<double>(widths_[l]);
      const bool last = l + 1 == layers_.size();
      const double bound = last ? final_scale / std::sqrt(fan_in) : std::sqrt(6.0 / fan_in);
      std::uniform_real_distribution<double> u(-bound, bound);
      auto& w = layers_[l].weights;
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = u(rng);
      }
      layers_[l].bias.setZero();
    }
    touch();
  }

  const std::vector<int>& widths() const { return widths_; }
  int input_width() const { return widths_.front(); }
  int output_width() const { return widths_.back(); }
  OutputActivation output_activation() const { return out_; }
  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  // Mutable access invalidates outstanding caches.
  std::vector<DenseLayer>& mutable_layers() {
    touch();
    return layers_;
  }

  std::uint64_t stamp() const { return stamp_; }

  bool same_architecture(const Mlp& other) const {
    return widths_ == other.widths_ && out_ == other.out_;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

  ParamSet zeros_like() const {
    ParamSet p;
    for (const auto& l : layers_) {
      p.weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
      p.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    return p;
  }

  ParamSet parameters() const {
    ParamSet p;
    for (const auto& l : layers_) {
      p.weights.push_back(l.weights);
      p.bias.push_back(l.bias);
    }
    return p;
  }

  // Batched forward; `inputs` is input_width x batch.
  ForwardCache forward(const Eigen::MatrixXd& inputs) const {
    if (inputs.rows() != input_width()) {
      throw ShapeError("Mlp::forward: expected input width " + std::to_string(input_width()) +
                       ", got " + std::to_string(inputs.rows()));
    }
    ForwardCache cache;
    cache.stamp = stamp_;
    cache.activations.reserve(layers_.size());
    cache.pre_activations.reserve(layers_.size());
    Eigen::MatrixXd a = inputs;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Eigen::MatrixXd z = layers_[l].weights * a;
      z.colwise() += layers_[l].bias;
      cache.activations.push_back(std::move(a));
      const bool last = l + 1 == layers_.size();
      if (!last) {
        a = z.cwiseMax(0.0);
      } else if (out_ == OutputActivation::Tanh) {
        a = z.array().tanh().matrix();
      } else {
        a = z;
      }
      cache.pre_activations.push_back(std::move(z));
    }
    cache.output = std::move(a);
    return cache;
  }

  Eigen::VectorXd predict(const Eigen::VectorXd& input) const {
    return forward(input).output.col(0);
  }

  struct Gradients {
    ParamSet params;             // summed over the batch
    Eigen::MatrixXd input_grad;  // input_width x batch
  };

  // Contracts the network Jacobian with `output_grad` (output_width x batch).
  Gradients backward(const ForwardCache& cache, const Eigen::MatrixXd& output_grad) const {
    if (cache.stamp != stamp_ || cache.pre_activations.size() != layers_.size()) {
      throw ContractViolation("Mlp::backward: cache does not match current parameters");
    }
    if (output_grad.rows() != output_width() || output_grad.cols() != cache.output.cols()) {
      throw ShapeError("Mlp::backward: output gradient shape mismatch");
    }
    Gradients g;
    g.params.weights.resize(layers_.size());
    g.params.bias.resize(layers_.size());

    Eigen::MatrixXd delta;
    const std::size_t last = layers_.size() - 1;
    if (out_ == OutputActivation::Tanh) {
      delta = output_grad.cwiseProduct((1.0 - cache.output.array().square()).matrix());
    } else {
      delta = output_grad;
    }
    for (std::size_t l = last + 1; l-- > 0;) {
      if (l != last) {
        delta = delta.cwiseProduct(
            (cache.pre_activations[l].array() > 0.0).cast<double>().matrix());
      }
      g.params.weights[l].noalias() = delta * cache.activations[l].transpose();
      g.params.bias[l] = delta.rowwise().sum();
      Eigen::MatrixXd upstream = layers_[l].weights.transpose() * delta;
      delta = std::move(upstream);
    }
    g.input_grad = std::move(delta);
    return g;
  }

  void touch() { stamp_ = detail::next_stamp(); }

 private:
  std::vector<int> widths_;
  OutputActivation out_ = OutputActivation::Identity;
  std::vector<DenseLayer> layers_;
  std::uint64_t stamp_ = 0;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  ParamSet first;
  ParamSet second;

  static AdamState for_network(const Mlp& net) {
    AdamState s;
    s.first = net.zeros_like();
    s.second = net.zeros_like();
    return s;
  }
};

namespace detail {
inline void check_grad_shapes(const Mlp& net, const ParamSet& grads) {
  if (grads.weights.size() != net.num_layers() || grads.bias.size() != net.num_layers()) {
    throw ShapeError("gradient layer count mismatch");
  }
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& layer = net.layers()[l];
    if (grads.weights[l].rows() != layer.weights.rows() ||
        grads.weights[l].cols() != layer.weights.cols() ||
        grads.bias[l].size() != layer.bias.size()) {
      throw ShapeError("gradient shape mismatch at layer " + std::to_string(l));
    }
  }
}
}  // namespace detail

// Bias-corrected adaptive-moment update, in place.
inline void adam_step(Mlp& net, const ParamSet& grads, AdamState& state, double lr) {
  detail::check_grad_shapes(net, grads);
  if (state.first.weights.size() != net.num_layers()) {
    throw ShapeError("adam_step: optimizer state does not match network");
  }
  if (!grads.all_finite()) throw TrainingDivergence("adam_step: non-finite gradient");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto& layers = net.mutable_layers();
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    param.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights, grads.weights[l], state.first.weights[l], state.second.weights[l]);
    update(layers[l].bias, grads.bias[l], state.first.bias[l], state.second.bias[l]);
  }
}

inline void sgd_step(Mlp& net, const ParamSet& grads, double lr) {
  detail::check_grad_shapes(net, grads);
  if (!grads.all_finite()) throw TrainingDivergence("sgd_step: non-finite gradient");
  auto& layers = net.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weights -= lr * grads.weights[l];
    layers[l].bias -= lr * grads.bias[l];
  }
}

// target <- tau * source + (1 - tau) * target
inline void soft_update(Mlp& target, const Mlp& source, double tau) {
  if (!target.same_architecture(source)) throw ShapeError("soft_update: architecture mismatch");
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidInput("soft_update: tau must lie in [0, 1]");
  auto& dst = target.mutable_layers();
  const auto& src = source.layers();
  for (std::size_t l = 0; l < dst.size(); ++l) {
    if (tau == 1.0) {
      dst[l].weights = src[l].weights;
      dst[l].bias = src[l].bias;
    } else if (tau != 0.0) {
      dst[l].weights = tau * src[l].weights + (1.0 - tau) * dst[l].weights;
      dst[l].bias = tau * src[l].bias + (1.0 - tau) * dst[l].bias;
    }
  }
}

// ---- serialization -------------------------------------------------------
// Parameter arrays are row-major. Doubles are written in shortest
// round-trip form, so a save/load cycle is bit-exact.

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) j.push_back(m(r, c));
  }
  return j;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows,
                                        Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows * cols) {
    throw LoadError("parameter array has wrong length");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[k++].get<double>();
  }
  return m;
}

inline nlohmann::json param_set_to_json(const ParamSet& p) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    layers.push_back({{"weights", matrix_to_json(p.weights[l])},
                      {"bias", matrix_to_json(p.bias[l])}});
  }
  return layers;
}

inline ParamSet param_set_from_json(const nlohmann::json& j, const Mlp& shape) {
  if (!j.is_array() || j.size() != shape.num_layers()) throw LoadError("layer count mismatch");
  ParamSet p;
  for (std::size_t l = 0; l < shape.num_layers(); ++l) {
    const auto& layer = shape.layers()[l];
    p.weights.push_back(
        matrix_from_json(j[l].at("weights"), layer.weights.rows(), layer.weights.cols()));
    p.bias.push_back(matrix_from_json(j[l].at("bias"), layer.bias.size(), 1));
  }
  return p;
}

inline nlohmann::json to_json(const Mlp& net) {
  return {{"widths", net.widths()},
          {"hidden_activation", "relu"},
          {"output_activation", to_string(net.output_activation())},
          {"layers", param_set_to_json(net.parameters())}};
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  try {
    Mlp net(j.at("widths").get<std::vector<int>>(),
            output_activation_from_string(j.at("output_activation").get<std::string>()));
    if (j.at("hidden_activation").get<std::string>() != "relu") {
      throw LoadError("unsupported hidden activation");
    }
    ParamSet p = param_set_from_json(j.at("layers"), net);
    auto& layers = net.mutable_layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].weights = std::move(p.weights[l]);
      layers[l].bias = std::move(p.bias[l]);
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed network document: ") + e.what());
  } catch (const InvalidConfig& e) {
    throw LoadError(e.what());
  } catch (const ShapeError& e) {
    throw LoadError(e.what());
  }
}

inline nlohmann::json to_json(const AdamState& s) {
  return {{"beta1", s.beta1},
          {"beta2", s.beta2},
          {"epsilon", s.epsilon},
          {"step", s.step},
          {"first", param_set_to_json(s.first)},
          {"second", param_set_to_json(s.second)}};
}

inline AdamState adam_from_json(const nlohmann::json& j, const Mlp& shape) {
  try {
    AdamState s;
    s.beta1 = j.at("beta1").get<double>();
    s.beta2 = j.at("beta2").get<double>();
    s.epsilon = j.at("epsilon").get<double>();
    s.step = j.at("step").get<std::int64_t>();
    s.first = param_set_from_json(j.at("first"), shape);
    s.second = param_set_from_json(j.at("second"), shape);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed optimizer document: ") + e.what());
  }
}

}  // namespace pccl
