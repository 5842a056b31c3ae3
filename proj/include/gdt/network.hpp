#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdt/error.hpp"
#include "gdt/linalg.hpp"
#include "gdt/rng.hpp"

namespace gdt {

/// One fully connected layer: x_out = tanh(weight * x_in + bias).
struct Layer {
  Matrix weight;
  Vector bias;

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Stack of tanh layers, f(x) = tanh(W_K ... tanh(W_1 x + b_1) ... + b_K).
class FeedForwardNet {
 public:
  FeedForwardNet() = default;

  explicit FeedForwardNet(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

  std::size_t depth() const noexcept { return layers_.size(); }
  std::size_t input_dim() const { return layers_.front().weight.cols(); }
  std::size_t output_dim() const { return layers_.back().weight.rows(); }

  /// Layer widths, input first: {d_0, d_1, ..., d_K}.
  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> d{input_dim()};
    for (const Layer& l : layers_) d.push_back(l.weight.rows());
    return d;
  }

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& layers() noexcept { return layers_; }
  const Layer& layer(std::size_t k) const { return layers_.at(k); }
  Layer& layer(std::size_t k) { return layers_.at(k); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Output only, without keeping intermediate activations.
  Vector operator()(ConstSpan x) const {
    if (x.size() != input_dim())
      throw ShapeError("input dim " + std::to_string(x.size()) + " != " + std::to_string(input_dim()));
    Vector cur(x.begin(), x.end());
    for (const Layer& l : layers_) {
      Vector next = matvec(l.weight, cur);
      for (std::size_t r = 0; r < next.size(); ++r) next[r] = std::tanh(next[r] + l.bias[r]);
      cur = std::move(next);
    }
    return cur;
  }

  void validate() const {
    if (layers_.empty()) throw ShapeError("network needs at least one layer");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const Layer& l = layers_[k];
      if (l.weight.rows() == 0 || l.weight.cols() == 0)
        throw ShapeError("layer " + std::to_string(k) + " has an empty weight matrix");
      if (l.bias.size() != l.weight.rows())
        throw ShapeError("layer " + std::to_string(k) + " bias length != weight rows");
      if (k > 0 && l.weight.cols() != layers_[k - 1].weight.rows())
        throw ShapeError("layer " + std::to_string(k) + " input dim != previous output dim");
    }
  }

  friend bool operator==(const FeedForwardNet&, const FeedForwardNet&) = default;

 private:
  std::vector<Layer> layers_;
};

/// Activations of one forward pass. activations[0] is the input, activations[K] the output.
struct ForwardTrace {
  std::vector<Vector> pre_activations;  // K entries
  std::vector<Vector> activations;      // K + 1 entries

  const Vector& input() const { return activations.front(); }
  const Vector& output() const { return activations.back(); }
};

/// Parameter-shaped gradient plus the gradient with respect to the network input.
struct NetGradient {
  std::vector<Layer> layers;
  Vector input;

  static NetGradient zeros_like(const FeedForwardNet& net) {
    NetGradient g;
    g.layers.reserve(net.depth());
    for (const Layer& l : net.layers())
      g.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()), Vector(l.bias.size(), 0.0)});
    g.input.assign(net.input_dim(), 0.0);
    return g;
  }
};

/// Uniform [-scale, scale] weights, zero biases. Identical arguments give identical networks.
inline FeedForwardNet init_network(const std::vector<std::size_t>& layer_dims, std::uint64_t seed,
                                   double scale = 0.1) {
  if (layer_dims.size() < 2) throw ConfigError("init_network: need at least two layer dims");
  for (std::size_t d : layer_dims)
    if (d == 0) throw ConfigError("init_network: layer dims must be positive");
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw ConfigError("init_network: scale must be finite and >= 0");

  Rng rng(seed);
  std::vector<Layer> layers;
  for (std::size_t k = 1; k < layer_dims.size(); ++k) {
    Matrix w(layer_dims[k], layer_dims[k - 1]);
    for (double& v : w.data()) v = scale == 0.0 ? 0.0 : rng.uniform(-scale, scale);
    layers.push_back({std::move(w), Vector(layer_dims[k], 0.0)});
  }
  return FeedForwardNet(std::move(layers));
}

inline ForwardTrace forward(const FeedForwardNet& net, ConstSpan x) {
  if (x.size() != net.input_dim())
    throw ShapeError("forward: input dim " + std::to_string(x.size()) + " != " +
                     std::to_string(net.input_dim()));
  ForwardTrace t;
  t.pre_activations.reserve(net.depth());
  t.activations.reserve(net.depth() + 1);
  t.activations.emplace_back(x.begin(), x.end());
  for (const Layer& l : net.layers()) {
    Vector z = matvec(l.weight, t.activations.back());
    for (std::size_t r = 0; r < z.size(); ++r) z[r] += l.bias[r];
    Vector a(z.size());
    for (std::size_t r = 0; r < z.size(); ++r) a[r] = std::tanh(z[r]);
    t.pre_activations.push_back(std::move(z));
    t.activations.push_back(std::move(a));
  }
  return t;
}

/// Adds the chain-rule contribution of one sample to `grad`.
///
/// `upstream` is dJ/dy for the sample. Walking from layer K down to 1,
/// delta_k = upstream_k * (1 - x_k^2) and dJ/dW_k += delta_k x_{k-1}^T,
/// dJ/db_k += delta_k, upstream_{k-1} = W_k^T delta_k. The final upstream is
/// added to grad.input.
inline void backward_accumulate(const FeedForwardNet& net, const ForwardTrace& trace,
                                ConstSpan upstream, NetGradient& grad) {
  const std::size_t K = net.depth();
  if (trace.activations.size() != K + 1 || trace.pre_activations.size() != K)
    throw ShapeError("backward: trace depth does not match network");
  if (grad.layers.size() != K) throw ShapeError("backward: gradient depth does not match network");
  if (upstream.size() != net.output_dim()) throw ShapeError("backward: upstream dim != output dim");
  for (std::size_t k = 0; k < K; ++k) {
    const Layer& l = net.layers()[k];
    if (trace.activations[k].size() != l.weight.cols() || trace.activations[k + 1].size() != l.weight.rows())
      throw ShapeError("backward: trace shapes do not match layer " + std::to_string(k));
    if (!grad.layers[k].weight.same_shape(l.weight) || grad.layers[k].bias.size() != l.bias.size())
      throw ShapeError("backward: gradient shapes do not match layer " + std::to_string(k));
  }

  Vector up(upstream.begin(), upstream.end());
  for (std::size_t k = K; k-- > 0;) {
    const Vector& out = trace.activations[k + 1];
    Vector delta(out.size());
    for (std::size_t r = 0; r < out.size(); ++r) delta[r] = up[r] * (1.0 - out[r] * out[r]);
    add_outer(grad.layers[k].weight, delta, trace.activations[k]);
    axpy(1.0, delta, grad.layers[k].bias);
    up = matvec_transposed(net.layers()[k].weight, delta);
  }
  if (grad.input.size() != up.size()) grad.input.assign(up.size(), 0.0);
  axpy(1.0, up, grad.input);
}

inline NetGradient backward(const FeedForwardNet& net, const ForwardTrace& trace, ConstSpan upstream) {
  NetGradient g = NetGradient::zeros_like(net);
  backward_accumulate(net, trace, upstream, g);
  return g;
}

/// p <- p - step_size * grad(p) for every weight and bias.
inline void apply_update(FeedForwardNet& net, const NetGradient& grad, double step_size) {
  if (grad.layers.size() != net.depth()) throw ShapeError("apply_update: depth mismatch");
  for (std::size_t k = 0; k < net.depth(); ++k) {
    Layer& l = net.layer(k);
    const Layer& g = grad.layers[k];
    if (!g.weight.same_shape(l.weight) || g.bias.size() != l.bias.size())
      throw ShapeError("apply_update: shape mismatch at layer " + std::to_string(k));
    axpy(-step_size, g.weight.data(), l.weight.data());
    axpy(-step_size, g.bias, l.bias);
  }
}

inline FeedForwardNet updated(FeedForwardNet net, const NetGradient& grad, double step_size) {
  apply_update(net, grad, step_size);
  return net;
}

// ---- serialization -------------------------------------------------------

inline constexpr int kNetworkFormatVersion = 1;

inline nlohmann::json to_json(const FeedForwardNet& net) {
  nlohmann::json j;
  j["format"] = "gdt-network";
  j["version"] = kNetworkFormatVersion;
  j["dims"] = net.dims();
  j["layers"] = nlohmann::json::array();
  for (const Layer& l : net.layers()) j["layers"].push_back({{"w", l.weight.data()}, {"b", l.bias}});
  return j;
}

inline FeedForwardNet network_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kNetworkFormatVersion)
      throw FormatError("unsupported network format version " + j.at("version").dump());
    const auto dims = j.at("dims").get<std::vector<std::size_t>>();
    const auto& layers = j.at("layers");
    if (dims.size() < 2 || layers.size() != dims.size() - 1)
      throw FormatError("network json: dims and layers disagree");
    std::vector<Layer> out;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      auto w = layers[k].at("w").get<std::vector<double>>();
      auto b = layers[k].at("b").get<std::vector<double>>();
      if (w.size() != dims[k + 1] * dims[k] || b.size() != dims[k + 1])
        throw FormatError("network json: layer " + std::to_string(k) + " has wrong entry count");
      out.push_back({Matrix(dims[k + 1], dims[k], std::move(w)), std::move(b)});
    }
    return FeedForwardNet(std::move(out));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("network json: ") + e.what());
  }
}

inline void save_network(const FeedForwardNet& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << to_json(net).dump(1) << '\n';
}

inline FeedForwardNet load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return network_from_json(j);
}

}  // namespace gdt
