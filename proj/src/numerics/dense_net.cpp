#include "seqacq/numerics/dense_net.hpp"

#include <cmath>
#include <sstream>

#include "seqacq/errors.hpp"

namespace seqacq::numerics {
namespace {

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw ShapeError(std::string(what) + ": non-finite entry");
    }
  }
}

void affine(const LayerShape& shape, std::span<const double> params,
            std::span<const double> x, std::vector<double>& out) {
  out.assign(shape.out, 0.0);
  const double* w = params.data() + shape.weight_offset;
  const double* b = params.data() + shape.bias_offset;
  for (std::size_t o = 0; o < shape.out; ++o) {
    const double* row = w + o * shape.in;
    double acc = b[o];
    for (std::size_t i = 0; i < shape.in; ++i) acc += row[i] * x[i];
    out[o] = acc;
  }
}

void activate(Activation act, std::vector<double>& v) {
  if (act == Activation::kRelu) {
    for (double& x : v) x = x > 0.0 ? x : 0.0;
  }
}

}  // namespace

DenseNet::DenseNet(std::vector<std::size_t> widths) {
  if (widths.size() < 2) {
    throw ShapeError("DenseNet needs at least input and output widths");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (widths[l] == 0 || widths[l + 1] == 0) {
      throw ShapeError("DenseNet widths must be positive");
    }
    LayerShape shape;
    shape.in = widths[l];
    shape.out = widths[l + 1];
    shape.activation =
        l + 2 == widths.size() ? Activation::kLinear : Activation::kRelu;
    shape.weight_offset = offset;
    offset += shape.in * shape.out;
    shape.bias_offset = offset;
    offset += shape.out;
    layers_.push_back(shape);
  }
  store_ = ParameterStore(offset);
}

DenseNet DenseNet::random(std::vector<std::size_t> widths, Rng& rng) {
  DenseNet net(std::move(widths));
  auto params = net.mutable_params();
  for (const auto& shape : net.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(shape.in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t k = 0; k < shape.in * shape.out; ++k) {
      params[shape.weight_offset + k] = dist(rng);
    }
  }
  return net;
}

std::size_t DenseNet::input_width() const {
  return layers_.empty() ? 0 : layers_.front().in;
}

std::size_t DenseNet::output_width() const {
  return layers_.empty() ? 0 : layers_.back().out;
}

std::vector<std::size_t> DenseNet::widths() const {
  std::vector<std::size_t> w;
  if (layers_.empty()) return w;
  w.push_back(layers_.front().in);
  for (const auto& shape : layers_) w.push_back(shape.out);
  return w;
}

double DenseNet::weight(std::size_t layer, std::size_t out,
                        std::size_t in) const {
  const auto& s = layers_.at(layer);
  return store_.values()[s.weight_offset + out * s.in + in];
}

double DenseNet::bias(std::size_t layer, std::size_t out) const {
  return store_.values()[layers_.at(layer).bias_offset + out];
}

void DenseNet::set_weight(std::size_t layer, std::size_t out, std::size_t in,
                          double v) {
  const auto& s = layers_.at(layer);
  store_.mutable_values()[s.weight_offset + out * s.in + in] = v;
}

void DenseNet::set_bias(std::size_t layer, std::size_t out, double v) {
  store_.mutable_values()[layers_.at(layer).bias_offset + out] = v;
}

std::string DenseNet::param_name(std::size_t flat_index) const {
  std::ostringstream os;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l];
    if (flat_index < s.bias_offset) {
      const std::size_t k = flat_index - s.weight_offset;
      os << "layer" << l << ".weight[" << k / s.in << "," << k % s.in << "]";
      return os.str();
    }
    if (flat_index < s.bias_offset + s.out) {
      os << "layer" << l << ".bias[" << flat_index - s.bias_offset << "]";
      return os.str();
    }
  }
  os << "param[" << flat_index << "]";
  return os.str();
}

ForwardResult forward(const DenseNet& net, std::span<const double> input) {
  if (input.size() != net.input_width()) {
    throw ShapeError("forward: input width " + std::to_string(input.size()) +
                     " != net input width " +
                     std::to_string(net.input_width()));
  }
  check_finite(input, "forward input");
  ForwardResult result;
  auto& cache = result.cache;
  cache.net_identity = net.store().identity();
  cache.net_revision = net.store().revision();
  cache.layer_inputs.reserve(net.num_layers());
  cache.pre_activations.reserve(net.num_layers());

  std::vector<double> x(input.begin(), input.end());
  std::vector<double> z;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& shape = net.layer(l);
    affine(shape, net.params(), x, z);
    cache.layer_inputs.push_back(std::move(x));
    cache.pre_activations.push_back(z);
    activate(shape.activation, z);
    x = std::move(z);
    z = {};
  }
  result.logits = std::move(x);
  return result;
}

std::vector<double> infer(const DenseNet& net, std::span<const double> input) {
  if (input.size() != net.input_width()) {
    throw ShapeError("infer: input width " + std::to_string(input.size()) +
                     " != net input width " +
                     std::to_string(net.input_width()));
  }
  std::vector<double> x(input.begin(), input.end());
  std::vector<double> z;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& shape = net.layer(l);
    affine(shape, net.params(), x, z);
    activate(shape.activation, z);
    std::swap(x, z);
  }
  return x;
}

std::vector<double> backward_accumulate(const DenseNet& net,
                                        const ForwardCache& cache,
                                        std::span<const double> loss_grad,
                                        std::span<double> param_grads) {
  if (cache.net_identity != net.store().identity() ||
      cache.net_revision != net.store().revision() ||
      cache.layer_inputs.size() != net.num_layers()) {
    throw ContractError("backward: cache was not produced by this network");
  }
  if (loss_grad.size() != net.output_width()) {
    throw ShapeError("backward: loss gradient width mismatch");
  }
  if (param_grads.size() != net.param_count()) {
    throw ShapeError("backward: parameter gradient buffer size mismatch");
  }
  const auto params = net.params();
  std::vector<double> delta(loss_grad.begin(), loss_grad.end());
  std::vector<double> upstream;
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const auto& shape = net.layer(l);
    const auto& z = cache.pre_activations[l];
    if (shape.activation == Activation::kRelu) {
      for (std::size_t o = 0; o < shape.out; ++o) {
        if (z[o] <= 0.0) delta[o] = 0.0;
      }
    }
    const auto& x = cache.layer_inputs[l];
    const double* w = params.data() + shape.weight_offset;
    double* gw = param_grads.data() + shape.weight_offset;
    double* gb = param_grads.data() + shape.bias_offset;
    upstream.assign(shape.in, 0.0);
    for (std::size_t o = 0; o < shape.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      gb[o] += d;
      const double* row = w + o * shape.in;
      double* grow = gw + o * shape.in;
      for (std::size_t i = 0; i < shape.in; ++i) {
        grow[i] += d * x[i];
        upstream[i] += d * row[i];
      }
    }
    std::swap(delta, upstream);
  }
  return delta;
}

NetGradients backward(const DenseNet& net, const ForwardCache& cache,
                      std::span<const double> loss_grad) {
  NetGradients grads;
  grads.params.assign(net.param_count(), 0.0);
  grads.input = backward_accumulate(net, cache, loss_grad, grads.params);
  return grads;
}

}  // namespace seqacq::numerics
