#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqacq/numerics/parameters.hpp"
#include "seqacq/numerics/rng.hpp"

namespace seqacq::numerics {

enum class Activation { kLinear, kRelu };

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::kLinear;
  std::size_t weight_offset = 0;  // out x in, row-major
  std::size_t bias_offset = 0;
};

// Feedforward network with ReLU hidden layers and a linear output layer.
// Parameters live in one flat store: for each layer the weight matrix
// followed by its bias vector.
class DenseNet {
 public:
  DenseNet() = default;
  // widths = {input, hidden..., output}; all parameters zero.
  explicit DenseNet(std::vector<std::size_t> widths);

  // He-uniform weights, zero biases.
  static DenseNet random(std::vector<std::size_t> widths, Rng& rng);

  std::size_t input_width() const;
  std::size_t output_width() const;
  std::size_t num_layers() const { return layers_.size(); }
  const LayerShape& layer(std::size_t i) const { return layers_.at(i); }
  std::vector<std::size_t> widths() const;
  std::size_t param_count() const { return store_.size(); }

  std::span<const double> params() const { return store_.values(); }
  std::span<double> mutable_params() { return store_.mutable_values(); }
  void set_params(std::span<const double> values) { store_.assign(values); }

  double weight(std::size_t layer, std::size_t out, std::size_t in) const;
  double bias(std::size_t layer, std::size_t out) const;
  void set_weight(std::size_t layer, std::size_t out, std::size_t in, double v);
  void set_bias(std::size_t layer, std::size_t out, double v);

  // "layer2.weight[3,1]" style path for flat index i.
  std::string param_name(std::size_t flat_index) const;

  const ParameterStore& store() const { return store_; }

  bool operator==(const DenseNet& other) const {
    return widths() == other.widths() && store_ == other.store_;
  }

 private:
  std::vector<LayerShape> layers_;
  ParameterStore store_;
};

struct ForwardCache {
  std::uint64_t net_identity = 0;
  std::uint64_t net_revision = 0;
  std::vector<std::vector<double>> layer_inputs;
  std::vector<std::vector<double>> pre_activations;
};

struct ForwardResult {
  std::vector<double> logits;
  ForwardCache cache;
};

struct NetGradients {
  std::vector<double> params;
  std::vector<double> input;
};

ForwardResult forward(const DenseNet& net, std::span<const double> input);

// Forward without keeping a cache.
std::vector<double> infer(const DenseNet& net, std::span<const double> input);

NetGradients backward(const DenseNet& net, const ForwardCache& cache,
                      std::span<const double> loss_grad);

// Adds parameter gradients into param_grads (size param_count()) and
// returns the input gradient.
std::vector<double> backward_accumulate(const DenseNet& net,
                                        const ForwardCache& cache,
                                        std::span<const double> loss_grad,
                                        std::span<double> param_grads);

}  // namespace seqacq::numerics
