#include "seqacq/numerics/recurrent.hpp"

#include <cmath>
#include <sstream>

#include "seqacq/errors.hpp"

namespace seqacq::numerics {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

RecurrentCell::RecurrentCell(std::size_t input_width, std::size_t hidden_width)
    : input_(input_width),
      hidden_(hidden_width),
      store_(4 * hidden_width * (input_width + hidden_width) +
             4 * hidden_width) {
  if (input_width == 0 || hidden_width == 0) {
    throw ShapeError("RecurrentCell widths must be positive");
  }
}

RecurrentCell RecurrentCell::random(std::size_t input_width,
                                    std::size_t hidden_width, Rng& rng) {
  RecurrentCell cell(input_width, hidden_width);
  const double limit = 1.0 / std::sqrt(static_cast<double>(hidden_width));
  std::uniform_real_distribution<double> dist(-limit, limit);
  auto params = cell.mutable_params();
  const std::size_t boff = cell.bias_offset();
  for (std::size_t k = 0; k < boff; ++k) params[k] = dist(rng);
  for (std::size_t h = 0; h < hidden_width; ++h) {
    params[boff + hidden_width + h] = 1.0;
  }
  return cell;
}

std::string RecurrentCell::param_name(std::size_t flat_index) const {
  static const char* kGates = "ifgo";
  std::ostringstream os;
  const std::size_t cols = input_ + hidden_;
  if (flat_index < bias_offset()) {
    const std::size_t row = flat_index / cols;
    os << "lstm.weight_" << kGates[row / hidden_] << "[" << row % hidden_
       << "," << flat_index % cols << "]";
  } else {
    const std::size_t row = flat_index - bias_offset();
    os << "lstm.bias_" << kGates[row / hidden_] << "[" << row % hidden_
       << "]";
  }
  return os.str();
}

SequenceResult run_sequence(const RecurrentCell& cell,
                            std::span<const double> steps) {
  const std::size_t in = cell.input_width();
  const std::size_t hid = cell.hidden_width();
  if (in == 0 || steps.size() % in != 0) {
    throw ShapeError("run_sequence: input length not a multiple of width");
  }
  const std::size_t num_steps = steps.size() / in;
  const std::size_t cols = in + hid;
  const auto params = cell.params();
  const double* bias = params.data() + cell.bias_offset();

  SequenceResult result;
  result.cache.cell_identity = cell.store().identity();
  result.cache.cell_revision = cell.store().revision();
  result.cache.steps.reserve(num_steps);

  std::vector<double> h(hid, 0.0);
  std::vector<double> c(hid, 0.0);
  std::vector<double> z(4 * hid);
  for (std::size_t t = 0; t < num_steps; ++t) {
    StepCache sc;
    sc.concat.resize(cols);
    for (std::size_t k = 0; k < in; ++k) {
      const double x = steps[t * in + k];
      if (!std::isfinite(x)) throw ShapeError("run_sequence: non-finite input");
      sc.concat[k] = x;
    }
    for (std::size_t k = 0; k < hid; ++k) sc.concat[in + k] = h[k];
    for (std::size_t r = 0; r < 4 * hid; ++r) {
      const double* row = params.data() + r * cols;
      double acc = bias[r];
      for (std::size_t k = 0; k < cols; ++k) acc += row[k] * sc.concat[k];
      z[r] = acc;
    }
    sc.c_prev = c;
    sc.i.resize(hid);
    sc.f.resize(hid);
    sc.g.resize(hid);
    sc.o.resize(hid);
    sc.c.resize(hid);
    sc.tanh_c.resize(hid);
    for (std::size_t k = 0; k < hid; ++k) {
      sc.i[k] = sigmoid(z[k]);
      sc.f[k] = sigmoid(z[hid + k]);
      sc.g[k] = std::tanh(z[2 * hid + k]);
      sc.o[k] = sigmoid(z[3 * hid + k]);
      sc.c[k] = sc.f[k] * c[k] + sc.i[k] * sc.g[k];
      sc.tanh_c[k] = std::tanh(sc.c[k]);
      h[k] = sc.o[k] * sc.tanh_c[k];
    }
    c = sc.c;
    result.cache.steps.push_back(std::move(sc));
  }
  result.hidden = std::move(h);
  return result;
}

std::vector<double> final_hidden(const RecurrentCell& cell,
                                 std::span<const double> steps) {
  return run_sequence(cell, steps).hidden;
}

std::vector<double> backward_sequence_accumulate(
    const RecurrentCell& cell, const SequenceCache& cache,
    std::span<const double> hidden_grad, std::span<double> param_grads) {
  if (cache.cell_identity != cell.store().identity() ||
      cache.cell_revision != cell.store().revision()) {
    throw ContractError("backward_sequence: cache was not produced by this cell");
  }
  const std::size_t in = cell.input_width();
  const std::size_t hid = cell.hidden_width();
  const std::size_t cols = in + hid;
  if (hidden_grad.size() != hid) {
    throw ShapeError("backward_sequence: hidden gradient width mismatch");
  }
  if (param_grads.size() != cell.param_count()) {
    throw ShapeError("backward_sequence: parameter gradient size mismatch");
  }
  const auto params = cell.params();
  const std::size_t boff = cell.bias_offset();
  const std::size_t num_steps = cache.steps.size();
  std::vector<double> input_grads(num_steps * in, 0.0);

  std::vector<double> dh(hidden_grad.begin(), hidden_grad.end());
  std::vector<double> dc(hid, 0.0);
  std::vector<double> dz(4 * hid);
  std::vector<double> dconcat(cols);
  for (std::size_t t = num_steps; t-- > 0;) {
    const auto& sc = cache.steps[t];
    for (std::size_t k = 0; k < hid; ++k) {
      const double do_ = dh[k] * sc.tanh_c[k];
      const double dct = dc[k] + dh[k] * sc.o[k] *
                                     (1.0 - sc.tanh_c[k] * sc.tanh_c[k]);
      dz[k] = dct * sc.g[k] * sc.i[k] * (1.0 - sc.i[k]);
      dz[hid + k] = dct * sc.c_prev[k] * sc.f[k] * (1.0 - sc.f[k]);
      dz[2 * hid + k] = dct * sc.i[k] * (1.0 - sc.g[k] * sc.g[k]);
      dz[3 * hid + k] = do_ * sc.o[k] * (1.0 - sc.o[k]);
      dc[k] = dct * sc.f[k];
    }
    std::fill(dconcat.begin(), dconcat.end(), 0.0);
    for (std::size_t r = 0; r < 4 * hid; ++r) {
      const double d = dz[r];
      param_grads[boff + r] += d;
      if (d == 0.0) continue;
      const double* row = params.data() + r * cols;
      double* grow = param_grads.data() + r * cols;
      for (std::size_t k = 0; k < cols; ++k) {
        grow[k] += d * sc.concat[k];
        dconcat[k] += d * row[k];
      }
    }
    for (std::size_t k = 0; k < in; ++k) input_grads[t * in + k] = dconcat[k];
    for (std::size_t k = 0; k < hid; ++k) dh[k] = dconcat[in + k];
  }
  return input_grads;
}

SequenceGradients backward_sequence(const RecurrentCell& cell,
                                    const SequenceCache& cache,
                                    std::span<const double> hidden_grad) {
  SequenceGradients grads;
  grads.params.assign(cell.param_count(), 0.0);
  grads.inputs =
      backward_sequence_accumulate(cell, cache, hidden_grad, grads.params);
  return grads;
}

}  // namespace seqacq::numerics
