#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqacq/numerics/parameters.hpp"
#include "seqacq/numerics/rng.hpp"

namespace seqacq::numerics {

// Gated recurrent cell (input/forget/cell/output gates). Parameters are a
// single 4H x (I + H) matrix acting on [x_t ; h_{t-1}] followed by a 4H bias,
// gate blocks ordered i, f, g, o.
class RecurrentCell {
 public:
  RecurrentCell() = default;
  RecurrentCell(std::size_t input_width, std::size_t hidden_width);

  // Uniform(-1/sqrt(H), 1/sqrt(H)) weights; forget-gate bias 1.
  static RecurrentCell random(std::size_t input_width,
                              std::size_t hidden_width, Rng& rng);

  std::size_t input_width() const { return input_; }
  std::size_t hidden_width() const { return hidden_; }
  std::size_t param_count() const { return store_.size(); }

  std::span<const double> params() const { return store_.values(); }
  std::span<double> mutable_params() { return store_.mutable_values(); }
  void set_params(std::span<const double> values) { store_.assign(values); }
  const ParameterStore& store() const { return store_; }

  std::size_t bias_offset() const { return 4 * hidden_ * (input_ + hidden_); }
  std::string param_name(std::size_t flat_index) const;

  bool operator==(const RecurrentCell& other) const {
    return input_ == other.input_ && hidden_ == other.hidden_ &&
           store_ == other.store_;
  }

 private:
  std::size_t input_ = 0;
  std::size_t hidden_ = 0;
  ParameterStore store_;
};

struct StepCache {
  std::vector<double> concat;  // [x_t ; h_{t-1}]
  std::vector<double> c_prev;
  std::vector<double> i, f, g, o;
  std::vector<double> c;
  std::vector<double> tanh_c;
};

struct SequenceCache {
  std::uint64_t cell_identity = 0;
  std::uint64_t cell_revision = 0;
  std::vector<StepCache> steps;
};

struct SequenceResult {
  std::vector<double> hidden;
  SequenceCache cache;
};

struct SequenceGradients {
  std::vector<double> params;
  std::vector<double> inputs;  // steps x input_width, row-major
};

// Runs the cell over `steps` (num_steps x input_width, row-major) from zero
// initial state. Zero steps yield the zero hidden vector.
SequenceResult run_sequence(const RecurrentCell& cell,
                            std::span<const double> steps);

std::vector<double> final_hidden(const RecurrentCell& cell,
                                 std::span<const double> steps);

SequenceGradients backward_sequence(const RecurrentCell& cell,
                                    const SequenceCache& cache,
                                    std::span<const double> hidden_grad);

// Accumulating variant; returns the per-step input gradients.
std::vector<double> backward_sequence_accumulate(
    const RecurrentCell& cell, const SequenceCache& cache,
    std::span<const double> hidden_grad, std::span<double> param_grads);

}  // namespace seqacq::numerics
