#include "seqacq/agent/replay.hpp"

#include <algorithm>
#include <cmath>

#include "seqacq/errors.hpp"

namespace seqacq::agent {

PrioritizedReplay::PrioritizedReplay(ReplayConfig config) : config_(config) {
  if (config_.capacity == 0) throw ParameterError("replay capacity must be positive");
  if (config_.alpha < 0.0) throw ParameterError("replay alpha must be non-negative");
  if (!(config_.priority_floor > 0.0)) {
    throw ParameterError("replay priority floor must be positive");
  }
  while (leaves_ < config_.capacity) leaves_ *= 2;
  tree_.assign(2 * leaves_, 0.0);
  items_.resize(config_.capacity);
  priorities_.assign(config_.capacity, 0.0);
  serials_.assign(config_.capacity, 0);
}

void PrioritizedReplay::set_leaf(std::size_t slot, double mass) {
  std::size_t node = leaves_ + slot;
  tree_[node] = mass;
  for (node /= 2; node >= 1; node /= 2) {
    tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
  }
}

void PrioritizedReplay::push(Transition transition, double td_error) {
  if (!std::isfinite(td_error)) throw TrainingError("replay push: non-finite TD error");
  const std::size_t slot = cursor_;
  items_[slot] = std::move(transition);
  priorities_[slot] = std::abs(td_error) + config_.priority_floor;
  serials_[slot] = next_serial_++;
  set_leaf(slot, std::pow(priorities_[slot], config_.alpha));
  cursor_ = (cursor_ + 1) % config_.capacity;
  size_ = std::min(size_ + 1, config_.capacity);
}

double PrioritizedReplay::probability(std::size_t slot) const {
  if (slot >= size_) return 0.0;
  return tree_[leaves_ + slot] / tree_[1];
}

std::size_t PrioritizedReplay::find(double u) const {
  std::size_t node = 1;
  while (node < leaves_) {
    const std::size_t left = 2 * node;
    if (u < tree_[left] || tree_[left + 1] == 0.0) {
      node = left;
    } else {
      u -= tree_[left];
      node = left + 1;
    }
  }
  return std::min(node - leaves_, size_ - 1);
}

PrioritizedReplay::Batch PrioritizedReplay::sample(std::size_t count, double beta,
                                                   Rng& rng) const {
  if (size_ == 0) throw ContractError("replay sample: buffer is empty");
  if (count == 0) return {};
  Batch batch;
  batch.handles.reserve(count);
  batch.weights.reserve(count);
  const double total = tree_[1];
  const double n = static_cast<double>(size_);
  std::uniform_real_distribution<double> dist(0.0, total);
  double max_weight = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t slot = find(dist(rng));
    batch.handles.push_back({slot, serials_[slot]});
    const double w = std::pow(n * probability(slot), -beta);
    batch.weights.push_back(w);
    max_weight = std::max(max_weight, w);
  }
  for (double& w : batch.weights) w /= max_weight;
  return batch;
}

void PrioritizedReplay::update_priorities(std::span<const Handle> handles,
                                          std::span<const double> td_errors) {
  if (handles.size() != td_errors.size()) {
    throw ShapeError("update_priorities: handle/error count mismatch");
  }
  for (std::size_t k = 0; k < handles.size(); ++k) {
    const auto& h = handles[k];
    if (h.slot >= size_ || serials_[h.slot] != h.serial) continue;  // evicted
    if (!std::isfinite(td_errors[k])) throw TrainingError("replay update: non-finite TD error");
    priorities_[h.slot] = std::abs(td_errors[k]) + config_.priority_floor;
    set_leaf(h.slot, std::pow(priorities_[h.slot], config_.alpha));
  }
}

}  // namespace seqacq::agent
