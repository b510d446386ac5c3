#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "seqacq/numerics/rng.hpp"

namespace seqacq::agent {

struct Transition {
  std::vector<double> state;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  std::vector<std::uint8_t> next_valid;
  bool done = false;
};

struct ReplayConfig {
  std::size_t capacity = 50000;
  double alpha = 0.6;
  double beta_start = 0.4;
  double beta_end = 1.0;
  double priority_floor = 1e-3;
};

// Proportional prioritized replay on a sum tree. Priorities are
// |TD error| + floor; sampling probability is priority^alpha / total.
// FIFO eviction once full. Sampled handles carry a serial number so that
// priority updates aimed at an evicted slot are ignored.
class PrioritizedReplay {
 public:
  struct Handle {
    std::size_t slot = 0;
    std::uint64_t serial = 0;
  };

  struct Batch {
    std::vector<Handle> handles;
    std::vector<double> weights;  // importance weights, max-normalized
  };

  explicit PrioritizedReplay(ReplayConfig config = {});

  void push(Transition transition, double td_error);
  // i.i.d. draws with replacement.
  Batch sample(std::size_t count, double beta, Rng& rng) const;
  void update_priorities(std::span<const Handle> handles,
                         std::span<const double> td_errors);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return config_.capacity; }
  const ReplayConfig& config() const { return config_; }
  const Transition& at(std::size_t slot) const { return items_.at(slot); }
  double priority(std::size_t slot) const { return priorities_.at(slot); }
  // Current sampling probability of a slot.
  double probability(std::size_t slot) const;
  double total_mass() const { return tree_[1]; }

 private:
  void set_leaf(std::size_t slot, double mass);
  std::size_t find(double u) const;

  ReplayConfig config_;
  std::size_t leaves_ = 1;
  std::vector<double> tree_;  // 1-based heap layout, leaves at [leaves_, 2*leaves_)
  std::vector<Transition> items_;
  std::vector<double> priorities_;
  std::vector<std::uint64_t> serials_;
  std::uint64_t next_serial_ = 1;
  std::size_t cursor_ = 0;
  std::size_t size_ = 0;
};

}  // namespace seqacq::agent
