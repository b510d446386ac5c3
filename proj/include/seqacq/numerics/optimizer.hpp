#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace seqacq::numerics {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

using ParamNamer = std::function<std::string(std::size_t)>;

// Adaptive-moment optimizer over one flat parameter block.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t param_count, AdamConfig config);

  // Throws TrainingError naming the first non-finite gradient entry; params
  // are left untouched in that case.
  void step(std::span<double> params, std::span<const double> grads,
            const ParamNamer& namer = {});

  std::uint64_t step_count() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t steps_ = 0;
};

}  // namespace seqacq::numerics
