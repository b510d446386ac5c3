#include "seqacq/numerics/optimizer.hpp"

#include <cmath>

#include "seqacq/errors.hpp"

namespace seqacq::numerics {

Adam::Adam(std::size_t param_count, AdamConfig config)
    : config_(config), m_(param_count, 0.0), v_(param_count, 0.0) {
  if (!(config.learning_rate > 0.0) || config.beta1 < 0.0 ||
      config.beta1 >= 1.0 || config.beta2 < 0.0 || config.beta2 >= 1.0 ||
      !(config.epsilon > 0.0)) {
    throw ParameterError("Adam: invalid hyperparameters");
  }
}

void Adam::step(std::span<double> params, std::span<const double> grads,
                const ParamNamer& namer) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("Adam::step: expected " + std::to_string(m_.size()) +
                     " parameters");
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (!std::isfinite(grads[k])) {
      throw TrainingError("non-finite gradient at " +
                          (namer ? namer(k) : "param[" + std::to_string(k) + "]") +
                          " (optimizer step " + std::to_string(steps_ + 1) + ")");
    }
  }
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    m_[k] = b1 * m_[k] + (1.0 - b1) * g;
    v_[k] = b2 * v_[k] + (1.0 - b2) * g * g;
    const double m_hat = m_[k] / correction1;
    const double v_hat = v_[k] / correction2;
    params[k] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
  }
}

}  // namespace seqacq::numerics
