#include "seqacq/numerics/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seqacq/errors.hpp"

namespace seqacq::numerics {

HuberResult huber_loss(double pred, double target, double delta) {
  if (!(delta > 0.0)) {
    throw ParameterError("huber_loss: delta must be positive");
  }
  const double e = pred - target;
  const double abs_e = std::abs(e);
  if (abs_e <= delta) return {0.5 * e * e, e};
  return {delta * (abs_e - 0.5 * delta), e > 0.0 ? delta : -delta};
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax: empty logits");
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits[k] - max_logit);
    total += probs[k];
  }
  for (double& p : probs) p /= total;
  return probs;
}

SoftmaxXent softmax_xent(std::span<const double> logits, std::size_t label) {
  if (logits.empty()) throw ShapeError("softmax_xent: empty logits");
  if (label >= logits.size()) {
    throw ShapeError("softmax_xent: label " + std::to_string(label) +
                     " out of range for " + std::to_string(logits.size()) +
                     " classes");
  }
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - max_logit);
  const double log_total = std::log(total) + max_logit;

  SoftmaxXent out;
  out.probs = softmax(logits);
  out.loss = log_total - logits[label];
  out.grad = out.probs;
  out.grad[label] -= 1.0;
  return out;
}

}  // namespace seqacq::numerics
