#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace seqacq::numerics {

struct HuberResult {
  double loss = 0.0;
  double grad = 0.0;  // d loss / d pred
};

// 0.5 e^2 inside |e| <= delta, delta (|e| - 0.5 delta) outside; e = pred - target.
HuberResult huber_loss(double pred, double target, double delta = 1.0);

struct SoftmaxXent {
  double loss = 0.0;
  std::vector<double> probs;
  std::vector<double> grad;  // probs - onehot(label)
};

std::vector<double> softmax(std::span<const double> logits);
SoftmaxXent softmax_xent(std::span<const double> logits, std::size_t label);

}  // namespace seqacq::numerics
