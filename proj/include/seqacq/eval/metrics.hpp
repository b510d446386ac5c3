#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace seqacq::eval {

// Mann-Whitney statistic, ties counted 1/2. labels are 0/1.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Average precision: sum over distinct score thresholds of
// (recall_k - recall_{k-1}) * precision_k.
double auprc(std::span<const double> scores, std::span<const int> labels);

// |intersection| / |union| over per-patient feature sets; 1.0 when the
// union is empty.
double iou(const std::vector<std::vector<std::size_t>>& sets);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct BootstrapConfig {
  std::size_t replicates = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

// Percentile bootstrap over resampled index sets. Replicates on which the
// statistic throws MetricError (e.g. a single-class resample) are skipped;
// if all are skipped both bounds are NaN.
Interval bootstrap_ci(std::size_t n,
                      const std::function<double(std::span<const std::size_t>)>& statistic,
                      const BootstrapConfig& config);

}  // namespace seqacq::eval
