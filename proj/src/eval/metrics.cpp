#include "seqacq/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "seqacq/errors.hpp"
#include "seqacq/numerics/rng.hpp"

namespace seqacq::eval {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels,
                  const char* what) {
  if (scores.size() != labels.size()) {
    throw MetricError(std::string(what) + ": scores and labels differ in length");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw MetricError(std::string(what) + ": labels must be 0 or 1");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw MetricError(std::string(what) + ": non-finite score");
  }
}

// Indices sorted by descending score.
std::vector<std::size_t> descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels, "auroc");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw MetricError("auroc undefined: both classes must be present");
  }
  // Rank-sum with midranks for ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank_sum += midrank;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(positives);
  const double n = static_cast<double>(negatives);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels, "auprc");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0) throw MetricError("auprc undefined: no positive labels");
  const auto order = descending(scores);
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) ++tp;
      ++seen;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double iou(const std::vector<std::vector<std::size_t>>& sets) {
  if (sets.empty()) throw MetricError("iou needs at least one patient");
  std::set<std::size_t> uni(sets.front().begin(), sets.front().end());
  std::set<std::size_t> inter = uni;
  for (std::size_t k = 1; k < sets.size(); ++k) {
    const std::set<std::size_t> s(sets[k].begin(), sets[k].end());
    uni.insert(s.begin(), s.end());
    std::set<std::size_t> next;
    std::set_intersection(inter.begin(), inter.end(), s.begin(), s.end(),
                          std::inserter(next, next.begin()));
    inter = std::move(next);
  }
  if (uni.empty()) return 1.0;
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

Interval bootstrap_ci(std::size_t n,
                      const std::function<double(std::span<const std::size_t>)>& statistic,
                      const BootstrapConfig& config) {
  if (!(config.level > 0.0 && config.level < 1.0)) {
    throw ConfigError("bootstrap level must lie in (0, 1)");
  }
  constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
  if (n == 0 || config.replicates == 0) return {kNan, kNan};
  Rng rng(config.seed);
  std::vector<double> values;
  values.reserve(config.replicates);
  std::vector<std::size_t> sample(n);
  for (std::size_t r = 0; r < config.replicates; ++r) {
    for (auto& s : sample) s = uniform_index(rng, n);
    try {
      values.push_back(statistic(sample));
    } catch (const MetricError&) {
    }
  }
  if (values.empty()) return {kNan, kNan};
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  const double tail = (1.0 - config.level) / 2.0;
  return {quantile(tail), quantile(1.0 - tail)};
}

}  // namespace seqacq::eval
