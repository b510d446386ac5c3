#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqacq/data/dataset.hpp"

namespace seqacq::data {

enum class CostRule {
  kUniform,   // every paid feature costs 1
  kTiers,     // paid features cycle through 1, 2, 3, 6, 7
  kExplicit,  // `costs` gives every feature's cost
};

// Label rule used for patients whose switch feature is <= 0 when a switch
// is configured (heterogeneous populations).
struct AlternateRule {
  std::size_t switch_feature = 0;
  std::vector<std::size_t> informative;
  std::vector<double> weights;
  double bias = 0.0;
};

// Generative description of a synthetic cohort. Every feature has a latent
// standard-normal value; labels come from a logistic (softmax for more than
// two classes) model over the informative latents only; observed values are
// latents plus `noise` times standard-normal jitter.
struct SyntheticSpec {
  std::size_t num_features = 8;
  std::size_t num_classes = 2;
  std::vector<std::size_t> informative{0};
  // |K| weights for two classes; num_classes * |K| (row per class) otherwise.
  std::vector<double> weights{1.0};
  double bias = 0.0;
  double missing_rate = 0.0;
  std::vector<double> missing_rates;  // per feature, overrides missing_rate
  CostRule cost_rule = CostRule::kUniform;
  std::vector<double> costs;           // kExplicit only
  std::vector<std::size_t> free_features;
  double noise = 0.0;
  std::size_t num_samples = 1000;
  std::uint64_t seed = 0;

  // Optional non-numeric modalities (defaults to all numeric).
  std::vector<Modality> modalities;
  std::size_t max_series_length = 4;
  std::size_t series_hidden = 16;
  std::size_t embedding_width = 4;

  std::optional<AlternateRule> alternate;
  std::vector<double> split_fractions{0.7, 0.15, 0.15};

  // Throws SpecError if inconsistent.
  void validate() const;
  double missing_rate_of(std::size_t j) const;
};

Dataset generate_synthetic(const SyntheticSpec& spec);

// Cost of feature j under the configured cost rule.
double synthetic_cost(const SyntheticSpec& spec, std::size_t j);

nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& doc);

}  // namespace seqacq::data
