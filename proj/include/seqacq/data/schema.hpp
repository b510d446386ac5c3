#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace seqacq::data {

enum class Modality { kNumeric, kTimeSeries, kEmbedded };

std::string_view modality_name(Modality m);
Modality parse_modality(std::string_view name);

struct FeatureDescriptor {
  std::string name;
  Modality modality = Modality::kNumeric;
  double cost = 1.0;  // abstract resource units
  // numeric: 1; time series: encoder hidden width + 1; embedded: vector length.
  std::size_t slot_width = 1;

  bool is_free() const { return cost == 0.0; }
  bool operator==(const FeatureDescriptor&) const = default;
};

// Ordered feature descriptors plus the label arity. Immutable once built.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(std::vector<FeatureDescriptor> features, std::size_t num_classes);

  std::size_t size() const { return features_.size(); }
  std::size_t num_classes() const { return num_classes_; }
  const FeatureDescriptor& feature(std::size_t j) const { return features_.at(j); }
  const std::vector<FeatureDescriptor>& features() const { return features_; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  std::size_t slot_offset(std::size_t j) const { return offsets_.at(j); }
  std::size_t total_slot_width() const { return total_width_; }

  const std::vector<std::size_t>& free_features() const { return free_; }
  const std::vector<std::size_t>& paid_features() const { return paid_; }
  double cost_ceiling() const;
  double total_paid_cost() const;

  // Stable hex digest of names, modalities, costs, widths and class count.
  const std::string& hash() const { return hash_; }

  bool operator==(const FeatureSchema& other) const {
    return num_classes_ == other.num_classes_ && features_ == other.features_;
  }

 private:
  std::vector<FeatureDescriptor> features_;
  std::size_t num_classes_ = 2;
  std::vector<std::size_t> offsets_;
  std::size_t total_width_ = 0;
  std::vector<std::size_t> free_;
  std::vector<std::size_t> paid_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::string hash_;
};

}  // namespace seqacq::data
