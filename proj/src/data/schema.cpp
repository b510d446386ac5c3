#include "seqacq/data/schema.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "seqacq/errors.hpp"

namespace seqacq::data {

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::kNumeric:
      return "numeric";
    case Modality::kTimeSeries:
      return "timeseries";
    case Modality::kEmbedded:
      return "embedded";
  }
  return "numeric";
}

Modality parse_modality(std::string_view name) {
  if (name == "numeric") return Modality::kNumeric;
  if (name == "timeseries") return Modality::kTimeSeries;
  if (name == "embedded") return Modality::kEmbedded;
  throw IngestionError("unknown modality '" + std::string(name) + "'");
}

FeatureSchema::FeatureSchema(std::vector<FeatureDescriptor> features,
                             std::size_t num_classes)
    : features_(std::move(features)), num_classes_(num_classes) {
  if (num_classes_ < 2) {
    throw IngestionError("schema: at least two classes are required");
  }
  std::ostringstream canon;
  canon << "classes=" << num_classes_ << ';';
  for (std::size_t j = 0; j < features_.size(); ++j) {
    const auto& f = features_[j];
    if (f.name.empty()) {
      throw IngestionError("schema: feature " + std::to_string(j) + " has no name");
    }
    if (!by_name_.emplace(f.name, j).second) {
      throw IngestionError("schema: duplicate feature name '" + f.name + "'");
    }
    if (!std::isfinite(f.cost) || f.cost < 0.0) {
      throw IngestionError("schema: feature '" + f.name + "' has negative cost");
    }
    if (f.slot_width < 1) {
      throw IngestionError("schema: feature '" + f.name + "' has slot width 0");
    }
    if (f.modality == Modality::kNumeric && f.slot_width != 1) {
      throw IngestionError("schema: numeric feature '" + f.name +
                           "' must have slot width 1");
    }
    if (f.modality == Modality::kTimeSeries && f.slot_width < 2) {
      throw IngestionError("schema: time-series feature '" + f.name +
                           "' needs slot width >= 2 (hidden + last value)");
    }
    offsets_.push_back(total_width_);
    total_width_ += f.slot_width;
    (f.is_free() ? free_ : paid_).push_back(j);
    char cost_hex[32];
    std::snprintf(cost_hex, sizeof(cost_hex), "%a", f.cost);
    canon << f.name << '|' << modality_name(f.modality) << '|' << cost_hex
          << '|' << f.slot_width << ';';
  }
  const std::string text = canon.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  hash_ = buf;
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

double FeatureSchema::cost_ceiling() const {
  double ceiling = 0.0;
  for (const auto& f : features_) ceiling = std::max(ceiling, f.cost);
  return ceiling;
}

double FeatureSchema::total_paid_cost() const {
  double total = 0.0;
  for (const auto& f : features_) total += f.cost;
  return total;
}

}  // namespace seqacq::data
