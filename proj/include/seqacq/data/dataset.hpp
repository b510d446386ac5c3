#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqacq/data/schema.hpp"

namespace seqacq::data {

// Patient-specific missingness. Never imputed; only the environment's
// action mask and the ingestion validator look at it.
struct Absent {
  bool operator==(const Absent&) const = default;
};

struct Series {
  std::vector<double> steps;
  bool operator==(const Series&) const = default;
};

struct Embedding {
  std::vector<double> values;
  bool operator==(const Embedding&) const = default;
};

using FeatureValue = std::variant<Absent, double, Series, Embedding>;

inline bool is_absent(const FeatureValue& v) {
  return std::holds_alternative<Absent>(v);
}

struct PatientRecord {
  std::string id;
  std::size_t label = 0;
  std::vector<FeatureValue> values;  // schema order

  bool operator==(const PatientRecord&) const = default;
};

enum class Split : std::uint8_t { kTrain, kVal, kTest };
std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct FeatureStats {
  double mean = 0.0;
  double std = 1.0;
  bool operator==(const FeatureStats&) const = default;
};

// Per-feature train-split statistics; nullopt for embedded features, which
// are passed through untouched.
struct Standardization {
  std::vector<std::optional<FeatureStats>> per_feature;
  bool operator==(const Standardization&) const = default;
};

struct Dataset {
  FeatureSchema schema;
  std::vector<PatientRecord> records;
  std::vector<Split> splits;  // parallel to records
  std::optional<Standardization> standardization;

  std::vector<std::size_t> indices(Split s) const;
  std::size_t count(Split s) const;

  bool operator==(const Dataset&) const = default;
};

// Throws IngestionError naming the record id and field on any violation.
void validate_record(const FeatureSchema& schema, const PatientRecord& record);

// --- file formats (format_version 1) ---------------------------------------

inline constexpr int kFormatVersion = 1;

nlohmann::json schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const nlohmann::json& doc);
FeatureSchema load_schema(const std::filesystem::path& path);
void save_schema(const FeatureSchema& schema, const std::filesystem::path& path);

nlohmann::json record_to_json(const FeatureSchema& schema,
                              const PatientRecord& record,
                              std::optional<Split> split = std::nullopt);
// Parses one record object; the split field, if any, goes to *split.
PatientRecord record_from_json(const FeatureSchema& schema,
                               const nlohmann::json& obj,
                               std::optional<Split>* split = nullptr);

nlohmann::json standardization_to_json(const Standardization& s);
Standardization standardization_from_json(const nlohmann::json& doc);

struct LoadOptions {
  // Used when records carry no split field.
  std::vector<double> fractions{0.7, 0.15, 0.15};
  std::uint64_t seed = 0;
};

// Records file: one JSON object per line. If every record has a "split"
// field those assignments are kept, otherwise the stratified splitter runs.
Dataset load_dataset(const std::filesystem::path& records_path,
                     const std::filesystem::path& schema_path,
                     const LoadOptions& options = {});

// Writes schema and records (with split fields). Standardization statistics,
// if present, go to `stats_path` when given.
void save_dataset(const Dataset& dataset,
                  const std::filesystem::path& records_path,
                  const std::filesystem::path& schema_path,
                  const std::optional<std::filesystem::path>& stats_path = std::nullopt);

Dataset load_dataset_with_stats(const std::filesystem::path& records_path,
                                const std::filesystem::path& schema_path,
                                const std::filesystem::path& stats_path);

// --- transforms ---------------------------------------------------------------

// Stratified by label; deterministic per seed. Fractions are (train, val,
// test) and must be non-negative, sum to 1 and have at least one positive.
Dataset split(Dataset dataset, std::span<const double> fractions,
              std::uint64_t seed);

// Computes statistics on the train split and applies them to every record.
Dataset standardize(Dataset dataset);

// Applies existing statistics to one record (used for service inputs).
PatientRecord apply_standardization(const FeatureSchema& schema,
                                    const Standardization& stats,
                                    PatientRecord record);
FeatureValue apply_standardization(const FeatureSchema& schema,
                                   const Standardization& stats,
                                   std::size_t feature, FeatureValue value);

inline constexpr double kStdFloor = 1e-8;

}  // namespace seqacq::data
