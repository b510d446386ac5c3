#include "seqacq/data/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "seqacq/errors.hpp"
#include "seqacq/numerics/rng.hpp"

namespace seqacq::data {
namespace {

using nlohmann::json;

[[noreturn]] void ingest_fail(const std::string& record_id,
                              const std::string& field,
                              const std::string& what) {
  throw IngestionError("record '" + record_id + "', field '" + field + "': " + what);
}

void check_format_version(const json& doc, const std::string& where) {
  if (!doc.contains("format_version")) {
    throw IngestionError(where + ": missing format_version");
  }
  if (doc.at("format_version") != kFormatVersion) {
    throw IngestionError(where + ": unsupported format_version " +
                         doc.at("format_version").dump());
  }
}

std::vector<double> parse_number_array(const json& v, const std::string& id,
                                       const std::string& field) {
  if (!v.is_array()) ingest_fail(id, field, "expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) ingest_fail(id, field, "array entries must be numbers");
    const double d = x.get<double>();
    if (!std::isfinite(d)) ingest_fail(id, field, "non-finite value");
    out.push_back(d);
  }
  return out;
}

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw IngestionError("unknown split '" + std::string(name) + "'");
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == s) out.push_back(i);
  }
  return out;
}

std::size_t Dataset::count(Split s) const {
  return static_cast<std::size_t>(std::count(splits.begin(), splits.end(), s));
}

void validate_record(const FeatureSchema& schema, const PatientRecord& record) {
  if (record.values.size() != schema.size()) {
    ingest_fail(record.id, "features",
                "expected " + std::to_string(schema.size()) + " values, got " +
                    std::to_string(record.values.size()));
  }
  if (record.label >= schema.num_classes()) {
    ingest_fail(record.id, "label",
                "label " + std::to_string(record.label) + " out of range");
  }
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& f = schema.feature(j);
    const auto& v = record.values[j];
    if (is_absent(v)) {
      if (f.is_free()) {
        ingest_fail(record.id, f.name, "free features must be present");
      }
      continue;
    }
    switch (f.modality) {
      case Modality::kNumeric:
        if (!std::holds_alternative<double>(v)) {
          ingest_fail(record.id, f.name, "expected a numeric value");
        }
        if (!std::isfinite(std::get<double>(v))) {
          ingest_fail(record.id, f.name, "non-finite value");
        }
        break;
      case Modality::kTimeSeries: {
        const auto* s = std::get_if<Series>(&v);
        if (s == nullptr) ingest_fail(record.id, f.name, "expected a time series");
        if (s->steps.empty()) {
          ingest_fail(record.id, f.name, "time series needs at least one step");
        }
        for (double x : s->steps) {
          if (!std::isfinite(x)) ingest_fail(record.id, f.name, "non-finite value");
        }
        break;
      }
      case Modality::kEmbedded: {
        const auto* e = std::get_if<Embedding>(&v);
        if (e == nullptr) ingest_fail(record.id, f.name, "expected an embedding");
        if (e->values.size() != f.slot_width) {
          ingest_fail(record.id, f.name,
                      "embedding width " + std::to_string(e->values.size()) +
                          " != slot width " + std::to_string(f.slot_width));
        }
        for (double x : e->values) {
          if (!std::isfinite(x)) ingest_fail(record.id, f.name, "non-finite value");
        }
        break;
      }
    }
  }
}

// --- schema -------------------------------------------------------------------

json schema_to_json(const FeatureSchema& schema) {
  json features = json::array();
  for (const auto& f : schema.features()) {
    features.push_back({{"name", f.name},
                        {"modality", std::string(modality_name(f.modality))},
                        {"cost", f.cost},
                        {"slot_width", f.slot_width},
                        {"free", f.is_free()}});
  }
  return {{"format_version", kFormatVersion},
          {"num_classes", schema.num_classes()},
          {"features", std::move(features)}};
}

FeatureSchema schema_from_json(const json& doc) {
  check_format_version(doc, "schema");
  try {
    std::vector<FeatureDescriptor> features;
    for (const auto& f : doc.at("features")) {
      FeatureDescriptor d;
      d.name = f.at("name").get<std::string>();
      d.modality = parse_modality(f.value("modality", std::string("numeric")));
      d.cost = f.at("cost").get<double>();
      if (d.cost < 0.0) {
        throw IngestionError("schema: feature '" + d.name + "' has negative cost");
      }
      d.slot_width = f.value("slot_width", std::size_t{1});
      if (f.contains("free") && f.at("free").get<bool>() != d.is_free()) {
        throw IngestionError("schema: feature '" + d.name +
                             "' free flag disagrees with its cost");
      }
      features.push_back(std::move(d));
    }
    return FeatureSchema(std::move(features), doc.value("num_classes", std::size_t{2}));
  } catch (const json::exception& e) {
    throw IngestionError(std::string("schema: ") + e.what());
  }
}

FeatureSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open schema file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IngestionError("schema file " + path.string() + ": " + e.what());
  }
  return schema_from_json(doc);
}

void save_schema(const FeatureSchema& schema, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write schema file " + path.string());
  out << schema_to_json(schema).dump(2) << '\n';
}

// --- records ------------------------------------------------------------------

json record_to_json(const FeatureSchema& schema, const PatientRecord& record,
                    std::optional<Split> split) {
  json features = json::object();
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& name = schema.feature(j).name;
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Absent>) {
            features[name] = nullptr;
          } else if constexpr (std::is_same_v<T, double>) {
            features[name] = v;
          } else if constexpr (std::is_same_v<T, Series>) {
            features[name] = v.steps;
          } else {
            features[name] = v.values;
          }
        },
        record.values.at(j));
  }
  json obj = {{"format_version", kFormatVersion},
              {"id", record.id},
              {"label", record.label},
              {"features", std::move(features)}};
  if (split) obj["split"] = std::string(split_name(*split));
  return obj;
}

PatientRecord record_from_json(const FeatureSchema& schema, const json& obj,
                               std::optional<Split>* split) {
  if (!obj.is_object()) throw IngestionError("record line is not an object");
  check_format_version(obj, "record");
  PatientRecord rec;
  if (!obj.contains("id") || !obj.at("id").is_string()) {
    throw IngestionError("record without a string id");
  }
  rec.id = obj.at("id").get<std::string>();
  if (!obj.contains("label") || !obj.at("label").is_number_integer() ||
      obj.at("label").get<long long>() < 0) {
    ingest_fail(rec.id, "label", "expected a non-negative integer");
  }
  rec.label = obj.at("label").get<std::size_t>();
  if (!obj.contains("features") || !obj.at("features").is_object()) {
    ingest_fail(rec.id, "features", "expected an object");
  }
  const auto& feats = obj.at("features");
  for (auto it = feats.begin(); it != feats.end(); ++it) {
    if (!schema.index_of(it.key())) ingest_fail(rec.id, it.key(), "unknown feature");
  }
  rec.values.resize(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& f = schema.feature(j);
    if (!feats.contains(f.name)) {
      ingest_fail(rec.id, f.name, "missing (use null for an absent value)");
    }
    const auto& v = feats.at(f.name);
    if (v.is_null()) {
      rec.values[j] = Absent{};
      continue;
    }
    switch (f.modality) {
      case Modality::kNumeric:
        if (!v.is_number()) ingest_fail(rec.id, f.name, "modality mismatch: expected number");
        rec.values[j] = v.get<double>();
        break;
      case Modality::kTimeSeries:
        if (!v.is_array()) ingest_fail(rec.id, f.name, "modality mismatch: expected array");
        rec.values[j] = Series{parse_number_array(v, rec.id, f.name)};
        break;
      case Modality::kEmbedded:
        if (!v.is_array()) ingest_fail(rec.id, f.name, "modality mismatch: expected array");
        rec.values[j] = Embedding{parse_number_array(v, rec.id, f.name)};
        break;
    }
  }
  validate_record(schema, rec);
  if (split != nullptr) {
    *split = std::nullopt;
    if (obj.contains("split")) {
      if (!obj.at("split").is_string()) ingest_fail(rec.id, "split", "expected a string");
      *split = parse_split(obj.at("split").get<std::string>());
    }
  }
  return rec;
}

json standardization_to_json(const Standardization& s) {
  json per = json::array();
  for (const auto& st : s.per_feature) {
    if (st) {
      per.push_back({{"mean", st->mean}, {"std", st->std}});
    } else {
      per.push_back(nullptr);
    }
  }
  return {{"format_version", kFormatVersion}, {"per_feature", std::move(per)}};
}

Standardization standardization_from_json(const json& doc) {
  check_format_version(doc, "standardization");
  Standardization s;
  for (const auto& st : doc.at("per_feature")) {
    if (st.is_null()) {
      s.per_feature.emplace_back(std::nullopt);
    } else {
      s.per_feature.emplace_back(
          FeatureStats{st.at("mean").get<double>(), st.at("std").get<double>()});
    }
  }
  return s;
}

Dataset load_dataset(const std::filesystem::path& records_path,
                     const std::filesystem::path& schema_path,
                     const LoadOptions& options) {
  Dataset ds;
  ds.schema = load_schema(schema_path);
  std::ifstream in(records_path);
  if (!in) throw IngestionError("cannot open records file " + records_path.string());
  std::string line;
  std::size_t line_no = 0;
  std::size_t with_split = 0;
  std::vector<std::optional<Split>> assigned;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw IngestionError("records line " + std::to_string(line_no) + ": " + e.what());
    }
    std::optional<Split> split;
    ds.records.push_back(record_from_json(ds.schema, obj, &split));
    if (split) ++with_split;
    assigned.push_back(split);
  }
  if (!ds.records.empty() && with_split == ds.records.size()) {
    for (const auto& s : assigned) ds.splits.push_back(*s);
    return ds;
  }
  if (with_split != 0) {
    throw IngestionError("records file mixes records with and without split fields");
  }
  if (ds.records.empty()) return ds;
  return split(std::move(ds), options.fractions, options.seed);
}

void save_dataset(const Dataset& dataset,
                  const std::filesystem::path& records_path,
                  const std::filesystem::path& schema_path,
                  const std::optional<std::filesystem::path>& stats_path) {
  save_schema(dataset.schema, schema_path);
  std::ofstream out(records_path);
  if (!out) throw IngestionError("cannot write records file " + records_path.string());
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    std::optional<Split> s;
    if (i < dataset.splits.size()) s = dataset.splits[i];
    out << record_to_json(dataset.schema, dataset.records[i], s).dump() << '\n';
  }
  if (stats_path && dataset.standardization) {
    std::ofstream sout(*stats_path);
    if (!sout) throw IngestionError("cannot write stats file " + stats_path->string());
    sout << standardization_to_json(*dataset.standardization).dump(2) << '\n';
  }
}

Dataset load_dataset_with_stats(const std::filesystem::path& records_path,
                                const std::filesystem::path& schema_path,
                                const std::filesystem::path& stats_path) {
  Dataset ds = load_dataset(records_path, schema_path);
  std::ifstream in(stats_path);
  if (!in) throw IngestionError("cannot open stats file " + stats_path.string());
  json doc;
  in >> doc;
  ds.standardization = standardization_from_json(doc);
  return ds;
}

// --- split --------------------------------------------------------------------

Dataset split(Dataset dataset, std::span<const double> fractions,
              std::uint64_t seed) {
  if (fractions.size() != 3) {
    throw SpecError("split: expected (train, val, test) fractions");
  }
  double total = 0.0;
  std::size_t positive = 0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw SpecError("split: fractions must be non-negative");
    total += f;
    if (f > 0.0) ++positive;
  }
  if (positive == 0 || std::abs(total - 1.0) > 1e-9) {
    throw SpecError("split: fractions must sum to 1");
  }

  const std::size_t num_classes = dataset.schema.num_classes();
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    by_class.at(dataset.records[i].label).push_back(i);
  }
  Rng rng(seed);
  dataset.splits.assign(dataset.records.size(), Split::kTrain);
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& members = by_class[c];
    const std::size_t n = members.size();
    if (n == 0) continue;
    if (n < positive) {
      throw StratificationError("split: class " + std::to_string(c) + " has " +
                                std::to_string(n) + " records for " +
                                std::to_string(positive) + " non-empty splits");
    }
    std::shuffle(members.begin(), members.end(), rng);
    // Largest-remainder allocation of n records over the three splits.
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double exact = fractions[s] * static_cast<double>(n);
      counts[s] = static_cast<std::size_t>(std::floor(exact));
      remainders[s] = exact - static_cast<double>(counts[s]);
      assigned += counts[s];
    }
    while (assigned < n) {
      std::size_t best = 0;
      for (std::size_t s = 1; s < 3; ++s) {
        if (remainders[s] > remainders[best]) best = s;
      }
      ++counts[best];
      remainders[best] = -1.0;
      ++assigned;
    }
    std::size_t cursor = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < counts[s]; ++k) {
        dataset.splits[members[cursor++]] = static_cast<Split>(s);
      }
    }
  }
  return dataset;
}

// --- standardization ------------------------------------------------------------

FeatureValue apply_standardization(const FeatureSchema& schema,
                                   const Standardization& stats,
                                   std::size_t feature, FeatureValue value) {
  const auto& st = stats.per_feature.at(feature);
  if (!st || is_absent(value)) return value;
  const auto scale = [&](double x) { return (x - st->mean) / st->std; };
  switch (schema.feature(feature).modality) {
    case Modality::kNumeric:
      return scale(std::get<double>(value));
    case Modality::kTimeSeries: {
      auto s = std::get<Series>(std::move(value));
      for (double& x : s.steps) x = scale(x);
      return s;
    }
    case Modality::kEmbedded:
      return value;
  }
  return value;
}

PatientRecord apply_standardization(const FeatureSchema& schema,
                                    const Standardization& stats,
                                    PatientRecord record) {
  if (stats.per_feature.size() != schema.size()) {
    throw ShapeError("standardization does not match schema width");
  }
  for (std::size_t j = 0; j < schema.size(); ++j) {
    record.values[j] =
        apply_standardization(schema, stats, j, std::move(record.values[j]));
  }
  return record;
}

Dataset standardize(Dataset dataset) {
  const auto train = dataset.indices(Split::kTrain);
  if (train.empty()) throw SpecError("standardize: train split is empty");
  const auto& schema = dataset.schema;
  Standardization stats;
  stats.per_feature.resize(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto modality = schema.feature(j).modality;
    if (modality == Modality::kEmbedded) continue;
    std::vector<double> pool;
    for (std::size_t i : train) {
      const auto& v = dataset.records[i].values[j];
      if (const auto* x = std::get_if<double>(&v)) pool.push_back(*x);
      if (const auto* s = std::get_if<Series>(&v)) {
        pool.insert(pool.end(), s->steps.begin(), s->steps.end());
      }
    }
    FeatureStats st;
    if (!pool.empty()) {
      const double n = static_cast<double>(pool.size());
      // Shifted by the first value so a constant feature maps exactly to 0.
      double shifted = 0.0;
      for (double x : pool) shifted += x - pool.front();
      st.mean = pool.front() + shifted / n;
      double var = 0.0;
      for (double x : pool) var += (x - st.mean) * (x - st.mean);
      st.std = std::max(std::sqrt(var / n), kStdFloor);
    }
    stats.per_feature[j] = st;
  }
  for (auto& rec : dataset.records) {
    rec = apply_standardization(schema, stats, std::move(rec));
  }
  dataset.standardization = std::move(stats);
  return dataset;
}

}  // namespace seqacq::data
