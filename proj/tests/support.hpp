#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "seqacq/data/synthetic.hpp"
#include "seqacq/env/environment.hpp"
#include "seqacq/guesser/guesser.hpp"
#include "seqacq/numerics/rng.hpp"

namespace testsupport {

using namespace seqacq;

// f0 free; f1..f(paid) cost 1, 2, 3, ...
inline data::FeatureSchema numeric_schema(std::size_t free, std::size_t paid,
                                          std::size_t classes = 2) {
  std::vector<data::FeatureDescriptor> fs;
  for (std::size_t j = 0; j < free; ++j) {
    fs.push_back({"free" + std::to_string(j), data::Modality::kNumeric, 0.0, 1});
  }
  for (std::size_t j = 0; j < paid; ++j) {
    fs.push_back({"paid" + std::to_string(j), data::Modality::kNumeric,
                  static_cast<double>(j + 1), 1});
  }
  return data::FeatureSchema(fs, classes);
}

// Numeric, time-series and embedded features together.
inline data::FeatureSchema mixed_schema() {
  return data::FeatureSchema({{"age", data::Modality::kNumeric, 0.0, 1},
                              {"lab", data::Modality::kNumeric, 2.0, 1},
                              {"vitals", data::Modality::kTimeSeries, 3.0, 5},
                              {"note", data::Modality::kEmbedded, 1.0, 3},
                              {"xray", data::Modality::kNumeric, 6.0, 1}},
                             2);
}

inline data::PatientRecord random_record(const data::FeatureSchema& schema, Rng& rng,
                                         double absent_rate = 0.0) {
  data::PatientRecord r;
  r.id = "r" + std::to_string(rng() % 1000000);
  r.label = uniform_index(rng, schema.num_classes());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& f = schema.feature(j);
    if (!f.is_free() && uniform01(rng) < absent_rate) {
      r.values.emplace_back(data::Absent{});
      continue;
    }
    switch (f.modality) {
      case data::Modality::kNumeric:
        r.values.emplace_back(standard_normal(rng));
        break;
      case data::Modality::kTimeSeries: {
        data::Series s;
        const std::size_t len = 1 + uniform_index(rng, 4);
        for (std::size_t t = 0; t < len; ++t) s.steps.push_back(standard_normal(rng));
        r.values.emplace_back(s);
        break;
      }
      case data::Modality::kEmbedded: {
        data::Embedding e;
        for (std::size_t t = 0; t < f.slot_width; ++t) e.values.push_back(standard_normal(rng));
        r.values.emplace_back(e);
        break;
      }
    }
  }
  return r;
}

inline std::shared_ptr<const guesser::GuesserModel> random_guesser(
    const data::FeatureSchema& schema, std::uint64_t seed,
    std::vector<std::size_t> hidden = {16}) {
  Rng rng(seed);
  return std::make_shared<const guesser::GuesserModel>(schema, guesser::GuesserArchitecture{hidden},
                                                       rng);
}

// Pairwise Mann-Whitney count, written independently of the library.
inline double brute_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] == 1 && y[j] == 0) {
        den += 1.0;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
    }
  }
  return num / den;
}

// Walks every distinct threshold from high to low, recomputing precision
// and recall from scratch at each one.
inline double brute_auprc(const std::vector<double>& s, const std::vector<int>& y) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  double positives = 0.0;
  for (int v : y) positives += v;
  double ap = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0;
    double predicted = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) {
        predicted += 1.0;
        tp += y[i];
      }
    }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
  }
  return ap;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("seqacq_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
