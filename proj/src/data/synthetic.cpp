#include "seqacq/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "seqacq/errors.hpp"
#include "seqacq/numerics/rng.hpp"

namespace seqacq::data {
namespace {

constexpr double kTierCosts[] = {1.0, 2.0, 3.0, 6.0, 7.0};

bool contains(const std::vector<std::size_t>& v, std::size_t x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

void check_rule(const std::vector<std::size_t>& informative,
                const std::vector<double>& weights, std::size_t d,
                std::size_t num_classes, const char* which) {
  if (informative.empty()) {
    throw SpecError(std::string(which) + ": informative set is empty");
  }
  std::set<std::size_t> unique(informative.begin(), informative.end());
  if (unique.size() != informative.size()) {
    throw SpecError(std::string(which) + ": duplicate informative index");
  }
  for (std::size_t k : informative) {
    if (k >= d) throw SpecError(std::string(which) + ": informative index out of range");
  }
  const std::size_t rows = num_classes == 2 ? 1 : num_classes;
  if (weights.size() != rows * informative.size()) {
    throw SpecError(std::string(which) + ": weight count does not match informative set");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw SpecError(std::string(which) + ": non-finite weight");
  }
}

std::size_t draw_label(const std::vector<std::size_t>& informative,
                       const std::vector<double>& weights, double bias,
                       std::size_t num_classes, const std::vector<double>& latent,
                       Rng& rng) {
  const double u = uniform01(rng);
  if (num_classes == 2) {
    double logit = bias;
    for (std::size_t k = 0; k < informative.size(); ++k) {
      logit += weights[k] * latent[informative[k]];
    }
    const double p1 = 1.0 / (1.0 + std::exp(-logit));
    return u < p1 ? 1 : 0;
  }
  std::vector<double> logits(num_classes, 0.0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t k = 0; k < informative.size(); ++k) {
      logits[c] += weights[c * informative.size() + k] * latent[informative[k]];
    }
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& z : logits) total += (z = std::exp(z - top));
  double acc = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    acc += logits[c] / total;
    if (u < acc) return c;
  }
  return num_classes - 1;
}

}  // namespace

double SyntheticSpec::missing_rate_of(std::size_t j) const {
  return missing_rates.empty() ? missing_rate : missing_rates.at(j);
}

void SyntheticSpec::validate() const {
  if (num_features == 0) throw SpecError("synthetic: num_features must be positive");
  if (num_classes < 2) throw SpecError("synthetic: need at least two classes");
  check_rule(informative, weights, num_features, num_classes, "synthetic");
  if (alternate) {
    check_rule(alternate->informative, alternate->weights, num_features,
               num_classes, "synthetic alternate rule");
    if (alternate->switch_feature >= num_features) {
      throw SpecError("synthetic: switch feature out of range");
    }
  }
  if (!missing_rates.empty() && missing_rates.size() != num_features) {
    throw SpecError("synthetic: missing_rates must have one entry per feature");
  }
  for (std::size_t j = 0; j < num_features; ++j) {
    const double rho = missing_rate_of(j);
    if (!(rho >= 0.0 && rho < 1.0)) {
      throw SpecError("synthetic: missingness rate must lie in [0, 1)");
    }
  }
  for (std::size_t j : free_features) {
    if (j >= num_features) throw SpecError("synthetic: free feature out of range");
  }
  if (cost_rule == CostRule::kExplicit) {
    if (costs.size() != num_features) {
      throw SpecError("synthetic: explicit costs need one entry per feature");
    }
    for (std::size_t j = 0; j < num_features; ++j) {
      const bool free = contains(free_features, j);
      if (costs[j] < 0.0 || (costs[j] == 0.0) != free) {
        throw SpecError("synthetic: explicit cost of feature " + std::to_string(j) +
                        " inconsistent with the free set");
      }
    }
  }
  if (!modalities.empty() && modalities.size() != num_features) {
    throw SpecError("synthetic: modalities must have one entry per feature");
  }
  if (max_series_length == 0 || series_hidden == 0 || embedding_width == 0) {
    throw SpecError("synthetic: series/embedding sizes must be positive");
  }
  if (!(noise >= 0.0)) throw SpecError("synthetic: noise must be non-negative");
}

double synthetic_cost(const SyntheticSpec& spec, std::size_t j) {
  if (contains(spec.free_features, j)) return 0.0;
  switch (spec.cost_rule) {
    case CostRule::kUniform:
      return 1.0;
    case CostRule::kTiers: {
      std::size_t paid_rank = 0;
      for (std::size_t k = 0; k < j; ++k) {
        if (!contains(spec.free_features, k)) ++paid_rank;
      }
      return kTierCosts[paid_rank % std::size(kTierCosts)];
    }
    case CostRule::kExplicit:
      return spec.costs.at(j);
  }
  return 1.0;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t d = spec.num_features;
  auto modality = [&](std::size_t j) {
    return spec.modalities.empty() ? Modality::kNumeric : spec.modalities[j];
  };

  std::vector<FeatureDescriptor> features;
  for (std::size_t j = 0; j < d; ++j) {
    FeatureDescriptor f;
    f.name = "f" + std::to_string(j);
    f.modality = modality(j);
    f.cost = synthetic_cost(spec, j);
    f.slot_width = f.modality == Modality::kNumeric      ? 1
                   : f.modality == Modality::kTimeSeries ? spec.series_hidden + 1
                                                         : spec.embedding_width;
    features.push_back(std::move(f));
  }

  Dataset ds;
  ds.schema = FeatureSchema(std::move(features), spec.num_classes);

  Rng rng(spec.seed);
  // Fixed projection direction per embedded feature.
  std::vector<std::vector<double>> directions(d);
  for (std::size_t j = 0; j < d; ++j) {
    if (modality(j) != Modality::kEmbedded) continue;
    double norm = 0.0;
    directions[j].resize(spec.embedding_width);
    for (double& x : directions[j]) {
      x = standard_normal(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : directions[j]) x /= norm;
  }

  std::vector<double> latent(d);
  ds.records.reserve(spec.num_samples);
  for (std::size_t n = 0; n < spec.num_samples; ++n) {
    for (double& z : latent) z = standard_normal(rng);
    std::size_t label;
    if (spec.alternate && latent[spec.alternate->switch_feature] <= 0.0) {
      label = draw_label(spec.alternate->informative, spec.alternate->weights,
                         spec.alternate->bias, spec.num_classes, latent, rng);
    } else {
      label = draw_label(spec.informative, spec.weights, spec.bias,
                         spec.num_classes, latent, rng);
    }

    PatientRecord rec;
    rec.id = "p" + std::to_string(n);
    rec.label = label;
    rec.values.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double observed = latent[j] + spec.noise * standard_normal(rng);
      switch (modality(j)) {
        case Modality::kNumeric:
          rec.values[j] = observed;
          break;
        case Modality::kTimeSeries: {
          // Random walk whose most recent step is the observed value.
          const std::size_t length = 1 + uniform_index(rng, spec.max_series_length);
          std::vector<double> steps(length);
          steps.back() = observed;
          for (std::size_t t = length - 1; t-- > 0;) {
            steps[t] = steps[t + 1] + 0.3 * standard_normal(rng);
          }
          rec.values[j] = Series{std::move(steps)};
          break;
        }
        case Modality::kEmbedded: {
          std::vector<double> v(spec.embedding_width);
          for (std::size_t k = 0; k < v.size(); ++k) {
            v[k] = observed * directions[j][k] + spec.noise * standard_normal(rng);
          }
          rec.values[j] = Embedding{std::move(v)};
          break;
        }
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      if (contains(spec.free_features, j)) continue;
      const double rho = spec.missing_rate_of(j);
      if (rho > 0.0 && uniform01(rng) < rho) rec.values[j] = Absent{};
    }
    ds.records.push_back(std::move(rec));
  }
  if (ds.records.empty()) return ds;
  return split(std::move(ds), spec.split_fractions, derive_seed(spec.seed, 1));
}

nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec) {
  nlohmann::json doc = {
      {"num_features", spec.num_features},
      {"num_classes", spec.num_classes},
      {"informative", spec.informative},
      {"weights", spec.weights},
      {"bias", spec.bias},
      {"missing_rate", spec.missing_rate},
      {"missing_rates", spec.missing_rates},
      {"cost_rule", spec.cost_rule == CostRule::kUniform ? "uniform"
                    : spec.cost_rule == CostRule::kTiers ? "tiers"
                                                         : "explicit"},
      {"costs", spec.costs},
      {"free_features", spec.free_features},
      {"noise", spec.noise},
      {"num_samples", spec.num_samples},
      {"seed", spec.seed},
      {"max_series_length", spec.max_series_length},
      {"series_hidden", spec.series_hidden},
      {"embedding_width", spec.embedding_width},
      {"split_fractions", spec.split_fractions},
  };
  auto mods = nlohmann::json::array();
  for (auto m : spec.modalities) mods.push_back(std::string(modality_name(m)));
  doc["modalities"] = std::move(mods);
  if (spec.alternate) {
    doc["alternate"] = {{"switch_feature", spec.alternate->switch_feature},
                        {"informative", spec.alternate->informative},
                        {"weights", spec.alternate->weights},
                        {"bias", spec.alternate->bias}};
  }
  return doc;
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& doc) {
  SyntheticSpec spec;
  try {
    spec.num_features = doc.value("num_features", spec.num_features);
    spec.num_classes = doc.value("num_classes", spec.num_classes);
    spec.informative = doc.value("informative", spec.informative);
    spec.weights = doc.value("weights", spec.weights);
    spec.bias = doc.value("bias", spec.bias);
    spec.missing_rate = doc.value("missing_rate", spec.missing_rate);
    spec.missing_rates = doc.value("missing_rates", spec.missing_rates);
    const auto rule = doc.value("cost_rule", std::string("uniform"));
    if (rule == "uniform") {
      spec.cost_rule = CostRule::kUniform;
    } else if (rule == "tiers") {
      spec.cost_rule = CostRule::kTiers;
    } else if (rule == "explicit") {
      spec.cost_rule = CostRule::kExplicit;
    } else {
      throw SpecError("synthetic: unknown cost_rule '" + rule + "'");
    }
    spec.costs = doc.value("costs", spec.costs);
    spec.free_features = doc.value("free_features", spec.free_features);
    spec.noise = doc.value("noise", spec.noise);
    spec.num_samples = doc.value("num_samples", spec.num_samples);
    spec.seed = doc.value("seed", spec.seed);
    spec.max_series_length = doc.value("max_series_length", spec.max_series_length);
    spec.series_hidden = doc.value("series_hidden", spec.series_hidden);
    spec.embedding_width = doc.value("embedding_width", spec.embedding_width);
    spec.split_fractions = doc.value("split_fractions", spec.split_fractions);
    if (doc.contains("modalities")) {
      for (const auto& m : doc.at("modalities")) {
        spec.modalities.push_back(parse_modality(m.get<std::string>()));
      }
    }
    if (doc.contains("alternate") && !doc.at("alternate").is_null()) {
      const auto& a = doc.at("alternate");
      AlternateRule alt;
      alt.switch_feature = a.at("switch_feature").get<std::size_t>();
      alt.informative = a.at("informative").get<std::vector<std::size_t>>();
      alt.weights = a.at("weights").get<std::vector<double>>();
      alt.bias = a.value("bias", 0.0);
      spec.alternate = std::move(alt);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("synthetic spec: ") + e.what());
  } catch (const IngestionError& e) {
    throw SpecError(std::string("synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

}  // namespace seqacq::data
