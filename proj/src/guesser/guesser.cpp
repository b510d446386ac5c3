#include "seqacq/guesser/guesser.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "seqacq/errors.hpp"
#include "seqacq/numerics/losses.hpp"

namespace seqacq::guesser {

using data::FeatureSchema;
using data::Modality;

MaskedState empty_state(const FeatureSchema& schema, double budget) {
  MaskedState s;
  s.schema_hash = schema.hash();
  s.slots.assign(schema.total_slot_width(), 0.0);
  s.mask.assign(schema.size(), 0);
  s.remaining_budget = budget;
  return s;
}

void reveal_slot(const FeatureSchema& schema, MaskedState& state, std::size_t j,
                 std::span<const double> slot) {
  const auto& f = schema.feature(j);
  if (slot.size() != f.slot_width) {
    throw ShapeError("reveal_slot: feature '" + f.name + "' expects width " +
                     std::to_string(f.slot_width));
  }
  std::copy(slot.begin(), slot.end(),
            state.slots.begin() + static_cast<std::ptrdiff_t>(schema.slot_offset(j)));
  state.mask.at(j) = 1;
}

void hide_slot(const FeatureSchema& schema, MaskedState& state, std::size_t j) {
  const auto offset = static_cast<std::ptrdiff_t>(schema.slot_offset(j));
  std::fill(state.slots.begin() + offset,
            state.slots.begin() + offset +
                static_cast<std::ptrdiff_t>(schema.feature(j).slot_width),
            0.0);
  state.mask.at(j) = 0;
}

GuesserModel::GuesserModel(FeatureSchema schema, GuesserArchitecture arch,
                           Rng& rng)
    : schema_(std::move(schema)), arch_(std::move(arch)) {
  std::vector<std::size_t> widths{head_input_width()};
  widths.insert(widths.end(), arch_.hidden.begin(), arch_.hidden.end());
  widths.push_back(schema_.num_classes());
  head_ = numerics::DenseNet::random(widths, rng);
  encoder_of_.resize(schema_.size());
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    const auto& f = schema_.feature(j);
    if (f.modality != Modality::kTimeSeries) continue;
    encoder_of_[j] = encoders_.size();
    encoders_.push_back(numerics::RecurrentCell::random(1, f.slot_width - 1, rng));
  }
}

std::size_t GuesserModel::head_input_width() const {
  return schema_.total_slot_width() + schema_.size();
}

const numerics::RecurrentCell* GuesserModel::encoder(std::size_t j) const {
  const auto& idx = encoder_of_.at(j);
  return idx ? &encoders_[*idx] : nullptr;
}

numerics::RecurrentCell* GuesserModel::mutable_encoder(std::size_t j) {
  const auto& idx = encoder_of_.at(j);
  return idx ? &encoders_[*idx] : nullptr;
}

std::vector<double> GuesserModel::embed_feature(
    std::size_t j, const data::FeatureValue& value) const {
  const auto& f = schema_.feature(j);
  if (data::is_absent(value)) {
    throw ContractError("embed_feature: feature '" + f.name +
                        "' is absent; consult the mask first");
  }
  switch (f.modality) {
    case Modality::kNumeric: {
      const auto* v = std::get_if<double>(&value);
      if (v == nullptr) throw ContractError("embed_feature: '" + f.name + "' expects a number");
      return {*v};
    }
    case Modality::kTimeSeries: {
      const auto* s = std::get_if<data::Series>(&value);
      if (s == nullptr || s->steps.empty()) {
        throw ContractError("embed_feature: '" + f.name + "' expects a non-empty series");
      }
      const std::span<const double> history(s->steps.data(), s->steps.size() - 1);
      std::vector<double> slot = numerics::final_hidden(*encoder(j), history);
      slot.push_back(s->steps.back());
      return slot;
    }
    case Modality::kEmbedded: {
      const auto* e = std::get_if<data::Embedding>(&value);
      if (e == nullptr || e->values.size() != f.slot_width) {
        throw ContractError("embed_feature: '" + f.name + "' expects a vector of width " +
                            std::to_string(f.slot_width));
      }
      return e->values;
    }
  }
  return {};
}

void GuesserModel::check_state(const MaskedState& state) const {
  if (state.schema_hash != schema_.hash()) {
    throw PairingError("state schema " + state.schema_hash +
                       " does not match guesser schema " + schema_.hash());
  }
  if (state.slots.size() != schema_.total_slot_width() ||
      state.mask.size() != schema_.size()) {
    throw ShapeError("state width does not match the guesser");
  }
}

std::vector<double> GuesserModel::head_input(const MaskedState& state) const {
  check_state(state);
  std::vector<double> x(head_input_width(), 0.0);
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    if (!state.mask[j]) continue;
    const std::size_t off = schema_.slot_offset(j);
    const std::size_t w = schema_.feature(j).slot_width;
    for (std::size_t k = 0; k < w; ++k) x[off + k] = state.slots[off + k];
    x[schema_.total_slot_width() + j] = 1.0;
  }
  return x;
}

std::vector<double> GuesserModel::predict_proba(const MaskedState& state) const {
  const auto logits = numerics::infer(head_, head_input(state));
  return numerics::softmax(logits);
}

std::uint64_t GuesserModel::checksum() const {
  std::uint64_t h = numerics::checksum(head_.params());
  for (const auto& cell : encoders_) h = numerics::checksum(cell.params(), h);
  return h;
}

numerics::CheckpointEnvelope GuesserModel::to_envelope() const {
  numerics::CheckpointEnvelope env;
  env.kind = "guesser";
  env.schema_hash = schema_.hash();
  nlohmann::json encoders = nlohmann::json::array();
  env.arrays.push_back({"head", std::vector<double>(head_.params().begin(),
                                                    head_.params().end())});
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    const auto* cell = encoder(j);
    if (cell == nullptr) continue;
    const auto& name = schema_.feature(j).name;
    encoders.push_back({{"feature", name},
                        {"input_width", cell->input_width()},
                        {"hidden_width", cell->hidden_width()}});
    env.arrays.push_back({"encoder:" + name, std::vector<double>(cell->params().begin(),
                                                                 cell->params().end())});
  }
  env.architecture = {{"hidden", arch_.hidden},
                      {"head_widths", head_.widths()},
                      {"encoders", std::move(encoders)},
                      {"schema", data::schema_to_json(schema_)}};
  if (standardization_) {
    env.extra["standardization"] = data::standardization_to_json(*standardization_);
  }
  return env;
}

GuesserModel GuesserModel::from_envelope(const numerics::CheckpointEnvelope& env) {
  if (env.kind != "guesser") throw CheckpointError("not a guesser checkpoint");
  GuesserModel model;
  try {
    model.schema_ = data::schema_from_json(env.architecture.at("schema"));
    model.arch_.hidden = env.architecture.at("hidden").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("guesser architecture: ") + e.what());
  }
  if (model.schema_.hash() != env.schema_hash) {
    throw CheckpointError("guesser checkpoint schema hash does not match its schema");
  }
  Rng unused(0);
  GuesserModel shaped(model.schema_, model.arch_, unused);
  if (shaped.head_.widths() !=
      env.architecture.at("head_widths").get<std::vector<std::size_t>>()) {
    throw CheckpointError("guesser head widths inconsistent with schema");
  }
  shaped.head_.set_params(env.array("head").values);
  for (std::size_t j = 0; j < shaped.schema_.size(); ++j) {
    auto* cell = shaped.mutable_encoder(j);
    if (cell == nullptr) continue;
    cell->set_params(env.array("encoder:" + shaped.schema_.feature(j).name).values);
  }
  if (env.extra.contains("standardization")) {
    shaped.standardization_ = data::standardization_from_json(env.extra.at("standardization"));
  }
  return shaped;
}

void GuesserModel::save(const std::filesystem::path& path) const {
  numerics::write_checkpoint(path, to_envelope());
}

GuesserModel GuesserModel::load(const std::filesystem::path& path) {
  return from_envelope(numerics::read_checkpoint(path, "guesser"));
}

EmbeddedRecord embed_record(const GuesserModel& model,
                            const data::PatientRecord& record) {
  const auto& schema = model.schema();
  if (record.values.size() != schema.size()) {
    throw PairingError("record '" + record.id + "' does not match the guesser schema");
  }
  EmbeddedRecord out;
  out.slots.resize(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (data::is_absent(record.values[j])) continue;
    out.slots[j] = model.embed_feature(j, record.values[j]);
  }
  return out;
}

MaskedState full_state(const GuesserModel& model, const EmbeddedRecord& record,
                       double budget) {
  MaskedState state = empty_state(model.schema(), budget);
  for (std::size_t j = 0; j < record.slots.size(); ++j) {
    if (record.slots[j]) reveal_slot(model.schema(), state, j, *record.slots[j]);
  }
  return state;
}

std::vector<double> slot_gradient_norms(const GuesserModel& model,
                                        const MaskedState& state,
                                        std::size_t label) {
  const auto& schema = model.schema();
  const auto fwd = numerics::forward(model.head(), model.head_input(state));
  const auto xent = numerics::softmax_xent(fwd.logits, label);
  const auto grads = numerics::backward(model.head(), fwd.cache, xent.grad);
  std::vector<double> norms(schema.size(), 0.0);
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (!state.mask[j]) continue;
    const std::size_t off = schema.slot_offset(j);
    double sq = 0.0;
    for (std::size_t k = 0; k < schema.feature(j).slot_width; ++k) {
      sq += grads.input[off + k] * grads.input[off + k];
    }
    norms[j] = std::sqrt(sq);
  }
  return norms;
}

AdversarialMask adversarial_mask(const GuesserModel& model,
                                 const MaskedState& state, std::size_t label,
                                 std::size_t k) {
  if (k == 0) throw ParameterError("adversarial_mask: k must be at least 1");
  const auto& schema = model.schema();
  const auto norms = slot_gradient_norms(model, state, label);
  std::vector<std::size_t> candidates;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (state.mask[j] && !schema.feature(j).is_free()) candidates.push_back(j);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });
  AdversarialMask out;
  out.mask = state.mask;
  if (k > candidates.size()) {
    spdlog::debug("adversarial_mask: k={} clamped to {} maskable features", k,
                  candidates.size());
    out.clamped = true;
    k = candidates.size();
  }
  for (std::size_t r = 0; r < k; ++r) {
    out.mask[candidates[r]] = 0;
    out.hidden.push_back(candidates[r]);
  }
  return out;
}

}  // namespace seqacq::guesser
