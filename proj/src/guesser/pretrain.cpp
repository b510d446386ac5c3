#include "seqacq/guesser/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "seqacq/errors.hpp"
#include "seqacq/numerics/losses.hpp"

namespace seqacq::guesser {
namespace {

using data::Modality;

// Per-sample embeddings with the recurrent caches needed for backward.
struct SampleEmbedding {
  std::vector<std::optional<std::vector<double>>> slots;
  std::vector<std::optional<numerics::SequenceCache>> caches;
};

SampleEmbedding embed_for_training(const GuesserModel& model,
                                   const data::PatientRecord& record) {
  const auto& schema = model.schema();
  SampleEmbedding out;
  out.slots.resize(schema.size());
  out.caches.resize(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& v = record.values[j];
    if (data::is_absent(v)) continue;
    if (schema.feature(j).modality != Modality::kTimeSeries) {
      out.slots[j] = model.embed_feature(j, v);
      continue;
    }
    const auto& steps = std::get<data::Series>(v).steps;
    auto seq = numerics::run_sequence(
        *model.encoder(j), std::span<const double>(steps.data(), steps.size() - 1));
    seq.hidden.push_back(steps.back());
    out.slots[j] = std::move(seq.hidden);
    out.caches[j] = std::move(seq.cache);
  }
  return out;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

PretrainConfig PretrainConfig::plain() {
  PretrainConfig c;
  c.random_masking = false;
  c.adversarial_start = 0.0;
  c.adversarial_end = 0.0;
  return c;
}

double adversarial_probability(const PretrainConfig& config, std::size_t epoch) {
  if (config.epochs <= 1) return config.adversarial_start;
  const double t = static_cast<double>(epoch) / static_cast<double>(config.epochs - 1);
  return config.adversarial_start + (config.adversarial_end - config.adversarial_start) * t;
}

PretrainResult pretrain(GuesserModel model, const data::Dataset& dataset,
                        const PretrainConfig& config) {
  if (dataset.schema.hash() != model.schema_hash()) {
    throw PairingError("pretrain: dataset schema does not match the guesser");
  }
  auto train = dataset.indices(data::Split::kTrain);
  if (train.empty()) throw SpecError("pretrain: train split is empty");
  if (config.batch_size == 0) throw ParameterError("pretrain: batch size must be positive");
  if (config.adversarial_start < 0.0 || config.adversarial_end > 1.0 ||
      config.adversarial_end < config.adversarial_start) {
    throw ParameterError("pretrain: adversarial schedule must be a non-decreasing ramp in [0,1]");
  }
  if (config.adversarial_end > 0.0 && config.adversarial_k.empty()) {
    throw ParameterError("pretrain: adversarial_k must not be empty");
  }

  const auto& schema = model.schema();
  Rng rng(config.seed);

  // One optimizer per parameter block: head, then each encoder.
  std::vector<numerics::RecurrentCell*> cells;
  std::vector<std::size_t> cell_feature;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (auto* c = model.mutable_encoder(j)) {
      cells.push_back(c);
      cell_feature.push_back(j);
    }
  }
  numerics::Adam head_opt(model.head().param_count(), config.adam);
  std::vector<numerics::Adam> cell_opts;
  for (auto* c : cells) cell_opts.emplace_back(c->param_count(), config.adam);

  std::vector<double> head_grad(model.head().param_count());
  std::vector<std::vector<double>> cell_grads(cells.size());

  PretrainResult result;
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double p_adv = adversarial_probability(config, epoch);
    std::shuffle(train.begin(), train.end(), rng);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < train.size(); start += config.batch_size) {
      const std::size_t end = std::min(train.size(), start + config.batch_size);
      std::fill(head_grad.begin(), head_grad.end(), 0.0);
      for (std::size_t c = 0; c < cells.size(); ++c) {
        cell_grads[c].assign(cells[c]->param_count(), 0.0);
      }
      for (std::size_t b = start; b < end; ++b) {
        const auto& record = dataset.records[train[b]];
        auto sample = embed_for_training(model, record);
        MaskedState state = empty_state(schema, 0.0);
        for (std::size_t j = 0; j < schema.size(); ++j) {
          if (sample.slots[j]) reveal_slot(schema, state, j, *sample.slots[j]);
        }

        if (p_adv > 0.0 && uniform01(rng) < p_adv) {
          const std::size_t k =
              config.adversarial_k[uniform_index(rng, config.adversarial_k.size())];
          const auto adv = adversarial_mask(model, state, record.label, k);
          for (std::size_t j : adv.hidden) hide_slot(schema, state, j);
        } else if (config.random_masking) {
          const double rate = uniform01(rng);
          for (std::size_t j : schema.paid_features()) {
            if (state.mask[j] && uniform01(rng) < rate) hide_slot(schema, state, j);
          }
        }

        const auto fwd = numerics::forward(model.head(), model.head_input(state));
        const auto xent = numerics::softmax_xent(fwd.logits, record.label);
        if (!std::isfinite(xent.loss)) {
          throw TrainingError("pretrain diverged: non-finite loss at step " +
                              std::to_string(global_step));
        }
        epoch_loss += xent.loss;
        const auto input_grad =
            numerics::backward_accumulate(model.head(), fwd.cache, xent.grad, head_grad);
        for (std::size_t c = 0; c < cells.size(); ++c) {
          const std::size_t j = cell_feature[c];
          if (!state.mask[j] || !sample.caches[j]) continue;
          const std::size_t off = schema.slot_offset(j);
          const std::size_t hid = cells[c]->hidden_width();
          std::vector<double> dh(input_grad.begin() + static_cast<std::ptrdiff_t>(off),
                                 input_grad.begin() + static_cast<std::ptrdiff_t>(off + hid));
          numerics::backward_sequence_accumulate(*cells[c], *sample.caches[j], dh,
                                                 cell_grads[c]);
        }
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (double& g : head_grad) g *= scale;
      const auto& head = model.head();
      head_opt.step(model.mutable_head().mutable_params(), head_grad,
                    [&](std::size_t i) { return "head." + head.param_name(i); });
      for (std::size_t c = 0; c < cells.size(); ++c) {
        for (double& g : cell_grads[c]) g *= scale;
        const auto& name = schema.feature(cell_feature[c]).name;
        const auto* cell = cells[c];
        cell_opts[c].step(cells[c]->mutable_params(), cell_grads[c], [&](std::size_t i) {
          return "encoder:" + name + "." + cell->param_name(i);
        });
      }
      ++global_step;
    }

    PretrainLogEntry entry;
    entry.epoch = epoch;
    entry.loss = epoch_loss / static_cast<double>(train.size());
    entry.p_adv = p_adv;
    if (dataset.count(data::Split::kVal) > 0) {
      entry.val_acc = masked_accuracy(model, dataset, data::Split::kVal, 0.0, 0);
      entry.val_acc_masked = masked_accuracy(model, dataset, data::Split::kVal,
                                             config.validation_mask_rate,
                                             derive_seed(config.seed, 99));
    } else {
      entry.val_acc = entry.val_acc_masked = std::nan("");
    }
    result.log.push_back(entry);
  }
  result.model = std::move(model);
  if (dataset.standardization) result.model.set_standardization(dataset.standardization);
  return result;
}

double masked_accuracy(const GuesserModel& model, const data::Dataset& dataset,
                       data::Split split, double hide_rate, std::uint64_t seed) {
  const auto idx = dataset.indices(split);
  if (idx.empty()) return std::nan("");
  Rng rng(seed);
  std::size_t correct = 0;
  for (std::size_t i : idx) {
    const auto& record = dataset.records[i];
    MaskedState state = full_state(model, embed_record(model, record));
    for (std::size_t j : model.schema().paid_features()) {
      if (state.mask[j] && uniform01(rng) < hide_rate) hide_slot(model.schema(), state, j);
    }
    if (argmax(model.predict_proba(state)) == record.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

double mean_prob_correct(const GuesserModel& model, const data::Dataset& dataset,
                         data::Split split, bool free_only) {
  const auto idx = dataset.indices(split);
  if (idx.empty()) return std::nan("");
  double total = 0.0;
  for (std::size_t i : idx) {
    const auto& record = dataset.records[i];
    MaskedState state = full_state(model, embed_record(model, record));
    if (free_only) {
      for (std::size_t j : model.schema().paid_features()) hide_slot(model.schema(), state, j);
    }
    total += model.predict_proba(state)[record.label];
  }
  return total / static_cast<double>(idx.size());
}

nlohmann::json pretrain_config_to_json(const PretrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.adam.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"random_masking", c.random_masking},
          {"adversarial_start", c.adversarial_start},
          {"adversarial_end", c.adversarial_end},
          {"adversarial_k", c.adversarial_k},
          {"validation_mask_rate", c.validation_mask_rate},
          {"seed", c.seed}};
}

PretrainConfig pretrain_config_from_json(const nlohmann::json& doc) {
  PretrainConfig c;
  c.epochs = doc.value("epochs", c.epochs);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.adam.learning_rate = doc.value("learning_rate", c.adam.learning_rate);
  c.adam.beta1 = doc.value("beta1", c.adam.beta1);
  c.adam.beta2 = doc.value("beta2", c.adam.beta2);
  c.adam.epsilon = doc.value("epsilon", c.adam.epsilon);
  c.random_masking = doc.value("random_masking", c.random_masking);
  c.adversarial_start = doc.value("adversarial_start", c.adversarial_start);
  c.adversarial_end = doc.value("adversarial_end", c.adversarial_end);
  c.adversarial_k = doc.value("adversarial_k", c.adversarial_k);
  c.validation_mask_rate = doc.value("validation_mask_rate", c.validation_mask_rate);
  c.seed = doc.value("seed", c.seed);
  return c;
}

nlohmann::json log_entry_to_json(const PretrainLogEntry& e) {
  return {{"epoch", e.epoch},
          {"loss", e.loss},
          {"val_acc", e.val_acc},
          {"val_acc_masked", e.val_acc_masked},
          {"p_adv", e.p_adv}};
}

void write_pretrain_log(const std::filesystem::path& path,
                        const std::vector<PretrainLogEntry>& log) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write training log " + path.string());
  for (const auto& e : log) out << log_entry_to_json(e).dump() << '\n';
}

}  // namespace seqacq::guesser
