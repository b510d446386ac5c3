#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqacq/data/dataset.hpp"
#include "seqacq/guesser/guesser.hpp"
#include "seqacq/numerics/optimizer.hpp"

namespace seqacq::guesser {

struct PretrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  numerics::AdamConfig adam{};
  // Hierarchical random masking: rate u ~ U(0,1), then each non-free
  // feature is hidden with probability u. Off means plain supervised
  // training on fully revealed inputs.
  bool random_masking = true;
  // Probability of adversarial masking ramps linearly over epochs.
  double adversarial_start = 0.05;
  double adversarial_end = 0.5;
  std::vector<std::size_t> adversarial_k{1, 2, 3};
  // Hide rate used for the masked validation accuracy in the log.
  double validation_mask_rate = 0.5;
  std::uint64_t seed = 0;

  // Plain supervised training: no random and no adversarial masking.
  static PretrainConfig plain();
};

struct PretrainLogEntry {
  std::size_t epoch = 0;
  double loss = 0.0;
  double val_acc = 0.0;
  double val_acc_masked = 0.0;
  double p_adv = 0.0;
};

struct PretrainResult {
  GuesserModel model;
  std::vector<PretrainLogEntry> log;
};

double adversarial_probability(const PretrainConfig& config, std::size_t epoch);

// Trains embedders and head jointly by cross-entropy on the train split.
// Absent features are always hidden; free features are always revealed.
PretrainResult pretrain(GuesserModel model, const data::Dataset& dataset,
                        const PretrainConfig& config);

// Accuracy of argmax predictions on a split when each non-free present
// feature is hidden independently with probability `hide_rate`.
double masked_accuracy(const GuesserModel& model, const data::Dataset& dataset,
                       data::Split split, double hide_rate, std::uint64_t seed);

// Mean probability assigned to the true label on a split, with either all
// present features revealed or only the free ones.
double mean_prob_correct(const GuesserModel& model, const data::Dataset& dataset,
                         data::Split split, bool free_only);

nlohmann::json pretrain_config_to_json(const PretrainConfig& config);
PretrainConfig pretrain_config_from_json(const nlohmann::json& doc);
nlohmann::json log_entry_to_json(const PretrainLogEntry& entry);
void write_pretrain_log(const std::filesystem::path& path,
                        const std::vector<PretrainLogEntry>& log);

}  // namespace seqacq::guesser
