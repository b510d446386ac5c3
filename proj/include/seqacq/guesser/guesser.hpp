#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqacq/data/dataset.hpp"
#include "seqacq/numerics/checkpoint.hpp"
#include "seqacq/numerics/dense_net.hpp"
#include "seqacq/numerics/recurrent.hpp"
#include "seqacq/numerics/rng.hpp"

namespace seqacq::guesser {

// The acquisition state: per-feature embedding slots gated by the mask,
// the mask itself and the remaining budget. Hidden features have all-zero
// slots.
struct MaskedState {
  std::string schema_hash;
  std::vector<double> slots;
  std::vector<std::uint8_t> mask;
  double remaining_budget = 0.0;

  bool revealed(std::size_t j) const { return mask.at(j) != 0; }
  bool operator==(const MaskedState&) const = default;
};

MaskedState empty_state(const data::FeatureSchema& schema, double budget);

// Writes `slot` into feature j's slot and sets its mask bit.
void reveal_slot(const data::FeatureSchema& schema, MaskedState& state,
                 std::size_t j, std::span<const double> slot);
// Zeroes feature j's slot and clears its mask bit.
void hide_slot(const data::FeatureSchema& schema, MaskedState& state,
               std::size_t j);

struct GuesserArchitecture {
  std::vector<std::size_t> hidden{64, 64};
};

// Masked-input classifier. Head input is the gated slots followed by the
// mask vector; time-series features own a recurrent encoder whose hidden
// width is the feature's slot width minus one.
class GuesserModel {
 public:
  GuesserModel() = default;
  GuesserModel(data::FeatureSchema schema, GuesserArchitecture arch, Rng& rng);

  const data::FeatureSchema& schema() const { return schema_; }
  const std::string& schema_hash() const { return schema_.hash(); }
  std::size_t num_classes() const { return schema_.num_classes(); }
  const GuesserArchitecture& architecture() const { return arch_; }
  std::size_t head_input_width() const;

  const numerics::DenseNet& head() const { return head_; }
  numerics::DenseNet& mutable_head() { return head_; }
  // nullptr for features without an encoder.
  const numerics::RecurrentCell* encoder(std::size_t j) const;
  numerics::RecurrentCell* mutable_encoder(std::size_t j);
  std::size_t num_encoders() const { return encoders_.size(); }

  // numeric -> [v]; time series -> [hidden over steps 1..T-1 ; step T];
  // embedded -> the stored vector. Absent values are a contract violation.
  std::vector<double> embed_feature(std::size_t j,
                                    const data::FeatureValue& value) const;

  // Gated slots followed by the mask.
  std::vector<double> head_input(const MaskedState& state) const;
  std::vector<double> predict_proba(const MaskedState& state) const;
  // Throws PairingError on schema mismatch, ShapeError on width mismatch.
  void check_state(const MaskedState& state) const;

  std::uint64_t checksum() const;

  const std::optional<data::Standardization>& standardization() const {
    return standardization_;
  }
  void set_standardization(std::optional<data::Standardization> s) {
    standardization_ = std::move(s);
  }

  numerics::CheckpointEnvelope to_envelope() const;
  static GuesserModel from_envelope(const numerics::CheckpointEnvelope& env);
  void save(const std::filesystem::path& path) const;
  static GuesserModel load(const std::filesystem::path& path);

 private:
  data::FeatureSchema schema_;
  GuesserArchitecture arch_;
  numerics::DenseNet head_;
  std::vector<numerics::RecurrentCell> encoders_;
  std::vector<std::optional<std::size_t>> encoder_of_;
  std::optional<data::Standardization> standardization_;
};

// Embedding of every present feature (nullopt where absent).
struct EmbeddedRecord {
  std::vector<std::optional<std::vector<double>>> slots;
};

EmbeddedRecord embed_record(const GuesserModel& model,
                            const data::PatientRecord& record);

// State with every present feature revealed.
MaskedState full_state(const GuesserModel& model, const EmbeddedRecord& record,
                       double budget = 0.0);

// Per-feature L2 norm of the cross-entropy gradient w.r.t. the gated slot
// entries, evaluated at `state`. Hidden features get 0.
std::vector<double> slot_gradient_norms(const GuesserModel& model,
                                        const MaskedState& state,
                                        std::size_t label);

struct AdversarialMask {
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> hidden;  // masked features, strongest first
  bool clamped = false;             // k exceeded the maskable count
};

// Hides the k revealed non-free features with the largest slot-gradient
// norm (one gradient evaluation; ties go to the lower index).
AdversarialMask adversarial_mask(const GuesserModel& model,
                                 const MaskedState& state, std::size_t label,
                                 std::size_t k);

}  // namespace seqacq::guesser
