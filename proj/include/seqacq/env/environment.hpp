#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqacq/data/dataset.hpp"
#include "seqacq/guesser/guesser.hpp"

namespace seqacq::env {

using Action = std::size_t;

// A test that reveals several features at once.
struct ActionGroup {
  std::string name;
  std::vector<std::size_t> features;
};

struct EnvConfig {
  double budget = 10.0;
  std::size_t max_steps = 64;
  bool cost_normalized = false;
  double gamma = 0.99;
  // Empty: one action per feature (free features are never valid).
  std::vector<ActionGroup> groups;
};

nlohmann::json env_config_to_json(const EnvConfig& config);
EnvConfig env_config_from_json(const nlohmann::json& doc,
                               const data::FeatureSchema& schema);

// Maps action indices to feature sets. The last action is GUESS.
class ActionSpace {
 public:
  ActionSpace() = default;
  ActionSpace(const data::FeatureSchema& schema, const EnvConfig& config);

  std::size_t size() const { return features_.size() + 1; }
  Action guess() const { return features_.size(); }
  bool is_guess(Action a) const { return a == guess(); }
  const std::vector<std::size_t>& features(Action a) const { return features_.at(a); }
  double cost(Action a) const { return a == guess() ? 0.0 : costs_.at(a); }
  const std::string& name(Action a) const { return names_.at(a); }
  std::optional<Action> find(std::string_view name) const;
  // Action that acquires feature j, if any.
  std::optional<Action> action_of_feature(std::size_t j) const;

 private:
  std::vector<std::vector<std::size_t>> features_;
  std::vector<double> costs_;
  std::vector<std::string> names_;
  std::vector<std::optional<Action>> by_feature_;
};

struct EpisodeState {
  std::string patient_id;
  guesser::MaskedState masked;
  // Features that can never be revealed in this episode (absent or declared
  // unavailable).
  std::vector<std::uint8_t> blocked;
  double budget = 0.0;
  double spent = 0.0;
  std::size_t steps = 0;
  bool terminal = false;
  std::optional<Action> last_action;
  std::vector<std::size_t> revealed_order;  // features, in reveal order
  std::vector<double> probs;                // guesser output at this state

  bool operator==(const EpisodeState&) const = default;
};

enum class RewardKind { kGain, kGuess };

struct StepInfo {
  double gain_reward = 0.0;
  double guess_reward = 0.0;
  double cost = 0.0;
  bool forced_guess = false;
  double prob_correct = 0.0;
};

struct StepResult {
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

// Absent values either block their features for the episode (training and
// evaluation) or simply mean "not observed yet" (interactive sessions).
enum class AbsentMeans { kBlocked, kUnobserved };

// The acquisition MDP over one patient, with a frozen guesser as reward
// provider. All methods are const; episode state is a value owned by the
// caller, so one Environment serves concurrent episodes.
class Environment {
 public:
  Environment(std::shared_ptr<const guesser::GuesserModel> guesser, EnvConfig config);

  const EnvConfig& config() const { return config_; }
  const ActionSpace& actions() const { return actions_; }
  const data::FeatureSchema& schema() const { return guesser_->schema(); }
  const guesser::GuesserModel& guesser() const { return *guesser_; }
  std::shared_ptr<const guesser::GuesserModel> guesser_ptr() const { return guesser_; }

  // Free features revealed at zero cost; all others hidden.
  EpisodeState reset(const data::PatientRecord& patient,
                     AbsentMeans absent = AbsentMeans::kBlocked,
                     std::optional<double> budget_override = std::nullopt) const;

  bool is_valid(const EpisodeState& state, Action a) const;
  std::vector<Action> valid_actions(const EpisodeState& state) const;
  std::vector<std::uint8_t> valid_mask(const EpisodeState& state) const;
  // True when some reveal action is still valid.
  bool can_reveal(const EpisodeState& state) const;

  // --- label-free transitions -------------------------------------------------
  // Reveals the action's present features using values from `source`,
  // deducts the action cost and refreshes the guesser output.
  void reveal(EpisodeState& state, Action a, const data::PatientRecord& source) const;
  // Marks the action's features permanently unavailable (no cost).
  void block(EpisodeState& state, Action a) const;
  // Terminates; the masked state is unchanged.
  void finish(EpisodeState& state) const;
  // Step limit reached or nothing left to reveal.
  bool must_stop(const EpisodeState& state) const;

  // --- training/evaluation step (label required) --------------------------------
  // Reveal actions yield the gain reward; GUESS yields the guess reward and
  // terminates. When a reveal exhausts the step limit or the affordable set,
  // the guess is executed automatically and its reward added.
  StepResult step(EpisodeState& state, Action a, const data::PatientRecord& patient) const;

 private:
  void refresh(EpisodeState& state) const;

  std::shared_ptr<const guesser::GuesserModel> guesser_;
  EnvConfig config_;
  ActionSpace actions_;
};

double compute_reward(RewardKind kind, const EpisodeState& prev,
                      const EpisodeState& next, Action a, std::size_t label,
                      const ActionSpace& actions, const EnvConfig& config);

// --- traces --------------------------------------------------------------------

struct TraceRow {
  std::string patient_id;
  std::size_t step = 0;
  std::string action;
  double cost = 0.0;
  double reward = 0.0;
  double prob_correct = 0.0;
};

nlohmann::json trace_row_to_json(const TraceRow& row);
void write_trace(const std::filesystem::path& path, const std::vector<TraceRow>& rows);

}  // namespace seqacq::env
