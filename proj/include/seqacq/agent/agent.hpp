#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqacq/agent/replay.hpp"
#include "seqacq/data/dataset.hpp"
#include "seqacq/env/environment.hpp"
#include "seqacq/numerics/dense_net.hpp"
#include "seqacq/numerics/optimizer.hpp"

namespace seqacq::agent {

using env::Action;

// Q-network input: gated slots, mask, remaining budget / episode budget.
std::vector<double> encode_state(const env::EpisodeState& state);
std::size_t encoding_width(const data::FeatureSchema& schema);

// Epsilon-greedy restricted to `valid`: with probability epsilon uniform
// over valid, otherwise the valid argmax of q (ties to the lower index).
Action select_action(std::span<const double> q, std::span<const Action> valid,
                     double epsilon, Rng& rng);

// Valid actions ordered by descending Q (ties to the lower index).
std::vector<Action> rank_actions(std::span<const double> q, std::span<const Action> valid);

// Double-DQN target: r if done, else r + gamma * q_target_next[a*] with a*
// the valid argmax of q_online_next.
double td_target(double reward, bool done, std::span<const double> q_online_next,
                 std::span<const double> q_target_next,
                 std::span<const std::uint8_t> next_valid, double gamma);

struct QNetPair {
  numerics::DenseNet online;
  numerics::DenseNet target;
  std::size_t sync_interval = 250;  // learn steps

  void sync() { target.set_params(online.params()); }
  double td_target(const Transition& t, double gamma) const;
};

QNetPair make_qnets(std::size_t input_width, std::size_t num_actions,
                    const std::vector<std::size_t>& hidden, std::size_t sync_interval,
                    Rng& rng);

// --- policies --------------------------------------------------------------------

// `patient` is only consulted by label-aware baselines (greedy lookahead).
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual Action choose(const env::Environment& environment, const env::EpisodeState& state,
                        const data::PatientRecord& patient, Rng& rng) const = 0;
};

class DqnPolicy : public Policy {
 public:
  explicit DqnPolicy(numerics::DenseNet online, double epsilon = 0.0)
      : online_(std::move(online)), epsilon_(epsilon) {}
  std::string name() const override { return "ddqn"; }
  Action choose(const env::Environment& environment, const env::EpisodeState& state,
                const data::PatientRecord& patient, Rng& rng) const override;
  std::vector<double> q_values(const env::EpisodeState& state) const;
  const numerics::DenseNet& network() const { return online_; }

 private:
  numerics::DenseNet online_;
  double epsilon_;
};

class RandomPolicy : public Policy {
 public:
  std::string name() const override { return "random"; }
  Action choose(const env::Environment& environment, const env::EpisodeState& state,
                const data::PatientRecord& patient, Rng& rng) const override;
};

// One-step lookahead on the label: reveals the affordable action with the
// highest gain per unit cost, guesses once the best gain is <= 0.
class GreedyMyopicPolicy : public Policy {
 public:
  std::string name() const override { return "greedy_myopic"; }
  Action choose(const env::Environment& environment, const env::EpisodeState& state,
                const data::PatientRecord& patient, Rng& rng) const override;
};

// Reveals valid actions in index order until none remain, then guesses.
class RevealAllPolicy : public Policy {
 public:
  std::string name() const override { return "reveal_all"; }
  Action choose(const env::Environment& environment, const env::EpisodeState& state,
                const data::PatientRecord& patient, Rng& rng) const override;
};

enum class BaselineKind { kRandom, kGreedyMyopic, kRevealAll };
std::unique_ptr<Policy> baseline_policy(BaselineKind kind);
BaselineKind parse_baseline(std::string_view name);

struct EpisodeOutcome {
  env::EpisodeState final_state;
  std::vector<double> rewards;
  double total_reward = 0.0;
  double initial_prob_correct = 0.0;
  std::vector<env::TraceRow> trace;
};

// Runs one episode to termination. Throws ContractError if the policy
// emits an invalid action.
EpisodeOutcome run_episode(const env::Environment& environment, const Policy& policy,
                           const data::PatientRecord& patient, Rng& rng);

// --- training ----------------------------------------------------------------------

struct TrainConfig {
  std::size_t episodes = 2000;
  std::size_t batch_size = 32;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.6;  // of episodes
  double gamma = 0.99;
  numerics::AdamConfig adam{};
  std::size_t target_sync = 250;  // learn steps
  std::vector<std::size_t> hidden{64, 64};
  ReplayConfig replay{};
  std::size_t learn_every = 1;  // env steps per learn step
  double huber_delta = 1.0;
  std::size_t eval_every = 0;  // episodes; 0 disables evaluation checkpoints
  std::uint64_t seed = 0;
};

double epsilon_at(const TrainConfig& config, std::size_t episode);

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& doc);

struct CurvePoint {
  std::size_t episode = 0;
  double episode_return = 0.0;
  double epsilon = 0.0;
  std::optional<double> eval_auroc;
};

struct TrainResult {
  QNetPair nets;
  std::vector<CurvePoint> curve;
  std::size_t learn_steps = 0;
  std::uint64_t last_sync_checksum = 0;
};

// Optional evaluation hook called every eval_every episodes.
using EvalHook = std::function<std::optional<double>(const DqnPolicy&)>;

// Trains on the dataset's train split against a frozen guesser.
TrainResult train(const env::Environment& environment, const data::Dataset& dataset,
                  const TrainConfig& config, const EvalHook& eval_hook = {});

void write_learning_curve(const std::filesystem::path& path,
                          const std::vector<CurvePoint>& curve);

// --- checkpoint ----------------------------------------------------------------------

struct AgentCheckpoint {
  QNetPair nets;
  TrainConfig train_config;
  env::EnvConfig env_config;
  std::string schema_hash;
};

void save_agent(const std::filesystem::path& path, const AgentCheckpoint& checkpoint);
AgentCheckpoint load_agent(const std::filesystem::path& path,
                           const data::FeatureSchema& schema);

}  // namespace seqacq::agent
