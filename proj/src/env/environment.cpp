#include "seqacq/env/environment.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "seqacq/errors.hpp"

namespace seqacq::env {

nlohmann::json env_config_to_json(const EnvConfig& c) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : c.groups) {
    groups.push_back({{"name", g.name}, {"features", g.features}});
  }
  return {{"budget", c.budget},
          {"max_steps", c.max_steps},
          {"cost_normalized", c.cost_normalized},
          {"gamma", c.gamma},
          {"groups", std::move(groups)}};
}

EnvConfig env_config_from_json(const nlohmann::json& doc,
                               const data::FeatureSchema& schema) {
  EnvConfig c;
  c.budget = doc.value("budget", c.budget);
  c.max_steps = doc.value("max_steps", c.max_steps);
  c.cost_normalized = doc.value("cost_normalized", c.cost_normalized);
  c.gamma = doc.value("gamma", c.gamma);
  if (doc.contains("groups")) {
    for (const auto& g : doc.at("groups")) {
      ActionGroup group;
      group.name = g.at("name").get<std::string>();
      for (const auto& f : g.at("features")) {
        if (f.is_string()) {
          auto idx = schema.index_of(f.get<std::string>());
          if (!idx) throw ConfigError("group '" + group.name + "' names unknown feature " + f.dump());
          group.features.push_back(*idx);
        } else {
          group.features.push_back(f.get<std::size_t>());
        }
      }
      c.groups.push_back(std::move(group));
    }
  }
  return c;
}

ActionSpace::ActionSpace(const data::FeatureSchema& schema, const EnvConfig& config) {
  by_feature_.resize(schema.size());
  if (config.groups.empty()) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      features_.push_back({j});
      costs_.push_back(schema.feature(j).cost);
      names_.push_back(schema.feature(j).name);
      if (!schema.feature(j).is_free()) by_feature_[j] = j;
    }
  } else {
    std::set<std::size_t> seen;
    std::set<std::string> names;
    for (const auto& g : config.groups) {
      if (g.features.empty()) throw ConfigError("action group '" + g.name + "' is empty");
      if (!names.insert(g.name).second) {
        throw ConfigError("duplicate action group name '" + g.name + "'");
      }
      double cost = 0.0;
      for (std::size_t j : g.features) {
        if (j >= schema.size()) throw ConfigError("action group '" + g.name + "' index out of range");
        if (schema.feature(j).is_free()) {
          throw ConfigError("action group '" + g.name + "' contains free feature '" +
                            schema.feature(j).name + "'");
        }
        if (!seen.insert(j).second) {
          throw ConfigError("feature '" + schema.feature(j).name +
                            "' belongs to more than one action group");
        }
        cost += schema.feature(j).cost;
        by_feature_[j] = features_.size();
      }
      features_.push_back(g.features);
      costs_.push_back(cost);
      names_.push_back(g.name);
    }
  }
  names_.push_back("GUESS");
}

std::optional<Action> ActionSpace::find(std::string_view name) const {
  for (std::size_t a = 0; a < names_.size(); ++a) {
    if (names_[a] == name) return a;
  }
  return std::nullopt;
}

std::optional<Action> ActionSpace::action_of_feature(std::size_t j) const {
  return by_feature_.at(j);
}

Environment::Environment(std::shared_ptr<const guesser::GuesserModel> guesser,
                         EnvConfig config)
    : guesser_(std::move(guesser)), config_(std::move(config)) {
  if (!guesser_) throw ConfigError("Environment needs a guesser");
  if (!(config_.budget > 0.0)) throw ConfigError("budget must be positive");
  if (config_.max_steps < 1) throw ConfigError("max_steps must be at least 1");
  if (!(config_.gamma > 0.0 && config_.gamma <= 1.0)) {
    throw ConfigError("gamma must lie in (0, 1]");
  }
  actions_ = ActionSpace(guesser_->schema(), config_);
}

void Environment::refresh(EpisodeState& state) const {
  state.masked.remaining_budget = state.budget - state.spent;
  state.probs = guesser_->predict_proba(state.masked);
}

EpisodeState Environment::reset(const data::PatientRecord& patient, AbsentMeans absent,
                                std::optional<double> budget_override) const {
  const auto& schema = guesser_->schema();
  if (absent == AbsentMeans::kBlocked) {
    try {
      data::validate_record(schema, patient);
    } catch (const IngestionError& e) {
      throw EnvironmentError(std::string("reset: ") + e.what());
    }
  } else if (patient.values.size() != schema.size()) {
    throw EnvironmentError("reset: record '" + patient.id + "' does not match the schema");
  }
  EpisodeState state;
  state.patient_id = patient.id;
  state.budget = budget_override.value_or(config_.budget);
  if (!(state.budget >= 0.0)) throw EnvironmentError("reset: budget must be non-negative");
  state.masked = guesser::empty_state(schema, state.budget);
  state.blocked.assign(schema.size(), 0);
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& value = patient.values[j];
    if (schema.feature(j).is_free()) {
      if (data::is_absent(value)) {
        throw EnvironmentError("reset: free feature '" + schema.feature(j).name +
                               "' missing for record '" + patient.id + "'");
      }
      guesser::reveal_slot(schema, state.masked, j, guesser_->embed_feature(j, value));
      state.revealed_order.push_back(j);
    } else if (absent == AbsentMeans::kBlocked && data::is_absent(value)) {
      state.blocked[j] = 1;
    }
  }
  refresh(state);
  return state;
}

bool Environment::is_valid(const EpisodeState& state, Action a) const {
  if (state.terminal || a >= actions_.size()) return false;
  if (actions_.is_guess(a)) return true;
  bool any_available = false;
  for (std::size_t j : actions_.features(a)) {
    if (state.masked.mask[j]) return false;
    if (!state.blocked[j]) any_available = true;
  }
  return any_available && state.spent + actions_.cost(a) <= state.budget;
}

std::vector<Action> Environment::valid_actions(const EpisodeState& state) const {
  if (state.terminal) throw ContractError("valid_actions: episode already terminated");
  std::vector<Action> out;
  for (Action a = 0; a < actions_.size(); ++a) {
    if (is_valid(state, a)) out.push_back(a);
  }
  return out;
}

std::vector<std::uint8_t> Environment::valid_mask(const EpisodeState& state) const {
  std::vector<std::uint8_t> mask(actions_.size(), 0);
  for (Action a = 0; a < actions_.size(); ++a) mask[a] = is_valid(state, a) ? 1 : 0;
  return mask;
}

bool Environment::can_reveal(const EpisodeState& state) const {
  for (Action a = 0; a < actions_.guess(); ++a) {
    if (is_valid(state, a)) return true;
  }
  return false;
}

void Environment::reveal(EpisodeState& state, Action a,
                         const data::PatientRecord& source) const {
  if (actions_.is_guess(a)) throw EnvironmentError("reveal: GUESS is not a reveal action");
  if (!is_valid(state, a)) {
    throw EnvironmentError("invalid action '" +
                           (a < actions_.size() ? actions_.name(a) : std::to_string(a)) +
                           "' for patient '" + state.patient_id + "'");
  }
  const auto& schema = guesser_->schema();
  for (std::size_t j : actions_.features(a)) {
    if (state.blocked[j]) continue;
    const auto& value = source.values.at(j);
    if (data::is_absent(value)) {
      throw EnvironmentError("reveal: no value for feature '" + schema.feature(j).name + "'");
    }
    guesser::reveal_slot(schema, state.masked, j, guesser_->embed_feature(j, value));
    state.revealed_order.push_back(j);
  }
  state.spent += actions_.cost(a);
  state.steps += 1;
  state.last_action = a;
  refresh(state);
}

void Environment::block(EpisodeState& state, Action a) const {
  if (state.terminal) throw EnvironmentError("block: episode already terminated");
  if (actions_.is_guess(a)) throw EnvironmentError("block: GUESS cannot be blocked");
  for (std::size_t j : actions_.features(a)) {
    if (state.masked.mask[j]) {
      throw EnvironmentError("block: feature '" + schema().feature(j).name +
                             "' already revealed");
    }
  }
  for (std::size_t j : actions_.features(a)) state.blocked[j] = 1;
}

void Environment::finish(EpisodeState& state) const {
  if (state.terminal) throw EnvironmentError("finish: episode already terminated");
  state.terminal = true;
  state.last_action = actions_.guess();
}

bool Environment::must_stop(const EpisodeState& state) const {
  return state.steps >= config_.max_steps || !can_reveal(state);
}

double compute_reward(RewardKind kind, const EpisodeState& prev,
                      const EpisodeState& next, Action a, std::size_t label,
                      const ActionSpace& actions, const EnvConfig& config) {
  if (label >= next.probs.size()) throw ContractError("compute_reward: label out of range");
  if (kind == RewardKind::kGuess) return next.probs[label];
  const double gain = next.probs[label] - prev.probs[label];
  if (!config.cost_normalized) return gain;
  const double cost = actions.cost(a);
  if (!(cost > 0.0)) {
    throw ContractError("compute_reward: cost-normalized reward for a zero-cost action");
  }
  return gain / cost;
}

StepResult Environment::step(EpisodeState& state, Action a,
                             const data::PatientRecord& patient) const {
  if (state.terminal) throw EnvironmentError("step: episode already terminated");
  if (!is_valid(state, a)) {
    throw EnvironmentError("invalid action '" +
                           (a < actions_.size() ? actions_.name(a) : std::to_string(a)) +
                           "' for patient '" + state.patient_id + "'");
  }
  StepResult result;
  if (actions_.is_guess(a)) {
    finish(state);
    result.info.guess_reward =
        compute_reward(RewardKind::kGuess, state, state, a, patient.label, actions_, config_);
    result.reward = result.info.guess_reward;
    result.done = true;
  } else {
    const EpisodeState prev = state;
    reveal(state, a, patient);
    result.info.cost = actions_.cost(a);
    result.info.gain_reward =
        compute_reward(RewardKind::kGain, prev, state, a, patient.label, actions_, config_);
    result.reward = result.info.gain_reward;
    if (must_stop(state)) {
      finish(state);
      result.info.forced_guess = true;
      result.info.guess_reward = compute_reward(RewardKind::kGuess, state, state,
                                                actions_.guess(), patient.label, actions_,
                                                config_);
      result.reward += result.info.guess_reward;
      result.done = true;
    }
  }
  result.info.prob_correct = state.probs.at(patient.label);
  return result;
}

nlohmann::json trace_row_to_json(const TraceRow& row) {
  return {{"patient_id", row.patient_id}, {"step", row.step},
          {"action", row.action},         {"cost", row.cost},
          {"reward", row.reward},         {"prob_correct", row.prob_correct}};
}

void write_trace(const std::filesystem::path& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace file " + path.string());
  for (const auto& r : rows) out << trace_row_to_json(r).dump() << '\n';
}

}  // namespace seqacq::env
