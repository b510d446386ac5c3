#include "seqacq/interface/session.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>

#include <fmt/format.h>

#include "seqacq/errors.hpp"

namespace seqacq::interface {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kValidation:
      return "VALIDATION";
    case ErrorCode::kNotFound:
      return "NOT_FOUND";
    case ErrorCode::kConflict:
      return "CONFLICT";
    case ErrorCode::kBudget:
      return "BUDGET";
  }
  return "VALIDATION";
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kValidation:
      return 422;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kConflict:
      return 409;
    case ErrorCode::kBudget:
      return 422;
  }
  return 500;
}

nlohmann::json ServiceError::to_json() const {
  return {{"code", error_code_name(code_)}, {"message", what()}, {"details", details_}};
}

namespace {

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> revealed_names(const env::Environment& environment,
                                        const env::EpisodeState& state) {
  std::vector<std::string> out;
  for (std::size_t j : state.revealed_order) out.push_back(environment.schema().feature(j).name);
  return out;
}

}  // namespace

SessionManager::SessionManager(std::shared_ptr<const env::Environment> environment,
                               numerics::DenseNet q_network,
                               std::optional<std::filesystem::path> log_dir)
    : environment_(std::move(environment)),
      policy_(std::move(q_network)),
      log_dir_(std::move(log_dir)) {
  if (!environment_) throw ConfigError("SessionManager needs an environment");
  if (policy_.network().input_width() != agent::encoding_width(environment_->schema()) ||
      policy_.network().output_width() != environment_->actions().size()) {
    throw PairingError("agent network does not match the environment's schema/actions");
  }
  if (log_dir_) std::filesystem::create_directories(*log_dir_);
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    throw ServiceError(ErrorCode::kNotFound, "unknown session '" + id + "'");
  }
  return it->second;
}

std::size_t SessionManager::session_count() const {
  std::shared_lock lock(sessions_mutex_);
  return sessions_.size();
}

void SessionManager::record(Session& session, nlohmann::json event) const {
  event["seq"] = session.events.size();
  if (log_dir_) {
    std::ofstream out(*log_dir_ / (session.id + ".jsonl"), std::ios::app);
    if (!out) throw Error("cannot append to session log for '" + session.id + "'");
    out << event.dump() << '\n';
  }
  session.events.push_back(std::move(event));
}

nlohmann::json SessionManager::state_json(const Session& s) const {
  std::size_t valid = 0;
  if (!s.state.terminal) valid = environment_->valid_actions(s.state).size() - 1;
  return {{"session_id", s.id},
          {"probabilities", s.state.probs},
          {"remaining_budget", s.state.budget - s.state.spent},
          {"spent", s.state.spent},
          {"valid_action_count", valid},
          {"revealed", revealed_names(*environment_, s.state)},
          {"finalized", s.finalized}};
}

data::FeatureValue SessionManager::parse_value(std::size_t j, const nlohmann::json& raw) const {
  const auto& f = environment_->schema().feature(j);
  auto invalid = [&](const std::string& why) {
    return ServiceError(ErrorCode::kValidation, "invalid value for feature '" + f.name + "'",
                        {f.name + ": " + why});
  };
  auto numbers = [&]() {
    if (!raw.is_array() || raw.empty()) throw invalid("expected a non-empty array of numbers");
    std::vector<double> v;
    for (const auto& x : raw) {
      if (!x.is_number()) throw invalid("expected a non-empty array of numbers");
      v.push_back(x.get<double>());
    }
    return v;
  };
  data::FeatureValue value;
  switch (f.modality) {
    case data::Modality::kNumeric:
      if (!raw.is_number()) throw invalid("expected a number");
      value = raw.get<double>();
      break;
    case data::Modality::kTimeSeries:
      value = data::Series{numbers()};
      break;
    case data::Modality::kEmbedded: {
      auto v = numbers();
      if (v.size() != f.slot_width) {
        throw invalid(fmt::format("expected {} numbers, got {}", f.slot_width, v.size()));
      }
      value = data::Embedding{std::move(v)};
      break;
    }
  }
  const auto& stats = environment_->guesser().standardization();
  if (stats) value = data::apply_standardization(environment_->schema(), *stats, j, value);
  return value;
}

nlohmann::json SessionManager::create_session(const nlohmann::json& request) {
  const auto& schema = environment_->schema();
  if (!request.is_object()) {
    throw ServiceError(ErrorCode::kValidation, "request body must be an object");
  }
  const auto features = request.value("features", nlohmann::json::object());
  if (!features.is_object()) {
    throw ServiceError(ErrorCode::kValidation, "'features' must be an object",
                       {"features: expected an object of name -> value"});
  }
  std::optional<double> budget;
  if (request.contains("budget") && !request.at("budget").is_null()) {
    const auto& b = request.at("budget");
    if (!b.is_number() || b.get<double>() < 0.0) {
      throw ServiceError(ErrorCode::kValidation, "budget must be a non-negative number",
                         {"budget"});
    }
    budget = b.get<double>();
  }
  std::vector<std::string> problems;
  for (const auto& [name, value] : features.items()) {
    const auto j = schema.index_of(name);
    if (!j) {
      problems.push_back(name + ": unknown feature");
    } else if (!schema.feature(*j).is_free()) {
      problems.push_back(name + ": paid features are acquired through observe");
    }
  }
  for (std::size_t j : schema.free_features()) {
    if (!features.contains(schema.feature(j).name)) {
      problems.push_back(schema.feature(j).name + ": missing free feature");
    }
  }
  if (!problems.empty()) {
    throw ServiceError(ErrorCode::kValidation, "invalid session request", problems);
  }

  auto session = std::make_shared<Session>();
  session->observed.id = "session";
  session->observed.values.assign(schema.size(), data::Absent{});
  for (std::size_t j : schema.free_features()) {
    session->observed.values[j] = parse_value(j, features.at(schema.feature(j).name));
  }
  session->state =
      environment_->reset(session->observed, env::AbsentMeans::kUnobserved, budget);
  session->created = utc_now();
  {
    std::unique_lock lock(sessions_mutex_);
    session->id = fmt::format("s{:06d}", next_id_++);
    session->state.patient_id = session->id;
    session->observed.id = session->id;
    sessions_.emplace(session->id, session);
  }
  std::lock_guard guard(session->mutex);
  record(*session, {{"type", "create"},
                    {"budget", session->state.budget},
                    {"features", features}});
  return state_json(*session);
}

nlohmann::json SessionManager::get_suggestion(const std::string& id, std::size_t k) {
  const auto session = find(id);
  std::lock_guard guard(session->mutex);
  if (session->finalized) {
    throw ServiceError(ErrorCode::kConflict, "session '" + id + "' is finalized");
  }
  if (k == 0) throw ServiceError(ErrorCode::kValidation, "k must be at least 1", {"k"});
  const auto& actions = environment_->actions();
  const auto q = policy_.q_values(session->state);
  const auto valid = environment_->valid_actions(session->state);
  const auto ranked = agent::rank_actions(q, valid);
  nlohmann::json list = nlohmann::json::array();
  std::size_t rank = 0;
  for (env::Action a : ranked) {
    if (actions.is_guess(a)) continue;
    if (rank == k) break;
    std::vector<std::string> members;
    for (std::size_t j : actions.features(a)) {
      members.push_back(environment_->schema().feature(j).name);
    }
    list.push_back({{"rank", ++rank},
                    {"action", actions.name(a)},
                    {"features", members},
                    {"cost", actions.cost(a)},
                    {"q_value", q[a]}});
  }
  const bool stop = actions.is_guess(ranked.front());
  std::vector<std::string> shown;
  for (const auto& item : list) shown.push_back(item.at("action").get<std::string>());
  record(*session, {{"type", "suggestion"}, {"actions", shown}, {"stop_recommended", stop}});
  return {{"session_id", id},
          {"suggestions", list},
          {"stop_recommended", stop},
          {"stop_q_value", q[actions.guess()]},
          {"remaining_budget", session->state.budget - session->state.spent},
          {"probabilities", session->state.probs}};
}

nlohmann::json SessionManager::observe(const std::string& id, const nlohmann::json& request) {
  const auto session = find(id);
  std::lock_guard guard(session->mutex);
  if (session->finalized) {
    throw ServiceError(ErrorCode::kConflict, "session '" + id + "' is finalized");
  }
  if (!request.is_object()) {
    throw ServiceError(ErrorCode::kValidation, "request body must be an object");
  }
  const auto& schema = environment_->schema();
  const auto& actions = environment_->actions();
  std::optional<env::Action> action;
  std::string name;
  if (request.contains("action") && request.at("action").is_string()) {
    name = request.at("action").get<std::string>();
    action = actions.find(name);
  } else if (request.contains("feature") && request.at("feature").is_string()) {
    name = request.at("feature").get<std::string>();
    if (const auto j = schema.index_of(name)) action = actions.action_of_feature(*j);
  } else {
    throw ServiceError(ErrorCode::kValidation, "observe needs 'feature' or 'action'",
                       {"feature: missing"});
  }
  if (!action || actions.is_guess(*action)) {
    throw ServiceError(ErrorCode::kValidation, "'" + name + "' is not an acquirable test",
                       {name + ": unknown or free"});
  }
  const env::Action a = *action;
  auto& state = session->state;
  for (std::size_t j : actions.features(a)) {
    if (state.masked.mask[j]) {
      throw ServiceError(ErrorCode::kConflict,
                         "feature '" + schema.feature(j).name + "' is already revealed");
    }
  }
  bool all_blocked = true;
  for (std::size_t j : actions.features(a)) all_blocked = all_blocked && state.blocked[j];
  if (all_blocked) {
    throw ServiceError(ErrorCode::kConflict, "'" + actions.name(a) + "' was marked unavailable");
  }

  if (request.value("unavailable", false)) {
    environment_->block(state, a);
    record(*session, {{"type", "unavailable"}, {"action", actions.name(a)}});
    auto out = state_json(*session);
    out["cost_charged"] = 0.0;
    return out;
  }

  const double remaining = state.budget - state.spent;
  if (state.spent + actions.cost(a) > state.budget) {
    throw ServiceError(ErrorCode::kBudget,
                       fmt::format("'{}' costs {} but only {} remains", actions.name(a),
                                   actions.cost(a), remaining),
                       {fmt::format("remaining_budget: {}", remaining)});
  }
  nlohmann::json raw_values = nlohmann::json::object();
  if (actions.features(a).size() == 1 && request.contains("value")) {
    raw_values[schema.feature(actions.features(a).front()).name] = request.at("value");
  } else if (request.contains("values") && request.at("values").is_object()) {
    raw_values = request.at("values");
  } else {
    throw ServiceError(ErrorCode::kValidation, "observe needs 'value', 'values' or 'unavailable'",
                       {"value: missing"});
  }
  data::PatientRecord update = session->observed;
  std::vector<std::string> problems;
  for (std::size_t j : actions.features(a)) {
    if (state.blocked[j]) continue;
    const auto& fname = schema.feature(j).name;
    if (!raw_values.contains(fname)) {
      problems.push_back(fname + ": missing value");
      continue;
    }
    update.values[j] = parse_value(j, raw_values.at(fname));
  }
  for (const auto& [fname, v] : raw_values.items()) {
    const auto j = schema.index_of(fname);
    const auto& members = actions.features(a);
    if (!j || std::find(members.begin(), members.end(), *j) == members.end()) {
      problems.push_back(fname + ": not part of '" + actions.name(a) + "'");
    }
  }
  if (!problems.empty()) {
    throw ServiceError(ErrorCode::kValidation, "invalid observation", problems);
  }
  environment_->reveal(state, a, update);
  session->observed = std::move(update);
  record(*session, {{"type", "observe"}, {"action", actions.name(a)}, {"values", raw_values}});
  auto out = state_json(*session);
  out["cost_charged"] = actions.cost(a);
  return out;
}

nlohmann::json SessionManager::finalize(const std::string& id) {
  const auto session = find(id);
  std::lock_guard guard(session->mutex);
  if (session->finalized) {
    throw ServiceError(ErrorCode::kConflict, "session '" + id + "' is already finalized");
  }
  environment_->finish(session->state);
  session->finalized = true;
  const auto& probs = session->state.probs;
  const auto predicted =
      static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  record(*session, {{"type", "finalize"}, {"probabilities", probs}});
  return {{"session_id", id},
          {"probabilities", probs},
          {"predicted_class", predicted},
          {"total_cost", session->state.spent},
          {"revealed", revealed_names(*environment_, session->state)}};
}

nlohmann::json SessionManager::export_log(const std::string& id) const {
  const auto session = find(id);
  std::lock_guard guard(session->mutex);
  return {{"session_id", session->id},
          {"schema_hash", environment_->schema().hash()},
          {"created", session->created},
          {"budget", session->state.budget},
          {"finalized", session->finalized},
          {"probabilities", session->state.probs},
          {"events", session->events}};
}

nlohmann::json SessionManager::schema_json() const {
  const auto& actions = environment_->actions();
  nlohmann::json acts = nlohmann::json::array();
  for (env::Action a = 0; a < actions.guess(); ++a) {
    std::vector<std::string> members;
    for (std::size_t j : actions.features(a)) {
      members.push_back(environment_->schema().feature(j).name);
    }
    acts.push_back({{"action", actions.name(a)}, {"features", members}, {"cost", actions.cost(a)}});
  }
  return {{"schema", data::schema_to_json(environment_->schema())},
          {"schema_hash", environment_->schema().hash()},
          {"default_budget", environment_->config().budget},
          {"actions", acts}};
}

}  // namespace seqacq::interface
