#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqacq/agent/agent.hpp"
#include "seqacq/errors.hpp"

namespace seqacq::interface {

// Stable error codes surfaced by the service.
enum class ErrorCode { kValidation, kNotFound, kConflict, kBudget };

std::string_view error_code_name(ErrorCode code);
int http_status(ErrorCode code);

class ServiceError : public Error {
 public:
  ServiceError(ErrorCode code, std::string message, std::vector<std::string> details = {})
      : Error(message), code_(code), details_(std::move(details)) {}
  ErrorCode code() const { return code_; }
  const std::vector<std::string>& details() const { return details_; }
  nlohmann::json to_json() const;

 private:
  ErrorCode code_;
  std::vector<std::string> details_;
};

// Interactive consultations. Sessions hold no label and never compute a
// reward: only the label-free reveal/block/finish transitions are used.
class SessionManager {
 public:
  SessionManager(std::shared_ptr<const env::Environment> environment,
                 numerics::DenseNet q_network,
                 std::optional<std::filesystem::path> log_dir = std::nullopt);

  // {"features": {free feature name: value}, "budget": optional number}
  nlohmann::json create_session(const nlohmann::json& request);
  // Logs the suggestion shown; the episode state is not touched.
  nlohmann::json get_suggestion(const std::string& id, std::size_t k);
  // {"feature"|"action": name, "value": v | "values": {name: v} | "unavailable": true}
  nlohmann::json observe(const std::string& id, const nlohmann::json& request);
  nlohmann::json finalize(const std::string& id);
  nlohmann::json export_log(const std::string& id) const;

  nlohmann::json schema_json() const;
  std::size_t session_count() const;
  const env::Environment& environment() const { return *environment_; }

 private:
  struct Session {
    std::string id;
    std::string created;
    env::EpisodeState state;
    data::PatientRecord observed;  // standardized values seen so far
    nlohmann::json events = nlohmann::json::array();
    bool finalized = false;
    mutable std::mutex mutex;
  };

  std::shared_ptr<Session> find(const std::string& id) const;
  void record(Session& session, nlohmann::json event) const;
  nlohmann::json state_json(const Session& session) const;
  data::FeatureValue parse_value(std::size_t feature, const nlohmann::json& raw) const;

  std::shared_ptr<const env::Environment> environment_;
  agent::DqnPolicy policy_;
  std::optional<std::filesystem::path> log_dir_;
  mutable std::shared_mutex sessions_mutex_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

}  // namespace seqacq::interface
