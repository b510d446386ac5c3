#pragma once

#include <map>
#include <memory>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "seqacq/interface/session.hpp"

namespace httplib {
class Server;
}

namespace seqacq::interface {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// Routes requests onto a SessionManager; transport-independent so it can
// be exercised without sockets.
//   POST /sessions
//   GET  /sessions/{id}/suggestion?k=
//   POST /sessions/{id}/observe
//   POST /sessions/{id}/finalize
//   GET  /sessions/{id}/log
//   GET  /schema
//   GET  /health
class ServiceApi {
 public:
  explicit ServiceApi(std::shared_ptr<SessionManager> sessions)
      : sessions_(std::move(sessions)) {}

  ApiResponse handle(const std::string& method, const std::string& path,
                     const std::map<std::string, std::string>& query,
                     const std::string& body) const;

  SessionManager& sessions() const { return *sessions_; }

 private:
  std::shared_ptr<SessionManager> sessions_;
};

// HTTP front end. start() binds (port 0 picks a free port) and serves on a
// background thread; stop() shuts down and joins.
class HttpService {
 public:
  explicit HttpService(std::shared_ptr<ServiceApi> api);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  int start(const std::string& host, int port);
  void stop();
  // Blocks until the server stops.
  void serve_forever(const std::string& host, int port);

 private:
  void install_routes();

  std::shared_ptr<ServiceApi> api_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

// Builds the session manager from the configured guesser and agent
// checkpoints.
std::shared_ptr<SessionManager> make_session_manager(const nlohmann::json& config);

}  // namespace seqacq::interface
