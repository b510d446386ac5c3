#include "seqacq/interface/service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "seqacq/errors.hpp"
#include "seqacq/interface/pipeline.hpp"

namespace seqacq::interface {

namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start < path.size()) {
    const auto slash = path.find('/', start);
    const auto end = slash == std::string::npos ? path.size() : slash;
    if (end > start) parts.push_back(path.substr(start, end - start));
    start = end + 1;
  }
  return parts;
}

nlohmann::json parse_body(const std::string& body) {
  if (body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ServiceError(ErrorCode::kValidation, "request body is not valid JSON", {e.what()});
  }
}

std::size_t parse_k(const std::map<std::string, std::string>& query) {
  const auto it = query.find("k");
  if (it == query.end()) return 3;
  try {
    std::size_t used = 0;
    const long long k = std::stoll(it->second, &used);
    if (used != it->second.size() || k < 1) throw std::invalid_argument("k");
    return static_cast<std::size_t>(k);
  } catch (const std::exception&) {
    throw ServiceError(ErrorCode::kValidation, "k must be a positive integer",
                       {"k: " + it->second});
  }
}

ApiResponse error_response(const ServiceError& e) {
  return {http_status(e.code()), e.to_json()};
}

}  // namespace

ApiResponse ServiceApi::handle(const std::string& method, const std::string& path,
                               const std::map<std::string, std::string>& query,
                               const std::string& body) const {
  const auto parts = split_path(path);
  try {
    if (parts.size() == 1 && parts[0] == "health" && method == "GET") {
      return {200,
              {{"status", "ok"},
               {"schema_hash", sessions_->environment().schema().hash()},
               {"sessions", sessions_->session_count()}}};
    }
    if (parts.size() == 1 && parts[0] == "schema" && method == "GET") {
      return {200, sessions_->schema_json()};
    }
    if (parts.size() == 1 && parts[0] == "sessions" && method == "POST") {
      return {201, sessions_->create_session(parse_body(body))};
    }
    if (parts.size() == 3 && parts[0] == "sessions") {
      const auto& id = parts[1];
      const auto& verb = parts[2];
      if (verb == "suggestion" && method == "GET") {
        return {200, sessions_->get_suggestion(id, parse_k(query))};
      }
      if (verb == "observe" && method == "POST") {
        return {200, sessions_->observe(id, parse_body(body))};
      }
      if (verb == "finalize" && method == "POST") return {200, sessions_->finalize(id)};
      if (verb == "log" && method == "GET") return {200, sessions_->export_log(id)};
    }
    return error_response(
        ServiceError(ErrorCode::kNotFound, "no route for " + method + " " + path));
  } catch (const ServiceError& e) {
    return error_response(e);
  } catch (const EnvironmentError& e) {
    return error_response(ServiceError(ErrorCode::kConflict, e.what()));
  } catch (const Error& e) {
    return error_response(ServiceError(ErrorCode::kValidation, e.what()));
  }
}

HttpService::HttpService(std::shared_ptr<ServiceApi> api)
    : api_(std::move(api)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

HttpService::~HttpService() { stop(); }

void HttpService::install_routes() {
  auto dispatch = [api = api_](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    const auto out = api->handle(req.method, req.path, query, req.body);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  server_->Get(R"(/.*)", dispatch);
  server_->Post(R"(/.*)", dispatch);
}

int HttpService::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void HttpService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void HttpService::serve_forever(const std::string& host, int port) {
  spdlog::info("serving on {}:{}", host, port);
  if (!server_->listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

std::shared_ptr<SessionManager> make_session_manager(const nlohmann::json& config) {
  const auto model = load_configured_guesser(config);
  const auto ck = agent::load_agent(paths(config).agent, model->schema());
  auto environment = std::make_shared<const env::Environment>(model, ck.env_config);
  std::optional<std::filesystem::path> log_dir;
  const auto& s = config.at("service");
  if (s.contains("log_dir") && !s.at("log_dir").is_null()) {
    log_dir = s.at("log_dir").get<std::string>();
  }
  return std::make_shared<SessionManager>(std::move(environment), ck.nets.online, log_dir);
}

}  // namespace seqacq::interface
