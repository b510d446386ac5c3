#include <csignal>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "seqacq/errors.hpp"
#include "seqacq/interface/pipeline.hpp"
#include "seqacq/interface/service.hpp"

namespace {

using seqacq::interface::load_config;
using seqacq::interface::default_config;
using seqacq::interface::with_overrides;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_path, "experiment config (JSON)");
  cmd->add_option("--set", opts.sets, "override, e.g. --set agent.episodes=500")
      ->take_all();
}

nlohmann::json resolve(const CommonOptions& opts) {
  auto config = opts.config_path.empty() ? default_config() : load_config(opts.config_path);
  return with_overrides(std::move(config), opts.sets);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cost-aware sequential feature acquisition"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  CommonOptions opts;
  std::function<nlohmann::json(const nlohmann::json&)> action;
  auto add = [&](const char* name, const char* help,
                 std::function<nlohmann::json(const nlohmann::json&)> fn) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, opts);
    cmd->callback([&action, fn] { action = fn; });
    return cmd;
  };
  add("gen-data", "generate a synthetic cohort", seqacq::interface::run_gen_data);
  add("train-guesser", "pretrain the masked-input classifier",
      seqacq::interface::run_train_guesser);
  add("train-agent", "train the acquisition agent", seqacq::interface::run_train_agent);
  add("evaluate", "evaluate a policy on a split", seqacq::interface::run_evaluate);
  add("sweep-budget", "train and evaluate across budgets",
      seqacq::interface::run_sweep_budget);
  add("oracle", "best-subset upper bound", seqacq::interface::run_oracle);

  std::string host;
  int port = -1;
  auto* serve = add("serve", "run the HTTP session service", nullptr);
  serve->add_option("--host", host, "bind address (default from config)");
  serve->add_option("--port", port, "port (default from config)");
  serve->callback([&] {
    action = [&](const nlohmann::json& config) -> nlohmann::json {
      const auto& s = config.at("service");
      const auto h = host.empty() ? s.value("host", std::string("127.0.0.1")) : host;
      const int p = port >= 0 ? port : s.value("port", 8080);
      auto api = std::make_shared<seqacq::interface::ServiceApi>(
          seqacq::interface::make_session_manager(config));
      seqacq::interface::HttpService service(api);
      std::cout << nlohmann::json{{"command", "serve"}, {"host", h}, {"port", p}}.dump()
                << std::endl;
      service.serve_forever(h, p);
      return {{"command", "serve"}, {"stopped", true}};
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  spdlog::set_level(spdlog::level::from_str(log_level));
  spdlog::set_default_logger(spdlog::stderr_color_mt("seqacq"));

  try {
    const auto summary = action(resolve(opts));
    std::cout << summary.dump(1) << std::endl;
    return 0;
  } catch (const seqacq::ConfigError& e) {
    std::cerr << nlohmann::json{{"error", "config"}, {"message", e.what()}}.dump() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "failed"}, {"message", e.what()}}.dump() << std::endl;
    return 1;
  }
}
