#include "seqacq/interface/config.hpp"

#include <fstream>

#include "seqacq/errors.hpp"

namespace seqacq::interface {

namespace {

std::uint64_t section_seed(const nlohmann::json& config, const char* section,
                           std::uint64_t stream) {
  const auto& s = config.at(section);
  if (s.contains("seed") && !s.at("seed").is_null()) return s.at("seed").get<std::uint64_t>();
  return derive_seed(config.at("seed").get<std::uint64_t>(), stream);
}

std::filesystem::path path_of(const nlohmann::json& p, const char* key) {
  const std::filesystem::path dir = p.at("out_dir").get<std::string>();
  const std::filesystem::path file = p.at(key).get<std::string>();
  return file.is_absolute() ? file : dir / file;
}

}  // namespace

nlohmann::json default_config() {
  return nlohmann::json::parse(R"({
  "seed": 0,
  "paths": {
    "out_dir": "out",
    "records": "records.jsonl",
    "schema": "schema.json",
    "guesser": "guesser.ckpt.json",
    "pretrain_log": "pretrain_log.jsonl",
    "agent": "agent.ckpt.json",
    "curve": "learning_curve.jsonl",
    "report": "report",
    "sweep": "sweep",
    "oracle": "oracle.json",
    "trace": "trace.jsonl"
  },
  "data": {"source": "synthetic", "records": null, "schema": null},
  "synthetic": {
    "num_features": 8,
    "informative": [0, 1, 2, 3, 4],
    "weights": [32.0, 28.0, 24.0, 20.0, 16.0],
    "cost_rule": "explicit",
    "costs": [1, 2, 3, 6, 1, 7, 3, 2],
    "noise": 0.1,
    "num_samples": 5000
  },
  "guesser": {"hidden": [64, 64], "pretrain": {"epochs": 100}},
  "env": {"budget": 15.0, "max_steps": 64, "cost_normalized": false, "gamma": 0.99},
  "agent": {"episodes": 10000},
  "eval": {"policy": "ddqn", "split": "test", "format": "json",
           "bootstrap": {"replicates": 1000, "level": 0.95}},
  "sweep": {"budgets": [2, 5, 10, 15, 20, 30, 40]},
  "oracle": {"max_paid_actions": 16, "tie_tolerance": 0.001},
  "service": {"host": "127.0.0.1", "port": 8080, "log_dir": null}
})");
}

nlohmann::json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config " + path.string() + " must be an object");
  auto config = default_config();
  config.merge_patch(doc);
  return config;
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key.path=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  std::string pointer;
  std::size_t start = 0;
  while (start <= key.size()) {
    const auto dot = key.find('.', start);
    const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
    pointer += "/" + part;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  config[nlohmann::json::json_pointer(pointer)] = std::move(value);
}

nlohmann::json with_overrides(nlohmann::json config, const std::vector<std::string>& sets) {
  for (const auto& s : sets) apply_override(config, s);
  return config;
}

Paths paths(const nlohmann::json& config) {
  const auto& p = config.at("paths");
  Paths out;
  out.records = path_of(p, "records");
  out.schema = path_of(p, "schema");
  out.guesser = path_of(p, "guesser");
  out.pretrain_log = path_of(p, "pretrain_log");
  out.agent = path_of(p, "agent");
  out.curve = path_of(p, "curve");
  out.report = path_of(p, "report");
  out.sweep = path_of(p, "sweep");
  out.oracle = path_of(p, "oracle");
  out.trace = path_of(p, "trace");
  const auto& d = config.at("data");
  if (d.value("source", std::string("synthetic")) == "files") {
    if (d.at("records").is_null() || d.at("schema").is_null()) {
      throw ConfigError("data.source=files needs data.records and data.schema");
    }
    out.records = d.at("records").get<std::string>();
    out.schema = d.at("schema").get<std::string>();
  }
  return out;
}

data::SyntheticSpec synthetic_spec(const nlohmann::json& config) {
  auto doc = config.at("synthetic");
  if (!doc.contains("seed")) doc["seed"] = section_seed(config, "synthetic", 1);
  return data::synthetic_spec_from_json(doc);
}

guesser::GuesserArchitecture guesser_architecture(const nlohmann::json& config) {
  guesser::GuesserArchitecture arch;
  arch.hidden = config.at("guesser").value("hidden", arch.hidden);
  return arch;
}

guesser::PretrainConfig pretrain_config(const nlohmann::json& config) {
  const auto& g = config.at("guesser");
  auto doc = g.value("pretrain", nlohmann::json::object());
  if (!doc.contains("seed")) doc["seed"] = section_seed(config, "guesser", 2);
  return guesser::pretrain_config_from_json(doc);
}

env::EnvConfig env_config(const nlohmann::json& config, const data::FeatureSchema& schema) {
  return env::env_config_from_json(config.at("env"), schema);
}

agent::TrainConfig train_config(const nlohmann::json& config) {
  auto doc = config.at("agent");
  if (!doc.contains("seed")) doc["seed"] = section_seed(config, "agent", 3);
  auto tc = agent::train_config_from_json(doc);
  tc.gamma = config.at("env").value("gamma", tc.gamma);
  return tc;
}

eval::EvalConfig eval_config(const nlohmann::json& config) {
  const auto& e = config.at("eval");
  eval::EvalConfig ec;
  ec.seed = section_seed(config, "eval", 4);
  const auto b = e.value("bootstrap", nlohmann::json::object());
  ec.bootstrap.replicates = b.value("replicates", ec.bootstrap.replicates);
  ec.bootstrap.level = b.value("level", ec.bootstrap.level);
  ec.bootstrap.seed = b.contains("seed") ? b.at("seed").get<std::uint64_t>()
                                         : derive_seed(config.at("seed").get<std::uint64_t>(), 5);
  return ec;
}

eval::OracleConfig oracle_config(const nlohmann::json& config) {
  const auto& o = config.at("oracle");
  eval::OracleConfig oc;
  oc.max_paid_actions = o.value("max_paid_actions", oc.max_paid_actions);
  oc.tie_tolerance = o.value("tie_tolerance", oc.tie_tolerance);
  return oc;
}

data::Split eval_split(const nlohmann::json& config) {
  const auto name = config.at("eval").value("split", std::string("test"));
  if (name == "train") return data::Split::kTrain;
  if (name == "val") return data::Split::kVal;
  if (name == "test") return data::Split::kTest;
  throw ConfigError("eval.split must be train, val or test, not '" + name + "'");
}

}  // namespace seqacq::interface
