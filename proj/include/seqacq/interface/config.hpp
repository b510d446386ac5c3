#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqacq/agent/agent.hpp"
#include "seqacq/data/synthetic.hpp"
#include "seqacq/eval/evaluation.hpp"
#include "seqacq/guesser/pretrain.hpp"

namespace seqacq::interface {

// One structured document drives every command:
//   seed, paths{...}, data{source, records, schema}, synthetic{...},
//   guesser{hidden, pretrain{...}}, env{...}, agent{...},
//   eval{policy, split, format, bootstrap{...}}, sweep{budgets},
//   oracle{max_paid_actions, tie_tolerance}, service{host, port, log_dir}.
nlohmann::json default_config();

// Reads a config file and merges it over the defaults.
nlohmann::json load_config(const std::filesystem::path& path);

// "a.b.c=value"; value is parsed as JSON when possible, else kept as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);
nlohmann::json with_overrides(nlohmann::json config, const std::vector<std::string>& sets);

struct Paths {
  std::filesystem::path records;
  std::filesystem::path schema;
  std::filesystem::path guesser;
  std::filesystem::path pretrain_log;
  std::filesystem::path agent;
  std::filesystem::path curve;
  std::filesystem::path report;
  std::filesystem::path sweep;
  std::filesystem::path oracle;
  std::filesystem::path trace;
};

Paths paths(const nlohmann::json& config);

data::SyntheticSpec synthetic_spec(const nlohmann::json& config);
guesser::GuesserArchitecture guesser_architecture(const nlohmann::json& config);
guesser::PretrainConfig pretrain_config(const nlohmann::json& config);
env::EnvConfig env_config(const nlohmann::json& config, const data::FeatureSchema& schema);
agent::TrainConfig train_config(const nlohmann::json& config);
eval::EvalConfig eval_config(const nlohmann::json& config);
eval::OracleConfig oracle_config(const nlohmann::json& config);
data::Split eval_split(const nlohmann::json& config);

}  // namespace seqacq::interface
