#include "seqacq/interface/pipeline.hpp"

#include <fmt/format.h>

#include "seqacq/errors.hpp"

namespace seqacq::interface {

namespace {

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

std::string hex(std::uint64_t v) { return fmt::format("{:016x}", v); }

nlohmann::json aggregates_json(const eval::EvalReport& report) {
  auto doc = eval::report_to_json(report);
  doc.erase("patients");
  return doc;
}

std::unique_ptr<agent::Policy> configured_policy(const nlohmann::json& config,
                                                 const data::FeatureSchema& schema) {
  const auto name = config.at("eval").value("policy", std::string("ddqn"));
  if (name == "ddqn") {
    auto ck = agent::load_agent(paths(config).agent, schema);
    return std::make_unique<agent::DqnPolicy>(std::move(ck.nets.online));
  }
  return agent::baseline_policy(agent::parse_baseline(name));
}

}  // namespace

data::Dataset load_configured_dataset(const nlohmann::json& config) {
  const auto p = paths(config);
  data::LoadOptions options;
  options.seed = derive_seed(config.at("seed").get<std::uint64_t>(), 6);
  return data::load_dataset(p.records, p.schema, options);
}

std::shared_ptr<const guesser::GuesserModel> load_configured_guesser(
    const nlohmann::json& config) {
  return std::make_shared<const guesser::GuesserModel>(
      guesser::GuesserModel::load(paths(config).guesser));
}

data::Dataset prepare_for(const guesser::GuesserModel& model, data::Dataset dataset) {
  if (dataset.schema.hash() != model.schema_hash()) {
    throw PairingError("dataset schema " + dataset.schema.hash() +
                       " does not match guesser schema " + model.schema_hash());
  }
  if (!model.standardization()) return dataset;
  for (auto& r : dataset.records) {
    r = data::apply_standardization(dataset.schema, *model.standardization(), std::move(r));
  }
  dataset.standardization = model.standardization();
  return dataset;
}

nlohmann::json run_gen_data(const nlohmann::json& config) {
  if (config.at("data").value("source", std::string("synthetic")) != "synthetic") {
    throw ConfigError("gen-data needs data.source=synthetic");
  }
  const auto spec = synthetic_spec(config);
  const auto dataset = data::generate_synthetic(spec);
  const auto p = paths(config);
  ensure_parent(p.records);
  ensure_parent(p.schema);
  data::save_dataset(dataset, p.records, p.schema);
  return {{"command", "gen-data"},
          {"records", dataset.records.size()},
          {"splits",
           {{"train", dataset.count(data::Split::kTrain)},
            {"val", dataset.count(data::Split::kVal)},
            {"test", dataset.count(data::Split::kTest)}}},
          {"num_features", dataset.schema.size()},
          {"total_paid_cost", dataset.schema.total_paid_cost()},
          {"schema_hash", dataset.schema.hash()},
          {"records_path", p.records.string()},
          {"schema_path", p.schema.string()}};
}

nlohmann::json run_train_guesser(const nlohmann::json& config) {
  const auto dataset = data::standardize(load_configured_dataset(config));
  const auto pc = pretrain_config(config);
  Rng rng(derive_seed(pc.seed, 7));
  guesser::GuesserModel model(dataset.schema, guesser_architecture(config), rng);
  auto result = guesser::pretrain(std::move(model), dataset, pc);
  const auto p = paths(config);
  ensure_parent(p.guesser);
  result.model.save(p.guesser);
  guesser::write_pretrain_log(p.pretrain_log, result.log);
  nlohmann::json summary{{"command", "train-guesser"},
                         {"epochs", result.log.size()},
                         {"checksum", hex(result.model.checksum())},
                         {"guesser_path", p.guesser.string()},
                         {"log_path", p.pretrain_log.string()}};
  if (!result.log.empty()) summary["final"] = guesser::log_entry_to_json(result.log.back());
  return summary;
}

nlohmann::json run_train_agent(const nlohmann::json& config) {
  const auto model = load_configured_guesser(config);
  const auto dataset = prepare_for(*model, load_configured_dataset(config));
  const auto ec = env_config(config, dataset.schema);
  const env::Environment environment(model, ec);
  const auto tc = train_config(config);
  const auto before = model->checksum();
  auto result = agent::train(environment, dataset, tc);
  const auto p = paths(config);
  ensure_parent(p.agent);
  agent::save_agent(p.agent, {result.nets, tc, ec, dataset.schema.hash()});
  agent::write_learning_curve(p.curve, result.curve);
  auto window_mean = [&](bool last) {
    const std::size_t n = result.curve.size();
    const std::size_t k = std::max<std::size_t>(1, n / 10);
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += result.curve[last ? n - 1 - i : i].episode_return;
    return s / static_cast<double>(k);
  };
  nlohmann::json summary{{"command", "train-agent"},
                         {"episodes", result.curve.size()},
                         {"learn_steps", result.learn_steps},
                         {"guesser_unchanged", model->checksum() == before},
                         {"agent_path", p.agent.string()},
                         {"curve_path", p.curve.string()}};
  if (!result.curve.empty()) {
    summary["mean_return_first_10pct"] = window_mean(false);
    summary["mean_return_last_10pct"] = window_mean(true);
  }
  return summary;
}

nlohmann::json run_evaluate(const nlohmann::json& config) {
  const auto model = load_configured_guesser(config);
  const auto dataset = prepare_for(*model, load_configured_dataset(config));
  const env::Environment environment(model, env_config(config, dataset.schema));
  const auto policy = configured_policy(config, dataset.schema);
  const auto report = eval::evaluate_policy(environment, *policy, dataset, eval_split(config),
                                            eval_config(config));
  const auto p = paths(config);
  ensure_parent(p.report);
  const auto format = config.at("eval").value("format", std::string("json"));
  nlohmann::json written = nlohmann::json::array();
  if (format == "json" || format == "both") {
    auto path = p.report;
    path += ".json";
    eval::write_text(path, eval::report_to_json(report).dump(1) + "\n");
    written.push_back(path.string());
  }
  if (format == "csv" || format == "both") {
    auto path = p.report;
    path += ".csv";
    eval::write_text(path, eval::report_to_csv(report));
    written.push_back(path.string());
  }
  if (written.empty()) throw ConfigError("eval.format must be json, csv or both");
  env::write_trace(p.trace, report.trace);
  auto summary = aggregates_json(report);
  summary["command"] = "evaluate";
  summary["written"] = written;
  summary["trace_path"] = p.trace.string();
  return summary;
}

nlohmann::json run_sweep_budget(const nlohmann::json& config) {
  const auto model = load_configured_guesser(config);
  const auto dataset = prepare_for(*model, load_configured_dataset(config));
  const auto base = env_config(config, dataset.schema);
  const auto budgets = config.at("sweep").at("budgets").get<std::vector<double>>();
  const auto name = config.at("eval").value("policy", std::string("ddqn"));
  eval::PolicyTrainer trainer;
  if (name == "ddqn") {
    trainer = eval::ddqn_trainer(dataset, train_config(config));
  } else {
    const auto kind = agent::parse_baseline(name);
    trainer = [kind](const env::Environment&) { return agent::baseline_policy(kind); };
  }
  const auto rows = eval::budget_sweep(model, base, trainer, budgets, dataset,
                                       eval_split(config), eval_config(config));
  const auto p = paths(config);
  ensure_parent(p.sweep);
  auto json_path = p.sweep;
  json_path += ".json";
  auto csv_path = p.sweep;
  csv_path += ".csv";
  eval::write_text(json_path, eval::sweep_to_json(rows).dump(1) + "\n");
  eval::write_text(csv_path, eval::sweep_to_csv(rows));
  return {{"command", "sweep-budget"},
          {"policy", name},
          {"rows", eval::sweep_to_json(rows)},
          {"written", {json_path.string(), csv_path.string()}}};
}

nlohmann::json run_oracle(const nlohmann::json& config) {
  const auto model = load_configured_guesser(config);
  const auto dataset = prepare_for(*model, load_configured_dataset(config));
  const env::Environment environment(model, env_config(config, dataset.schema));
  const auto result = eval::oracle_policy_value(environment, dataset, eval_split(config),
                                                std::nullopt, oracle_config(config));
  const auto p = paths(config);
  ensure_parent(p.oracle);
  eval::write_text(p.oracle, eval::oracle_to_json(result).dump(1) + "\n");
  return {{"command", "oracle"},
          {"budget", result.budget},
          {"value", result.value},
          {"patients", result.patients.size()},
          {"oracle_path", p.oracle.string()}};
}

}  // namespace seqacq::interface
