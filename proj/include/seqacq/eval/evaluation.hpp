#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqacq/agent/agent.hpp"
#include "seqacq/eval/metrics.hpp"

namespace seqacq::eval {

struct PatientResult {
  std::string id;
  std::size_t label = 0;
  std::vector<std::size_t> selected;  // sorted feature indices, free included
  double cost = 0.0;
  std::vector<double> probs;
  std::size_t steps = 0;

  bool operator==(const PatientResult&) const = default;
};

struct Aggregates {
  double accuracy = 0.0;
  std::optional<double> auroc;  // nullopt when only one class is present
  std::optional<double> auprc;
  double mean_cost = 0.0;
  double iou = 1.0;
  double mean_prob_correct = 0.0;

  bool operator==(const Aggregates&) const = default;
};

// Binary: score = probability of class 1. More classes: macro one-vs-rest
// over classes that have both positives and negatives.
Aggregates compute_aggregates(const std::vector<PatientResult>& patients,
                              std::size_t num_classes);

struct EvalConfig {
  BootstrapConfig bootstrap{};
  std::uint64_t seed = 0;  // policy randomness
};

struct EvalReport {
  std::string policy;
  double budget = 0.0;
  std::string split;
  std::size_t num_classes = 2;
  std::vector<PatientResult> patients;
  Aggregates aggregates;
  std::map<std::string, Interval> intervals;  // accuracy, auroc, auprc, mean_cost
  BootstrapConfig bootstrap;
  // Per-step rows of every episode; not part of the serialized report.
  std::vector<env::TraceRow> trace;
};

// One greedy episode per patient of the split.
EvalReport evaluate_policy(const env::Environment& environment, const agent::Policy& policy,
                           const data::Dataset& dataset, data::Split split,
                           const EvalConfig& config = {});

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& doc);
// Per-patient flat table.
std::string report_to_csv(const EvalReport& report);

// --- subset oracle ---------------------------------------------------------------------

struct OracleConfig {
  std::size_t max_paid_actions = 16;
  // Reported subset: the cheapest subset whose Pr(correct) is within this
  // of the maximum. The value is always the exact maximum.
  double tie_tolerance = 1e-3;
};

struct OraclePatient {
  std::string id;
  std::vector<std::size_t> subset;  // features, free included
  double cost = 0.0;
  double prob_correct = 0.0;
};

struct OracleResult {
  double budget = 0.0;
  std::vector<OraclePatient> patients;
  double value = 0.0;  // mean best Pr(correct)
};

// Enumerates every budget-feasible set of reveal actions per patient
// (absent features excluded) with free features always revealed.
OracleResult oracle_policy_value(const env::Environment& environment,
                                 const data::Dataset& dataset, data::Split split,
                                 std::optional<double> budget = std::nullopt,
                                 const OracleConfig& config = {});

nlohmann::json oracle_to_json(const OracleResult& result);

// --- budget sweep ----------------------------------------------------------------------

using PolicyTrainer =
    std::function<std::unique_ptr<agent::Policy>(const env::Environment& environment)>;

// Trains a DDQN agent on the dataset's train split with a fixed config.
PolicyTrainer ddqn_trainer(const data::Dataset& dataset, agent::TrainConfig config);

struct SweepRow {
  double budget = 0.0;
  double accuracy = 0.0;
  Interval accuracy_ci;
  std::optional<double> auroc;
  double mean_cost = 0.0;
  double iou = 1.0;
  double mean_prob_correct = 0.0;
};

// budgets must be sorted ascending.
std::vector<SweepRow> budget_sweep(std::shared_ptr<const guesser::GuesserModel> guesser,
                                   const env::EnvConfig& base, const PolicyTrainer& trainer,
                                   const std::vector<double>& budgets,
                                   const data::Dataset& dataset, data::Split split,
                                   const EvalConfig& config = {});

nlohmann::json sweep_to_json(const std::vector<SweepRow>& rows);
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace seqacq::eval
