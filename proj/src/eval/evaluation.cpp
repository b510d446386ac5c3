#include "seqacq/eval/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "seqacq/errors.hpp"

namespace seqacq::eval {

namespace {

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::optional<double> one_vs_rest(const std::vector<PatientResult>& patients,
                                  std::size_t num_classes, bool precision_recall) {
  auto metric = [&](std::size_t c) -> std::optional<double> {
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(patients.size());
    labels.reserve(patients.size());
    for (const auto& p : patients) {
      scores.push_back(p.probs.at(c));
      labels.push_back(p.label == c ? 1 : 0);
    }
    try {
      return precision_recall ? auprc(scores, labels) : auroc(scores, labels);
    } catch (const MetricError&) {
      return std::nullopt;
    }
  };
  if (num_classes == 2) {
    // AUPRC needs positives only; AUROC needs both classes.
    return metric(1);
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (const auto m = metric(c)) {
      sum += *m;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

std::vector<std::size_t> revealed_features(const env::EpisodeState& state) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < state.masked.mask.size(); ++j) {
    if (state.masked.mask[j]) out.push_back(j);
  }
  return out;
}

double nan_if_null(const nlohmann::json& v) {
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  return doc.at(key).get<double>();
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  return fmt::format("{:.17g}", v);
}

}  // namespace

Aggregates compute_aggregates(const std::vector<PatientResult>& patients,
                              std::size_t num_classes) {
  if (patients.empty()) throw MetricError("no patients to aggregate");
  Aggregates a;
  double correct = 0.0;
  double cost = 0.0;
  double prob = 0.0;
  std::vector<std::vector<std::size_t>> sets;
  sets.reserve(patients.size());
  for (const auto& p : patients) {
    if (argmax(p.probs) == p.label) correct += 1.0;
    cost += p.cost;
    prob += p.probs.at(p.label);
    sets.push_back(p.selected);
  }
  const auto n = static_cast<double>(patients.size());
  a.accuracy = correct / n;
  a.mean_cost = cost / n;
  a.mean_prob_correct = prob / n;
  a.iou = iou(sets);
  a.auroc = one_vs_rest(patients, num_classes, false);
  a.auprc = one_vs_rest(patients, num_classes, true);
  return a;
}

EvalReport evaluate_policy(const env::Environment& environment, const agent::Policy& policy,
                           const data::Dataset& dataset, data::Split split,
                           const EvalConfig& config) {
  EvalReport report;
  report.policy = policy.name();
  report.budget = environment.config().budget;
  report.split = data::split_name(split);
  report.num_classes = environment.schema().num_classes();
  report.bootstrap = config.bootstrap;
  const auto ids = dataset.indices(split);
  if (ids.empty()) throw MetricError("evaluate_policy: split '" + report.split + "' is empty");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& patient = dataset.records[ids[i]];
    Rng rng(derive_seed(config.seed, i));
    agent::EpisodeOutcome outcome;
    try {
      outcome = agent::run_episode(environment, policy, patient, rng);
    } catch (const EnvironmentError& e) {
      throw EnvironmentError("patient '" + patient.id + "': " + e.what());
    }
    PatientResult r;
    r.id = patient.id;
    r.label = patient.label;
    r.selected = revealed_features(outcome.final_state);
    r.cost = outcome.final_state.spent;
    r.probs = outcome.final_state.probs;
    r.steps = outcome.final_state.steps;
    report.patients.push_back(std::move(r));
    report.trace.insert(report.trace.end(), outcome.trace.begin(), outcome.trace.end());
  }
  report.aggregates = compute_aggregates(report.patients, report.num_classes);

  const auto& patients = report.patients;
  const std::size_t classes = report.num_classes;
  auto resampled = [&](std::span<const std::size_t> idx) {
    std::vector<PatientResult> out;
    out.reserve(idx.size());
    for (auto k : idx) out.push_back(patients[k]);
    return out;
  };
  auto stat = [&](auto pick) {
    return [&, pick](std::span<const std::size_t> idx) {
      return pick(resampled(idx));
    };
  };
  report.intervals["accuracy"] = bootstrap_ci(
      patients.size(), stat([&](const std::vector<PatientResult>& ps) {
        double c = 0.0;
        for (const auto& p : ps) c += argmax(p.probs) == p.label ? 1.0 : 0.0;
        return c / static_cast<double>(ps.size());
      }),
      config.bootstrap);
  report.intervals["mean_cost"] = bootstrap_ci(
      patients.size(), stat([&](const std::vector<PatientResult>& ps) {
        double c = 0.0;
        for (const auto& p : ps) c += p.cost;
        return c / static_cast<double>(ps.size());
      }),
      config.bootstrap);
  report.intervals["auroc"] = bootstrap_ci(
      patients.size(), stat([&](const std::vector<PatientResult>& ps) {
        const auto v = one_vs_rest(ps, classes, false);
        if (!v) throw MetricError("single-class resample");
        return *v;
      }),
      config.bootstrap);
  report.intervals["auprc"] = bootstrap_ci(
      patients.size(), stat([&](const std::vector<PatientResult>& ps) {
        const auto v = one_vs_rest(ps, classes, true);
        if (!v) throw MetricError("no positives in resample");
        return *v;
      }),
      config.bootstrap);
  return report;
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json patients = nlohmann::json::array();
  for (const auto& p : r.patients) {
    patients.push_back({{"id", p.id},
                        {"label", p.label},
                        {"selected", p.selected},
                        {"cost", p.cost},
                        {"probs", p.probs},
                        {"steps", p.steps}});
  }
  nlohmann::json intervals = nlohmann::json::object();
  for (const auto& [name, ci] : r.intervals) {
    intervals[name] = {{"lower", std::isnan(ci.lower) ? nlohmann::json(nullptr) : nlohmann::json(ci.lower)},
                       {"upper", std::isnan(ci.upper) ? nlohmann::json(nullptr) : nlohmann::json(ci.upper)}};
  }
  const auto& a = r.aggregates;
  return {{"policy", r.policy},
          {"budget", r.budget},
          {"split", r.split},
          {"num_classes", r.num_classes},
          {"aggregates",
           {{"accuracy", a.accuracy},
            {"auroc", optional_json(a.auroc)},
            {"auprc", optional_json(a.auprc)},
            {"mean_cost", a.mean_cost},
            {"iou", a.iou},
            {"mean_prob_correct", a.mean_prob_correct}}},
          {"intervals", intervals},
          {"bootstrap",
           {{"replicates", r.bootstrap.replicates},
            {"level", r.bootstrap.level},
            {"seed", r.bootstrap.seed}}},
          {"patients", patients}};
}

EvalReport report_from_json(const nlohmann::json& doc) {
  EvalReport r;
  r.policy = doc.at("policy").get<std::string>();
  r.budget = doc.at("budget").get<double>();
  r.split = doc.at("split").get<std::string>();
  r.num_classes = doc.at("num_classes").get<std::size_t>();
  const auto& a = doc.at("aggregates");
  r.aggregates.accuracy = a.at("accuracy").get<double>();
  r.aggregates.auroc = optional_from(a, "auroc");
  r.aggregates.auprc = optional_from(a, "auprc");
  r.aggregates.mean_cost = a.at("mean_cost").get<double>();
  r.aggregates.iou = a.at("iou").get<double>();
  r.aggregates.mean_prob_correct = a.at("mean_prob_correct").get<double>();
  for (const auto& [name, ci] : doc.at("intervals").items()) {
    r.intervals[name] = {nan_if_null(ci.at("lower")), nan_if_null(ci.at("upper"))};
  }
  const auto& b = doc.at("bootstrap");
  r.bootstrap = {b.at("replicates").get<std::size_t>(), b.at("level").get<double>(),
                 b.at("seed").get<std::uint64_t>()};
  for (const auto& p : doc.at("patients")) {
    PatientResult pr;
    pr.id = p.at("id").get<std::string>();
    pr.label = p.at("label").get<std::size_t>();
    pr.selected = p.at("selected").get<std::vector<std::size_t>>();
    pr.cost = p.at("cost").get<double>();
    pr.probs = p.at("probs").get<std::vector<double>>();
    pr.steps = p.at("steps").get<std::size_t>();
    r.patients.push_back(std::move(pr));
  }
  return r;
}

std::string report_to_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "id,label,predicted,prob_correct,cost,steps,selected";
  for (std::size_t c = 0; c < r.num_classes; ++c) out << ",p" << c;
  out << '\n';
  for (const auto& p : r.patients) {
    std::string selected;
    for (std::size_t k = 0; k < p.selected.size(); ++k) {
      if (k) selected += ';';
      selected += std::to_string(p.selected[k]);
    }
    out << p.id << ',' << p.label << ',' << argmax(p.probs) << ','
        << csv_number(p.probs.at(p.label)) << ',' << csv_number(p.cost) << ',' << p.steps
        << ',' << selected;
    for (double v : p.probs) out << ',' << csv_number(v);
    out << '\n';
  }
  return out.str();
}

// --- oracle ------------------------------------------------------------------------------

namespace {

struct OracleSearch {
  const env::Environment& environment;
  const data::PatientRecord& patient;
  const std::vector<env::Action>& candidates;
  double best = -1.0;
  std::vector<std::pair<double, env::EpisodeState>> visited;  // prob, state

  void visit(const env::EpisodeState& state, std::size_t from) {
    const double p = state.probs.at(patient.label);
    best = std::max(best, p);
    visited.emplace_back(p, state);
    for (std::size_t i = from; i < candidates.size(); ++i) {
      if (!environment.is_valid(state, candidates[i])) continue;
      env::EpisodeState next = state;
      environment.reveal(next, candidates[i], patient);
      visit(next, i + 1);
    }
  }
};

}  // namespace

OracleResult oracle_policy_value(const env::Environment& environment,
                                 const data::Dataset& dataset, data::Split split,
                                 std::optional<double> budget, const OracleConfig& config) {
  const auto& actions = environment.actions();
  const std::size_t paid = actions.guess();
  if (paid > config.max_paid_actions) {
    throw ConfigError(fmt::format(
        "oracle refuses to enumerate 2^{} subsets (limit {} paid actions)", paid,
        config.max_paid_actions));
  }
  OracleResult result;
  result.budget = budget.value_or(environment.config().budget);
  const auto ids = dataset.indices(split);
  if (ids.empty()) throw MetricError("oracle: split is empty");
  double total = 0.0;
  for (auto idx : ids) {
    const auto& patient = dataset.records[idx];
    const auto start = environment.reset(patient, env::AbsentMeans::kBlocked, result.budget);
    std::vector<env::Action> candidates;
    for (env::Action a = 0; a < paid; ++a) {
      if (environment.is_valid(start, a)) candidates.push_back(a);
    }
    // Step limit is not part of the oracle's feasibility notion.
    env::EpisodeState root = start;
    OracleSearch search{environment, patient, candidates, -1.0, {}};
    search.visit(root, 0);
    const env::EpisodeState* chosen = nullptr;
    for (const auto& [p, s] : search.visited) {
      if (p < search.best - config.tie_tolerance) continue;
      if (!chosen || s.spent < chosen->spent ||
          (s.spent == chosen->spent && s.revealed_order.size() < chosen->revealed_order.size())) {
        chosen = &s;
      }
    }
    OraclePatient op;
    op.id = patient.id;
    op.subset = chosen->revealed_order;
    std::sort(op.subset.begin(), op.subset.end());
    op.cost = chosen->spent;
    op.prob_correct = search.best;
    total += search.best;
    result.patients.push_back(std::move(op));
  }
  result.value = total / static_cast<double>(ids.size());
  return result;
}

nlohmann::json oracle_to_json(const OracleResult& r) {
  nlohmann::json patients = nlohmann::json::array();
  for (const auto& p : r.patients) {
    patients.push_back({{"id", p.id},
                        {"subset", p.subset},
                        {"cost", p.cost},
                        {"prob_correct", p.prob_correct}});
  }
  return {{"budget", r.budget}, {"value", r.value}, {"patients", patients}};
}

// --- sweep ---------------------------------------------------------------------------------

PolicyTrainer ddqn_trainer(const data::Dataset& dataset, agent::TrainConfig config) {
  return [&dataset, config](const env::Environment& environment) {
    auto result = agent::train(environment, dataset, config);
    return std::make_unique<agent::DqnPolicy>(std::move(result.nets.online));
  };
}

std::vector<SweepRow> budget_sweep(std::shared_ptr<const guesser::GuesserModel> guesser,
                                   const env::EnvConfig& base, const PolicyTrainer& trainer,
                                   const std::vector<double>& budgets,
                                   const data::Dataset& dataset, data::Split split,
                                   const EvalConfig& config) {
  if (!std::is_sorted(budgets.begin(), budgets.end())) {
    throw ConfigError("budget_sweep: budgets must be sorted ascending");
  }
  std::vector<SweepRow> rows;
  for (double b : budgets) {
    env::EnvConfig ec = base;
    ec.budget = b;
    const env::Environment environment(guesser, ec);
    const auto policy = trainer(environment);
    const auto report = evaluate_policy(environment, *policy, dataset, split, config);
    SweepRow row;
    row.budget = b;
    row.accuracy = report.aggregates.accuracy;
    row.accuracy_ci = report.intervals.at("accuracy");
    row.auroc = report.aggregates.auroc;
    row.mean_cost = report.aggregates.mean_cost;
    row.iou = report.aggregates.iou;
    row.mean_prob_correct = report.aggregates.mean_prob_correct;
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json sweep_to_json(const std::vector<SweepRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"budget", r.budget},
                   {"accuracy", r.accuracy},
                   {"accuracy_ci", {r.accuracy_ci.lower, r.accuracy_ci.upper}},
                   {"auroc", optional_json(r.auroc)},
                   {"mean_cost", r.mean_cost},
                   {"iou", r.iou},
                   {"mean_prob_correct", r.mean_prob_correct}});
  }
  return out;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "budget,accuracy,accuracy_lower,accuracy_upper,auroc,mean_cost,iou,mean_prob_correct\n";
  for (const auto& r : rows) {
    out << csv_number(r.budget) << ',' << csv_number(r.accuracy) << ','
        << csv_number(r.accuracy_ci.lower) << ',' << csv_number(r.accuracy_ci.upper) << ','
        << (r.auroc ? csv_number(*r.auroc) : "") << ',' << csv_number(r.mean_cost) << ','
        << csv_number(r.iou) << ',' << csv_number(r.mean_prob_correct) << '\n';
  }
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace seqacq::eval
