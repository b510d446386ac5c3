#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "seqacq/agent/agent.hpp"
#include "seqacq/errors.hpp"
#include "seqacq/eval/evaluation.hpp"
#include "seqacq/eval/metrics.hpp"
#include "support.hpp"

using namespace seqacq;
using namespace seqacq::eval;

namespace {

data::Dataset random_dataset(const data::FeatureSchema& schema, std::size_t n,
                             double absent_rate, std::uint64_t seed) {
  data::Dataset d;
  d.schema = schema;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = testsupport::random_record(schema, rng, absent_rate);
    r.id = "p" + std::to_string(i);
    r.label = i % schema.num_classes();
    d.records.push_back(r);
    d.splits.push_back(data::Split::kTest);
  }
  return d;
}

// Best Pr(correct) over every affordable subset of present paid features,
// enumerated by bitmask with states built straight from the guesser.
double brute_best(const guesser::GuesserModel& g, const data::PatientRecord& r, double budget) {
  const auto& schema = g.schema();
  const auto paid = schema.paid_features();
  double best = 0.0;
  for (std::size_t bits = 0; bits < (std::size_t{1} << paid.size()); ++bits) {
    double cost = 0.0;
    bool ok = true;
    auto state = guesser::empty_state(schema, 0.0);
    for (std::size_t j : schema.free_features()) {
      guesser::reveal_slot(schema, state, j, g.embed_feature(j, r.values[j]));
    }
    for (std::size_t k = 0; k < paid.size(); ++k) {
      if (!(bits >> k & 1)) continue;
      const std::size_t j = paid[k];
      if (data::is_absent(r.values[j])) {
        ok = false;
        break;
      }
      cost += schema.feature(j).cost;
      guesser::reveal_slot(schema, state, j, g.embed_feature(j, r.values[j]));
    }
    if (!ok || cost > budget) continue;
    best = std::max(best, g.predict_proba(state)[r.label]);
  }
  return best;
}

}  // namespace

TEST_CASE("auroc and auprc against brute force") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 40);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(uniform_index(rng, 6)) / 5.0;  // many ties
      y[i] = static_cast<int>(uniform_index(rng, 2));
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(auroc(s, y) == doctest::Approx(testsupport::brute_auroc(s, y)).epsilon(1e-12));
    CHECK(auprc(s, y) == doctest::Approx(testsupport::brute_auprc(s, y)).epsilon(1e-12));
  }
  const std::vector<double> s{0.9, 0.8, 0.7};
  CHECK(auprc(s, std::vector<int>{1, 0, 1}) == doctest::Approx(0.5 + 0.5 * 2.0 / 3.0));
  CHECK(auroc(s, std::vector<int>{1, 1, 0}) == 1.0);
  CHECK(auroc(s, std::vector<int>{0, 0, 1}) == 0.0);
  CHECK(auroc(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}) == 0.5);

  CHECK_THROWS_AS(auroc(s, std::vector<int>{1, 1, 1}), MetricError);
  CHECK_THROWS_AS(auroc(s, std::vector<int>{1, 0}), MetricError);
  CHECK_THROWS_AS(auroc(s, std::vector<int>{1, 0, 2}), MetricError);
  CHECK_THROWS_AS(auroc(std::vector<double>{0.1, std::nan("")}, std::vector<int>{0, 1}),
                  MetricError);
  CHECK_THROWS_AS(auprc(s, std::vector<int>{0, 0, 0}), MetricError);
}

TEST_CASE("iou") {
  CHECK(iou({{0, 1}, {1, 2}}) == doctest::Approx(1.0 / 3.0));
  CHECK(iou({{0, 1}, {0, 1}, {0, 1}}) == 1.0);
  CHECK(iou({{}, {}}) == 1.0);
  CHECK(iou({{0}, {1}}) == 0.0);
  CHECK_THROWS_AS(iou({}), MetricError);
}

TEST_CASE("bootstrap intervals") {
  std::vector<double> x(200);
  Rng rng(2);
  for (auto& v : x) v = standard_normal(rng);
  const auto mean_of = [&](std::span<const std::size_t> idx) {
    double s = 0.0;
    for (auto i : idx) s += x[i];
    return s / static_cast<double>(idx.size());
  };
  BootstrapConfig bc;
  bc.replicates = 2000;
  const auto ci = bootstrap_ci(x.size(), mean_of, bc);
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / 200.0;
  CHECK(ci.lower < m);
  CHECK(ci.upper > m);
  // normal-theory half-width 1.96 / sqrt(200) for unit variance
  CHECK((ci.upper - ci.lower) / 2.0 == doctest::Approx(1.96 / std::sqrt(200.0)).epsilon(0.15));
  const auto again = bootstrap_ci(x.size(), mean_of, bc);
  CHECK(again.lower == ci.lower);
  CHECK(again.upper == ci.upper);

  const auto constant = bootstrap_ci(10, [](std::span<const std::size_t>) { return 0.3; }, bc);
  CHECK(constant.lower == 0.3);
  CHECK(constant.upper == 0.3);
  const auto never = bootstrap_ci(
      10, [](std::span<const std::size_t>) -> double { throw MetricError("x"); }, bc);
  CHECK(std::isnan(never.lower));
  CHECK(std::isnan(never.upper));
}

TEST_CASE("aggregates") {
  std::vector<PatientResult> ps{
      {"a", 1, {0, 1}, 2.0, {0.2, 0.8}, 1},
      {"b", 0, {0, 1, 2}, 4.0, {0.4, 0.6}, 2},
      {"c", 0, {0}, 0.0, {0.9, 0.1}, 0},
  };
  const auto a = compute_aggregates(ps, 2);
  CHECK(a.accuracy == doctest::Approx(2.0 / 3.0));
  CHECK(a.mean_cost == doctest::Approx(2.0));
  CHECK(a.mean_prob_correct == doctest::Approx((0.8 + 0.4 + 0.9) / 3.0));
  CHECK(a.iou == doctest::Approx(1.0 / 3.0));
  CHECK(*a.auroc == 1.0);
  CHECK(*a.auprc == 1.0);

  ps[0].label = 0;
  CHECK_FALSE(compute_aggregates(ps, 2).auroc);

  // three classes: macro over one-vs-rest
  std::vector<PatientResult> m{
      {"a", 0, {}, 0.0, {0.7, 0.2, 0.1}, 0},
      {"b", 1, {}, 0.0, {0.3, 0.6, 0.1}, 0},
      {"c", 2, {}, 0.0, {0.5, 0.1, 0.4}, 0},
      {"d", 2, {}, 0.0, {0.2, 0.3, 0.5}, 0},
  };
  const auto am = compute_aggregates(m, 3);
  double expected = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> s;
    std::vector<int> y;
    for (const auto& p : m) {
      s.push_back(p.probs[c]);
      y.push_back(p.label == c ? 1 : 0);
    }
    expected += testsupport::brute_auroc(s, y);
  }
  CHECK(*am.auroc == doctest::Approx(expected / 3.0));
  CHECK_THROWS_AS(compute_aggregates({}, 2), MetricError);
}

TEST_CASE("policy evaluation and reports") {
  const auto schema = testsupport::numeric_schema(1, 4);
  const auto g = testsupport::random_guesser(schema, 3);
  env::EnvConfig ec;
  ec.budget = 5.0;
  env::Environment environment(g, ec);
  const auto d = random_dataset(schema, 40, 0.2, 4);
  EvalConfig cfg;
  cfg.bootstrap.replicates = 100;

  const auto report = evaluate_policy(environment, agent::RandomPolicy{}, d, data::Split::kTest, cfg);
  CHECK(report.policy == "random");
  CHECK(report.budget == 5.0);
  CHECK(report.split == "test");
  REQUIRE(report.patients.size() == 40);
  for (const auto& p : report.patients) {
    CHECK(p.cost <= 5.0);
    CHECK(std::is_sorted(p.selected.begin(), p.selected.end()));
    CHECK(p.selected.front() == 0);
    double c = 0.0;
    for (std::size_t j : p.selected) c += schema.feature(j).cost;
    CHECK(c == p.cost);
  }
  CHECK(report.aggregates == compute_aggregates(report.patients, 2));
  CHECK(report.intervals.count("accuracy") == 1);
  CHECK(report.intervals.count("auroc") == 1);
  CHECK(report.intervals.at("accuracy").lower <= report.aggregates.accuracy);
  CHECK_FALSE(report.trace.empty());

  const auto again = evaluate_policy(environment, agent::RandomPolicy{}, d, data::Split::kTest, cfg);
  CHECK(report_to_json(again).dump() == report_to_json(report).dump());

  const auto back = report_from_json(report_to_json(report));
  CHECK(back.patients == report.patients);
  CHECK(back.aggregates == report.aggregates);
  CHECK(report_to_json(back) == report_to_json(report));

  const auto csv = report_to_csv(report);
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "id,label,predicted,prob_correct,cost,steps,selected,p0,p1");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 41);

  CHECK_THROWS_AS(evaluate_policy(environment, agent::RandomPolicy{}, d, data::Split::kTrain, cfg),
                  MetricError);
}

TEST_CASE("reveal_all has perfect selection overlap without missingness") {
  const auto schema = testsupport::numeric_schema(2, 3);
  const auto g = testsupport::random_guesser(schema, 5);
  env::EnvConfig ec;
  ec.budget = 100.0;
  env::Environment environment(g, ec);
  const auto d = random_dataset(schema, 30, 0.0, 6);
  const auto r = evaluate_policy(environment, agent::RevealAllPolicy{}, d, data::Split::kTest);
  CHECK(r.aggregates.iou == 1.0);
  CHECK(r.aggregates.mean_cost == 6.0);
}

TEST_CASE("subset oracle matches exhaustive enumeration") {
  const auto schema = testsupport::numeric_schema(1, 5);
  const auto g = testsupport::random_guesser(schema, 7, {12});
  env::EnvConfig ec;
  ec.budget = 6.0;
  env::Environment environment(g, ec);
  const auto d = random_dataset(schema, 30, 0.2, 8);

  const auto oracle = oracle_policy_value(environment, d, data::Split::kTest);
  CHECK(oracle.budget == 6.0);
  REQUIRE(oracle.patients.size() == 30);
  double total = 0.0;
  for (std::size_t i = 0; i < 30; ++i) {
    const auto& r = d.records[i];
    const double best = brute_best(*g, r, 6.0);
    CHECK(oracle.patients[i].prob_correct >= best - 1e-3);
    CHECK(oracle.patients[i].cost <= 6.0);
    total += best;
  }
  CHECK(oracle.value == doctest::Approx(total / 30.0).epsilon(1e-12));

  // no policy beats the oracle on mean Pr(correct)
  for (auto kind : {agent::BaselineKind::kRandom, agent::BaselineKind::kGreedyMyopic,
                    agent::BaselineKind::kRevealAll}) {
    const auto rep = evaluate_policy(environment, *agent::baseline_policy(kind), d,
                                     data::Split::kTest);
    CHECK(rep.aggregates.mean_prob_correct <= oracle.value + 1e-12);
  }

  const auto wider = oracle_policy_value(environment, d, data::Split::kTest, 15.0);
  CHECK(wider.value >= oracle.value);
  const auto json = oracle_to_json(oracle);
  CHECK(json["value"] == oracle.value);

  OracleConfig tight;
  tight.max_paid_actions = 3;
  CHECK_THROWS_AS(oracle_policy_value(environment, d, data::Split::kTest, std::nullopt, tight),
                  ConfigError);
}

TEST_CASE("budget sweep") {
  const auto schema = testsupport::numeric_schema(1, 3);
  const auto g = testsupport::random_guesser(schema, 9);
  const auto d = random_dataset(schema, 30, 0.0, 10);
  const PolicyTrainer reveal_all = [](const env::Environment&) {
    return std::unique_ptr<agent::Policy>(std::make_unique<agent::RevealAllPolicy>());
  };
  EvalConfig cfg;
  cfg.bootstrap.replicates = 50;
  const auto rows = budget_sweep(g, {}, reveal_all, {1.0, 3.0, 6.0, 10.0}, d,
                                 data::Split::kTest, cfg);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].mean_cost == 1.0);
  CHECK(rows[1].mean_cost == 3.0);
  CHECK(rows[2].mean_cost == 6.0);
  CHECK(rows[3].mean_cost == 6.0);
  CHECK(rows[2].accuracy == rows[3].accuracy);
  CHECK(rows[2].accuracy_ci.lower <= rows[2].accuracy);

  const auto json = sweep_to_json(rows);
  CHECK(json.size() == 4);
  CHECK(json[1]["budget"] == 3.0);
  const auto csv = sweep_to_csv(rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  CHECK_THROWS_AS(budget_sweep(g, {}, reveal_all, {3.0, 1.0}, d, data::Split::kTest, cfg),
                  ConfigError);
}
