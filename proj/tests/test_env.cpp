#include <doctest.h>

#include <fstream>

#include "seqacq/errors.hpp"
#include "support.hpp"

using namespace seqacq;
using namespace seqacq::env;

namespace {

// Probabilities for a record with exactly the features in `revealed` shown,
// built without the environment.
std::vector<double> direct_probs(const guesser::GuesserModel& g,
                                 const data::PatientRecord& r,
                                 const std::vector<std::size_t>& revealed) {
  auto s = guesser::empty_state(g.schema(), 0.0);
  for (std::size_t j : revealed) {
    guesser::reveal_slot(g.schema(), s, j, g.embed_feature(j, r.values[j]));
  }
  return g.predict_proba(s);
}

}  // namespace

TEST_CASE("action space") {
  const auto schema = testsupport::numeric_schema(1, 3);
  ActionSpace a(schema, {});
  CHECK(a.size() == 5);
  CHECK(a.guess() == 4);
  CHECK(a.name(a.guess()) == "GUESS");
  CHECK(a.cost(2) == 2.0);
  CHECK(a.cost(a.guess()) == 0.0);
  CHECK(a.find("paid2") == 3);
  CHECK_FALSE(a.find("nope"));
  CHECK_FALSE(a.action_of_feature(0));
  CHECK(a.action_of_feature(3) == 3);

  EnvConfig grouped;
  grouped.groups = {{"panel", {1, 3}}, {"single", {2}}};
  ActionSpace g(schema, grouped);
  CHECK(g.size() == 3);
  CHECK(g.cost(0) == 4.0);
  CHECK(g.action_of_feature(3) == 0);

  auto bad = grouped;
  bad.groups = {{"x", {1}}, {"y", {1}}};
  CHECK_THROWS_AS(ActionSpace(schema, bad), ConfigError);
  bad.groups = {{"x", {0}}};
  CHECK_THROWS_AS(ActionSpace(schema, bad), ConfigError);
  bad.groups = {{"x", {}}};
  CHECK_THROWS_AS(ActionSpace(schema, bad), ConfigError);
  bad.groups = {{"x", {1}}, {"x", {2}}};
  CHECK_THROWS_AS(ActionSpace(schema, bad), ConfigError);
  bad.groups = {{"x", {9}}};
  CHECK_THROWS_AS(ActionSpace(schema, bad), ConfigError);
}

TEST_CASE("env config json") {
  const auto schema = testsupport::numeric_schema(1, 3);
  const auto doc = nlohmann::json::parse(
      R"({"budget": 4, "groups": [{"name": "panel", "features": ["paid0", 3]}]})");
  const auto c = env_config_from_json(doc, schema);
  CHECK(c.budget == 4.0);
  CHECK(c.groups[0].features == std::vector<std::size_t>{1, 3});
  CHECK(env_config_to_json(env_config_from_json(env_config_to_json(c), schema)) ==
        env_config_to_json(c));
  CHECK_THROWS_AS(env_config_from_json(
                      nlohmann::json::parse(R"({"groups": [{"name": "p", "features": ["zz"]}]})"),
                      schema),
                  ConfigError);
}

TEST_CASE("environment construction") {
  const auto g = testsupport::random_guesser(testsupport::numeric_schema(1, 3), 0);
  EnvConfig c;
  c.budget = 0.0;
  CHECK_THROWS_AS(Environment(g, c), ConfigError);
  c = {};
  c.max_steps = 0;
  CHECK_THROWS_AS(Environment(g, c), ConfigError);
  c = {};
  c.gamma = 1.5;
  CHECK_THROWS_AS(Environment(g, c), ConfigError);
  CHECK_THROWS_AS(Environment(nullptr, {}), ConfigError);
}

TEST_CASE("reset") {
  const auto schema = testsupport::mixed_schema();
  const auto g = testsupport::random_guesser(schema, 1);
  Environment env(g, {});
  Rng rng(2);
  auto r = testsupport::random_record(schema, rng);
  r.values[1] = data::Absent{};

  const auto s = env.reset(r);
  CHECK(s.masked.mask == std::vector<std::uint8_t>{1, 0, 0, 0, 0});
  CHECK(s.blocked == std::vector<std::uint8_t>{0, 1, 0, 0, 0});
  CHECK(s.spent == 0.0);
  CHECK(s.budget == 10.0);
  CHECK(s.masked.remaining_budget == 10.0);
  CHECK(s.revealed_order == std::vector<std::size_t>{0});
  CHECK(s.probs == direct_probs(*g, r, {0}));
  CHECK_FALSE(env.is_valid(s, 1));

  const auto u = env.reset(r, AbsentMeans::kUnobserved, 3.0);
  CHECK(u.blocked[1] == 0);
  CHECK(u.budget == 3.0);
  CHECK(env.is_valid(u, 1));

  auto no_free = r;
  no_free.values[0] = data::Absent{};
  CHECK_THROWS_AS(env.reset(no_free), EnvironmentError);
  CHECK_THROWS_AS(env.reset(r, AbsentMeans::kBlocked, -1.0), EnvironmentError);
}

TEST_CASE("validity rules") {
  const auto schema = testsupport::numeric_schema(1, 3);
  const auto g = testsupport::random_guesser(schema, 2);
  EnvConfig c;
  c.budget = 4.0;
  Environment env(g, c);
  Rng rng(3);
  const auto r = testsupport::random_record(schema, rng);
  auto s = env.reset(r);
  CHECK(env.valid_actions(s) == std::vector<Action>{1, 2, 3, 4});
  CHECK_FALSE(env.is_valid(s, 0));   // free feature already revealed
  CHECK_FALSE(env.is_valid(s, 99));  // out of range

  env.step(s, 3, r);  // cost 3 of 4
  CHECK(env.valid_actions(s) == std::vector<Action>{1, 4});
  CHECK(env.valid_mask(s) == std::vector<std::uint8_t>{0, 1, 0, 0, 1});
  CHECK_THROWS_AS(env.step(s, 3, r), EnvironmentError);
  CHECK_THROWS_AS(env.step(s, 2, r), EnvironmentError);

  env.block(s, 1);
  CHECK_FALSE(env.can_reveal(s));
  CHECK(env.must_stop(s));
  CHECK(env.valid_actions(s) == std::vector<Action>{4});

  env.finish(s);
  CHECK_FALSE(env.is_valid(s, 4));
  CHECK_THROWS_AS(env.valid_actions(s), ContractError);
  CHECK_THROWS_AS(env.finish(s), EnvironmentError);
  CHECK_THROWS_AS(env.step(s, 4, r), EnvironmentError);
}

TEST_CASE("rewards") {
  const auto schema = testsupport::numeric_schema(1, 3);
  const auto g = testsupport::random_guesser(schema, 4);
  Rng rng(5);
  const auto r = testsupport::random_record(schema, rng);

  SUBCASE("gain and guess") {
    Environment env(g, {});
    auto s = env.reset(r);
    const double p0 = direct_probs(*g, r, {0})[r.label];
    const double p1 = direct_probs(*g, r, {0, 2})[r.label];
    const auto step = env.step(s, 2, r);
    CHECK_FALSE(step.done);
    CHECK(step.reward == doctest::Approx(p1 - p0).epsilon(1e-12));
    CHECK(step.info.cost == 2.0);
    CHECK(s.spent == 2.0);
    CHECK(s.masked.remaining_budget == 8.0);
    const auto guess = env.step(s, env.actions().guess(), r);
    CHECK(guess.done);
    CHECK(guess.reward == doctest::Approx(p1).epsilon(1e-12));
    CHECK(s.terminal);
  }
  SUBCASE("cost normalized") {
    EnvConfig c;
    c.cost_normalized = true;
    Environment env(g, c);
    auto s = env.reset(r);
    const double p0 = s.probs[r.label];
    const auto step = env.step(s, 3, r);
    CHECK(step.reward == doctest::Approx((s.probs[r.label] - p0) / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(compute_reward(RewardKind::kGain, s, s, 0, r.label, env.actions(), c),
                    ContractError);
    CHECK_THROWS_AS(compute_reward(RewardKind::kGuess, s, s, 0, 7, env.actions(), c),
                    ContractError);
  }
  SUBCASE("forced guess at the step limit") {
    EnvConfig c;
    c.max_steps = 1;
    Environment env(g, c);
    auto s = env.reset(r);
    const double p0 = s.probs[r.label];
    const auto step = env.step(s, 1, r);
    CHECK(step.done);
    CHECK(step.info.forced_guess);
    const double p1 = s.probs[r.label];
    CHECK(step.info.gain_reward == doctest::Approx(p1 - p0).epsilon(1e-12));
    CHECK(step.info.guess_reward == doctest::Approx(p1).epsilon(1e-12));
    CHECK(step.reward == doctest::Approx(2.0 * p1 - p0).epsilon(1e-12));
  }
}

TEST_CASE("random episodes telescope and respect the budget") {
  const auto schema = testsupport::mixed_schema();
  const auto g = testsupport::random_guesser(schema, 6);
  EnvConfig c;
  c.budget = 7.0;
  Environment env(g, c);
  Rng rng(7);
  for (int episode = 0; episode < 300; ++episode) {
    const auto r = testsupport::random_record(schema, rng, 0.3);
    auto s = env.reset(r);
    const double p0 = s.probs[r.label];
    double total = 0.0;
    bool done = false;
    while (!done) {
      const auto valid = env.valid_actions(s);
      const Action a = valid[uniform_index(rng, valid.size())];
      const auto step = env.step(s, a, r);
      total += step.reward;
      done = step.done;
      CHECK(s.spent <= s.budget);
      for (std::size_t j = 0; j < schema.size(); ++j) {
        CHECK_FALSE((s.blocked[j] && s.masked.mask[j]));
      }
    }
    CHECK(total == doctest::Approx(2.0 * s.probs[r.label] - p0).epsilon(1e-9));
    CHECK(s.probs == direct_probs(*g, r, [&] {
            auto v = s.revealed_order;
            std::sort(v.begin(), v.end());
            return v;
          }()));
  }
}

TEST_CASE("label-free reveal matches step") {
  const auto schema = testsupport::mixed_schema();
  const auto g = testsupport::random_guesser(schema, 8);
  Environment env(g, {});
  Rng rng(9);
  auto r = testsupport::random_record(schema, rng);
  auto a = env.reset(r);
  auto b = env.reset(r);
  env.step(a, 2, r);
  auto unlabeled = r;
  unlabeled.label = 1 - r.label;
  env.reveal(b, 2, unlabeled);
  CHECK(a == b);
  CHECK_THROWS_AS(env.reveal(b, env.actions().guess(), r), EnvironmentError);

  auto partial = env.reset(r, AbsentMeans::kUnobserved);
  auto missing = r;
  missing.values[3] = data::Absent{};
  CHECK_THROWS_AS(env.reveal(partial, 3, missing), EnvironmentError);
  env.block(partial, 3);
  CHECK_FALSE(env.is_valid(partial, 3));
  CHECK(partial.spent == 0.0);
  env.reveal(partial, 1, r);
  CHECK_THROWS_AS(env.block(partial, 1), EnvironmentError);
}

TEST_CASE("trace output") {
  const auto dir = testsupport::temp_dir("env_trace");
  write_trace(dir / "t.jsonl", {{"p1", 0, "lab", 2.0, 0.1, 0.6}, {"p1", 1, "GUESS", 0.0, 0.6, 0.6}});
  std::ifstream in(dir / "t.jsonl");
  std::string line;
  std::vector<nlohmann::json> rows;
  while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
  REQUIRE(rows.size() == 2);
  CHECK(rows[1]["action"] == "GUESS");
  CHECK(rows[0]["cost"] == 2.0);
}
