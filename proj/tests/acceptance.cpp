// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion names
// as arguments to run a subset; --list prints the names.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "seqacq/agent/agent.hpp"
#include "seqacq/errors.hpp"
#include "seqacq/eval/evaluation.hpp"
#include "seqacq/eval/metrics.hpp"
#include "seqacq/guesser/pretrain.hpp"
#include "seqacq/interface/config.hpp"
#include "seqacq/interface/pipeline.hpp"
#include "seqacq/interface/service.hpp"
#include "seqacq/interface/session.hpp"
#include "seqacq/numerics/gradcheck.hpp"
#include "seqacq/numerics/losses.hpp"
#include "seqacq/numerics/parameters.hpp"
#include "seqacq/numerics/recurrent.hpp"
#include "support.hpp"

using namespace seqacq;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::filesystem::path work_root() {
  static const auto root = [] {
    auto dir = std::filesystem::temp_directory_path() / "seqacq_acceptance";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
  }();
  return root;
}

json config_in(const std::string& name, json overrides = json::object()) {
  auto cfg = interface::default_config();
  cfg.merge_patch(overrides);
  const auto dir = work_root() / name;
  std::filesystem::create_directories(dir);
  cfg["paths"]["out_dir"] = dir.string();
  return cfg;
}

json smoke_config(const std::string& name) {
  std::ifstream in(std::filesystem::path(SEQACQ_SOURCE_DIR) / "configs/smoke.json");
  return config_in(name, json::parse(in));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Cached random guessers over the mixed-modality schema.
std::shared_ptr<const guesser::GuesserModel> fuzz_guesser(std::size_t i) {
  static std::map<std::size_t, std::shared_ptr<const guesser::GuesserModel>> cache;
  auto& slot = cache[i];
  if (!slot) slot = testsupport::random_guesser(testsupport::mixed_schema(), 1000 + i, {12, 8});
  return slot;
}

// --- criteria ------------------------------------------------------------------------

Outcome telescoping() {
  Rng rng(1);
  double worst = 0.0;
  std::size_t forced = 0;
  for (std::size_t e = 0; e < 1000; ++e) {
    env::EnvConfig ec;
    ec.budget = 1.0 + 12.0 * uniform01(rng);
    ec.max_steps = 1 + uniform_index(rng, 6);
    const env::Environment environment(fuzz_guesser(e % 20), ec);
    const double rho = std::vector<double>{0.0, 0.3, 0.6}[e % 3];
    const auto record = testsupport::random_record(environment.schema(), rng, rho);
    auto state = environment.reset(record);
    const double p0 = state.probs[record.label];
    double total = 0.0;
    while (!state.terminal) {
      const auto valid = environment.valid_actions(state);
      const auto step =
          environment.step(state, valid[uniform_index(rng, valid.size())], record);
      total += step.reward;
      forced += step.info.forced_guess ? 1 : 0;
    }
    worst = std::max(worst, std::abs(total - (2.0 * state.probs[record.label] - p0)));
  }
  return {worst <= 1e-9,
          fmt::format("1000 episodes, max |sum r - (2 Pr_T - Pr_0)| = {:.3g}, {} forced guesses",
                      worst, forced)};
}

Outcome safety() {
  Rng rng(2);
  std::size_t overdrafts = 0;
  std::size_t absent_reveals = 0;
  std::size_t invalid = 0;
  std::size_t steps = 0;
  const agent::RandomPolicy random;
  const agent::GreedyMyopicPolicy greedy;
  const agent::RevealAllPolicy reveal_all;
  std::vector<std::unique_ptr<agent::DqnPolicy>> dqns;
  for (std::size_t i = 0; i < 20; ++i) {
    Rng init(500 + i);
    const auto& schema = fuzz_guesser(i)->schema();
    dqns.push_back(std::make_unique<agent::DqnPolicy>(
        agent::make_qnets(agent::encoding_width(schema), schema.size() + 1, {16}, 1, init).online,
        0.2));
  }
  for (std::size_t e = 0; e < 10000; ++e) {
    const std::size_t gi = e % 20;
    const env::Environment environment(fuzz_guesser(gi), {});
    const double rho = std::vector<double>{0.0, 0.3, 0.6}[e % 3];
    const auto record = testsupport::random_record(environment.schema(), rng, rho);
    const double budget = 13.0 * uniform01(rng);
    const agent::Policy* policy = nullptr;
    switch (e % 4) {
      case 0: policy = &random; break;
      case 1: policy = &greedy; break;
      case 2: policy = &reveal_all; break;
      default: policy = dqns[gi].get(); break;
    }
    auto state = environment.reset(record, env::AbsentMeans::kBlocked, budget);
    while (!state.terminal) {
      const auto valid = environment.valid_actions(state);
      const auto a = policy->choose(environment, state, record, rng);
      if (std::find(valid.begin(), valid.end(), a) == valid.end()) {
        ++invalid;
        break;
      }
      environment.step(state, a, record);
      ++steps;
      if (state.spent > state.budget) ++overdrafts;
      for (std::size_t j = 0; j < record.values.size(); ++j) {
        if (state.masked.mask[j] && data::is_absent(record.values[j])) ++absent_reveals;
      }
    }
  }
  return {overdrafts == 0 && absent_reveals == 0 && invalid == 0,
          fmt::format("10000 episodes / {} steps: {} overdrafts, {} ABSENT reveals, {} invalid "
                      "actions",
                      steps, overdrafts, absent_reveals, invalid)};
}

Outcome gradients() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t hidden = 2 + uniform_index(rng, 4);
    const std::size_t extra = 1 + uniform_index(rng, 4);
    const std::size_t classes = 2 + uniform_index(rng, 3);
    std::vector<std::size_t> widths{hidden + extra};
    for (std::size_t l = 0, n = 1 + uniform_index(rng, 2); l < n; ++l) {
      widths.push_back(3 + uniform_index(rng, 6));
    }
    widths.push_back(classes);
    const auto cell = numerics::RecurrentCell::random(1, hidden, rng);
    auto head = numerics::DenseNet::random(widths, rng);
    // nonzero biases keep pre-activations off the ReLU kink
    for (auto& p : head.mutable_params()) p += 0.1 * standard_normal(rng);
    std::vector<double> steps(1 + uniform_index(rng, 5));
    for (auto& s : steps) s = standard_normal(rng);
    std::vector<double> other(extra);
    for (auto& s : other) s = standard_normal(rng);
    const std::size_t label = uniform_index(rng, classes);

    auto loss = [&](const numerics::RecurrentCell& c, const numerics::DenseNet& h,
                    std::span<const double> s, std::span<const double> o) {
      auto input = numerics::final_hidden(c, s);
      input.insert(input.end(), o.begin(), o.end());
      return numerics::softmax_xent(numerics::infer(h, input), label).loss;
    };

    // analytic: head backward, then through the recurrence
    const auto run = numerics::run_sequence(cell, steps);
    auto input = run.hidden;
    input.insert(input.end(), other.begin(), other.end());
    const auto fwd = numerics::forward(head, input);
    const auto xent = numerics::softmax_xent(fwd.logits, label);
    const auto hg = numerics::backward(head, fwd.cache, xent.grad);
    const std::vector<double> hidden_grad(hg.input.begin(),
                                          hg.input.begin() + static_cast<std::ptrdiff_t>(hidden));
    const auto cg = numerics::backward_sequence(cell, run.cache, hidden_grad);

    std::vector<double> analytic = hg.params;
    analytic.insert(analytic.end(), cg.params.begin(), cg.params.end());
    analytic.insert(analytic.end(), cg.inputs.begin(), cg.inputs.end());
    analytic.insert(analytic.end(), hg.input.begin() + static_cast<std::ptrdiff_t>(hidden),
                    hg.input.end());

    const std::size_t nh = head.param_count();
    const std::size_t nc = cell.param_count();
    std::vector<double> x(head.params().begin(), head.params().end());
    x.insert(x.end(), cell.params().begin(), cell.params().end());
    x.insert(x.end(), steps.begin(), steps.end());
    x.insert(x.end(), other.begin(), other.end());
    const auto numeric = numerics::finite_difference_gradient(
        [&](std::span<const double> v) {
          auto h = head;
          auto c = cell;
          h.set_params(v.subspan(0, nh));
          c.set_params(v.subspan(nh, nc));
          return loss(c, h, v.subspan(nh + nc, steps.size()),
                      v.subspan(nh + nc + steps.size()));
        },
        x);
    worst = std::max(worst, numerics::relative_error(analytic, numeric));
  }
  return {worst < 1e-4,
          fmt::format("100 recurrent-encoder + MLP nets, max relative error {:.3g}", worst)};
}

Outcome metric_oracles() {
  Rng rng(4);
  double worst_roc = 0.0;
  double worst_pr = 0.0;
  std::size_t iou_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 80);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const bool discrete = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = discrete ? static_cast<double>(uniform_index(rng, 5)) : uniform01(rng);
      y[i] = static_cast<int>(uniform_index(rng, 2));
    }
    y[uniform_index(rng, n)] = 1;
    std::size_t zero = uniform_index(rng, n);
    while (y[zero] == 1 && std::count(y.begin(), y.end(), 0) == 0) {
      y[zero] = 0;
      zero = uniform_index(rng, n);
    }
    if (std::count(y.begin(), y.end(), 1) == 0) y[0] = 1;
    worst_roc = std::max(worst_roc, std::abs(eval::auroc(s, y) - testsupport::brute_auroc(s, y)));
    worst_pr = std::max(worst_pr, std::abs(eval::auprc(s, y) - testsupport::brute_auprc(s, y)));

    std::vector<std::vector<std::size_t>> sets(1 + uniform_index(rng, 10));
    for (auto& set : sets) {
      std::set<std::size_t> members;
      for (std::size_t k = 0, m = uniform_index(rng, 6); k < m; ++k) {
        members.insert(uniform_index(rng, 8));
      }
      set.assign(members.begin(), members.end());
    }
    std::set<std::size_t> inter(sets[0].begin(), sets[0].end());
    std::set<std::size_t> uni;
    for (const auto& set : sets) {
      std::set<std::size_t> next;
      std::set_intersection(inter.begin(), inter.end(), set.begin(), set.end(),
                            std::inserter(next, next.begin()));
      inter = std::move(next);
      uni.insert(set.begin(), set.end());
    }
    const double reference =
        uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    if (eval::iou(sets) != reference) ++iou_mismatch;
  }
  return {worst_roc <= 1e-9 && worst_pr <= 1e-9 && iou_mismatch == 0,
          fmt::format("1000 instances: max AUROC diff {:.3g}, max AUPRC diff {:.3g}, {} IoU "
                      "mismatches",
                      worst_roc, worst_pr, iou_mismatch)};
}

Outcome replay_distribution() {
  bool ok = true;
  std::string detail;
  for (double alpha : {0.0, 0.6, 1.0}) {
    agent::ReplayConfig rc;
    rc.capacity = 32;
    rc.alpha = alpha;
    agent::PrioritizedReplay replay(rc);
    Rng rng(5);
    std::vector<double> expected;
    for (std::size_t i = 0; i < 32; ++i) {
      const double td = i % 7 == 0 ? 0.0 : 3.0 * standard_normal(rng);
      agent::Transition t;
      t.reward = td;
      replay.push(t, td);
      expected.push_back(std::pow(std::abs(td) + 1e-3, alpha));
    }
    const double z = std::accumulate(expected.begin(), expected.end(), 0.0);
    for (auto& p : expected) p /= z;
    const std::size_t draws = 200000;
    std::vector<double> counts(32, 0.0);
    for (std::size_t b = 0; b < draws / 1000; ++b) {
      for (const auto& h : replay.sample(1000, 0.4, rng).handles) counts[h.slot] += 1.0;
    }
    double chi2 = 0.0;
    for (std::size_t i = 0; i < 32; ++i) {
      const double e = static_cast<double>(draws) * expected[i];
      chi2 += (counts[i] - e) * (counts[i] - e) / e;
    }
    const double df = 31.0;
    const double limit = df + 3.0 * std::sqrt(2.0 * df);
    ok = ok && chi2 <= limit;
    detail += fmt::format("{}alpha={} chi2={:.1f}", detail.empty() ? "" : ", ", alpha, chi2);
  }
  return {ok, detail + fmt::format(" (3-sigma limit {:.1f}, 31 df)", 31.0 + 3.0 * std::sqrt(62.0))};
}

Outcome adversarial_fidelity() {
  const auto schema = testsupport::mixed_schema();
  std::size_t matches = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto model = testsupport::random_guesser(schema, 7000 + seed, {10, 6});
    Rng rng(seed);
    const auto record = testsupport::random_record(schema, rng);
    const auto state = guesser::full_state(*model, guesser::embed_record(*model, record));
    const std::size_t k = 1 + seed % 3;

    std::vector<std::pair<double, std::size_t>> sens;
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (schema.feature(j).is_free()) continue;
      const std::size_t off = schema.slot_offset(j);
      const std::size_t w = schema.feature(j).slot_width;
      const std::vector<double> x(state.slots.begin() + static_cast<std::ptrdiff_t>(off),
                                  state.slots.begin() + static_cast<std::ptrdiff_t>(off + w));
      const auto g = numerics::finite_difference_gradient(
          [&](std::span<const double> v) {
            auto s = state;
            std::copy(v.begin(), v.end(), s.slots.begin() + static_cast<std::ptrdiff_t>(off));
            return -std::log(model->predict_proba(s)[record.label]);
          },
          x);
      double sq = 0.0;
      for (double v : g) sq += v * v;
      sens.emplace_back(std::sqrt(sq), j);
    }
    std::stable_sort(sens.begin(), sens.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::set<std::size_t> expected;
    for (std::size_t r = 0; r < k; ++r) expected.insert(sens[r].second);
    const auto adv = guesser::adversarial_mask(*model, state, record.label, k);
    const std::set<std::size_t> got(adv.hidden.begin(), adv.hidden.end());
    if (got == expected) ++matches;
  }
  return {matches == 50, fmt::format("{}/50 (model, sample) pairs match top-k finite-difference "
                                     "sensitivities (k = 1..3)",
                                     matches)};
}

Outcome robust_ablation() {
  std::size_t wins = 0;
  std::string margins;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    data::SyntheticSpec spec;
    spec.num_features = 10;
    spec.informative = {0, 1, 2, 3, 4, 5};
    spec.weights = {3.0, -2.5, 2.0, -1.5, 1.0, -1.0};
    spec.noise = 0.1;
    spec.num_samples = 6000;
    spec.seed = seed;
    const auto ds = data::standardize(data::generate_synthetic(spec));
    guesser::PretrainConfig robust;
    robust.epochs = 60;
    robust.seed = seed;
    auto plain = guesser::PretrainConfig::plain();
    plain.epochs = 60;
    plain.seed = seed;
    Rng r1(seed);
    Rng r2(seed);
    const auto a = guesser::pretrain(guesser::GuesserModel(ds.schema, {{32, 32}}, r1), ds, robust);
    const auto b = guesser::pretrain(guesser::GuesserModel(ds.schema, {{32, 32}}, r2), ds, plain);
    const double ma = guesser::masked_accuracy(a.model, ds, data::Split::kVal, 0.5, seed);
    const double mb = guesser::masked_accuracy(b.model, ds, data::Split::kVal, 0.5, seed);
    if (ma - mb > 0.0) ++wins;
    margins += fmt::format("{}{:+.3f}", margins.empty() ? "" : " ", ma - mb);
  }
  return {wins >= 4, fmt::format("robust - plain masked val accuracy (d=10, hide 0.5): {}; "
                                 "{}/5 seeds positive",
                                 margins, wins)};
}

Outcome agent_quality() {
  std::size_t passes = 0;
  bool within_time = true;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto t0 = Clock::now();
    const auto cfg = config_in(fmt::format("quality_{}", seed), {{"seed", seed}});
    interface::run_gen_data(cfg);
    interface::run_train_guesser(cfg);
    interface::run_train_agent(cfg);
    const auto model = interface::load_configured_guesser(cfg);
    const auto ds = interface::prepare_for(*model, interface::load_configured_dataset(cfg));
    const env::Environment environment(model, interface::env_config(cfg, ds.schema));
    const auto ck = agent::load_agent(interface::paths(cfg).agent, ds.schema);
    eval::EvalConfig ec;
    ec.bootstrap.replicates = 10;
    ec.seed = seed;
    const auto dqn = eval::evaluate_policy(environment, agent::DqnPolicy(ck.nets.online), ds,
                                           data::Split::kTest, ec);
    const auto rnd = eval::evaluate_policy(environment, agent::RandomPolicy{}, ds,
                                           data::Split::kTest, ec);
    const auto oracle = eval::oracle_policy_value(environment, ds, data::Split::kTest);
    const double r = rnd.aggregates.mean_prob_correct;
    const double need = r + 0.5 * (oracle.value - r);
    const double got = dqn.aggregates.mean_prob_correct;
    const double secs = seconds_since(t0);
    if (got >= need) ++passes;
    within_time = within_time && secs < 900.0;
    detail += fmt::format("{}seed {}: ddqn {:.3f} vs need {:.3f} (random {:.3f}, oracle {:.3f}, "
                          "{:.0f}s)",
                          detail.empty() ? "" : "; ", seed, got, need, r, oracle.value, secs);
  }
  return {passes >= 4 && within_time,
          fmt::format("{}/5 seeds pass, budget 15 of total cost 25 - {}", passes, detail)};
}

Outcome budget_sweep_trend() {
  auto cfg = config_in("sweep");
  interface::run_gen_data(cfg);
  interface::run_train_guesser(cfg);
  const auto summary = interface::run_sweep_budget(cfg);
  const auto& rows = summary.at("rows");
  const auto model = interface::load_configured_guesser(cfg);
  const double total = model->schema().total_paid_cost();

  bool monotone = true;
  std::string detail;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double acc = rows[i].at("accuracy").get<double>();
    detail += fmt::format("{}B={} acc={:.3f}", i ? ", " : "", rows[i].at("budget").get<double>(),
                          acc);
    if (i > 0 && acc < rows[i - 1].at("accuracy_ci")[0].get<double>()) monotone = false;
  }
  const bool rising = rows.back().at("accuracy").get<double>() >=
                      rows.front().at("accuracy_ci")[1].get<double>();

  // Plateau: every budget above the total cost lies inside the first such
  // budget's interval.
  std::optional<std::size_t> first_above;
  bool plateau = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].at("budget").get<double>() <= total) continue;
    if (!first_above) {
      first_above = i;
      continue;
    }
    const auto& ci = rows[*first_above].at("accuracy_ci");
    const double acc = rows[i].at("accuracy").get<double>();
    plateau = plateau && acc >= ci[0].get<double>() && acc <= ci[1].get<double>();
  }
  std::size_t above = 0;
  for (const auto& r : rows) above += r.at("budget").get<double>() > total ? 1 : 0;
  plateau = plateau && above >= 2;
  return {monotone && rising && plateau,
          fmt::format("{} (total cost {}); non-decreasing within CI: {}, plateau above total: {}",
                      detail, total, monotone && rising ? "yes" : "no", plateau ? "yes" : "no")};
}

Outcome personalization() {
  const json overrides = {
      {"synthetic",
       {{"num_features", 8},
        {"free_features", {0}},
        {"informative", {1, 2}},
        {"weights", {8.0, 6.0}},
        {"alternate", {{"switch_feature", 0}, {"informative", {3, 4}}, {"weights", {8.0, 6.0}}}},
        {"cost_rule", "uniform"},
        {"costs", json::array()},
        {"noise", 0.1},
        {"num_samples", 4000}}},
      {"guesser", {{"pretrain", {{"epochs", 60}}}}},
      {"env", {{"budget", 3.0}}},
      {"agent", {{"episodes", 3000}}}};
  const auto cfg = config_in("personalization", overrides);
  interface::run_gen_data(cfg);
  interface::run_train_guesser(cfg);
  interface::run_train_agent(cfg);
  const auto model = interface::load_configured_guesser(cfg);
  const auto ds = interface::prepare_for(*model, interface::load_configured_dataset(cfg));
  const env::Environment environment(model, interface::env_config(cfg, ds.schema));
  const auto ck = agent::load_agent(interface::paths(cfg).agent, ds.schema);
  eval::EvalConfig ec;
  ec.bootstrap.replicates = 10;
  const auto dqn = eval::evaluate_policy(environment, agent::DqnPolicy(ck.nets.online), ds,
                                         data::Split::kTest, ec);
  const auto all = eval::evaluate_policy(environment, agent::RevealAllPolicy{}, ds,
                                         data::Split::kTest, ec);
  std::set<std::vector<std::size_t>> distinct;
  for (const auto& p : dqn.patients) distinct.insert(p.selected);
  return {dqn.aggregates.iou < 0.7 && all.aggregates.iou == 1.0,
          fmt::format("agent IoU {:.3f} ({} distinct feature sets, accuracy {:.3f}); reveal_all "
                      "IoU {:.3f}",
                      dqn.aggregates.iou, distinct.size(), dqn.aggregates.accuracy,
                      all.aggregates.iou)};
}

void run_pipeline(const json& cfg) {
  interface::run_gen_data(cfg);
  interface::run_train_guesser(cfg);
  interface::run_train_agent(cfg);
  interface::run_evaluate(cfg);
}

Outcome determinism() {
  const auto a = smoke_config("determinism_a");
  const auto b = smoke_config("determinism_b");
  run_pipeline(a);
  run_pipeline(b);
  const auto pa = interface::paths(a);
  const auto pb = interface::paths(b);
  auto report = [](const interface::Paths& p) {
    auto path = p.report;
    path += ".json";
    return read_file(path);
  };
  const bool reports = !report(pa).empty() && report(pa) == report(pb);
  const bool artifacts = read_file(pa.guesser) == read_file(pb.guesser) &&
                         read_file(pa.agent) == read_file(pb.agent) &&
                         read_file(pa.records) == read_file(pb.records);

  // checkpoint round trip
  const auto g = guesser::GuesserModel::load(pa.guesser);
  const auto resaved = work_root() / "determinism_a" / "guesser.resaved.json";
  g.save(resaved);
  const auto g2 = guesser::GuesserModel::load(resaved);
  bool exact = g2.head() == g.head() && g2.standardization() == g.standardization();
  for (std::size_t j = 0; j < g.schema().size(); ++j) {
    if (g.encoder(j)) exact = exact && *g.encoder(j) == *g2.encoder(j);
  }
  const auto ck = agent::load_agent(pa.agent, g.schema());
  const auto agent_resaved = work_root() / "determinism_a" / "agent.resaved.json";
  agent::save_agent(agent_resaved, ck);
  const auto ck2 = agent::load_agent(agent_resaved, g.schema());
  exact = exact && ck2.nets.online == ck.nets.online && ck2.nets.target == ck.nets.target;
  exact = exact && read_file(agent_resaved) == read_file(pa.agent) &&
          read_file(resaved) == read_file(pa.guesser);
  return {reports && artifacts && exact,
          fmt::format("reports identical: {}, artifacts identical: {}, checkpoint round trip "
                      "parameter-exact: {}",
                      reports, artifacts, exact)};
}

json raw_json(const data::FeatureValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* s = std::get_if<data::Series>(&v)) return s->steps;
  if (const auto* e = std::get_if<data::Embedding>(&v)) return e->values;
  return nullptr;
}

// Rebuilds a session's probabilities from its exported log with the
// environment's label-free transitions.
std::vector<double> replay_session(const env::Environment& environment, const json& log) {
  const auto& schema = environment.schema();
  const auto& stats = environment.guesser().standardization();
  auto to_value = [&](std::size_t j, const json& raw) -> data::FeatureValue {
    data::FeatureValue v;
    switch (schema.feature(j).modality) {
      case data::Modality::kNumeric: v = raw.get<double>(); break;
      case data::Modality::kTimeSeries: v = data::Series{raw.get<std::vector<double>>()}; break;
      case data::Modality::kEmbedded: v = data::Embedding{raw.get<std::vector<double>>()}; break;
    }
    return stats ? data::apply_standardization(schema, *stats, j, v) : v;
  };
  data::PatientRecord record;
  record.values.assign(schema.size(), data::Absent{});
  env::EpisodeState state;
  for (const auto& event : log.at("events")) {
    const auto type = event.at("type").get<std::string>();
    if (type == "create") {
      for (const auto& [name, raw] : event.at("features").items()) {
        const auto j = *schema.index_of(name);
        record.values[j] = to_value(j, raw);
      }
      state = environment.reset(record, env::AbsentMeans::kUnobserved,
                                event.at("budget").get<double>());
    } else if (type == "observe") {
      for (const auto& [name, raw] : event.at("values").items()) {
        const auto j = *schema.index_of(name);
        record.values[j] = to_value(j, raw);
      }
      environment.reveal(state, *environment.actions().find(event.at("action").get<std::string>()),
                         record);
    } else if (type == "unavailable") {
      environment.block(state,
                        *environment.actions().find(event.at("action").get<std::string>()));
    } else if (type == "finalize") {
      environment.finish(state);
    }
  }
  return state.probs;
}

Outcome service_replay() {
  auto cfg = smoke_config("service");
  cfg["synthetic"]["missing_rate"] = 0.3;
  cfg["service"]["log_dir"] = (work_root() / "service" / "sessions").string();
  interface::run_gen_data(cfg);
  interface::run_train_guesser(cfg);
  interface::run_train_agent(cfg);
  auto sessions = interface::make_session_manager(cfg);
  const auto& environment = sessions->environment();
  const auto& schema = environment.schema();
  const auto& actions = environment.actions();
  const auto raw = interface::load_configured_dataset(cfg);

  Rng rng(12);
  std::size_t exact = 0;
  std::size_t total = 0;
  std::size_t events = 0;
  for (auto i : raw.indices(data::Split::kTest)) {
    const auto& record = raw.records[i];
    json features = json::object();
    for (std::size_t j : schema.free_features()) {
      features[schema.feature(j).name] = raw_json(record.values[j]);
    }
    json request = {{"features", features}};
    if (uniform01(rng) < 0.5) request["budget"] = 1.0 + uniform_index(rng, 8);
    const auto id = sessions->create_session(request).at("session_id").get<std::string>();
    bool finalized = false;
    for (int turn = 0; turn < 12 && !finalized; ++turn) {
      const double u = uniform01(rng);
      if (u < 0.1) {
        sessions->finalize(id);
        finalized = true;
        continue;
      }
      const auto suggestion = sessions->get_suggestion(id, 1 + uniform_index(rng, 3));
      const auto& list = suggestion.at("suggestions");
      if (list.empty()) {
        sessions->finalize(id);
        finalized = true;
        continue;
      }
      const auto& pick = list[uniform_index(rng, list.size())];
      const auto a = *actions.find(pick.at("action").get<std::string>());
      const std::size_t j = actions.features(a).front();
      const auto& value = record.values[j];
      if (data::is_absent(value) || uniform01(rng) < 0.1) {
        sessions->observe(id, {{"action", actions.name(a)}, {"unavailable", true}});
      } else {
        sessions->observe(id, {{"action", actions.name(a)}, {"value", raw_json(value)}});
      }
    }
    const auto log = sessions->export_log(id);
    events += log.at("events").size();
    const auto replayed = replay_session(environment, log);
    if (json(replayed) == log.at("probabilities")) ++exact;
    ++total;

    // the on-disk log carries the same events
    std::ifstream in(work_root() / "service" / "sessions" / (id + ".jsonl"));
    std::string line;
    json disk = json::array();
    while (std::getline(in, line)) disk.push_back(json::parse(line));
    if (disk != log.at("events")) --exact;
  }
  return {exact == total && total > 0,
          fmt::format("{}/{} session logs ({} events) replay to bit-identical probabilities; "
                      "service runs headless with no UI build",
                      exact, total, events)};
}

struct Criterion {
  const char* name;
  const char* title;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"telescoping", "Reward telescoping", telescoping},
    {"safety", "Budget/sparsity safety", safety},
    {"gradients", "Gradient correctness", gradients},
    {"metrics", "Metric oracles", metric_oracles},
    {"replay", "Replay distribution", replay_distribution},
    {"adversarial", "Adversarial masking fidelity", adversarial_fidelity},
    {"robust", "Robust-pretraining ablation", robust_ablation},
    {"quality", "Agent quality vs oracle", agent_quality},
    {"sweep", "Budget sweep trend", budget_sweep_trend},
    {"personalization", "Personalization signature", personalization},
    {"determinism", "Determinism & persistence", determinism},
    {"service", "Service replay", service_replay},
};

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  std::set<std::string> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--list") {
      for (const auto& c : kCriteria) std::printf("%s\t%s\n", c.name, c.title);
      return 0;
    }
    wanted.insert(arg);
  }
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (!wanted.empty() && !wanted.count(c.name)) continue;
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    if (!out.pass) ++failures;
    std::printf("%s  %s [%.1fs]: %s\n", out.pass ? "PASS" : "FAIL", c.title, seconds_since(t0),
                out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
