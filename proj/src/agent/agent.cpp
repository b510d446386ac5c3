#include "seqacq/agent/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "seqacq/errors.hpp"
#include "seqacq/numerics/checkpoint.hpp"
#include "seqacq/numerics/losses.hpp"

namespace seqacq::agent {

std::size_t encoding_width(const data::FeatureSchema& schema) {
  return schema.total_slot_width() + schema.size() + 1;
}

std::vector<double> encode_state(const env::EpisodeState& state) {
  const auto& m = state.masked;
  std::vector<double> out;
  out.reserve(m.slots.size() + m.mask.size() + 1);
  out.insert(out.end(), m.slots.begin(), m.slots.end());
  for (auto bit : m.mask) out.push_back(bit ? 1.0 : 0.0);
  out.push_back(state.budget > 0.0 ? (state.budget - state.spent) / state.budget : 0.0);
  return out;
}

namespace {

Action masked_argmax(std::span<const double> q, std::span<const Action> valid) {
  Action best = valid.front();
  for (Action a : valid) {
    if (a >= q.size()) throw ContractError("select_action: action index beyond Q width");
    if (q[a] > q[best] || (q[a] == q[best] && a < best)) best = a;
  }
  return best;
}

}  // namespace

Action select_action(std::span<const double> q, std::span<const Action> valid,
                     double epsilon, Rng& rng) {
  if (valid.empty()) throw ContractError("select_action: empty valid action set");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ContractError("select_action: epsilon must lie in [0, 1]");
  }
  if (epsilon > 0.0 && uniform01(rng) < epsilon) {
    return valid[uniform_index(rng, valid.size())];
  }
  return masked_argmax(q, valid);
}

std::vector<Action> rank_actions(std::span<const double> q, std::span<const Action> valid) {
  std::vector<Action> out(valid.begin(), valid.end());
  std::stable_sort(out.begin(), out.end(), [&](Action a, Action b) {
    if (q[a] != q[b]) return q[a] > q[b];
    return a < b;
  });
  return out;
}

double td_target(double reward, bool done, std::span<const double> q_online_next,
                 std::span<const double> q_target_next,
                 std::span<const std::uint8_t> next_valid, double gamma) {
  if (done) return reward;
  std::vector<Action> valid;
  for (Action a = 0; a < next_valid.size(); ++a) {
    if (next_valid[a]) valid.push_back(a);
  }
  if (valid.empty()) throw ContractError("td_target: non-terminal transition without valid actions");
  const Action best = masked_argmax(q_online_next, valid);
  return reward + gamma * q_target_next[best];
}

double QNetPair::td_target(const Transition& t, double gamma) const {
  if (t.done) return t.reward;
  const auto q_online = numerics::infer(online, t.next_state);
  const auto q_target = numerics::infer(target, t.next_state);
  return agent::td_target(t.reward, false, q_online, q_target, t.next_valid, gamma);
}

QNetPair make_qnets(std::size_t input_width, std::size_t num_actions,
                    const std::vector<std::size_t>& hidden, std::size_t sync_interval,
                    Rng& rng) {
  if (sync_interval == 0) throw ConfigError("target sync interval must be positive");
  std::vector<std::size_t> widths{input_width};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(num_actions);
  QNetPair nets;
  nets.online = numerics::DenseNet::random(widths, rng);
  nets.target = numerics::DenseNet(widths);
  nets.sync_interval = sync_interval;
  nets.sync();
  return nets;
}

// --- policies ------------------------------------------------------------------

std::vector<double> DqnPolicy::q_values(const env::EpisodeState& state) const {
  return numerics::infer(online_, encode_state(state));
}

Action DqnPolicy::choose(const env::Environment& environment, const env::EpisodeState& state,
                         const data::PatientRecord&, Rng& rng) const {
  const auto valid = environment.valid_actions(state);
  return select_action(q_values(state), valid, epsilon_, rng);
}

Action RandomPolicy::choose(const env::Environment& environment,
                            const env::EpisodeState& state, const data::PatientRecord&,
                            Rng& rng) const {
  const auto valid = environment.valid_actions(state);
  // GUESS only once nothing else is affordable.
  if (valid.size() > 1) return valid[uniform_index(rng, valid.size() - 1)];
  return valid.front();
}

Action GreedyMyopicPolicy::choose(const env::Environment& environment,
                                  const env::EpisodeState& state,
                                  const data::PatientRecord& patient, Rng&) const {
  const auto valid = environment.valid_actions(state);
  const auto& actions = environment.actions();
  const double base = state.probs.at(patient.label);
  Action best = actions.guess();
  double best_score = 0.0;
  for (Action a : valid) {
    if (actions.is_guess(a)) continue;
    env::EpisodeState next = state;
    environment.reveal(next, a, patient);
    const double gain = next.probs[patient.label] - base;
    const double cost = actions.cost(a);
    const double score = cost > 0.0 ? gain / cost : gain;
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return best;
}

Action RevealAllPolicy::choose(const env::Environment& environment,
                               const env::EpisodeState& state, const data::PatientRecord&,
                               Rng&) const {
  return environment.valid_actions(state).front();
}

std::unique_ptr<Policy> baseline_policy(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kRandom:
      return std::make_unique<RandomPolicy>();
    case BaselineKind::kGreedyMyopic:
      return std::make_unique<GreedyMyopicPolicy>();
    case BaselineKind::kRevealAll:
      return std::make_unique<RevealAllPolicy>();
  }
  throw ConfigError("unknown baseline kind");
}

BaselineKind parse_baseline(std::string_view name) {
  if (name == "random") return BaselineKind::kRandom;
  if (name == "greedy_myopic") return BaselineKind::kGreedyMyopic;
  if (name == "reveal_all") return BaselineKind::kRevealAll;
  throw ConfigError("unknown baseline policy '" + std::string(name) +
                    "' (expected random, greedy_myopic or reveal_all)");
}

EpisodeOutcome run_episode(const env::Environment& environment, const Policy& policy,
                           const data::PatientRecord& patient, Rng& rng) {
  EpisodeOutcome out;
  env::EpisodeState state = environment.reset(patient);
  out.initial_prob_correct = state.probs.at(patient.label);
  while (!state.terminal) {
    const Action a = policy.choose(environment, state, patient, rng);
    if (!environment.is_valid(state, a)) {
      throw ContractError("policy '" + policy.name() + "' chose invalid action " +
                          std::to_string(a) + " for patient '" + patient.id + "'");
    }
    const auto result = environment.step(state, a, patient);
    out.rewards.push_back(result.reward);
    out.total_reward += result.reward;
    out.trace.push_back({patient.id, state.steps, environment.actions().name(a),
                         result.info.cost, result.reward, result.info.prob_correct});
  }
  out.final_state = std::move(state);
  return out;
}

// --- training --------------------------------------------------------------------

double epsilon_at(const TrainConfig& c, std::size_t episode) {
  const double horizon = c.epsilon_decay_fraction * static_cast<double>(c.episodes);
  if (c.epsilon_start <= 0.0 || horizon <= 0.0) return c.epsilon_end;
  const double t = static_cast<double>(episode) / horizon;
  if (t >= 1.0) return c.epsilon_end;
  return c.epsilon_start * std::pow(c.epsilon_end / c.epsilon_start, t);
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"episodes", c.episodes},
          {"batch_size", c.batch_size},
          {"epsilon_start", c.epsilon_start},
          {"epsilon_end", c.epsilon_end},
          {"epsilon_decay_fraction", c.epsilon_decay_fraction},
          {"gamma", c.gamma},
          {"learning_rate", c.adam.learning_rate},
          {"target_sync", c.target_sync},
          {"hidden", c.hidden},
          {"replay",
           {{"capacity", c.replay.capacity},
            {"alpha", c.replay.alpha},
            {"beta_start", c.replay.beta_start},
            {"beta_end", c.replay.beta_end},
            {"priority_floor", c.replay.priority_floor}}},
          {"learn_every", c.learn_every},
          {"huber_delta", c.huber_delta},
          {"eval_every", c.eval_every},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& doc) {
  TrainConfig c;
  c.episodes = doc.value("episodes", c.episodes);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.epsilon_start = doc.value("epsilon_start", c.epsilon_start);
  c.epsilon_end = doc.value("epsilon_end", c.epsilon_end);
  c.epsilon_decay_fraction = doc.value("epsilon_decay_fraction", c.epsilon_decay_fraction);
  c.gamma = doc.value("gamma", c.gamma);
  c.adam.learning_rate = doc.value("learning_rate", c.adam.learning_rate);
  c.target_sync = doc.value("target_sync", c.target_sync);
  c.hidden = doc.value("hidden", c.hidden);
  if (doc.contains("replay")) {
    const auto& r = doc.at("replay");
    c.replay.capacity = r.value("capacity", c.replay.capacity);
    c.replay.alpha = r.value("alpha", c.replay.alpha);
    c.replay.beta_start = r.value("beta_start", c.replay.beta_start);
    c.replay.beta_end = r.value("beta_end", c.replay.beta_end);
    c.replay.priority_floor = r.value("priority_floor", c.replay.priority_floor);
  }
  c.learn_every = doc.value("learn_every", c.learn_every);
  c.huber_delta = doc.value("huber_delta", c.huber_delta);
  c.eval_every = doc.value("eval_every", c.eval_every);
  c.seed = doc.value("seed", c.seed);
  return c;
}

namespace {

void validate(const TrainConfig& c) {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(c.epsilon_start) || !in_unit(c.epsilon_end)) {
    throw ConfigError("epsilon must lie in [0, 1]");
  }
  if (!(c.epsilon_end > 0.0) && c.epsilon_start > 0.0) {
    throw ConfigError("exponential epsilon decay needs epsilon_end > 0");
  }
  if (!(c.gamma > 0.0 && c.gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (c.learn_every == 0) throw ConfigError("learn_every must be positive");
}

struct Learner {
  QNetPair& nets;
  PrioritizedReplay& replay;
  numerics::Adam& adam;
  const TrainConfig& config;
  std::size_t steps = 0;
  std::uint64_t last_sync_checksum = 0;

  void learn(double beta, Rng& rng, std::size_t episode) {
    const auto batch = replay.sample(config.batch_size, beta, rng);
    std::vector<double> grads(nets.online.param_count(), 0.0);
    std::vector<double> td_errors(batch.handles.size());
    std::vector<double> loss_grad(nets.online.output_width(), 0.0);
    for (std::size_t i = 0; i < batch.handles.size(); ++i) {
      const Transition& t = replay.at(batch.handles[i].slot);
      const double target = nets.td_target(t, config.gamma);
      auto fwd = numerics::forward(nets.online, t.state);
      const double q = fwd.logits[t.action];
      const auto huber = numerics::huber_loss(q, target, config.huber_delta);
      if (!std::isfinite(huber.loss)) {
        throw TrainingError("non-finite Huber loss at episode " + std::to_string(episode));
      }
      td_errors[i] = q - target;
      std::fill(loss_grad.begin(), loss_grad.end(), 0.0);
      loss_grad[t.action] = batch.weights[i] * huber.grad /
                            static_cast<double>(batch.handles.size());
      numerics::backward_accumulate(nets.online, fwd.cache, loss_grad, grads);
    }
    try {
      adam.step(nets.online.mutable_params(), grads,
                [this](std::size_t i) { return nets.online.param_name(i); });
    } catch (const TrainingError& e) {
      throw TrainingError("episode " + std::to_string(episode) + ": " + e.what());
    }
    replay.update_priorities(batch.handles, td_errors);
    steps += 1;
    if (steps % nets.sync_interval == 0) {
      nets.sync();
      last_sync_checksum = numerics::checksum(nets.target.params());
    }
  }
};

}  // namespace

TrainResult train(const env::Environment& environment, const data::Dataset& dataset,
                  const TrainConfig& config, const EvalHook& eval_hook) {
  validate(config);
  Rng rng(config.seed);
  Rng init_rng(derive_seed(config.seed, 11));
  TrainResult result;
  result.nets = make_qnets(encoding_width(environment.schema()), environment.actions().size(),
                           config.hidden, config.target_sync, init_rng);
  result.last_sync_checksum = numerics::checksum(result.nets.target.params());
  if (config.episodes == 0) return result;

  const auto train_ids = dataset.indices(data::Split::kTrain);
  if (train_ids.empty()) throw TrainingError("train: dataset has no training records");

  PrioritizedReplay replay(config.replay);
  numerics::Adam adam(result.nets.online.param_count(), config.adam);
  Learner learner{result.nets, replay, adam, config};
  std::size_t env_steps = 0;
  const double total = static_cast<double>(config.episodes);

  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    const double epsilon = epsilon_at(config, episode);
    const double progress = static_cast<double>(episode) / total;
    const double beta =
        config.replay.beta_start + (config.replay.beta_end - config.replay.beta_start) * progress;
    const auto& patient = dataset.records[train_ids[uniform_index(rng, train_ids.size())]];
    auto state = environment.reset(patient);
    auto encoded = encode_state(state);
    double episode_return = 0.0;
    while (!state.terminal) {
      const auto valid = environment.valid_actions(state);
      const auto q = numerics::infer(result.nets.online, encoded);
      const Action a = select_action(q, valid, epsilon, rng);
      const auto step = environment.step(state, a, patient);
      if (!std::isfinite(step.reward)) {
        throw TrainingError("non-finite reward at episode " + std::to_string(episode));
      }
      episode_return += step.reward;
      Transition t;
      t.state = std::move(encoded);
      t.action = a;
      t.reward = step.reward;
      t.done = step.done;
      t.next_state = encode_state(state);
      t.next_valid = step.done ? std::vector<std::uint8_t>(environment.actions().size(), 0)
                               : environment.valid_mask(state);
      encoded = t.next_state;
      const double td = result.nets.td_target(t, config.gamma) - q[a];
      replay.push(std::move(t), td);
      env_steps += 1;
      if (env_steps % config.learn_every == 0 && replay.size() >= config.batch_size) {
        learner.learn(beta, rng, episode);
      }
    }
    CurvePoint point{episode, episode_return, epsilon, std::nullopt};
    if (eval_hook && config.eval_every > 0 && (episode + 1) % config.eval_every == 0) {
      point.eval_auroc = eval_hook(DqnPolicy(result.nets.online));
    }
    result.curve.push_back(point);
  }
  result.learn_steps = learner.steps;
  if (learner.last_sync_checksum != 0) result.last_sync_checksum = learner.last_sync_checksum;
  spdlog::debug("agent training: {} episodes, {} learn steps", config.episodes, learner.steps);
  return result;
}

void write_learning_curve(const std::filesystem::path& path,
                          const std::vector<CurvePoint>& curve) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write learning curve " + path.string());
  for (const auto& p : curve) {
    nlohmann::json row{{"episode", p.episode}, {"return", p.episode_return}};
    if (p.eval_auroc) row["eval_auroc"] = *p.eval_auroc;
    out << row.dump() << '\n';
  }
}

// --- checkpoint --------------------------------------------------------------------

void save_agent(const std::filesystem::path& path, const AgentCheckpoint& ck) {
  numerics::CheckpointEnvelope env;
  env.kind = "agent";
  env.schema_hash = ck.schema_hash;
  env.architecture = {{"widths", ck.nets.online.widths()},
                      {"sync_interval", ck.nets.sync_interval}};
  const auto online = ck.nets.online.params();
  const auto target = ck.nets.target.params();
  env.arrays.push_back({"online", {online.begin(), online.end()}});
  env.arrays.push_back({"target", {target.begin(), target.end()}});
  env.extra = {{"train", train_config_to_json(ck.train_config)},
               {"env", env::env_config_to_json(ck.env_config)}};
  numerics::write_checkpoint(path, env);
}

AgentCheckpoint load_agent(const std::filesystem::path& path,
                           const data::FeatureSchema& schema) {
  const auto env = numerics::read_checkpoint(path, "agent");
  if (env.schema_hash != schema.hash()) {
    throw PairingError("agent checkpoint " + path.string() + " was trained on schema " +
                       env.schema_hash + ", not " + schema.hash());
  }
  AgentCheckpoint ck;
  ck.schema_hash = env.schema_hash;
  const auto widths = env.architecture.at("widths").get<std::vector<std::size_t>>();
  ck.nets.online = numerics::DenseNet(widths);
  ck.nets.target = numerics::DenseNet(widths);
  const auto& online = env.array("online").values;
  const auto& target = env.array("target").values;
  if (online.size() != ck.nets.online.param_count() ||
      target.size() != ck.nets.target.param_count()) {
    throw CheckpointError("agent checkpoint " + path.string() +
                          ": parameter count does not match architecture");
  }
  if (widths.front() != encoding_width(schema)) {
    throw PairingError("agent checkpoint " + path.string() +
                       ": input width does not match the schema encoding");
  }
  ck.nets.online.set_params(online);
  ck.nets.target.set_params(target);
  ck.nets.sync_interval = env.architecture.value("sync_interval", std::size_t{250});
  ck.train_config = train_config_from_json(env.extra.at("train"));
  ck.env_config = env::env_config_from_json(env.extra.at("env"), schema);
  return ck;
}

}  // namespace seqacq::agent
