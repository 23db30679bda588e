#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trustsim/behavior_table.hpp"
#include "trustsim/error.hpp"
#include "trustsim/random.hpp"
#include "trustsim/simulator.hpp"
#include "trustsim/trust_model.hpp"
#include "trustsim/types.hpp"
#include "trustsim/user_model.hpp"

namespace trustsim {

struct RewardConfig {
  double score_weight = 0.5;
  double trust_weight = 0.5;
  /// Score normalizer: the best option of a c-option task is worth c times this.
  double points_per_option = kPointsPerOption;

  void validate() const {
    if (!std::isfinite(score_weight) || !std::isfinite(trust_weight))
      throw Error(ErrorKind::InvalidConfig, "reward weights must be finite");
    if (!(points_per_option > 0.0) || !std::isfinite(points_per_option))
      throw Error(ErrorKind::InvalidConfig, "score normalizer must be > 0");
  }
};

inline double compute_reward(const RewardConfig& cfg, double game_score, int complexity, int estimated_trust) {
  const double score_term = game_score / (cfg.points_per_option * complexity);
  const double trust_term = (estimated_trust - 1) / 4.0;
  return cfg.score_weight * score_term + cfg.trust_weight * trust_term;
}

struct EnvState {
  int step = 1;
  int complexity = 3;
  TraitTuple traits;
  std::optional<SimulatedTurn> last_turn;
  int estimated_trust = kNeutralTrust;

  bool operator==(const EnvState&) const = default;
};

struct StepResult {
  EnvState state;
  double reward = 0.0;
  bool done = false;
};

/// Twelve-step episodes over the simulated user. The state carries the
/// classifier's trust estimate; annotated trust is never consulted.
///
/// Holds references to the table, trait model and classifier, which must
/// outlive the environment and may be shared between instances.
class ProactiveDialogEnv {
 public:
  ProactiveDialogEnv(const BehaviorTable& table, const TraitDistributions& traits, const TrustClassifier& classifier,
                     RewardConfig reward = {}, SimConfig sim = {})
      : table_(&table), traits_(&traits), classifier_(&classifier), reward_(reward), sim_(sim) {
    reward_.validate();
    validate(*traits_);
  }

  /// Samples a fresh user from rng.substream("user"); turns use
  /// rng.substream("turns").substream(step).
  EnvState reset(const RandomStream& rng) {
    user_ = sample_user(*traits_, rng.substream("user"), "sim-user");
    turns_ = rng.substream("turns");
    history_.clear();
    state_ = EnvState{};
    state_.traits = binarize_traits(user_);
    active_ = true;
    return state_;
  }

  StepResult step(ProactiveAct act) {
    if (!active_) throw Error(ErrorKind::EpisodeFinished, "episode finished; call reset");
    const int s = state_.step;
    const SimulatedTurn turn =
        simulate_turn(*table_, user_, s, act, turns_.substream(static_cast<std::uint64_t>(s)), sim_);
    const Interaction current{s, act, turn.difficulty, turn.duration, turn.game_score, turn.help_request,
                              turn.suggestion_request};
    const FeatureVector fv = extract_features(user_, history_, current, classifier_->schema());
    const int trust = predict_trust(*classifier_, fv).label;
    history_.push_back({current, trust});

    StepResult r;
    r.reward = compute_reward(reward_, turn.game_score, complexity_of_step(s), trust);
    r.done = s == kStepsPerDialog;
    state_.step = r.done ? s : s + 1;
    state_.complexity = complexity_of_step(state_.step);
    state_.last_turn = turn;
    state_.estimated_trust = trust;
    r.state = state_;
    active_ = !r.done;
    return r;
  }

  const EnvState& state() const noexcept { return state_; }
  const UserProfile& user() const noexcept { return user_; }
  bool active() const noexcept { return active_; }
  const RewardConfig& reward_config() const noexcept { return reward_; }

 private:
  const BehaviorTable* table_;
  const TraitDistributions* traits_;
  const TrustClassifier* classifier_;
  RewardConfig reward_;
  SimConfig sim_;
  UserProfile user_;
  RandomStream turns_{0};
  std::vector<HistoryEntry> history_;
  EnvState state_;
  bool active_ = false;
};

// --- reference tabular learner ---------------------------------------------

inline constexpr int kNumDiscreteStates = kStepsPerDialog * kNumTraitTuples * kNumTrustClasses;

/// (step, trait tuple, trust label) flattened to 0..479.
inline int state_index(const EnvState& s) {
  return ((s.step - 1) * kNumTraitTuples + s.traits.index()) * kNumTrustClasses + (s.estimated_trust - 1);
}

template <typename Env>
concept EpisodicEnv = requires(Env env, const RandomStream& rng, ProactiveAct a) {
  { env.reset(rng) } -> std::convertible_to<EnvState>;
  { env.step(a) } -> std::convertible_to<StepResult>;
};

struct QLearningParams {
  double alpha = 0.5;
  double gamma = 0.9;
  double epsilon = 0.3;
  double initial_q = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorKind::InvalidHyperparams, "alpha must be in (0, 1]");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(ErrorKind::InvalidHyperparams, "gamma must be in [0, 1]");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error(ErrorKind::InvalidHyperparams, "epsilon must be in [0, 1]");
    if (!std::isfinite(initial_q)) throw Error(ErrorKind::InvalidHyperparams, "initial_q must be finite");
  }
};

struct TabularPolicy {
  std::vector<std::array<double, kNumActs>> q;
  std::vector<std::array<std::uint64_t, kNumActs>> visits;
  std::vector<double> episode_returns;

  TabularPolicy() : q(kNumDiscreteStates), visits(kNumDiscreteStates) {}

  /// Lowest act index wins ties.
  ProactiveAct greedy(int state) const {
    const auto& row = q.at(static_cast<std::size_t>(state));
    return kAllActs[static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())];
  }
  ProactiveAct greedy(const EnvState& s) const { return greedy(state_index(s)); }

  std::uint64_t state_visits(int state) const {
    std::uint64_t n = 0;
    for (auto v : visits.at(static_cast<std::size_t>(state))) n += v;
    return n;
  }
};

/// Episode e resets from RandomStream(seed).substream("episodes").substream(e);
/// exploration draws from one "explore" stream.
template <EpisodicEnv Env>
TabularPolicy train_tabular_policy(Env& env, long long episodes, const QLearningParams& hp = {}) {
  if (episodes < 1) throw Error(ErrorKind::InvalidHyperparams, "episodes must be >= 1");
  hp.validate();
  TabularPolicy pol;
  for (auto& row : pol.q) row.fill(hp.initial_q);
  pol.episode_returns.reserve(static_cast<std::size_t>(episodes));
  const RandomStream root(hp.seed);
  const RandomStream episode_root = root.substream("episodes");
  RandomStream explore = root.substream("explore");

  for (long long e = 0; e < episodes; ++e) {
    EnvState s = env.reset(episode_root.substream(static_cast<std::uint64_t>(e)));
    double ret = 0.0;
    for (bool done = false; !done;) {
      const int si = state_index(s);
      ProactiveAct a = pol.greedy(si);
      if (explore.uniform() < hp.epsilon) a = kAllActs[explore.below(kNumActs)];
      const StepResult r = env.step(a);
      const int sn = state_index(r.state);
      const auto& next = pol.q[static_cast<std::size_t>(sn)];
      const double target = r.reward + (r.done ? 0.0 : hp.gamma * *std::max_element(next.begin(), next.end()));
      double& qa = pol.q[static_cast<std::size_t>(si)][static_cast<std::size_t>(act_index(a))];
      qa += hp.alpha * (target - qa);
      ++pol.visits[static_cast<std::size_t>(si)][static_cast<std::size_t>(act_index(a))];
      ret += r.reward;
      done = r.done;
      s = r.state;
    }
    pol.episode_returns.push_back(ret);
  }
  return pol;
}

// --- trajectories and serialization ----------------------------------------

struct TrajectoryStep {
  EnvState state;
  ProactiveAct action = ProactiveAct::None;
  double reward = 0.0;
  bool done = false;
  EnvState next_state;
};

/// One episode following `policy` (callable EnvState -> ProactiveAct).
template <EpisodicEnv Env, typename Policy>
std::vector<TrajectoryStep> rollout(Env& env, const RandomStream& rng, Policy&& policy) {
  std::vector<TrajectoryStep> traj;
  EnvState s = env.reset(rng);
  for (bool done = false; !done;) {
    const ProactiveAct a = policy(s);
    const StepResult r = env.step(a);
    traj.push_back({s, a, r.reward, r.done, r.state});
    done = r.done;
    s = r.state;
  }
  return traj;
}

inline nlohmann::ordered_json to_json(const EnvState& s) {
  nlohmann::ordered_json j;
  j["step"] = s.step;
  j["complexity"] = s.complexity;
  j["traits"] = s.traits.to_string();
  j["estimated_trust"] = s.estimated_trust;
  if (s.last_turn) {
    const auto& t = *s.last_turn;
    j["last_turn"] = {{"help_request", t.help_request}, {"suggestion_request", t.suggestion_request},
                      {"duration", t.duration},         {"difficulty", t.difficulty},
                      {"game_score", t.game_score},     {"used_fallback", t.used_fallback}};
  } else {
    j["last_turn"] = nullptr;
  }
  return j;
}

/// One JSON object per step: episode, state, action, reward, done.
inline void write_trajectory_jsonl(std::ostream& out, std::size_t episode, const std::vector<TrajectoryStep>& traj) {
  for (const auto& t : traj) {
    nlohmann::ordered_json j;
    j["episode"] = episode;
    j["state"] = to_json(t.state);
    j["action"] = std::string(to_string(t.action));
    j["reward"] = t.reward;
    j["done"] = t.done;
    out << j.dump() << '\n';
  }
}

inline nlohmann::ordered_json to_json(const TabularPolicy& p) {
  nlohmann::ordered_json j;
  j["format"] = "trustsim.tabular_policy";
  j["version"] = 1;
  j["state_layout"] = "((step-1)*8 + traits)*5 + (trust-1)";
  nlohmann::ordered_json states = nlohmann::ordered_json::array();
  for (int i = 0; i < kNumDiscreteStates; ++i) {
    const int trust = i % kNumTrustClasses + 1;
    const int tuple = (i / kNumTrustClasses) % kNumTraitTuples;
    const int step = i / (kNumTrustClasses * kNumTraitTuples) + 1;
    states.push_back({{"step", step},
                      {"traits", TraitTuple::from_index(tuple).to_string()},
                      {"trust", trust},
                      {"greedy", std::string(to_string(p.greedy(i)))},
                      {"q", p.q[static_cast<std::size_t>(i)]},
                      {"visits", p.visits[static_cast<std::size_t>(i)]}});
  }
  j["states"] = std::move(states);
  return j;
}

inline TabularPolicy tabular_policy_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "trustsim.tabular_policy" || j.value("version", 0) != 1)
      throw Error(ErrorKind::SchemaMismatch, "not a version-1 policy file");
    const auto& states = j.at("states");
    if (states.size() != static_cast<std::size_t>(kNumDiscreteStates))
      throw Error(ErrorKind::SchemaMismatch, "policy file must list 480 states");
    TabularPolicy p;
    for (std::size_t i = 0; i < states.size(); ++i) {
      p.q[i] = states[i].at("q").get<std::array<double, kNumActs>>();
      p.visits[i] = states[i].at("visits").get<std::array<std::uint64_t, kNumActs>>();
    }
    return p;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::SchemaMismatch, std::string("malformed policy file: ") + ex.what());
  }
}

}  // namespace trustsim
