#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "trustsim/behavior_table.hpp"
#include "trustsim/error.hpp"
#include "trustsim/random.hpp"
#include "trustsim/stats.hpp"
#include "trustsim/truncated_gaussian.hpp"
#include "trustsim/types.hpp"
#include "trustsim/user_model.hpp"

// Synthetic dialog corpora with a known generating process.
//
// Behavior of a simulated participant depends only on the binarized trait
// tuple, the agent's act and the task step, so the per-key parameters
// exported by generator_ground_truth() are the exact distributions the
// corpus was drawn from.
//
// Per exchange, given traits (e = expertise high, t = propensity high,
// a = affinity high), act and step s with complexity c:
//   help       ~ Bernoulli(logistic(help_intercept + help_per_complexity*(c-4)
//                          + help_low_expertise*(1-e) + help_low_affinity*(1-a) + help_act[act]))
//   suggestion ~ Bernoulli(logistic(sugg_intercept + sugg_low_expertise*(1-e)
//                          + sugg_high_trust*t + sugg_act[act]))
//   best option chosen with p = logistic(best_intercept + best_act[act]
//       + best_per_complexity*(c-4) + best_high_expertise*e
//       + best_trusting_advice*t*[act is Suggestion or Intervention]
//       + best_suggestion_request*S + best_help_request*H + score_drift*drift(s));
//     otherwise one of the remaining c-1 options uniformly. score = 10 * option.
//   duration ~ N(mu, duration_sd) truncated to (20, upper], with
//     mu = (duration_base + duration_per_option*c + duration_help*H
//           + duration_suggestion*S + duration_low_affinity*(1-a) + duration_act[act])
//          * (1 - duration_drift*drift(s))
//   difficulty = clamp(round(N(m, difficulty_sd)), 1, 5) with
//     m = difficulty_base + difficulty_per_complexity*(c-4)
//         + difficulty_low_expertise*(1-e) + difficulty_help*H + difficulty_act[act]
// where drift(s) = (s - 6.5) / 5.5 when step drift is enabled and 0 otherwise.
//
// Trust: a latent level starts at propensity + N(0, initial_sd), moves by a
// per-act delta each step (interventions use a negative delta for users
// with low propensity), drops when a help request met act None, rises when
// the best option was chosen, and is clamped to [1, 5]. Each of the four
// annotations is clamp(round(level + N(0, annotation_sd)), 1, 5).

namespace trustsim {

struct BehaviorProcess {
  double help_intercept = -1.6;
  double help_per_complexity = 0.35;
  double help_low_expertise = 0.9;
  double help_low_affinity = 0.4;
  std::array<double, kNumActs> help_act = {0.3, 0.0, -0.5, -0.3};

  double sugg_intercept = -1.3;
  double sugg_low_expertise = 0.7;
  double sugg_high_trust = 0.6;
  std::array<double, kNumActs> sugg_act = {0.3, 0.4, -0.6, -0.4};

  double best_intercept = -0.3;
  std::array<double, kNumActs> best_act = {0.0, 0.3, 0.9, 1.2};
  double best_per_complexity = -0.3;
  double best_high_expertise = 0.5;
  double best_trusting_advice = 0.6;
  double best_suggestion_request = 0.8;
  double best_help_request = 0.3;

  double duration_base = 30.0;
  double duration_per_option = 6.0;
  double duration_help = 12.0;
  double duration_suggestion = 8.0;
  double duration_low_affinity = 6.0;
  std::array<double, kNumActs> duration_act = {0.0, 3.0, 5.0, -4.0};
  double duration_sd = 10.0;

  double difficulty_base = 2.6;
  double difficulty_per_complexity = 0.4;
  double difficulty_low_expertise = 0.5;
  double difficulty_help = 0.4;
  std::array<double, kNumActs> difficulty_act = {0.2, 0.0, -0.3, -0.2};
  double difficulty_sd = 0.8;

  bool step_drift = true;
  double score_drift = 1.5;
  double duration_drift = 0.4;
};

struct TrustProcess {
  double initial_sd = 0.3;
  std::array<double, kNumActs> act_delta = {-0.05, 0.15, 0.25, 0.10};
  double intervention_low_propensity_delta = -0.45;
  double ignored_help_delta = -0.3;
  double best_choice_delta = 0.1;
  double annotation_sd = 0.35;
};

inline TraitDistributions default_generator_traits() {
  TraitDistributions d;
  d[NumericTrait::Age] = {34.0, 10.0, kAgeMin, kAgeMax};
  d[NumericTrait::TechnicalAffinity] = {3.4, 0.8, kScaleMin, kScaleMax};
  d[NumericTrait::TrustPropensity] = {3.1, 0.8, kScaleMin, kScaleMax};
  d[NumericTrait::DomainExpertise] = {2.8, 0.9, kScaleMin, kScaleMax};
  d[NumericTrait::Openness] = {3.6, 0.7, kScaleMin, kScaleMax};
  d[NumericTrait::Conscientiousness] = {3.8, 0.6, kScaleMin, kScaleMax};
  d[NumericTrait::Extraversion] = {3.1, 0.8, kScaleMin, kScaleMax};
  d[NumericTrait::Agreeableness] = {3.5, 0.6, kScaleMin, kScaleMax};
  d[NumericTrait::Neuroticism] = {2.8, 0.8, kScaleMin, kScaleMax};
  d.gender_probs = {0.55, 0.43, 0.02};
  return d;
}

struct GeneratorConfig {
  std::size_t dialogs = 308;
  TraitDistributions traits = default_generator_traits();
  std::array<double, kNumActs> act_probs = {0.25, 0.25, 0.25, 0.25};
  double duration_upper = kDefaultMaxDuration;
  BehaviorProcess behavior;
  TrustProcess trust;
};

inline void validate(const GeneratorConfig& c) {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
  if (c.dialogs < 1) bad("dialogs must be >= 1");
  try {
    validate(c.traits);
  } catch (const Error& e) {
    bad(e.what());
  }
  double sum = 0.0;
  for (double p : c.act_probs) {
    if (!(p >= 0.0)) bad("act probabilities must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) bad("act probabilities must sum to 1");
  if (!(c.duration_upper > kMinDuration)) bad("duration_upper must exceed 20");
  if (!(c.behavior.duration_sd >= 0.0) || !(c.behavior.difficulty_sd >= 0.0)) bad("behavior SDs must be >= 0");
  if (!(c.trust.initial_sd >= 0.0) || !(c.trust.annotation_sd >= 0.0)) bad("trust SDs must be >= 0");
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double step_drift(const BehaviorProcess& b, int step) {
  return b.step_drift ? (static_cast<double>(step) - 6.5) / 5.5 : 0.0;
}

/// Exact generating distribution for one (traits, act, step) context.
struct GroundTruthCell {
  double p_help = 0.0;
  double p_suggestion = 0.0;
  /// Indexed by request_combo(help, suggestion).
  std::array<double, kNumRequestCombos> p_best{};
  std::array<double, kNumRequestCombos> duration_mu{};
  double duration_sd = 0.0;
  std::array<std::array<double, kNumDifficultyClasses>, kNumRequestCombos> difficulty_probs{};

  double combo_prob(int combo) const {
    return (combo_help(combo) ? p_help : 1.0 - p_help) * (combo_suggestion(combo) ? p_suggestion : 1.0 - p_suggestion);
  }
};

inline GroundTruthCell ground_truth_cell(const BehaviorProcess& b, TraitTuple traits, ProactiveAct act, int step) {
  const int c = complexity_of_step(step);
  const double e = traits.domain_expertise_high ? 1.0 : 0.0;
  const double t = traits.trust_propensity_high ? 1.0 : 0.0;
  const double a = traits.technical_affinity_high ? 1.0 : 0.0;
  const auto ai = static_cast<std::size_t>(act_index(act));
  const double drift = step_drift(b, step);
  const bool advice = act == ProactiveAct::Suggestion || act == ProactiveAct::Intervention;

  GroundTruthCell g;
  g.p_help = logistic(b.help_intercept + b.help_per_complexity * (c - 4) + b.help_low_expertise * (1 - e) +
                      b.help_low_affinity * (1 - a) + b.help_act[ai]);
  g.p_suggestion = logistic(b.sugg_intercept + b.sugg_low_expertise * (1 - e) + b.sugg_high_trust * t + b.sugg_act[ai]);
  g.duration_sd = b.duration_sd;
  for (int combo = 0; combo < kNumRequestCombos; ++combo) {
    const double h = combo_help(combo) ? 1.0 : 0.0;
    const double s = combo_suggestion(combo) ? 1.0 : 0.0;
    const auto ci = static_cast<std::size_t>(combo);
    g.p_best[ci] = logistic(b.best_intercept + b.best_act[ai] + b.best_per_complexity * (c - 4) +
                            b.best_high_expertise * e + (advice ? b.best_trusting_advice * t : 0.0) +
                            b.best_suggestion_request * s + b.best_help_request * h + b.score_drift * drift);
    g.duration_mu[ci] = (b.duration_base + b.duration_per_option * c + b.duration_help * h + b.duration_suggestion * s +
                         b.duration_low_affinity * (1 - a) + b.duration_act[ai]) *
                        (1.0 - b.duration_drift * drift);
    const double m = b.difficulty_base + b.difficulty_per_complexity * (c - 4) + b.difficulty_low_expertise * (1 - e) +
                     b.difficulty_help * h + b.difficulty_act[ai];
    auto& probs = g.difficulty_probs[ci];
    if (b.difficulty_sd == 0.0) {
      probs = {};
      probs[static_cast<std::size_t>(std::clamp(static_cast<int>(std::lround(m)), 1, 5) - 1)] = 1.0;
    } else {
      double prev = 0.0;
      for (int k = 1; k <= 5; ++k) {
        const double cdf = k == 5 ? 1.0 : normal_cdf((k + 0.5 - m) / b.difficulty_sd);
        probs[static_cast<std::size_t>(k - 1)] = cdf - prev;
        prev = cdf;
      }
    }
  }
  return g;
}

/// P(trait > 3) under a truncated Gaussian trait distribution.
inline double prob_high(const TruncatedGaussianParams& p) {
  if (p.sd == 0.0) return is_high_trait(std::clamp(p.mean, p.lo, p.hi)) ? 1.0 : 0.0;
  const double lo = normal_cdf((p.lo - p.mean) / p.sd);
  const double hi = normal_cdf((p.hi - p.mean) / p.sd);
  const double mid = normal_cdf((kTraitThreshold - p.mean) / p.sd);
  return (hi - mid) / (hi - lo);
}

/// Population probability of each trait tuple (traits sampled independently).
inline std::array<double, kNumTraitTuples> trait_tuple_probs(const TraitDistributions& d) {
  const double pe = prob_high(d[NumericTrait::DomainExpertise]);
  const double pt = prob_high(d[NumericTrait::TrustPropensity]);
  const double pa = prob_high(d[NumericTrait::TechnicalAffinity]);
  std::array<double, kNumTraitTuples> out{};
  for (int i = 0; i < kNumTraitTuples; ++i) {
    const auto t = TraitTuple::from_index(i);
    out[static_cast<std::size_t>(i)] = (t.domain_expertise_high ? pe : 1 - pe) *
                                       (t.trust_propensity_high ? pt : 1 - pt) *
                                       (t.technical_affinity_high ? pa : 1 - pa);
  }
  return out;
}

struct SyntheticCorpus {
  Corpus corpus;
  GeneratorConfig config;
  std::uint64_t seed = 0;
};

namespace detail {

inline int clamp_likert(double x) { return std::clamp(static_cast<int>(std::lround(x)), kLikertMin, kLikertMax); }

inline std::string synthetic_user_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "u%04zu", i + 1);
  return buf;
}

}  // namespace detail

/// Deterministic for a fixed (config, seed). Dialog i draws only from the
/// substream keyed by i.
inline SyntheticCorpus generate_synthetic_corpus(const GeneratorConfig& config, std::uint64_t seed) {
  validate(config);
  const BehaviorProcess& b = config.behavior;
  const TrustProcess& tp = config.trust;
  const RandomStream root(seed);
  SyntheticCorpus out;
  out.config = config;
  out.seed = seed;
  out.corpus.dialogs.reserve(config.dialogs);
  for (std::size_t i = 0; i < config.dialogs; ++i) {
    const RandomStream ds = root.substream(static_cast<std::uint64_t>(i));
    Dialog d;
    d.user = sample_user(config.traits, ds.substream("user"), detail::synthetic_user_id(i));
    const TraitTuple traits = binarize_traits(d.user);
    const bool low_propensity = !traits.trust_propensity_high;

    RandomStream trust_rng = ds.substream("trust");
    double level = std::clamp(d.user.trust_propensity + tp.initial_sd * trust_rng.normal(), kScaleMin, kScaleMax);

    for (int step = 1; step <= kStepsPerDialog; ++step) {
      RandomStream st = ds.substream(static_cast<std::uint64_t>(step));
      Exchange& e = d.exchanges[static_cast<std::size_t>(step - 1)];
      e.dialog_id = d.user.user_id;
      e.step = step;
      e.complexity = complexity_of_step(step);
      {
        RandomStream r = st.substream("act");
        e.proactive_act = static_cast<ProactiveAct>(r.categorical(config.act_probs));
      }
      const GroundTruthCell g = ground_truth_cell(b, traits, e.proactive_act, step);
      {
        RandomStream r = st.substream("requests");
        e.help_request = r.uniform() < g.p_help;
        e.suggestion_request = r.uniform() < g.p_suggestion;
      }
      const auto combo = static_cast<std::size_t>(request_combo(e.help_request, e.suggestion_request));
      bool chose_best;
      {
        RandomStream r = st.substream("option");
        chose_best = r.uniform() < g.p_best[combo];
        const int option = chose_best ? e.complexity : 1 + static_cast<int>(r.below(static_cast<std::uint64_t>(e.complexity - 1)));
        e.game_score = kPointsPerOption * option;
      }
      {
        RandomStream r = st.substream("duration");
        e.duration = sample_truncated_gaussian(g.duration_mu[combo], g.duration_sd, kMinDuration, config.duration_upper, r);
        if (e.duration <= kMinDuration) e.duration = std::nextafter(kMinDuration, config.duration_upper);
      }
      {
        RandomStream r = st.substream("difficulty");
        e.difficulty = static_cast<int>(r.categorical(g.difficulty_probs[combo])) + 1;
      }

      double delta = tp.act_delta[static_cast<std::size_t>(act_index(e.proactive_act))];
      if (e.proactive_act == ProactiveAct::Intervention && low_propensity) delta = tp.intervention_low_propensity_delta;
      if (e.proactive_act == ProactiveAct::None && e.help_request) delta += tp.ignored_help_delta;
      if (chose_best) delta += tp.best_choice_delta;
      level = std::clamp(level + delta, kScaleMin, kScaleMax);
      {
        RandomStream r = st.substream("annotations");
        e.trust = detail::clamp_likert(level + tp.annotation_sd * r.normal());
        e.competence = detail::clamp_likert(level + tp.annotation_sd * r.normal());
        e.reliability = detail::clamp_likert(level + tp.annotation_sd * r.normal());
        e.predictability = detail::clamp_likert(level + tp.annotation_sd * r.normal());
      }
    }
    out.corpus.dialogs.push_back(std::move(d));
  }
  return out;
}

// --- config and ground-truth files ------------------------------------------

namespace detail {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const GeneratorConfig& c) {
  const auto& b = c.behavior;
  const auto& t = c.trust;
  nlohmann::ordered_json j;
  j["format"] = "trustsim.generator_config";
  j["version"] = 1;
  j["dialogs"] = c.dialogs;
  j["traits"] = to_json(c.traits);
  j["act_probs"] = c.act_probs;
  j["duration_upper"] = c.duration_upper;
  j["behavior"] = {
      {"help_intercept", b.help_intercept},
      {"help_per_complexity", b.help_per_complexity},
      {"help_low_expertise", b.help_low_expertise},
      {"help_low_affinity", b.help_low_affinity},
      {"help_act", b.help_act},
      {"sugg_intercept", b.sugg_intercept},
      {"sugg_low_expertise", b.sugg_low_expertise},
      {"sugg_high_trust", b.sugg_high_trust},
      {"sugg_act", b.sugg_act},
      {"best_intercept", b.best_intercept},
      {"best_act", b.best_act},
      {"best_per_complexity", b.best_per_complexity},
      {"best_high_expertise", b.best_high_expertise},
      {"best_trusting_advice", b.best_trusting_advice},
      {"best_suggestion_request", b.best_suggestion_request},
      {"best_help_request", b.best_help_request},
      {"duration_base", b.duration_base},
      {"duration_per_option", b.duration_per_option},
      {"duration_help", b.duration_help},
      {"duration_suggestion", b.duration_suggestion},
      {"duration_low_affinity", b.duration_low_affinity},
      {"duration_act", b.duration_act},
      {"duration_sd", b.duration_sd},
      {"difficulty_base", b.difficulty_base},
      {"difficulty_per_complexity", b.difficulty_per_complexity},
      {"difficulty_low_expertise", b.difficulty_low_expertise},
      {"difficulty_help", b.difficulty_help},
      {"difficulty_act", b.difficulty_act},
      {"difficulty_sd", b.difficulty_sd},
      {"step_drift", b.step_drift},
      {"score_drift", b.score_drift},
      {"duration_drift", b.duration_drift},
  };
  j["trust"] = {
      {"initial_sd", t.initial_sd},
      {"act_delta", t.act_delta},
      {"intervention_low_propensity_delta", t.intervention_low_propensity_delta},
      {"ignored_help_delta", t.ignored_help_delta},
      {"best_choice_delta", t.best_choice_delta},
      {"annotation_sd", t.annotation_sd},
  };
  return j;
}

/// Keys absent from the file keep their defaults.
inline GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  using detail::read_opt;
  GeneratorConfig c;
  try {
    read_opt(j, "dialogs", c.dialogs);
    if (j.contains("traits")) c.traits = trait_distributions_from_json(j.at("traits"));
    read_opt(j, "act_probs", c.act_probs);
    read_opt(j, "duration_upper", c.duration_upper);
    if (j.contains("behavior")) {
      const auto& bj = j.at("behavior");
      auto& b = c.behavior;
      read_opt(bj, "help_intercept", b.help_intercept);
      read_opt(bj, "help_per_complexity", b.help_per_complexity);
      read_opt(bj, "help_low_expertise", b.help_low_expertise);
      read_opt(bj, "help_low_affinity", b.help_low_affinity);
      read_opt(bj, "help_act", b.help_act);
      read_opt(bj, "sugg_intercept", b.sugg_intercept);
      read_opt(bj, "sugg_low_expertise", b.sugg_low_expertise);
      read_opt(bj, "sugg_high_trust", b.sugg_high_trust);
      read_opt(bj, "sugg_act", b.sugg_act);
      read_opt(bj, "best_intercept", b.best_intercept);
      read_opt(bj, "best_act", b.best_act);
      read_opt(bj, "best_per_complexity", b.best_per_complexity);
      read_opt(bj, "best_high_expertise", b.best_high_expertise);
      read_opt(bj, "best_trusting_advice", b.best_trusting_advice);
      read_opt(bj, "best_suggestion_request", b.best_suggestion_request);
      read_opt(bj, "best_help_request", b.best_help_request);
      read_opt(bj, "duration_base", b.duration_base);
      read_opt(bj, "duration_per_option", b.duration_per_option);
      read_opt(bj, "duration_help", b.duration_help);
      read_opt(bj, "duration_suggestion", b.duration_suggestion);
      read_opt(bj, "duration_low_affinity", b.duration_low_affinity);
      read_opt(bj, "duration_act", b.duration_act);
      read_opt(bj, "duration_sd", b.duration_sd);
      read_opt(bj, "difficulty_base", b.difficulty_base);
      read_opt(bj, "difficulty_per_complexity", b.difficulty_per_complexity);
      read_opt(bj, "difficulty_low_expertise", b.difficulty_low_expertise);
      read_opt(bj, "difficulty_help", b.difficulty_help);
      read_opt(bj, "difficulty_act", b.difficulty_act);
      read_opt(bj, "difficulty_sd", b.difficulty_sd);
      read_opt(bj, "step_drift", b.step_drift);
      read_opt(bj, "score_drift", b.score_drift);
      read_opt(bj, "duration_drift", b.duration_drift);
    }
    if (j.contains("trust")) {
      const auto& tj = j.at("trust");
      auto& t = c.trust;
      read_opt(tj, "initial_sd", t.initial_sd);
      read_opt(tj, "act_delta", t.act_delta);
      read_opt(tj, "intervention_low_propensity_delta", t.intervention_low_propensity_delta);
      read_opt(tj, "ignored_help_delta", t.ignored_help_delta);
      read_opt(tj, "best_choice_delta", t.best_choice_delta);
      read_opt(tj, "annotation_sd", t.annotation_sd);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::InvalidConfig, std::string("malformed generator config: ") + ex.what());
  }
  validate(c);
  return c;
}

/// Generating parameters for every (traits, act, step) plus population
/// mixing weights; written next to each synthetic corpus.
inline nlohmann::ordered_json generator_ground_truth(const GeneratorConfig& c, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["format"] = "trustsim.generator_ground_truth";
  j["version"] = 1;
  j["seed"] = seed;
  j["config"] = to_json(c);
  j["trait_tuple_probs"] = trait_tuple_probs(c.traits);
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (int step = 1; step <= kStepsPerDialog; ++step) {
    for (ProactiveAct act : kAllActs) {
      for (int t = 0; t < kNumTraitTuples; ++t) {
        const auto traits = TraitTuple::from_index(t);
        const auto g = ground_truth_cell(c.behavior, traits, act, step);
        cells.push_back({{"traits", traits.to_string()},
                         {"act", std::string(to_string(act))},
                         {"step", step},
                         {"p_help", g.p_help},
                         {"p_suggestion", g.p_suggestion},
                         {"p_best", g.p_best},
                         {"duration_mu", g.duration_mu},
                         {"duration_sd", g.duration_sd},
                         {"difficulty_probs", g.difficulty_probs}});
      }
    }
  }
  j["cells"] = std::move(cells);
  return j;
}

}  // namespace trustsim
