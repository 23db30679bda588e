#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <utility>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "trustsim/behavior_table.hpp"
#include "trustsim/corpus.hpp"
#include "trustsim/csv.hpp"
#include "trustsim/error.hpp"
#include "trustsim/random.hpp"
#include "trustsim/truncated_gaussian.hpp"
#include "trustsim/types.hpp"
#include "trustsim/user_model.hpp"

namespace trustsim {

enum class ScorePolicy {
  /// Continuous score clamped to the step's option-score range.
  Clamp,
  /// Clamped, then rounded to the nearest option score.
  SnapToOption,
};

struct SimConfig {
  double duration_upper = kDefaultMaxDuration;
  ScorePolicy score_policy = ScorePolicy::Clamp;
};

struct SimulatedTurn {
  bool help_request = false;
  bool suggestion_request = false;
  double duration = 0.0;
  int difficulty = 3;
  double game_score = 0.0;
  bool used_fallback = false;

  bool operator==(const SimulatedTurn&) const = default;
};

inline void validate_turn(const SimulatedTurn& t, int step, double duration_upper = kDefaultMaxDuration) {
  const int c = complexity_of_step(step);
  if (!(t.duration > kMinDuration) || t.duration > duration_upper)
    throw Error(ErrorKind::ValueOutOfRange, "simulated duration out of range", "duration");
  if (!is_likert(t.difficulty)) throw Error(ErrorKind::ValueOutOfRange, "simulated difficulty out of range", "difficulty");
  if (t.game_score < min_score_for_complexity(c) || t.game_score > max_score_for_complexity(c))
    throw Error(ErrorKind::ValueOutOfRange, "simulated score out of range", "game_score");
}

/// One user response. Requests are drawn first; difficulty, duration and
/// score are then drawn given the request combination, each from its own
/// substream of `rng`.
inline SimulatedTurn simulate_turn(const BehaviorTable& table, const UserProfile& profile, int step, ProactiveAct act,
                                   const RandomStream& rng, const SimConfig& config = {}) {
  if (!(config.duration_upper > kMinDuration))
    throw Error(ErrorKind::InvalidConfig, "duration upper bound must exceed 20 s");
  const ContextKey key{binarize_traits(profile), act, Condition::for_step(table.mode(), step)};
  const LookupResult found = lookup(table, key);

  SimulatedTurn turn;
  turn.used_fallback = found.used_fallback;

  RandomStream req = rng.substream("requests");
  const int combo = static_cast<int>(req.categorical(found.cell->request_probs));
  turn.help_request = combo_help(combo);
  turn.suggestion_request = combo_suggestion(combo);

  const RequestStats& rs = request_stats(table, key, found.level, combo);

  RandomStream diff = rng.substream("difficulty");
  std::array<double, kNumDifficultyClasses> weights{};
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = static_cast<double>(rs.difficulty_counts[i]);
  turn.difficulty = static_cast<int>(diff.categorical(weights)) + 1;

  RandomStream dur = rng.substream("duration");
  turn.duration = sample_truncated_gaussian(rs.duration_mean, rs.duration_sd, kMinDuration, config.duration_upper, dur);
  if (turn.duration <= kMinDuration) turn.duration = std::nextafter(kMinDuration, config.duration_upper);

  const int complexity = complexity_of_step(step);
  const double lo = min_score_for_complexity(complexity);
  const double hi = max_score_for_complexity(complexity);
  RandomStream score = rng.substream("score");
  turn.game_score = sample_truncated_gaussian(rs.score_mean, rs.score_sd, lo, hi, score);
  if (config.score_policy == ScorePolicy::SnapToOption)
    turn.game_score = std::clamp(std::round(turn.game_score / kPointsPerOption) * kPointsPerOption, lo, hi);
  return turn;
}

/// Turn i (0-based) is step i+1 with acts[i], drawn from rng.substream(step).
inline std::array<SimulatedTurn, kStepsPerDialog> simulate_dialog(const BehaviorTable& table,
                                                                  const UserProfile& profile,
                                                                  std::span<const ProactiveAct> acts,
                                                                  const RandomStream& rng,
                                                                  const SimConfig& config = {}) {
  if (acts.size() != kStepsPerDialog)
    throw Error(ErrorKind::WrongActCount, "a dialog needs exactly 12 acts, got " + std::to_string(acts.size()));
  std::array<SimulatedTurn, kStepsPerDialog> turns;
  for (int s = 1; s <= kStepsPerDialog; ++s)
    turns[static_cast<std::size_t>(s - 1)] =
        simulate_turn(table, profile, s, acts[static_cast<std::size_t>(s - 1)], rng.substream(static_cast<std::uint64_t>(s)), config);
  return turns;
}

struct SimulatedDialog {
  UserProfile user;
  std::array<ProactiveAct, kStepsPerDialog> acts{};
  std::array<SimulatedTurn, kStepsPerDialog> turns{};

  bool operator==(const SimulatedDialog&) const = default;
};

/// Simulated counterpart of a Corpus; index-aligned with it after a replay.
struct SimulatedLog {
  std::vector<SimulatedDialog> dialogs;

  std::size_t turn_count() const noexcept { return dialogs.size() * kStepsPerDialog; }
  bool operator==(const SimulatedLog&) const = default;
};

/// Stream for one dialog, keyed by user id so a user's replay does not
/// depend on which other dialogs are in the corpus.
inline RandomStream dialog_stream(const RandomStream& rng, const std::string& user_id) {
  return rng.substream(hash_name(user_id));
}

/// Simulates every recorded exchange under its real user, step and act.
inline SimulatedLog replay_conditions(const Corpus& corpus, const BehaviorTable& table, const RandomStream& rng,
                                      const SimConfig& config = {}) {
  SimulatedLog log;
  log.dialogs.reserve(corpus.dialog_count());
  for (const Dialog& d : corpus.dialogs) {
    SimulatedDialog sd;
    sd.user = d.user;
    for (std::size_t i = 0; i < kStepsPerDialog; ++i) sd.acts[i] = d.exchanges[i].proactive_act;
    sd.turns = simulate_dialog(table, d.user, sd.acts, dialog_stream(rng, d.user.user_id), config);
    log.dialogs.push_back(std::move(sd));
  }
  return log;
}

/// Simulated dialogs for freshly sampled users and uniformly random acts.
inline SimulatedLog simulate_population(const BehaviorTable& table, const TraitDistributions& traits,
                                        std::size_t dialogs, const RandomStream& rng, const SimConfig& config = {}) {
  SimulatedLog log;
  log.dialogs.reserve(dialogs);
  for (std::size_t i = 0; i < dialogs; ++i) {
    const RandomStream ds = rng.substream(static_cast<std::uint64_t>(i));
    SimulatedDialog sd;
    sd.user = sample_user(traits, ds.substream("user"), "sim" + std::to_string(i + 1));
    RandomStream acts = ds.substream("acts");
    for (auto& a : sd.acts) a = static_cast<ProactiveAct>(acts.below(kNumActs));
    sd.turns = simulate_dialog(table, sd.user, sd.acts, ds.substream("turns"), config);
    log.dialogs.push_back(std::move(sd));
  }
  return log;
}

// --- file export -----------------------------------------------------------

/// Corpus schema without the four trust annotations, plus used_fallback.
inline constexpr std::array<std::string_view, 20> kSimulatedColumns = {
    "user_id",          "age",        "gender",       "technical_affinity", "trust_propensity",
    "domain_expertise", "openness",   "conscientiousness", "extraversion",  "agreeableness",
    "neuroticism",      "step",       "complexity",   "proactive_act",      "game_score",
    "help_request",     "suggestion_request", "duration", "difficulty",     "used_fallback"};

inline void write_simulated_log(std::ostream& out, const SimulatedLog& log, CorpusFormat format) {
  if (format == CorpusFormat::Csv) {
    for (std::size_t i = 0; i < kSimulatedColumns.size(); ++i) out << (i ? "," : "") << kSimulatedColumns[i];
    out << '\n';
    for (const auto& d : log.dialogs) {
      const std::string prefix = user_csv_prefix(d.user);
      for (int s = 1; s <= kStepsPerDialog; ++s) {
        const auto& t = d.turns[static_cast<std::size_t>(s - 1)];
        out << prefix << ',' << s << ',' << complexity_of_step(s) << ',' << to_string(d.acts[static_cast<std::size_t>(s - 1)])
            << ',' << csv::format_double(t.game_score) << ',' << (t.help_request ? 1 : 0) << ','
            << (t.suggestion_request ? 1 : 0) << ',' << csv::format_double(t.duration) << ',' << t.difficulty << ','
            << (t.used_fallback ? 1 : 0) << '\n';
      }
    }
  } else {
    for (const auto& d : log.dialogs) {
      for (int s = 1; s <= kStepsPerDialog; ++s) {
        const auto& t = d.turns[static_cast<std::size_t>(s - 1)];
        Exchange e;
        e.step = s;
        e.complexity = complexity_of_step(s);
        e.proactive_act = d.acts[static_cast<std::size_t>(s - 1)];
        auto j = exchange_row_json(d.user, e);
        j["game_score"] = t.game_score;
        j["help_request"] = t.help_request;
        j["suggestion_request"] = t.suggestion_request;
        j["duration"] = t.duration;
        j["difficulty"] = t.difficulty;
        j.erase("trust");
        j.erase("competence");
        j.erase("reliability");
        j.erase("predictability");
        j["used_fallback"] = t.used_fallback;
        out << j.dump() << '\n';
      }
    }
  }
}

inline void save_simulated_log(const std::filesystem::path& path, const SimulatedLog& log, CorpusFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write simulated log " + path.string());
  write_simulated_log(out, log, format);
}

/// Reads a simulated log through the corpus reader: the trust columns it
/// lacks are filled with a neutral 3, and used_fallback is collected per
/// (user, step) on the way through.
inline SimulatedLog read_simulated_log(std::istream& in, CorpusFormat format) {
  std::stringstream converted;
  std::map<std::pair<std::string, int>, bool> flags;
  auto remember = [&](std::string uid, std::optional<long long> step, std::optional<bool> flag, std::size_t row) {
    if (!flag) throw Error(ErrorKind::ParseError, "cannot parse used_fallback", "used_fallback", row);
    if (!step) throw Error(ErrorKind::ParseError, "cannot parse step", "step", row);
    flags[{std::move(uid), static_cast<int>(*step)}] = *flag;
  };
  std::string line;
  std::size_t row = 0;
  if (format == CorpusFormat::Csv) {
    if (!std::getline(in, line)) throw Error(ErrorKind::MissingColumn, "empty simulated log", "user_id");
    const auto header = csv::split_record(line);
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);
    for (auto name : kSimulatedColumns)
      if (!col.contains(std::string(name)))
        throw Error(ErrorKind::MissingColumn, "missing column '" + std::string(name) + "'", std::string(name));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    converted << line << ",trust,competence,reliability,predictability\n";
    auto field = [&](const std::vector<std::string>& f, const char* name) {
      const auto i = col.at(name);
      return i < f.size() ? f[i] : std::string();
    };
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      ++row;
      const auto f = csv::split_record(line);
      remember(field(f, "user_id"), csv::parse_int(field(f, "step")), csv::parse_bool(field(f, "used_fallback")), row);
      converted << line << ",3,3,3,3\n";
    }
  } else {
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      ++row;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object())
        throw Error(ErrorKind::ParseError, "simulated log row is not a JSON object", std::nullopt, row);
      for (auto name : kSimulatedColumns)
        if (!j.contains(std::string(name)))
          throw Error(ErrorKind::MissingColumn, "missing column '" + std::string(name) + "'", std::string(name), row);
      const auto& fb = j["used_fallback"];
      const auto& st = j["step"];
      remember(detail::json_scalar_text(j["user_id"]),
               st.is_number_integer() ? std::optional<long long>(st.get<long long>()) : std::nullopt,
               fb.is_boolean() ? std::optional<bool>(fb.get<bool>()) : csv::parse_bool(detail::json_scalar_text(fb)), row);
      for (const char* k : {"trust", "competence", "reliability", "predictability"}) j[k] = 3;
      converted << j.dump() << '\n';
    }
  }
  const Corpus c = read_corpus(converted, format);
  SimulatedLog log;
  log.dialogs.reserve(c.dialog_count());
  for (const Dialog& d : c.dialogs) {
    SimulatedDialog sd;
    sd.user = d.user;
    for (std::size_t i = 0; i < kStepsPerDialog; ++i) {
      const Exchange& e = d.exchanges[i];
      sd.acts[i] = e.proactive_act;
      sd.turns[i] = {e.help_request, e.suggestion_request, e.duration, e.difficulty, e.game_score,
                     flags.at({d.user.user_id, e.step})};
    }
    log.dialogs.push_back(std::move(sd));
  }
  return log;
}

inline SimulatedLog load_simulated_log(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open simulated log " + path.string());
  return read_simulated_log(in, format);
}

/// Fraction of turns whose lookup fell back.
inline double fallback_rate(const SimulatedLog& log) {
  if (log.dialogs.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& d : log.dialogs)
    for (const auto& t : d.turns) n += t.used_fallback ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(log.turn_count());
}

}  // namespace trustsim
