#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trustsim/behavior_table.hpp"
#include "trustsim/corpus.hpp"
#include "trustsim/csv.hpp"
#include "trustsim/error.hpp"
#include "trustsim/simulator.hpp"
#include "trustsim/stats.hpp"
#include "trustsim/types.hpp"

namespace trustsim {

enum class Measure : int { GameScore = 0, Duration, Difficulty, HelpRequest, SuggestionRequest };
inline constexpr int kNumMeasures = 5;
inline constexpr std::array<Measure, kNumMeasures> kAllMeasures = {
    Measure::GameScore, Measure::Duration, Measure::Difficulty, Measure::HelpRequest, Measure::SuggestionRequest};

inline constexpr std::string_view to_string(Measure m) {
  switch (m) {
    case Measure::GameScore: return "Game Score";
    case Measure::Duration: return "Duration";
    case Measure::Difficulty: return "Difficulty";
    case Measure::HelpRequest: return "Help Request";
    case Measure::SuggestionRequest: return "Suggestion Request";
  }
  return "";
}

/// Kullback-Leibler divergence D(P || Q) in bits, P the reference.
///
/// With smoothing > 0 both vectors get smoothing added to every entry and
/// are renormalized; with smoothing == 0 they are only renormalized, terms
/// with P(x) = 0 contribute 0 and P(x) > 0 = Q(x) yields +infinity.
inline double kl_divergence(std::span<const double> p, std::span<const double> q, double smoothing = 0.0) {
  if (p.size() != q.size()) throw Error(ErrorKind::LengthMismatch, "KL inputs differ in length");
  if (p.empty()) throw Error(ErrorKind::EmptySequence, "KL inputs are empty");
  if (!(smoothing >= 0.0)) throw Error(ErrorKind::NegativeEntry, "smoothing must be >= 0");
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0) || !(q[i] >= 0.0)) throw Error(ErrorKind::NegativeEntry, "probabilities must be >= 0");
    sp += p[i] + smoothing;
    sq += q[i] + smoothing;
  }
  if (!(sp > 0.0) || !(sq > 0.0)) throw Error(ErrorKind::EmptySequence, "probability vector has zero mass");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = (p[i] + smoothing) / sp;
    const double qi = (q[i] + smoothing) / sq;
    if (pi == 0.0) continue;
    if (qi == 0.0) return std::numeric_limits<double>::infinity();
    kl += pi * std::log2(pi / qi);
  }
  return std::max(kl, 0.0);
}

inline double mse(std::span<const double> simulated, std::span<const double> reference) {
  if (simulated.size() != reference.size()) throw Error(ErrorKind::LengthMismatch, "MSE inputs differ in length");
  if (simulated.empty()) throw Error(ErrorKind::EmptySequence, "MSE inputs are empty");
  double acc = 0.0;
  for (std::size_t i = 0; i < simulated.size(); ++i) acc += (simulated[i] - reference[i]) * (simulated[i] - reference[i]);
  return acc / static_cast<double>(simulated.size());
}

struct BinningConfig {
  int duration_bins = 20;
  double duration_lo = kMinDuration;
  double duration_hi = kDefaultMaxDuration;
  double epsilon = 1e-6;
};

inline std::size_t bin_count(Measure m, const BinningConfig& cfg, int complexity) {
  switch (m) {
    case Measure::GameScore: return static_cast<std::size_t>(complexity);
    case Measure::Duration: return static_cast<std::size_t>(cfg.duration_bins);
    case Measure::Difficulty: return kNumDifficultyClasses;
    default: return 2;
  }
}

/// Bin of one value. Scores snap to the nearest option score; durations
/// fall in fixed-width bins over [lo, hi] with out-of-range values clamped
/// to the edge bins.
inline std::size_t bin_index(double v, Measure m, const BinningConfig& cfg, int complexity) {
  switch (m) {
    case Measure::GameScore: {
      const long opt = std::lround(v / kPointsPerOption);
      return static_cast<std::size_t>(std::clamp<long>(opt, 1, complexity) - 1);
    }
    case Measure::Duration: {
      const double width = (cfg.duration_hi - cfg.duration_lo) / cfg.duration_bins;
      const double raw = std::floor((v - cfg.duration_lo) / width);
      return static_cast<std::size_t>(std::clamp(raw, 0.0, static_cast<double>(cfg.duration_bins - 1)));
    }
    case Measure::Difficulty:
      return static_cast<std::size_t>(std::clamp<long>(std::lround(v), 1, kNumDifficultyClasses) - 1);
    default: return v >= 0.5 ? 1 : 0;
  }
}

/// Histogram over the measure's natural support, additively smoothed by
/// cfg.epsilon and renormalized. `complexity` sets the score support.
inline std::vector<double> estimate_distribution(std::span<const double> values, Measure m, const BinningConfig& cfg = {},
                                                 int complexity = 5) {
  if (values.empty()) throw Error(ErrorKind::EmptySequence, "cannot estimate a distribution from no samples");
  if (cfg.duration_bins < 1 || !(cfg.duration_hi > cfg.duration_lo) || !(cfg.epsilon >= 0.0))
    throw Error(ErrorKind::InvalidConfig, "invalid binning configuration");
  if (complexity < 3 || complexity > 5) throw Error(ErrorKind::ValueOutOfRange, "complexity must be 3..5", "complexity");
  std::vector<double> h(bin_count(m, cfg, complexity), 0.0);
  for (double v : values) h[bin_index(v, m, cfg, complexity)] += 1.0;
  const double total = static_cast<double>(values.size()) + cfg.epsilon * static_cast<double>(h.size());
  for (double& x : h) x = (x + cfg.epsilon) / total;
  return h;
}

inline double measure_value(const Exchange& e, Measure m) {
  switch (m) {
    case Measure::GameScore: return e.game_score;
    case Measure::Duration: return e.duration;
    case Measure::Difficulty: return e.difficulty;
    case Measure::HelpRequest: return e.help_request ? 1.0 : 0.0;
    case Measure::SuggestionRequest: return e.suggestion_request ? 1.0 : 0.0;
  }
  return 0.0;
}

inline double measure_value(const SimulatedTurn& t, Measure m) {
  switch (m) {
    case Measure::GameScore: return t.game_score;
    case Measure::Duration: return t.duration;
    case Measure::Difficulty: return t.difficulty;
    case Measure::HelpRequest: return t.help_request ? 1.0 : 0.0;
    case Measure::SuggestionRequest: return t.suggestion_request ? 1.0 : 0.0;
  }
  return 0.0;
}

struct MeasureRow {
  Measure measure = Measure::GameScore;
  std::array<double, kStepsPerDialog> kl{};
  std::array<double, kStepsPerDialog> mse{};
  MeanSd kl_stats;
  MeanSd mse_stats;
};

/// Per measure: KL and MSE for each of the 12 steps plus their mean/SD over
/// steps. The overall row pools all 60 per-step values of each metric.
struct FidelityReport {
  std::string mode;
  std::array<MeasureRow, kNumMeasures> rows{};
  MeanSd overall_kl;
  MeanSd overall_mse;
  double fallback_rate = 0.0;
  std::size_t dialogs = 0;
};

/// Checks that `simulated` replays `reference`: same users in order and the
/// same act at every step.
inline void check_alignment(const Corpus& reference, const SimulatedLog& simulated) {
  if (reference.dialog_count() != simulated.dialogs.size())
    throw Error(ErrorKind::AlignmentError, "reference has " + std::to_string(reference.dialog_count()) +
                                               " dialogs, simulation has " + std::to_string(simulated.dialogs.size()));
  for (std::size_t i = 0; i < reference.dialogs.size(); ++i) {
    const auto& r = reference.dialogs[i];
    const auto& s = simulated.dialogs[i];
    if (r.user.user_id != s.user.user_id)
      throw Error(ErrorKind::AlignmentError, "dialog " + std::to_string(i) + " user mismatch: '" + r.user.user_id +
                                                 "' vs '" + s.user.user_id + "'");
    for (std::size_t k = 0; k < kStepsPerDialog; ++k)
      if (r.exchanges[k].proactive_act != s.acts[k])
        throw Error(ErrorKind::AlignmentError, "act mismatch for user '" + r.user.user_id + "' at step " +
                                                   std::to_string(k + 1));
  }
}

/// KL(real || simulated) and paired MSE per measure and task step.
inline FidelityReport evaluate_simulator(const Corpus& reference, const SimulatedLog& simulated, std::string mode_tag,
                                         const BinningConfig& binning = {}) {
  check_alignment(reference, simulated);
  if (reference.empty()) throw Error(ErrorKind::EmptySequence, "nothing to evaluate");
  FidelityReport rep;
  rep.mode = std::move(mode_tag);
  rep.dialogs = reference.dialog_count();
  rep.fallback_rate = fallback_rate(simulated);
  std::vector<double> all_kl, all_mse;
  std::vector<double> ref_vals(reference.dialog_count()), sim_vals(reference.dialog_count());
  for (std::size_t mi = 0; mi < kNumMeasures; ++mi) {
    const Measure m = kAllMeasures[mi];
    MeasureRow& row = rep.rows[mi];
    row.measure = m;
    for (int step = 1; step <= kStepsPerDialog; ++step) {
      const auto k = static_cast<std::size_t>(step - 1);
      for (std::size_t d = 0; d < reference.dialogs.size(); ++d) {
        ref_vals[d] = measure_value(reference.dialogs[d].exchanges[k], m);
        sim_vals[d] = measure_value(simulated.dialogs[d].turns[k], m);
      }
      const int c = complexity_of_step(step);
      const auto p = estimate_distribution(ref_vals, m, binning, c);
      const auto q = estimate_distribution(sim_vals, m, binning, c);
      row.kl[k] = kl_divergence(p, q);
      row.mse[k] = mse(sim_vals, ref_vals);
    }
    row.kl_stats = mean_sd(row.kl);
    row.mse_stats = mean_sd(row.mse);
    all_kl.insert(all_kl.end(), row.kl.begin(), row.kl.end());
    all_mse.insert(all_mse.end(), row.mse.begin(), row.mse.end());
  }
  rep.overall_kl = mean_sd(all_kl);
  rep.overall_mse = mean_sd(all_mse);
  return rep;
}

struct CompareConfig {
  double train_fraction = 0.8;
  int fallback_threshold = BehaviorTable::kDefaultFallbackThreshold;
  BinningConfig binning;
  SimConfig sim;
};

struct ModeComparison {
  FidelityReport complexity;
  FidelityReport task_step;
  std::size_t train_dialogs = 0;
  std::size_t test_dialogs = 0;
  std::uint64_t seed = 0;
};

/// Builds both tables on the training split, replays the held-out dialogs
/// with each (same random stream for both), and evaluates.
inline ModeComparison compare_modes(const Corpus& corpus, std::uint64_t seed, const CompareConfig& cfg = {}) {
  auto [train, test] = split_corpus(corpus, cfg.train_fraction, seed);
  const RandomStream replay_rng = RandomStream(seed).substream("replay");
  const BehaviorTable by_complexity = build_table(train, TableMode::ComplexityBased, cfg.fallback_threshold);
  const BehaviorTable by_step = build_table(train, TableMode::TaskStepBased, cfg.fallback_threshold);
  ModeComparison out;
  out.seed = seed;
  out.train_dialogs = train.dialog_count();
  out.test_dialogs = test.dialog_count();
  out.complexity = evaluate_simulator(test, replay_conditions(test, by_complexity, replay_rng, cfg.sim),
                                      std::string(to_string(TableMode::ComplexityBased)), cfg.binning);
  out.task_step = evaluate_simulator(test, replay_conditions(test, by_step, replay_rng, cfg.sim),
                                     std::string(to_string(TableMode::TaskStepBased)), cfg.binning);
  return out;
}

// --- rendering -------------------------------------------------------------

namespace detail {

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline std::string m_sd(const MeanSd& s) {
  const int dec = std::abs(s.mean) >= 100.0 ? 1 : 3;
  return fixed(s.mean, dec) + " (" + fixed(s.sd, dec) + ")";
}

inline std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

}  // namespace detail

inline std::string render_csv(const FidelityReport& r) {
  std::ostringstream o;
  o << "measure,kl_mean,kl_sd,mse_mean,mse_sd\n";
  auto line = [&](std::string_view name, const MeanSd& kl, const MeanSd& ms) {
    o << name << ',' << csv::format_double(kl.mean) << ',' << csv::format_double(kl.sd) << ','
      << csv::format_double(ms.mean) << ',' << csv::format_double(ms.sd) << '\n';
  };
  for (const auto& row : r.rows) line(to_string(row.measure), row.kl_stats, row.mse_stats);
  line("Overall", r.overall_kl, r.overall_mse);
  return o.str();
}

inline std::string render_csv(const ModeComparison& c) {
  std::ostringstream o;
  o << "measure,complexity_kl_mean,complexity_kl_sd,complexity_mse_mean,complexity_mse_sd,"
       "task_step_kl_mean,task_step_kl_sd,task_step_mse_mean,task_step_mse_sd\n";
  auto f = csv::format_double;
  auto line = [&](std::string_view name, const MeanSd& a, const MeanSd& b, const MeanSd& x, const MeanSd& y) {
    o << name << ',' << f(a.mean) << ',' << f(a.sd) << ',' << f(b.mean) << ',' << f(b.sd) << ',' << f(x.mean) << ','
      << f(x.sd) << ',' << f(y.mean) << ',' << f(y.sd) << '\n';
  };
  for (std::size_t i = 0; i < kNumMeasures; ++i)
    line(to_string(kAllMeasures[i]), c.complexity.rows[i].kl_stats, c.complexity.rows[i].mse_stats,
         c.task_step.rows[i].kl_stats, c.task_step.rows[i].mse_stats);
  line("Overall", c.complexity.overall_kl, c.complexity.overall_mse, c.task_step.overall_kl, c.task_step.overall_mse);
  o << "fallback_rate," << f(c.complexity.fallback_rate) << ",,,," << f(c.task_step.fallback_rate) << ",,,\n";
  return o.str();
}

/// Aligned text table: one row per measure plus Overall, KL and MSE as
/// "M (SD)" columns for each mode.
inline std::string render_table(const std::vector<const FidelityReport*>& reports) {
  constexpr std::size_t kName = 20, kCol = 18;
  std::ostringstream o;
  o << detail::pad("", kName);
  for (const auto* r : reports) o << "| " << detail::pad(r->mode + " M (SD)", 2 * kCol);
  o << '\n' << detail::pad("", kName);
  for (std::size_t i = 0; i < reports.size(); ++i) o << "| " << detail::pad("KL", kCol) << detail::pad("MSE", kCol);
  o << '\n' << std::string(kName + reports.size() * (2 * kCol + 2), '-') << '\n';
  for (std::size_t i = 0; i < kNumMeasures; ++i) {
    o << detail::pad(std::string(to_string(kAllMeasures[i])), kName);
    for (const auto* r : reports)
      o << "| " << detail::pad(detail::m_sd(r->rows[i].kl_stats), kCol) << detail::pad(detail::m_sd(r->rows[i].mse_stats), kCol);
    o << '\n';
  }
  o << std::string(kName + reports.size() * (2 * kCol + 2), '-') << '\n' << detail::pad("Overall", kName);
  for (const auto* r : reports)
    o << "| " << detail::pad(detail::m_sd(r->overall_kl), kCol) << detail::pad(detail::m_sd(r->overall_mse), kCol);
  o << '\n' << detail::pad("Fallback rate", kName);
  for (const auto* r : reports) o << "| " << detail::pad(detail::fixed(r->fallback_rate, 3), 2 * kCol);
  o << '\n';
  return o.str();
}

inline std::string render_table(const FidelityReport& r) { return render_table(std::vector{&r}); }
inline std::string render_table(const ModeComparison& c) { return render_table(std::vector{&c.complexity, &c.task_step}); }

inline nlohmann::ordered_json to_json(const FidelityReport& r) {
  nlohmann::ordered_json j;
  j["mode"] = r.mode;
  j["dialogs"] = r.dialogs;
  j["fallback_rate"] = r.fallback_rate;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"measure", std::string(to_string(row.measure))},
                    {"kl_per_step", row.kl},
                    {"mse_per_step", row.mse},
                    {"kl_mean", row.kl_stats.mean},
                    {"kl_sd", row.kl_stats.sd},
                    {"mse_mean", row.mse_stats.mean},
                    {"mse_sd", row.mse_stats.sd}});
  j["measures"] = std::move(rows);
  j["overall"] = {{"kl_mean", r.overall_kl.mean},
                  {"kl_sd", r.overall_kl.sd},
                  {"mse_mean", r.overall_mse.mean},
                  {"mse_sd", r.overall_mse.sd}};
  return j;
}

}  // namespace trustsim
