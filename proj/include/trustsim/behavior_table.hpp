#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "trustsim/error.hpp"
#include "trustsim/stats.hpp"
#include "trustsim/types.hpp"
#include "trustsim/user_model.hpp"

namespace trustsim {

enum class TableMode { ComplexityBased, TaskStepBased };

inline constexpr std::string_view to_string(TableMode m) {
  return m == TableMode::ComplexityBased ? "ComplexityBased" : "TaskStepBased";
}

inline std::optional<TableMode> parse_mode(std::string_view s) {
  if (s == "ComplexityBased" || s == "complexity") return TableMode::ComplexityBased;
  if (s == "TaskStepBased" || s == "task-step") return TableMode::TaskStepBased;
  return std::nullopt;
}

/// Number of distinct condition values for a mode: 3 complexities or 12 steps.
inline constexpr int condition_count(TableMode m) { return m == TableMode::ComplexityBased ? 3 : kStepsPerDialog; }

/// A complexity (3..5) or a task step (1..12), tagged with the mode it belongs to.
struct Condition {
  TableMode mode = TableMode::TaskStepBased;
  int value = 1;

  static Condition complexity(int c) {
    if (c < 3 || c > 5) throw Error(ErrorKind::ValueOutOfRange, "complexity must be 3..5", "complexity");
    return {TableMode::ComplexityBased, c};
  }
  static Condition task_step(int s) {
    if (s < 1 || s > kStepsPerDialog) throw Error(ErrorKind::StepOutOfRange, "step must be 1..12", "step");
    return {TableMode::TaskStepBased, s};
  }
  static Condition for_step(TableMode mode, int step) {
    return mode == TableMode::ComplexityBased ? complexity(complexity_of_step(step)) : task_step(step);
  }
  static Condition from_index(TableMode mode, int i) {
    return mode == TableMode::ComplexityBased ? complexity(i + 3) : task_step(i + 1);
  }

  /// 0-based slot within the mode.
  int index() const { return mode == TableMode::ComplexityBased ? value - 3 : value - 1; }

  bool operator==(const Condition&) const = default;
};

struct ContextKey {
  TraitTuple traits;
  ProactiveAct act = ProactiveAct::None;
  Condition condition;

  bool operator==(const ContextKey&) const = default;
};

inline constexpr int kNumRequestCombos = 4;
inline constexpr int kNumDifficultyClasses = 5;

/// Index of a (help, suggestion) combination: 0 = neither, 1 = suggestion
/// only, 2 = help only, 3 = both.
inline constexpr int request_combo(bool help, bool suggestion) { return (help ? 2 : 0) + (suggestion ? 1 : 0); }
inline constexpr bool combo_help(int combo) { return (combo & 2) != 0; }
inline constexpr bool combo_suggestion(int combo) { return (combo & 1) != 0; }

/// Statistics of the exchanges in a cell that share one request combination.
struct RequestStats {
  std::size_t n = 0;
  double score_mean = 0.0;
  double score_sd = 0.0;
  double duration_mean = 0.0;
  double duration_sd = 0.0;
  std::array<std::size_t, kNumDifficultyClasses> difficulty_counts{};

  bool operator==(const RequestStats&) const = default;
};

struct CellStats {
  std::size_t n = 0;
  std::array<double, kNumRequestCombos> request_probs{};
  std::array<RequestStats, kNumRequestCombos> by_request{};

  bool operator==(const CellStats&) const = default;
};

/// Which rung of the fallback ladder answered a lookup.
enum class FallbackLevel { TraitSpecific, ActCondition, Condition };

class BehaviorTable;
BehaviorTable build_table(const Corpus& corpus, TableMode mode, int fallback_threshold);

/// Immutable conditional-distribution table. Three rungs are stored:
/// (traits, act, condition) cells, trait-agnostic (act, condition) cells and
/// act-agnostic condition cells. Unobserved cells have n == 0.
class BehaviorTable {
 public:
  static constexpr int kDefaultFallbackThreshold = 10;

  TableMode mode() const noexcept { return mode_; }
  int fallback_threshold() const noexcept { return fallback_threshold_; }

  const CellStats& cell(const ContextKey& key) const {
    check_mode(key.condition);
    return cells_[cell_index(key.traits.index(), act_index(key.act), key.condition.index())];
  }
  const CellStats& fallback_cell(ProactiveAct act, const Condition& c) const {
    check_mode(c);
    return fallback_cells_[static_cast<std::size_t>(act_index(act) * condition_count(mode_) + c.index())];
  }
  const CellStats& condition_cell(const Condition& c) const {
    check_mode(c);
    return condition_cells_[static_cast<std::size_t>(c.index())];
  }
  const CellStats& at_level(const ContextKey& key, FallbackLevel level) const {
    switch (level) {
      case FallbackLevel::TraitSpecific: return cell(key);
      case FallbackLevel::ActCondition: return fallback_cell(key.act, key.condition);
      case FallbackLevel::Condition: return condition_cell(key.condition);
    }
    return condition_cell(key.condition);
  }

  bool operator==(const BehaviorTable&) const = default;

 private:
  friend BehaviorTable build_table(const Corpus&, TableMode, int);
  friend BehaviorTable behavior_table_from_json(const nlohmann::json&);

  BehaviorTable(TableMode mode, int threshold)
      : mode_(mode),
        fallback_threshold_(threshold),
        cells_(static_cast<std::size_t>(kNumTraitTuples * kNumActs * condition_count(mode))),
        fallback_cells_(static_cast<std::size_t>(kNumActs * condition_count(mode))),
        condition_cells_(static_cast<std::size_t>(condition_count(mode))) {}

  std::size_t cell_index(int traits, int act, int cond) const {
    return static_cast<std::size_t>((traits * kNumActs + act) * condition_count(mode_) + cond);
  }
  void check_mode(const Condition& c) const {
    if (c.mode != mode_)
      throw Error(ErrorKind::ModeMismatch, "condition of mode " + std::string(to_string(c.mode)) +
                                               " used with a " + std::string(to_string(mode_)) + " table");
  }

  TableMode mode_;
  int fallback_threshold_;
  std::vector<CellStats> cells_;
  std::vector<CellStats> fallback_cells_;
  std::vector<CellStats> condition_cells_;
};

namespace detail {

class CellAccumulator {
 public:
  void add(const Exchange& e) {
    const int combo = request_combo(e.help_request, e.suggestion_request);
    auto& acc = combos_[static_cast<std::size_t>(combo)];
    acc.score.add(e.game_score);
    acc.duration.add(e.duration);
    ++acc.difficulty[static_cast<std::size_t>(e.difficulty - 1)];
    ++n_;
  }

  CellStats finish() const {
    CellStats out;
    out.n = n_;
    for (std::size_t c = 0; c < combos_.size(); ++c) {
      const auto& acc = combos_[c];
      auto& rs = out.by_request[c];
      rs.n = acc.score.count();
      rs.score_mean = acc.score.mean();
      rs.score_sd = acc.score.sd();
      rs.duration_mean = acc.duration.mean();
      rs.duration_sd = acc.duration.sd();
      rs.difficulty_counts = acc.difficulty;
      out.request_probs[c] = n_ ? static_cast<double>(rs.n) / static_cast<double>(n_) : 0.0;
    }
    return out;
  }

 private:
  struct Combo {
    RunningStats score;
    RunningStats duration;
    std::array<std::size_t, kNumDifficultyClasses> difficulty{};
  };
  std::size_t n_ = 0;
  std::array<Combo, kNumRequestCombos> combos_{};
};

}  // namespace detail

/// Summarizes the corpus by (trait tuple, act, condition) and builds the two
/// fallback rungs from the same exchanges.
inline BehaviorTable build_table(const Corpus& corpus, TableMode mode,
                                 int fallback_threshold = BehaviorTable::kDefaultFallbackThreshold) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, "cannot build a behavior table from an empty corpus");
  if (fallback_threshold < 1) throw Error(ErrorKind::InvalidConfig, "fallback threshold must be >= 1");
  BehaviorTable table(mode, fallback_threshold);
  const int nc = condition_count(mode);
  std::vector<detail::CellAccumulator> cells(table.cells_.size());
  std::vector<detail::CellAccumulator> fallback(table.fallback_cells_.size());
  std::vector<detail::CellAccumulator> by_condition(table.condition_cells_.size());
  for (const Dialog& d : corpus.dialogs) {
    const int traits = binarize_traits(d.user).index();
    for (const Exchange& e : d.exchanges) {
      const int cond = Condition::for_step(mode, e.step).index();
      const int act = act_index(e.proactive_act);
      cells[table.cell_index(traits, act, cond)].add(e);
      fallback[static_cast<std::size_t>(act * nc + cond)].add(e);
      by_condition[static_cast<std::size_t>(cond)].add(e);
    }
  }
  for (std::size_t i = 0; i < cells.size(); ++i) table.cells_[i] = cells[i].finish();
  for (std::size_t i = 0; i < fallback.size(); ++i) table.fallback_cells_[i] = fallback[i].finish();
  for (std::size_t i = 0; i < by_condition.size(); ++i) table.condition_cells_[i] = by_condition[i].finish();
  return table;
}

struct LookupResult {
  const CellStats* cell = nullptr;
  bool used_fallback = false;
  FallbackLevel level = FallbackLevel::TraitSpecific;
};

/// Trait-specific cell when its n reaches the threshold; otherwise the
/// (act, condition) cell; if that is empty too, the condition cell.
inline LookupResult lookup(const BehaviorTable& table, const ContextKey& key) {
  const CellStats& specific = table.cell(key);
  if (specific.n >= static_cast<std::size_t>(table.fallback_threshold()))
    return {&specific, false, FallbackLevel::TraitSpecific};
  const CellStats& by_act = table.fallback_cell(key.act, key.condition);
  if (by_act.n > 0) return {&by_act, true, FallbackLevel::ActCondition};
  const CellStats& by_cond = table.condition_cell(key.condition);
  if (by_cond.n > 0) return {&by_cond, true, FallbackLevel::Condition};
  throw Error(ErrorKind::NoDataForCondition,
              "no exchanges observed for condition " + std::to_string(key.condition.value));
}

/// Per-combination rung: statistics for `combo` starting at `level`, moving
/// one rung up whenever the combination has no observations there.
inline const RequestStats& request_stats(const BehaviorTable& table, const ContextKey& key, FallbackLevel level,
                                         int combo) {
  for (int l = static_cast<int>(level); l <= static_cast<int>(FallbackLevel::Condition); ++l) {
    const RequestStats& rs = table.at_level(key, FallbackLevel(l)).by_request[static_cast<std::size_t>(combo)];
    if (rs.n > 0) return rs;
  }
  throw Error(ErrorKind::NoDataForCondition, "request combination never observed for condition " +
                                                 std::to_string(key.condition.value));
}

// --- summary ---------------------------------------------------------------

struct SliceSummary {
  ProactiveAct act = ProactiveAct::None;
  Condition condition;
  std::size_t n = 0;
  int observed_keys = 0;
  int fallback_keys = 0;
  /// Fraction of the 8 trait tuples whose lookup falls back.
  double fallback_coverage = 0.0;
  /// Fraction of the 8 trait tuples never observed.
  double sparsity = 0.0;
};

struct TableSummary {
  TableMode mode = TableMode::TaskStepBased;
  int fallback_threshold = BehaviorTable::kDefaultFallbackThreshold;
  int possible_keys = 0;
  int observed_keys = 0;
  int fallback_keys = 0;
  double fallback_coverage = 0.0;
  std::vector<SliceSummary> slices;
};

inline TableSummary table_summary(const BehaviorTable& table) {
  TableSummary s;
  s.mode = table.mode();
  s.fallback_threshold = table.fallback_threshold();
  const int nc = condition_count(table.mode());
  s.possible_keys = kNumTraitTuples * kNumActs * nc;
  for (ProactiveAct act : kAllActs) {
    for (int c = 0; c < nc; ++c) {
      SliceSummary slice;
      slice.act = act;
      slice.condition = Condition::from_index(table.mode(), c);
      slice.n = table.fallback_cell(act, slice.condition).n;
      for (int t = 0; t < kNumTraitTuples; ++t) {
        const auto& cell = table.cell({TraitTuple::from_index(t), act, slice.condition});
        if (cell.n > 0) ++slice.observed_keys;
        if (cell.n < static_cast<std::size_t>(table.fallback_threshold())) ++slice.fallback_keys;
      }
      slice.fallback_coverage = static_cast<double>(slice.fallback_keys) / kNumTraitTuples;
      slice.sparsity = static_cast<double>(kNumTraitTuples - slice.observed_keys) / kNumTraitTuples;
      s.observed_keys += slice.observed_keys;
      s.fallback_keys += slice.fallback_keys;
      s.slices.push_back(slice);
    }
  }
  s.fallback_coverage = static_cast<double>(s.fallback_keys) / s.possible_keys;
  return s;
}

// --- serialization ---------------------------------------------------------

inline constexpr int kBehaviorTableFormatVersion = 1;

namespace detail {

inline nlohmann::ordered_json cell_to_json(const CellStats& c) {
  nlohmann::ordered_json j;
  j["n"] = c.n;
  j["request_probs"] = c.request_probs;
  nlohmann::ordered_json combos = nlohmann::ordered_json::array();
  for (const auto& r : c.by_request) {
    combos.push_back({{"n", r.n},
                      {"score_mean", r.score_mean},
                      {"score_sd", r.score_sd},
                      {"duration_mean", r.duration_mean},
                      {"duration_sd", r.duration_sd},
                      {"difficulty_counts", r.difficulty_counts}});
  }
  j["by_request"] = combos;
  return j;
}

inline CellStats cell_from_json(const nlohmann::json& j) {
  CellStats c;
  c.n = j.at("n").get<std::size_t>();
  c.request_probs = j.at("request_probs").get<std::array<double, kNumRequestCombos>>();
  const auto& combos = j.at("by_request");
  if (combos.size() != kNumRequestCombos) throw Error(ErrorKind::SchemaMismatch, "by_request must have 4 entries");
  for (std::size_t i = 0; i < kNumRequestCombos; ++i) {
    auto& r = c.by_request[i];
    const auto& cj = combos[i];
    r.n = cj.at("n").get<std::size_t>();
    r.score_mean = cj.at("score_mean").get<double>();
    r.score_sd = cj.at("score_sd").get<double>();
    r.duration_mean = cj.at("duration_mean").get<double>();
    r.duration_sd = cj.at("duration_sd").get<double>();
    r.difficulty_counts = cj.at("difficulty_counts").get<std::array<std::size_t, kNumDifficultyClasses>>();
  }
  return c;
}

}  // namespace detail

/// Versioned JSON with the mode tag and threshold embedded. Only observed
/// cells are written.
inline nlohmann::ordered_json to_json(const BehaviorTable& table) {
  nlohmann::ordered_json j;
  j["format"] = "trustsim.behavior_table";
  j["version"] = kBehaviorTableFormatVersion;
  j["mode"] = std::string(to_string(table.mode()));
  j["fallback_threshold"] = table.fallback_threshold();
  const int nc = condition_count(table.mode());
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  nlohmann::ordered_json fallback = nlohmann::ordered_json::array();
  nlohmann::ordered_json conds = nlohmann::ordered_json::array();
  for (int c = 0; c < nc; ++c) {
    const Condition cond = Condition::from_index(table.mode(), c);
    for (ProactiveAct act : kAllActs) {
      for (int t = 0; t < kNumTraitTuples; ++t) {
        const auto traits = TraitTuple::from_index(t);
        const CellStats& cell = table.cell({traits, act, cond});
        if (cell.n == 0) continue;
        auto cj = detail::cell_to_json(cell);
        cj["traits"] = traits.to_string();
        cj["act"] = std::string(to_string(act));
        cj["condition"] = cond.value;
        cells.push_back(std::move(cj));
      }
      const CellStats& fb = table.fallback_cell(act, cond);
      if (fb.n == 0) continue;
      auto fj = detail::cell_to_json(fb);
      fj["act"] = std::string(to_string(act));
      fj["condition"] = cond.value;
      fallback.push_back(std::move(fj));
    }
    const CellStats& cc = table.condition_cell(cond);
    if (cc.n == 0) continue;
    auto ccj = detail::cell_to_json(cc);
    ccj["condition"] = cond.value;
    conds.push_back(std::move(ccj));
  }
  j["cells"] = std::move(cells);
  j["fallback_cells"] = std::move(fallback);
  j["condition_cells"] = std::move(conds);
  return j;
}

inline BehaviorTable behavior_table_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "trustsim.behavior_table")
      throw Error(ErrorKind::SchemaMismatch, "not a behavior table file");
    if (j.value("version", 0) != kBehaviorTableFormatVersion)
      throw Error(ErrorKind::SchemaMismatch, "unsupported behavior table version");
    auto mode = parse_mode(j.at("mode").get<std::string>());
    if (!mode) throw Error(ErrorKind::SchemaMismatch, "unknown table mode");
    BehaviorTable t(*mode, j.at("fallback_threshold").get<int>());
    if (t.fallback_threshold_ < 1) throw Error(ErrorKind::InvalidConfig, "fallback threshold must be >= 1");
    auto cond_of = [&](const nlohmann::json& cj) {
      const int v = cj.at("condition").get<int>();
      return *mode == TableMode::ComplexityBased ? Condition::complexity(v) : Condition::task_step(v);
    };
    auto act_of = [](const nlohmann::json& cj) {
      auto a = parse_act(cj.at("act").get<std::string>());
      if (!a) throw Error(ErrorKind::SchemaMismatch, "unknown act in table file");
      return *a;
    };
    for (const auto& cj : j.at("cells")) {
      const auto traits = TraitTuple::parse(cj.at("traits").get<std::string>());
      t.cells_[t.cell_index(traits.index(), act_index(act_of(cj)), cond_of(cj).index())] = detail::cell_from_json(cj);
    }
    const int nc = condition_count(*mode);
    for (const auto& fj : j.at("fallback_cells"))
      t.fallback_cells_[static_cast<std::size_t>(act_index(act_of(fj)) * nc + cond_of(fj).index())] =
          detail::cell_from_json(fj);
    for (const auto& ccj : j.at("condition_cells"))
      t.condition_cells_[static_cast<std::size_t>(cond_of(ccj).index())] = detail::cell_from_json(ccj);
    return t;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::SchemaMismatch, std::string("malformed behavior table file: ") + ex.what());
  }
}

}  // namespace trustsim
