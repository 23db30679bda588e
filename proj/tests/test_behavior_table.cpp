#include <map>
#include <tuple>

#include "fixtures.hpp"

using namespace trustsim;
using fixtures::make_dialog;
using fixtures::make_user;

namespace {

// `n` users with traits "000" who all see `act` at every step.
Corpus uniform_corpus(int n, ProactiveAct act, double expertise = 2.0) {
  Corpus c;
  for (int i = 0; i < n; ++i) c.dialogs.push_back(make_dialog(make_user(fixtures::uid(i), expertise), act));
  return c;
}

const ContextKey key000(ProactiveAct act, int step) {
  return {TraitTuple::parse("000"), act, Condition::task_step(step)};
}

}  // namespace

TEST(Fallback, NineTriggersTenDoesNot) {
  const auto t9 = build_table(uniform_corpus(9, ProactiveAct::None), TableMode::TaskStepBased);
  EXPECT_EQ(t9.cell(key000(ProactiveAct::None, 1)).n, 9u);
  const auto r9 = lookup(t9, key000(ProactiveAct::None, 1));
  EXPECT_TRUE(r9.used_fallback);
  EXPECT_EQ(r9.level, FallbackLevel::ActCondition);

  const auto t10 = build_table(uniform_corpus(10, ProactiveAct::None), TableMode::TaskStepBased);
  EXPECT_EQ(t10.cell(key000(ProactiveAct::None, 1)).n, 10u);
  const auto r10 = lookup(t10, key000(ProactiveAct::None, 1));
  EXPECT_FALSE(r10.used_fallback);
  EXPECT_EQ(r10.level, FallbackLevel::TraitSpecific);
  EXPECT_EQ(r10.cell, &t10.cell(key000(ProactiveAct::None, 1)));
}

TEST(Fallback, ThresholdIsConfigurable) {
  const auto t = build_table(uniform_corpus(9, ProactiveAct::None), TableMode::TaskStepBased, 9);
  EXPECT_FALSE(lookup(t, key000(ProactiveAct::None, 2)).used_fallback);
  EXPECT_TS_ERROR(build_table(uniform_corpus(9, ProactiveAct::None), TableMode::TaskStepBased, 0),
                  ErrorKind::InvalidConfig);
}

TEST(Fallback, UnseenKeyClimbsTheLadder) {
  Corpus c = uniform_corpus(12, ProactiveAct::None);
  const auto t = build_table(c, TableMode::TaskStepBased);
  // Traits "100" never observed: the (act, step) cell answers.
  const ContextKey unseen_traits{TraitTuple::parse("100"), ProactiveAct::None, Condition::task_step(3)};
  const auto r = lookup(t, unseen_traits);
  EXPECT_TRUE(r.used_fallback);
  EXPECT_EQ(r.level, FallbackLevel::ActCondition);
  // Act never observed at all: the condition cell answers.
  const auto r2 = lookup(t, key000(ProactiveAct::Intervention, 3));
  EXPECT_TRUE(r2.used_fallback);
  EXPECT_EQ(r2.level, FallbackLevel::Condition);
  EXPECT_EQ(r2.cell->n, 12u);
}

TEST(Fallback, ModeMismatch) {
  const auto t = build_table(uniform_corpus(3, ProactiveAct::None), TableMode::TaskStepBased);
  EXPECT_TS_ERROR(lookup(t, {TraitTuple{}, ProactiveAct::None, Condition::complexity(3)}), ErrorKind::ModeMismatch);
}

TEST(BuildTable, EmptyCorpus) {
  EXPECT_TS_ERROR(build_table(Corpus{}, TableMode::ComplexityBased), ErrorKind::EmptyCorpus);
}

TEST(BuildTable, RequestProbabilitiesHandCount) {
  Corpus c = uniform_corpus(10, ProactiveAct::Notification);
  for (int i = 0; i < 3; ++i) c.dialogs[static_cast<std::size_t>(i)].exchanges[0].help_request = true;
  c.dialogs[3].exchanges[0].suggestion_request = true;
  const auto t = build_table(c, TableMode::TaskStepBased);
  const auto& cell = t.cell(key000(ProactiveAct::Notification, 1));
  EXPECT_EQ(cell.n, 10u);
  EXPECT_DOUBLE_EQ(cell.request_probs[static_cast<std::size_t>(request_combo(true, false))], 0.3);
  EXPECT_DOUBLE_EQ(cell.request_probs[static_cast<std::size_t>(request_combo(false, true))], 0.1);
  EXPECT_DOUBLE_EQ(cell.request_probs[static_cast<std::size_t>(request_combo(false, false))], 0.6);
  EXPECT_DOUBLE_EQ(cell.request_probs[static_cast<std::size_t>(request_combo(true, true))], 0.0);
}

TEST(BuildTable, RequestStatsUseSampleSd) {
  Corpus c = uniform_corpus(4, ProactiveAct::None);
  const double d[4] = {30, 40, 50, 60};
  for (std::size_t i = 0; i < 4; ++i) c.dialogs[i].exchanges[0].duration = d[i];
  const auto t = build_table(c, TableMode::TaskStepBased, 1);
  const auto& rs = t.cell(key000(ProactiveAct::None, 1)).by_request[0];
  EXPECT_DOUBLE_EQ(rs.duration_mean, 45.0);
  EXPECT_NEAR(rs.duration_sd, std::sqrt(500.0 / 3.0), 1e-12);
}

// Counts per (traits, act, complexity) from the raw exchanges; compared
// against task-step cells pooled over the four steps of each complexity and
// against the complexity-based table.
TEST(Aggregation, PooledStepCellsEqualComplexityCells) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Corpus c = generate_synthetic_corpus({}, seed).corpus;
    std::map<std::tuple<int, int, int>, std::size_t> oracle;
    std::map<std::tuple<int, int, int, int>, std::size_t> oracle_combo;
    for (const auto& d : c.dialogs) {
      const int tt = binarize_traits(d.user).index();
      for (const auto& e : d.exchanges) {
        ++oracle[{tt, act_index(e.proactive_act), e.complexity}];
        ++oracle_combo[{tt, act_index(e.proactive_act), e.complexity, request_combo(e.help_request, e.suggestion_request)}];
      }
    }
    const auto by_step = build_table(c, TableMode::TaskStepBased);
    const auto by_cx = build_table(c, TableMode::ComplexityBased);
    for (int tt = 0; tt < kNumTraitTuples; ++tt) {
      for (ProactiveAct act : kAllActs) {
        for (int cx = 3; cx <= 5; ++cx) {
          std::size_t pooled = 0;
          std::array<std::size_t, 4> pooled_combo{};
          std::array<std::size_t, 5> pooled_diff{};
          for (int s = cx - 2; s <= 12; s += 3) {
            const auto& cell = by_step.cell({TraitTuple::from_index(tt), act, Condition::task_step(s)});
            pooled += cell.n;
            for (std::size_t k = 0; k < 4; ++k) {
              pooled_combo[k] += cell.by_request[k].n;
              for (std::size_t q = 0; q < 5; ++q) pooled_diff[q] += cell.by_request[k].difficulty_counts[q];
            }
          }
          const auto& cxcell = by_cx.cell({TraitTuple::from_index(tt), act, Condition::complexity(cx)});
          const auto want = oracle[{tt, act_index(act), cx}];
          ASSERT_EQ(pooled, want);
          ASSERT_EQ(cxcell.n, want);
          std::array<std::size_t, 5> cx_diff{};
          for (std::size_t k = 0; k < 4; ++k) {
            ASSERT_EQ(pooled_combo[k], cxcell.by_request[k].n);
            ASSERT_EQ(cxcell.by_request[k].n, (oracle_combo[{tt, act_index(act), cx, static_cast<int>(k)}]));
            for (std::size_t q = 0; q < 5; ++q) cx_diff[q] += cxcell.by_request[k].difficulty_counts[q];
          }
          ASSERT_EQ(pooled_diff, cx_diff);
        }
      }
    }
  }
}

TEST(Aggregation, EachComplexityCellCoversFourSteps) {
  const Corpus c = uniform_corpus(5, ProactiveAct::Suggestion);
  const auto t = build_table(c, TableMode::ComplexityBased);
  for (int cx = 3; cx <= 5; ++cx) EXPECT_EQ(t.condition_cell(Condition::complexity(cx)).n, 20u);
}

TEST(Summary, KeyCounts) {
  const Corpus c = generate_synthetic_corpus({}, 4).corpus;
  const auto ts = table_summary(build_table(c, TableMode::TaskStepBased));
  EXPECT_EQ(ts.possible_keys, 384);
  EXPECT_EQ(ts.slices.size(), 48u);
  const auto cs = table_summary(build_table(c, TableMode::ComplexityBased));
  EXPECT_EQ(cs.possible_keys, 96);
  EXPECT_LE(cs.observed_keys, 96);
  EXPECT_LE(cs.fallback_keys, ts.fallback_keys);
}

TEST(Summary, MissingActHasFullFallbackCoverage) {
  const auto s = table_summary(build_table(uniform_corpus(20, ProactiveAct::None), TableMode::TaskStepBased));
  for (const auto& slice : s.slices) {
    if (slice.act == ProactiveAct::Intervention) {
      EXPECT_DOUBLE_EQ(slice.fallback_coverage, 1.0);
      EXPECT_DOUBLE_EQ(slice.sparsity, 1.0);
    }
    if (slice.act == ProactiveAct::None) {
      EXPECT_EQ(slice.observed_keys, 1);
    }
  }
}

TEST(Serialization, JsonRoundTrip) {
  const Corpus c = generate_synthetic_corpus({}, 6).corpus;
  for (TableMode m : {TableMode::TaskStepBased, TableMode::ComplexityBased}) {
    const auto t = build_table(c, m, 7);
    const auto j = to_json(t);
    const auto back = behavior_table_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.mode(), m);
    EXPECT_EQ(back.fallback_threshold(), 7);
    EXPECT_EQ(to_json(back).dump(), j.dump());
  }
}

TEST(Serialization, RejectsForeignFormat) {
  EXPECT_TS_ERROR(behavior_table_from_json(nlohmann::json{{"format", "other"}}), ErrorKind::SchemaMismatch);
}

TEST(ParseMode, AcceptsCliSpellings) {
  EXPECT_EQ(parse_mode("task-step"), TableMode::TaskStepBased);
  EXPECT_EQ(parse_mode("complexity"), TableMode::ComplexityBased);
  EXPECT_FALSE(parse_mode("steps").has_value());
}
