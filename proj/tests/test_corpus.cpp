#include <set>
#include <sstream>

#include "fixtures.hpp"

using namespace trustsim;
using fixtures::make_dialog;
using fixtures::make_user;

namespace {

std::string to_csv(const Corpus& c) {
  std::ostringstream o;
  write_corpus(o, c, CorpusFormat::Csv);
  return o.str();
}

Corpus from_csv(const std::string& text) {
  std::istringstream in(text);
  return read_corpus(in, CorpusFormat::Csv);
}

Corpus two_users() {
  Corpus c;
  c.dialogs.push_back(make_dialog(make_user("a", 4.0, 2.0, 3.5), ProactiveAct::Suggestion));
  c.dialogs.push_back(make_dialog(make_user("b"), ProactiveAct::Intervention));
  c.dialogs[1].exchanges[3].help_request = true;
  c.dialogs[1].exchanges[3].duration = 57.25;
  return c;
}

// Replaces the value of `column` on the given data row (1-based).
std::string patch_csv(const std::string& text, std::size_t row, std::string_view column, const std::string& value) {
  std::istringstream in(text);
  std::string header, line, out;
  std::getline(in, header);
  const auto cols = csv::split_record(header);
  const auto idx = static_cast<std::size_t>(std::find(cols.begin(), cols.end(), column) - cols.begin());
  out = header + "\n";
  for (std::size_t r = 1; std::getline(in, line); ++r) {
    if (r == row) {
      auto f = csv::split_record(line);
      f[idx] = value;
      line.clear();
      for (std::size_t i = 0; i < f.size(); ++i) line += (i ? "," : "") + f[i];
    }
    out += line + "\n";
  }
  return out;
}

}  // namespace

TEST(ComplexityOfStep, MatchesListedCycleTwice) {
  const int listed[6] = {3, 4, 5, 3, 4, 5};
  for (int s = 1; s <= 12; ++s) EXPECT_EQ(complexity_of_step(s), listed[(s - 1) % 6]) << "step " << s;
  EXPECT_EQ(complexity_of_step(1), 3);
  EXPECT_EQ(complexity_of_step(5), 4);
  EXPECT_EQ(complexity_of_step(7), 3);
}

TEST(ComplexityOfStep, RejectsOutOfRange) {
  EXPECT_TS_ERROR(complexity_of_step(0), ErrorKind::StepOutOfRange);
  EXPECT_TS_ERROR(complexity_of_step(13), ErrorKind::StepOutOfRange);
}

TEST(Corpus, CsvRoundTrip) {
  const Corpus c = two_users();
  const Corpus back = from_csv(to_csv(c));
  EXPECT_EQ(back.dialog_count(), 2u);
  EXPECT_EQ(back.exchange_count(), 24u);
  EXPECT_EQ(back, c);
}

TEST(Corpus, JsonlRoundTrip) {
  const Corpus c = two_users();
  std::ostringstream o;
  write_corpus(o, c, CorpusFormat::Jsonl);
  std::istringstream in(o.str());
  EXPECT_EQ(read_corpus(in, CorpusFormat::Jsonl), c);
}

TEST(Corpus, RowOrderDoesNotMatter) {
  const Corpus c = two_users();
  std::istringstream in(to_csv(c));
  std::string header, line;
  std::getline(in, header);
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  std::reverse(rows.begin() + 12, rows.end());
  std::swap(rows[0], rows[5]);
  std::string text = header + "\n";
  for (const auto& r : rows) text += r + "\n";
  EXPECT_EQ(from_csv(text), c);
}

TEST(Corpus, DurationAtOrBelowTwentyIsRejected) {
  const std::string text = patch_csv(to_csv(two_users()), 4, "duration", "15");
  try {
    from_csv(text);
    FAIL() << "expected ValueOutOfRange";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ValueOutOfRange);
    EXPECT_EQ(e.field().value_or(""), "duration");
    EXPECT_EQ(e.row().value_or(0), 4u);
  }
  EXPECT_TS_ERROR(from_csv(patch_csv(to_csv(two_users()), 4, "duration", "20")), ErrorKind::ValueOutOfRange);
}

TEST(Corpus, ElevenExchangesIsIncomplete) {
  const std::string text = to_csv(two_users());
  const auto cut = text.rfind('\n', text.size() - 2);
  EXPECT_TS_ERROR(from_csv(text.substr(0, cut + 1)), ErrorKind::IncompleteDialog);
}

TEST(Corpus, DuplicateStepIsIncomplete) {
  const std::string text = patch_csv(to_csv(two_users()), 2, "step", "1");
  // Step 1 now appears twice; complexity of row 2 must match so patch it too.
  EXPECT_TS_ERROR(from_csv(patch_csv(text, 2, "complexity", "3")), ErrorKind::IncompleteDialog);
}

TEST(Corpus, FieldValidation) {
  const std::string base = to_csv(two_users());
  EXPECT_TS_ERROR(from_csv(patch_csv(base, 1, "age", "31")), ErrorKind::InconsistentUser);
  EXPECT_TS_ERROR(from_csv(patch_csv(base, 3, "complexity", "4")), ErrorKind::ValueOutOfRange);
  EXPECT_TS_ERROR(from_csv(patch_csv(base, 3, "trust", "6")), ErrorKind::ValueOutOfRange);
  EXPECT_TS_ERROR(from_csv(patch_csv(base, 3, "proactive_act", "Nudge")), ErrorKind::ParseError);
  EXPECT_TS_ERROR(from_csv(patch_csv(base, 3, "game_score", "abc")), ErrorKind::ParseError);
  EXPECT_TS_ERROR(from_csv(patch_csv(base, 3, "step", "13")), ErrorKind::ValueOutOfRange);
  EXPECT_TS_ERROR(from_csv(patch_csv(base, 3, "domain_expertise", "4.5")), ErrorKind::InconsistentUser);
}

TEST(Corpus, AgeOutOfRangeOnEveryRowIsRejected) {
  Corpus c = two_users();
  c.dialogs[0].user.age = 17;
  EXPECT_TS_ERROR(from_csv(to_csv(c)), ErrorKind::ValueOutOfRange);
}

TEST(Corpus, MissingColumn) {
  std::string text = to_csv(two_users());
  text.replace(text.find("difficulty"), 10, "difficultx");
  try {
    from_csv(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingColumn);
    EXPECT_EQ(e.field().value_or(""), "difficulty");
  }
}

TEST(Split, CountsAndDeterminism) {
  GeneratorConfig cfg;
  cfg.dialogs = 10;
  const Corpus c = generate_synthetic_corpus(cfg, 1).corpus;
  auto [train, test] = split_corpus(c, 0.8, 5);
  EXPECT_EQ(train.dialog_count(), 8u);
  EXPECT_EQ(test.dialog_count(), 2u);
  auto [train2, test2] = split_corpus(c, 0.8, 5);
  EXPECT_EQ(train, train2);
  EXPECT_EQ(test, test2);
  auto [train3, test3] = split_corpus(c, 0.8, 6);
  EXPECT_NE(train, train3);
}

TEST(Split, HalfOf308) {
  const Corpus c = generate_synthetic_corpus({}, 2).corpus;
  auto [train, test] = split_corpus(c, 0.5, 1);
  EXPECT_EQ(train.dialog_count(), 154u);
  EXPECT_EQ(test.dialog_count(), 154u);
}

TEST(Split, PartitionIsDisjointAndComplete) {
  GeneratorConfig cfg;
  cfg.dialogs = 37;
  const Corpus c = generate_synthetic_corpus(cfg, 3).corpus;
  auto [train, test] = split_corpus(c, 0.3, 9);
  std::set<std::string> ids;
  for (const auto& d : train.dialogs) ids.insert(d.user.user_id);
  for (const auto& d : test.dialogs) EXPECT_TRUE(ids.insert(d.user.user_id).second);
  EXPECT_EQ(ids.size(), 37u);
}

TEST(Split, RoundingRule) {
  EXPECT_EQ(train_dialog_count(10, 0.8), 8u);
  EXPECT_EQ(train_dialog_count(5, 0.5), 3u);  // 2.5 rounds up
  EXPECT_EQ(train_dialog_count(2, 0.01), 1u);
  EXPECT_EQ(train_dialog_count(2, 0.99), 1u);
}

TEST(Split, Errors) {
  EXPECT_TS_ERROR(split_corpus(Corpus{}, 0.5, 1), ErrorKind::EmptyCorpus);
  EXPECT_TS_ERROR(split_corpus(two_users(), 1.0, 1), ErrorKind::InvalidConfig);
  EXPECT_TS_ERROR(split_corpus(two_users(), 0.0, 1), ErrorKind::InvalidConfig);
}

TEST(Generator, Counts308) {
  const auto sc = generate_synthetic_corpus({}, 42);
  EXPECT_EQ(sc.corpus.dialog_count(), 308u);
  EXPECT_EQ(sc.corpus.exchange_count(), 3696u);
  EXPECT_NO_THROW(validate_corpus(sc.corpus));
}

TEST(Generator, ByteIdenticalForSameSeed) {
  const auto a = generate_synthetic_corpus({}, 42);
  const auto b = generate_synthetic_corpus({}, 42);
  EXPECT_EQ(to_csv(a.corpus), to_csv(b.corpus));
  EXPECT_NE(to_csv(a.corpus), to_csv(generate_synthetic_corpus({}, 43).corpus));
}

TEST(Generator, ConfigJsonRoundTrip) {
  GeneratorConfig cfg;
  cfg.dialogs = 12;
  cfg.behavior.score_drift = 0.25;
  cfg.behavior.step_drift = false;
  const auto j = to_json(cfg);
  const GeneratorConfig back = generator_config_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(to_json(back).dump(), j.dump());
}

// Without step drift, exchanges at steps sharing a complexity come from the
// same distribution; compare the empirical help rate per step against the
// generator's own exported probabilities.
TEST(Generator, DriftFreeStepsMatchExportedDistributions) {
  GeneratorConfig cfg;
  cfg.dialogs = 3000;
  cfg.behavior.step_drift = false;
  const auto sc = generate_synthetic_corpus(cfg, 11);
  for (int s = 1; s <= kStepsPerDialog; ++s) {
    double expected = 0.0, observed = 0.0;
    for (const auto& d : sc.corpus.dialogs) {
      const auto& e = d.exchanges[static_cast<std::size_t>(s - 1)];
      expected += ground_truth_cell(cfg.behavior, binarize_traits(d.user), e.proactive_act, s).p_help;
      observed += e.help_request ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(sc.corpus.dialog_count());
    const double p = expected / n;
    EXPECT_NEAR(observed / n, p, 4.0 * std::sqrt(p * (1 - p) / n)) << "step " << s;
    const auto a = ground_truth_cell(cfg.behavior, TraitTuple::parse("010"), ProactiveAct::None, s);
    const auto b = ground_truth_cell(cfg.behavior, TraitTuple::parse("010"), ProactiveAct::None,
                                     (s - 1) % 3 + 1);
    EXPECT_DOUBLE_EQ(a.p_best[0], b.p_best[0]);
    EXPECT_DOUBLE_EQ(a.duration_mu[0], b.duration_mu[0]);
  }
}

TEST(Csv, SplitRecordHandlesQuotes) {
  const auto f = csv::split_record("a,\"b,c\",\"d\"\"e\",");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[1], "b,c");
  EXPECT_EQ(f[2], "d\"e");
  EXPECT_EQ(f[3], "");
}
