#include <cmath>
#include <numbers>

#include "fixtures.hpp"

using namespace trustsim;
using fixtures::make_dialog;
using fixtures::make_user;

namespace {

// Closed-form mean of N(mu, sd) truncated to [lo, hi], written out
// independently of the library's normal helpers.
double truncated_normal_mean(double mu, double sd, double lo, double hi) {
  auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); };
  // Upper-tail form keeps precision when both bounds sit far above the mean.
  auto Q = [](double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); };
  const double a = (lo - mu) / sd, b = (hi - mu) / sd;
  return mu + sd * (phi(a) - phi(b)) / (Q(a) - Q(b));
}

}  // namespace

TEST(TruncatedGaussian, AgeBoundsAlwaysRespected) {
  RandomStream rng(1);
  for (int i = 0; i < 20000; ++i) {
    const double v = sample_truncated_gaussian(30, 10, 18, 60, rng);
    ASSERT_GE(v, 18.0);
    ASSERT_LE(v, 60.0);
  }
}

TEST(TruncatedGaussian, ZeroSdReturnsMean) {
  RandomStream rng(1);
  EXPECT_EQ(sample_truncated_gaussian(3, 0, 1, 5, rng), 3.0);
  EXPECT_EQ(sample_truncated_gaussian(7, 0, 1, 5, rng), 5.0);
}

TEST(TruncatedGaussian, EmpiricalMeanMatchesClosedForm) {
  RandomStream rng(2024);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += sample_truncated_gaussian(3, 1, 1, 5, rng);
  EXPECT_NEAR(sum / n, truncated_normal_mean(3, 1, 1, 5), 0.02);
}

TEST(TruncatedGaussian, FarTailUsesFallbackAndStaysInBounds) {
  RandomStream rng(3);
  double sum = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double v = sample_truncated_gaussian(0, 1, 8, 9, rng);
    ASSERT_GE(v, 8.0);
    ASSERT_LE(v, 9.0);
    sum += v;
  }
  EXPECT_NEAR(sum / 2000, truncated_normal_mean(0, 1, 8, 9), 0.02);
}

TEST(TruncatedGaussian, InvalidBounds) {
  RandomStream rng(1);
  EXPECT_TS_ERROR(sample_truncated_gaussian(3, 1, 5, 1, rng), ErrorKind::InvalidBounds);
  EXPECT_TS_ERROR(sample_truncated_gaussian(3, 1, 2, 2, rng), ErrorKind::InvalidBounds);
  EXPECT_TS_ERROR(sample_truncated_gaussian(3, -1, 1, 5, rng), ErrorKind::InvalidBounds);
}

TEST(FitTraits, ConstantAgeHasZeroSd) {
  Corpus c;
  for (int i = 0; i < 5; ++i) c.dialogs.push_back(make_dialog(make_user(fixtures::uid(i))));
  const auto d = fit_trait_distributions(c);
  EXPECT_DOUBLE_EQ(d[NumericTrait::Age].mean, 30.0);
  EXPECT_DOUBLE_EQ(d[NumericTrait::Age].sd, 0.0);
  EXPECT_EQ(d[NumericTrait::Age].lo, 18.0);
  EXPECT_EQ(d[NumericTrait::Age].hi, 60.0);
}

TEST(FitTraits, GenderFrequencies) {
  Corpus c;
  for (int i = 0; i < 10; ++i) {
    auto u = make_user(fixtures::uid(i));
    u.gender = i < 6 ? Gender::Female : Gender::Male;
    c.dialogs.push_back(make_dialog(u));
  }
  const auto d = fit_trait_distributions(c);
  EXPECT_DOUBLE_EQ(d.gender_probs[0], 0.4);
  EXPECT_DOUBLE_EQ(d.gender_probs[1], 0.6);
  EXPECT_DOUBLE_EQ(d.gender_probs[2], 0.0);
}

TEST(FitTraits, NeedsTwoUsers) {
  Corpus c;
  c.dialogs.push_back(make_dialog(make_user("x")));
  EXPECT_TS_ERROR(fit_trait_distributions(c), ErrorKind::InsufficientUsers);
}

// Fitted means are compared against the mean of the truncated generating
// distribution, within 3 standard errors.
TEST(FitTraits, RecoversGeneratorMeans) {
  GeneratorConfig cfg;
  cfg.dialogs = 2000;
  const auto sc = generate_synthetic_corpus(cfg, 5);
  const auto fitted = fit_trait_distributions(sc.corpus);
  for (int i = 1; i < kNumNumericTraits; ++i) {
    const auto& g = cfg.traits.numeric[static_cast<std::size_t>(i)];
    const auto& f = fitted.numeric[static_cast<std::size_t>(i)];
    const double se = f.sd / std::sqrt(static_cast<double>(cfg.dialogs));
    EXPECT_NEAR(f.mean, truncated_normal_mean(g.mean, g.sd, g.lo, g.hi), 3.0 * se) << kNumericTraitNames[i];
  }
}

TEST(SampleUser, SatisfiesInvariants) {
  const auto dists = default_generator_traits();
  const RandomStream root(77);
  for (int i = 0; i < 2000; ++i) {
    const UserProfile u = sample_user(dists, root.substream(static_cast<std::uint64_t>(i)), "s");
    ASSERT_NO_THROW(validate_user(u));
  }
}

TEST(SampleUser, DegenerateGender) {
  auto dists = default_generator_traits();
  dists.gender_probs = {1.0, 0.0, 0.0};
  const RandomStream root(8);
  for (int i = 0; i < 500; ++i)
    EXPECT_EQ(sample_user(dists, root.substream(static_cast<std::uint64_t>(i))).gender, Gender::Male);
}

TEST(SampleUser, GenderFrequenciesConverge) {
  auto dists = default_generator_traits();
  dists.gender_probs = {0.5, 0.3, 0.2};
  const RandomStream root(9);
  std::array<double, 3> counts{};
  const int n = 10000;
  for (int i = 0; i < n; ++i)
    counts[static_cast<std::size_t>(sample_user(dists, root.substream(static_cast<std::uint64_t>(i))).gender)] += 1;
  for (std::size_t g = 0; g < 3; ++g) EXPECT_NEAR(counts[g] / n, dists.gender_probs[g], 0.02);
}

TEST(SampleUser, DeterministicPerStream) {
  const auto dists = default_generator_traits();
  EXPECT_EQ(sample_user(dists, RandomStream(4), "a"), sample_user(dists, RandomStream(4), "a"));
  EXPECT_NE(sample_user(dists, RandomStream(4), "a"), sample_user(dists, RandomStream(5), "a"));
}

TEST(SampleUser, RejectsWrongBounds) {
  auto dists = default_generator_traits();
  dists[NumericTrait::TrustPropensity].hi = 7.0;
  EXPECT_TS_ERROR(sample_user(dists, RandomStream(1)), ErrorKind::InvalidBounds);
}

TEST(Binarize, Examples) {
  EXPECT_EQ(binarize_traits(make_user("a", 2.4, 4.0, 4.2)).to_string(), "011");
  EXPECT_EQ(binarize_traits(make_user("a", 1.0, 1.0, 1.0)).to_string(), "000");
  EXPECT_EQ(binarize_traits(make_user("a", 3.0, 3.0, 3.0)).to_string(), "000");
  EXPECT_EQ(binarize_traits(make_user("a", 3.01, 5.0, 3.0)).to_string(), "110");
}

TEST(TraitTuple, IndexRoundTrip) {
  for (int i = 0; i < kNumTraitTuples; ++i) {
    const auto t = TraitTuple::from_index(i);
    EXPECT_EQ(t.index(), i);
    EXPECT_EQ(TraitTuple::parse(t.to_string()), t);
  }
  EXPECT_TS_ERROR(TraitTuple::parse("12"), ErrorKind::ParseError);
}

TEST(TraitDistributions, JsonRoundTrip) {
  const auto d = default_generator_traits();
  const auto back = trait_distributions_from_json(nlohmann::json::parse(to_json(d).dump()));
  EXPECT_EQ(back, d);
}

TEST(RandomStream, SubstreamsAreIndependentOfDrawOrder) {
  RandomStream a(10);
  const RandomStream sub_before = a.substream("x");
  for (int i = 0; i < 5; ++i) a.next_u64();
  EXPECT_EQ(a.substream("x").next_u64(), RandomStream(sub_before).next_u64());
}

TEST(RandomStream, UniformIsOpenInterval) {
  RandomStream r(11);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}
