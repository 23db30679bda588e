#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "trustsim/error.hpp"
#include "trustsim/random.hpp"
#include "trustsim/stats.hpp"
#include "trustsim/truncated_gaussian.hpp"
#include "trustsim/types.hpp"

namespace trustsim {

/// Traits at or below this Likert value binarize to "low".
inline constexpr double kTraitThreshold = 3.0;

struct TruncatedGaussianParams {
  double mean = 0.0;
  double sd = 0.0;
  double lo = 0.0;
  double hi = 1.0;

  bool operator==(const TruncatedGaussianParams&) const = default;
};

enum class NumericTrait : int {
  Age = 0,
  TechnicalAffinity,
  TrustPropensity,
  DomainExpertise,
  Openness,
  Conscientiousness,
  Extraversion,
  Agreeableness,
  Neuroticism,
};
inline constexpr int kNumNumericTraits = 9;
inline constexpr std::array<std::string_view, kNumNumericTraits> kNumericTraitNames = {
    "age",      "technical_affinity", "trust_propensity", "domain_expertise", "openness",
    "conscientiousness", "extraversion", "agreeableness", "neuroticism"};

inline double trait_value(const UserRecord& u, NumericTrait t) {
  switch (t) {
    case NumericTrait::Age: return static_cast<double>(u.age);
    case NumericTrait::TechnicalAffinity: return u.technical_affinity;
    case NumericTrait::TrustPropensity: return u.trust_propensity;
    case NumericTrait::DomainExpertise: return u.domain_expertise;
    default: return u.big5[static_cast<std::size_t>(static_cast<int>(t) - static_cast<int>(NumericTrait::Openness))];
  }
}

inline constexpr TruncatedGaussianParams default_bounds(NumericTrait t) {
  if (t == NumericTrait::Age) return {35.0, 10.0, static_cast<double>(kAgeMin), static_cast<double>(kAgeMax)};
  return {3.0, 1.0, kScaleMin, kScaleMax};
}

/// Population model for simulated users.
struct TraitDistributions {
  std::array<TruncatedGaussianParams, kNumNumericTraits> numeric;
  std::array<double, kNumGenders> gender_probs = {1.0 / 3, 1.0 / 3, 1.0 / 3};

  TraitDistributions() {
    for (int i = 0; i < kNumNumericTraits; ++i) numeric[static_cast<std::size_t>(i)] = default_bounds(NumericTrait(i));
  }

  const TruncatedGaussianParams& operator[](NumericTrait t) const { return numeric[static_cast<std::size_t>(t)]; }
  TruncatedGaussianParams& operator[](NumericTrait t) { return numeric[static_cast<std::size_t>(t)]; }

  bool operator==(const TraitDistributions&) const = default;
};

inline void validate(const TraitDistributions& d) {
  for (int i = 0; i < kNumNumericTraits; ++i) {
    const auto& p = d.numeric[static_cast<std::size_t>(i)];
    const auto bounds = default_bounds(NumericTrait(i));
    const std::string name(kNumericTraitNames[static_cast<std::size_t>(i)]);
    if (!(p.lo < p.hi) || p.lo != bounds.lo || p.hi != bounds.hi)
      throw Error(ErrorKind::InvalidBounds, "trait " + name + " must use bounds [" + std::to_string(bounds.lo) + ", " +
                                                std::to_string(bounds.hi) + "]",
                  name);
    if (!(p.sd >= 0.0) || !std::isfinite(p.mean) || !std::isfinite(p.sd))
      throw Error(ErrorKind::InvalidConfig, "trait " + name + " needs finite mean and sd >= 0", name);
  }
  double sum = 0.0;
  for (double g : d.gender_probs) {
    if (!(g >= 0.0)) throw Error(ErrorKind::InvalidConfig, "gender probabilities must be non-negative", "gender");
    sum += g;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::InvalidConfig, "gender probabilities must sum to 1", "gender");
}

/// Sample mean/SD per numeric trait with the fixed bounds; empirical gender
/// frequencies.
inline TraitDistributions fit_trait_distributions(const Corpus& corpus) {
  if (corpus.dialog_count() < 2)
    throw Error(ErrorKind::InsufficientUsers, "fitting trait distributions needs at least 2 users");
  TraitDistributions out;
  for (int i = 0; i < kNumNumericTraits; ++i) {
    std::vector<double> values;
    values.reserve(corpus.dialog_count());
    for (const Dialog& d : corpus.dialogs) values.push_back(trait_value(d.user, NumericTrait(i)));
    const MeanSd ms = mean_sd(values);
    auto& p = out.numeric[static_cast<std::size_t>(i)];
    p.mean = ms.mean;
    p.sd = ms.sd;
  }
  std::array<double, kNumGenders> counts{};
  for (const Dialog& d : corpus.dialogs) counts[static_cast<std::size_t>(d.user.gender)] += 1.0;
  for (std::size_t g = 0; g < counts.size(); ++g)
    out.gender_probs[g] = counts[g] / static_cast<double>(corpus.dialog_count());
  return out;
}

/// Each trait draws from its own named substream of `rng`.
inline UserProfile sample_user(const TraitDistributions& dists, const RandomStream& rng, std::string user_id = {}) {
  validate(dists);
  UserProfile u;
  u.user_id = std::move(user_id);
  auto draw = [&](NumericTrait t) {
    const auto& p = dists[t];
    RandomStream s = rng.substream(kNumericTraitNames[static_cast<std::size_t>(t)]);
    return sample_truncated_gaussian(p.mean, p.sd, p.lo, p.hi, s);
  };
  u.age = static_cast<int>(std::lround(draw(NumericTrait::Age)));
  {
    RandomStream s = rng.substream("gender");
    u.gender = static_cast<Gender>(s.categorical(dists.gender_probs));
  }
  u.technical_affinity = draw(NumericTrait::TechnicalAffinity);
  u.trust_propensity = draw(NumericTrait::TrustPropensity);
  u.domain_expertise = draw(NumericTrait::DomainExpertise);
  for (int b = 0; b < 5; ++b) u.big5[static_cast<std::size_t>(b)] = draw(NumericTrait(static_cast<int>(NumericTrait::Openness) + b));
  return u;
}

/// Three behavior-relevant bits in fixed order: domain expertise, trust
/// propensity, technical affinity. Rendered "000".."111".
struct TraitTuple {
  bool domain_expertise_high = false;
  bool trust_propensity_high = false;
  bool technical_affinity_high = false;

  /// 0..7 with domain expertise as the most significant bit, so index
  /// order matches lexicographic order of the rendering.
  constexpr int index() const {
    return (domain_expertise_high ? 4 : 0) | (trust_propensity_high ? 2 : 0) | (technical_affinity_high ? 1 : 0);
  }
  static constexpr TraitTuple from_index(int i) { return {(i & 4) != 0, (i & 2) != 0, (i & 1) != 0}; }

  std::string to_string() const {
    return {domain_expertise_high ? '1' : '0', trust_propensity_high ? '1' : '0', technical_affinity_high ? '1' : '0'};
  }
  static TraitTuple parse(std::string_view s) {
    if (s.size() != 3 || s.find_first_not_of("01") != std::string_view::npos)
      throw Error(ErrorKind::ParseError, "trait tuple must be three binary digits, got '" + std::string(s) + "'");
    return {s[0] == '1', s[1] == '1', s[2] == '1'};
  }

  constexpr bool operator==(const TraitTuple&) const = default;
  constexpr auto operator<=>(const TraitTuple& o) const { return index() <=> o.index(); }
};
inline constexpr int kNumTraitTuples = 8;

inline constexpr bool is_high_trait(double value) { return value > kTraitThreshold; }

inline TraitTuple binarize_traits(const UserProfile& profile) {
  return {is_high_trait(profile.domain_expertise), is_high_trait(profile.trust_propensity),
          is_high_trait(profile.technical_affinity)};
}

// --- serialization ---------------------------------------------------------

inline nlohmann::ordered_json to_json(const TraitDistributions& d) {
  nlohmann::ordered_json j;
  j["format"] = "trustsim.trait_distributions";
  j["version"] = 1;
  nlohmann::ordered_json traits;
  for (int i = 0; i < kNumNumericTraits; ++i) {
    const auto& p = d.numeric[static_cast<std::size_t>(i)];
    traits[std::string(kNumericTraitNames[static_cast<std::size_t>(i)])] = {
        {"mean", p.mean}, {"sd", p.sd}, {"lo", p.lo}, {"hi", p.hi}};
  }
  j["numeric"] = traits;
  j["gender"] = {{"male", d.gender_probs[0]}, {"female", d.gender_probs[1]}, {"other", d.gender_probs[2]}};
  return j;
}

inline TraitDistributions trait_distributions_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "trustsim.trait_distributions" || j.value("version", 0) != 1)
      throw Error(ErrorKind::SchemaMismatch, "not a version-1 trait distribution file");
    TraitDistributions d;
    const auto& traits = j.at("numeric");
    for (int i = 0; i < kNumNumericTraits; ++i) {
      const std::string name(kNumericTraitNames[static_cast<std::size_t>(i)]);
      if (!traits.contains(name)) continue;  // keep defaults for unspecified traits
      const auto& t = traits.at(name);
      auto& p = d.numeric[static_cast<std::size_t>(i)];
      p.mean = t.value("mean", p.mean);
      p.sd = t.value("sd", p.sd);
      p.lo = t.value("lo", p.lo);
      p.hi = t.value("hi", p.hi);
    }
    const auto& g = j.at("gender");
    d.gender_probs = {g.value("male", 0.0), g.value("female", 0.0), g.value("other", 0.0)};
    validate(d);
    return d;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::InvalidConfig, std::string("malformed trait distribution file: ") + ex.what());
  }
}

}  // namespace trustsim
