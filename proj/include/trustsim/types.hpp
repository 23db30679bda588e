#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trustsim/error.hpp"

namespace trustsim {

inline constexpr int kStepsPerDialog = 12;
inline constexpr int kNumActs = 4;
inline constexpr int kLikertMin = 1;
inline constexpr int kLikertMax = 5;
inline constexpr double kScaleMin = 1.0;
inline constexpr double kScaleMax = 5.0;
inline constexpr int kAgeMin = 18;
inline constexpr int kAgeMax = 60;
/// Task durations are strictly greater than this many seconds.
inline constexpr double kMinDuration = 20.0;
inline constexpr double kDefaultMaxDuration = 300.0;
/// Option i (1-based) of a task is worth i * kPointsPerOption.
inline constexpr double kPointsPerOption = 10.0;

/// Proactive dialog acts, ordered by increasing agent autonomy.
enum class ProactiveAct : int { None = 0, Notification = 1, Suggestion = 2, Intervention = 3 };

inline constexpr std::array<ProactiveAct, kNumActs> kAllActs = {
    ProactiveAct::None, ProactiveAct::Notification, ProactiveAct::Suggestion, ProactiveAct::Intervention};

inline constexpr int act_index(ProactiveAct act) { return static_cast<int>(act); }

inline constexpr std::string_view to_string(ProactiveAct act) {
  switch (act) {
    case ProactiveAct::None: return "None";
    case ProactiveAct::Notification: return "Notification";
    case ProactiveAct::Suggestion: return "Suggestion";
    case ProactiveAct::Intervention: return "Intervention";
  }
  return "None";
}

inline std::optional<ProactiveAct> parse_act(std::string_view s) {
  for (ProactiveAct a : kAllActs)
    if (s == to_string(a)) return a;
  return std::nullopt;
}

enum class Gender : int { Male = 0, Female = 1, Other = 2 };
inline constexpr int kNumGenders = 3;

inline constexpr std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::Male: return "male";
    case Gender::Female: return "female";
    case Gender::Other: return "other";
  }
  return "other";
}

inline std::optional<Gender> parse_gender(std::string_view s) {
  if (s == "male") return Gender::Male;
  if (s == "female") return Gender::Female;
  if (s == "other") return Gender::Other;
  return std::nullopt;
}

/// The game cycles through 3, 4, 5 selectable options.
inline constexpr int complexity_of_step(int step) {
  if (step < 1 || step > kStepsPerDialog)
    throw Error(ErrorKind::StepOutOfRange, "step must be in [1, 12], got " + std::to_string(step));
  return 3 + ((step - 1) % 3);
}

inline constexpr double max_score_for_complexity(int complexity) { return kPointsPerOption * complexity; }
inline constexpr double min_score_for_complexity(int) { return kPointsPerOption; }

enum class Big5 : int { Openness = 0, Conscientiousness, Extraversion, Agreeableness, Neuroticism };
inline constexpr std::array<std::string_view, 5> kBig5Names = {"openness", "conscientiousness", "extraversion",
                                                               "agreeableness", "neuroticism"};

/// Static user characteristics. Sampled users (UserProfile) share the type.
struct UserRecord {
  std::string user_id;
  int age = 30;
  Gender gender = Gender::Male;
  double technical_affinity = 3.0;
  double trust_propensity = 3.0;
  double domain_expertise = 3.0;
  std::array<double, 5> big5 = {3.0, 3.0, 3.0, 3.0, 3.0};

  bool operator==(const UserRecord&) const = default;
};

using UserProfile = UserRecord;

/// One user-agent turn of the game plus the user's trust annotations.
struct Exchange {
  std::string dialog_id;
  int step = 1;
  int complexity = 3;
  ProactiveAct proactive_act = ProactiveAct::None;
  double game_score = 0.0;
  bool help_request = false;
  bool suggestion_request = false;
  double duration = 30.0;
  int difficulty = 3;
  int trust = 3;
  int competence = 3;
  int reliability = 3;
  int predictability = 3;

  bool operator==(const Exchange&) const = default;
};

struct Dialog {
  UserRecord user;
  std::array<Exchange, kStepsPerDialog> exchanges;

  bool operator==(const Dialog&) const = default;
};

/// Dialogs in a stable order; each user contributes exactly one dialog.
struct Corpus {
  std::vector<Dialog> dialogs;

  std::size_t dialog_count() const noexcept { return dialogs.size(); }
  std::size_t exchange_count() const noexcept { return dialogs.size() * kStepsPerDialog; }
  bool empty() const noexcept { return dialogs.empty(); }

  bool operator==(const Corpus&) const = default;
};

// --- invariant checks ------------------------------------------------------

inline bool is_likert(int v) { return v >= kLikertMin && v <= kLikertMax; }
inline bool is_scale(double v) { return v >= kScaleMin && v <= kScaleMax; }

/// Throws ValueOutOfRange naming the first offending field.
inline void validate_user(const UserRecord& u, std::optional<std::size_t> row = std::nullopt) {
  auto fail = [&](const std::string& field) {
    throw Error(ErrorKind::ValueOutOfRange, "user '" + u.user_id + "' field " + field + " out of range", field, row);
  };
  if (u.age < kAgeMin || u.age > kAgeMax) fail("age");
  if (!is_scale(u.technical_affinity)) fail("technical_affinity");
  if (!is_scale(u.trust_propensity)) fail("trust_propensity");
  if (!is_scale(u.domain_expertise)) fail("domain_expertise");
  for (std::size_t i = 0; i < u.big5.size(); ++i)
    if (!is_scale(u.big5[i])) fail(std::string(kBig5Names[i]));
}

inline void validate_exchange(const Exchange& e, std::optional<std::size_t> row = std::nullopt) {
  auto fail = [&](const std::string& field) {
    throw Error(ErrorKind::ValueOutOfRange,
                "dialog '" + e.dialog_id + "' step " + std::to_string(e.step) + " field " + field + " out of range",
                field, row);
  };
  if (e.step < 1 || e.step > kStepsPerDialog) fail("step");
  if (e.complexity != complexity_of_step(e.step)) fail("complexity");
  if (!(e.game_score >= 0.0)) fail("game_score");
  if (!(e.duration > kMinDuration)) fail("duration");
  if (!is_likert(e.difficulty)) fail("difficulty");
  if (!is_likert(e.trust)) fail("trust");
  if (!is_likert(e.competence)) fail("competence");
  if (!is_likert(e.reliability)) fail("reliability");
  if (!is_likert(e.predictability)) fail("predictability");
}

inline void validate_dialog(const Dialog& d) {
  validate_user(d.user);
  for (int i = 0; i < kStepsPerDialog; ++i) {
    const Exchange& e = d.exchanges[static_cast<std::size_t>(i)];
    if (e.step != i + 1)
      throw Error(ErrorKind::IncompleteDialog, "dialog '" + d.user.user_id + "' steps not 1..12 in order");
    validate_exchange(e);
  }
}

inline void validate_corpus(const Corpus& c) {
  for (const Dialog& d : c.dialogs) validate_dialog(d);
}

}  // namespace trustsim
