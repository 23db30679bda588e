#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "trustsim/corpus.hpp"
#include "trustsim/error.hpp"
#include "trustsim/random.hpp"
#include "trustsim/types.hpp"

namespace trustsim {

inline constexpr int kNumTrustClasses = 5;
inline constexpr int kNeutralTrust = 3;

/// Mean of the four annotations rounded half-up.
inline int combine_trust_target(int trust, int competence, int reliability, int predictability) {
  for (int v : {trust, competence, reliability, predictability})
    if (!is_likert(v)) throw Error(ErrorKind::ValueOutOfRange, "trust annotations must be in [1, 5]", "trust");
  const int sum = trust + competence + reliability + predictability;
  return (sum + 2) / 4;
}

inline int trust_label(const Exchange& e) {
  return combine_trust_target(e.trust, e.competence, e.reliability, e.predictability);
}

// --- features --------------------------------------------------------------

inline constexpr std::string_view kFeatureSchemaVersion = "trust-features-v1";

/// Named feature layout. Personal parameters, the current interaction, then
/// `lag_window` blocks of lagged interaction values and prior trust labels
/// (lag 1 = previous step).
struct FeatureSchema {
  std::string version = std::string(kFeatureSchemaVersion);
  int lag_window = 2;

  static constexpr int kPersonal = 12;
  static constexpr int kInteraction = 11;
  static constexpr int kPerLag = 10;

  std::size_t length() const { return static_cast<std::size_t>(kPersonal + kInteraction + kPerLag * lag_window); }

  std::vector<std::string> names() const {
    std::vector<std::string> n = {"age",
                                  "gender_male",
                                  "gender_female",
                                  "gender_other",
                                  "technical_affinity",
                                  "trust_propensity",
                                  "domain_expertise"};
    for (auto b : kBig5Names) n.emplace_back(b);
    for (ProactiveAct a : kAllActs) n.push_back("act_" + std::string(to_string(a)));
    for (const char* s : {"complexity", "step", "difficulty", "duration", "game_score", "help_request",
                          "suggestion_request"})
      n.emplace_back(s);
    for (int l = 1; l <= lag_window; ++l) {
      const std::string p = "lag" + std::to_string(l) + "_";
      for (ProactiveAct a : kAllActs) n.push_back(p + "act_" + std::string(to_string(a)));
      for (const char* s : {"difficulty", "duration", "game_score", "help_request", "suggestion_request", "trust"})
        n.push_back(p + s);
    }
    return n;
  }

  bool operator==(const FeatureSchema&) const = default;
};

/// Observable part of one exchange.
struct Interaction {
  int step = 1;
  ProactiveAct act = ProactiveAct::None;
  int difficulty = 3;
  double duration = 30.0;
  double game_score = 0.0;
  bool help_request = false;
  bool suggestion_request = false;

  static Interaction from(const Exchange& e) {
    return {e.step, e.proactive_act, e.difficulty, e.duration, e.game_score, e.help_request, e.suggestion_request};
  }
};

/// A past step of the same dialog and the trust label known for it (the
/// annotation during training, the classifier's estimate at run time).
struct HistoryEntry {
  Interaction interaction;
  int trust_label = kNeutralTrust;
};

struct FeatureVector {
  std::string schema_version;
  std::vector<double> values;

  bool operator==(const FeatureVector&) const = default;
};

/// Missing lags at the start of a dialog use 3 for Likert slots and 0 for
/// flags, one-hots and the non-Likert numeric slots.
inline FeatureVector extract_features(const UserProfile& profile, std::span<const HistoryEntry> history,
                                      const Interaction& current, const FeatureSchema& schema = {}) {
  if (schema.version != kFeatureSchemaVersion)
    throw Error(ErrorKind::SchemaMismatch, "unsupported feature schema '" + schema.version + "'");
  if (schema.lag_window < 0) throw Error(ErrorKind::SchemaMismatch, "lag window must be >= 0");
  if (current.step < 1 || current.step > kStepsPerDialog)
    throw Error(ErrorKind::StepOutOfRange, "current step must be in [1, 12]");
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].interaction.step >= current.step || (i > 0 && history[i].interaction.step <= history[i - 1].interaction.step))
      throw Error(ErrorKind::InvalidConfig, "history must be ordered by step and precede the current step");
  }

  FeatureVector fv;
  fv.schema_version = schema.version;
  auto& x = fv.values;
  x.reserve(schema.length());
  x.push_back(static_cast<double>(profile.age));
  for (int g = 0; g < kNumGenders; ++g) x.push_back(static_cast<int>(profile.gender) == g ? 1.0 : 0.0);
  x.push_back(profile.technical_affinity);
  x.push_back(profile.trust_propensity);
  x.push_back(profile.domain_expertise);
  for (double b : profile.big5) x.push_back(b);

  auto push_act = [&](std::optional<ProactiveAct> act) {
    for (ProactiveAct a : kAllActs) x.push_back(act && *act == a ? 1.0 : 0.0);
  };
  push_act(current.act);
  x.push_back(static_cast<double>(complexity_of_step(current.step)));
  x.push_back(static_cast<double>(current.step));
  x.push_back(static_cast<double>(current.difficulty));
  x.push_back(current.duration);
  x.push_back(current.game_score);
  x.push_back(current.help_request ? 1.0 : 0.0);
  x.push_back(current.suggestion_request ? 1.0 : 0.0);

  for (int l = 1; l <= schema.lag_window; ++l) {
    if (static_cast<std::size_t>(l) <= history.size()) {
      const HistoryEntry& h = history[history.size() - static_cast<std::size_t>(l)];
      push_act(h.interaction.act);
      x.push_back(static_cast<double>(h.interaction.difficulty));
      x.push_back(h.interaction.duration);
      x.push_back(h.interaction.game_score);
      x.push_back(h.interaction.help_request ? 1.0 : 0.0);
      x.push_back(h.interaction.suggestion_request ? 1.0 : 0.0);
      x.push_back(static_cast<double>(h.trust_label));
    } else {
      push_act(std::nullopt);
      x.push_back(static_cast<double>(kNeutralTrust));  // difficulty midpoint
      x.push_back(0.0);
      x.push_back(0.0);
      x.push_back(0.0);
      x.push_back(0.0);
      x.push_back(static_cast<double>(kNeutralTrust));
    }
  }
  return fv;
}

struct LabeledExample {
  FeatureVector features;
  int label = kNeutralTrust;
  std::size_t dialog = 0;
};

/// One example per exchange; history carries the annotated labels of the
/// earlier steps of the same dialog.
inline std::vector<LabeledExample> labeled_examples(const Corpus& corpus, const FeatureSchema& schema) {
  std::vector<LabeledExample> out;
  out.reserve(corpus.exchange_count());
  for (std::size_t di = 0; di < corpus.dialogs.size(); ++di) {
    const Dialog& d = corpus.dialogs[di];
    std::vector<HistoryEntry> history;
    for (const Exchange& e : d.exchanges) {
      const Interaction cur = Interaction::from(e);
      const int label = trust_label(e);
      out.push_back({extract_features(d.user, history, cur, schema), label, di});
      history.push_back({cur, label});
    }
  }
  return out;
}

// --- classifiers -----------------------------------------------------------

using ClassScores = std::array<double, kNumTrustClasses>;

/// Pluggable trust model: maps a feature vector to one score per class 1..5.
class TrustClassifier {
 public:
  virtual ~TrustClassifier() = default;
  virtual const FeatureSchema& schema() const = 0;
  virtual ClassScores class_scores(std::span<const double> features) const = 0;
};

struct TrustPrediction {
  int label = kNeutralTrust;
  ClassScores scores{};
};

/// Lowest class wins ties.
inline int argmax_label(const ClassScores& scores) {
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin()) + 1;
}

inline TrustPrediction predict_trust(const TrustClassifier& model, const FeatureVector& features) {
  if (features.schema_version != model.schema().version || features.values.size() != model.schema().length())
    throw Error(ErrorKind::SchemaMismatch, "feature vector does not match the model's schema");
  TrustPrediction p;
  p.scores = model.class_scores(features.values);
  p.label = argmax_label(p.scores);
  return p;
}

/// Always predicts one label.
class ConstantTrustClassifier final : public TrustClassifier {
 public:
  explicit ConstantTrustClassifier(int label, FeatureSchema schema = {}) : label_(label), schema_(std::move(schema)) {
    if (!is_likert(label)) throw Error(ErrorKind::ValueOutOfRange, "label must be in [1, 5]", "trust");
  }
  const FeatureSchema& schema() const override { return schema_; }
  ClassScores class_scores(std::span<const double>) const override {
    ClassScores s{};
    s[static_cast<std::size_t>(label_ - 1)] = 1.0;
    return s;
  }

 private:
  int label_;
  FeatureSchema schema_;
};

struct TrainingConfig {
  FeatureSchema schema;
  /// L2 regularization strength of each binary max-margin problem.
  double lambda = 1e-3;
  int epochs = 30;
  std::uint64_t seed = 0;
};

/// One-vs-rest linear max-margin model over standardized features.
class LinearTrustClassifier final : public TrustClassifier {
 public:
  LinearTrustClassifier() = default;

  const FeatureSchema& schema() const override { return schema_; }

  ClassScores class_scores(std::span<const double> x) const override {
    if (x.size() != mean_.size()) throw Error(ErrorKind::SchemaMismatch, "feature length mismatch");
    ClassScores s{};
    for (std::size_t k = 0; k < kNumTrustClasses; ++k) {
      double acc = bias_[k];
      for (std::size_t i = 0; i < x.size(); ++i) acc += weights_[k][i] * ((x[i] - mean_[i]) / scale_[i]);
      s[k] = acc;
    }
    return s;
  }

  const std::array<std::vector<double>, kNumTrustClasses>& weights() const { return weights_; }
  const ClassScores& bias() const { return bias_; }

  bool operator==(const LinearTrustClassifier& o) const {
    return schema_ == o.schema_ && mean_ == o.mean_ && scale_ == o.scale_ && weights_ == o.weights_ && bias_ == o.bias_;
  }

  friend LinearTrustClassifier train_linear_classifier(std::span<const LabeledExample>, const TrainingConfig&);
  friend nlohmann::ordered_json to_json(const LinearTrustClassifier&);
  friend LinearTrustClassifier linear_classifier_from_json(const nlohmann::json&);

 private:
  FeatureSchema schema_;
  std::vector<double> mean_;
  std::vector<double> scale_;
  std::array<std::vector<double>, kNumTrustClasses> weights_;
  ClassScores bias_{};
};

/// Pegasos-style stochastic subgradient descent on the hinge loss for each
/// class against the rest; the bias is an extra (regularized) coordinate.
/// Weights are averaged over the final epoch.
inline LinearTrustClassifier train_linear_classifier(std::span<const LabeledExample> examples,
                                                     const TrainingConfig& config) {
  if (examples.size() < 2) throw Error(ErrorKind::InsufficientData, "need at least 2 labeled examples");
  if (!(config.lambda > 0.0) || config.epochs < 1)
    throw Error(ErrorKind::InvalidHyperparams, "lambda must be > 0 and epochs >= 1");
  const std::size_t d = config.schema.length();
  std::array<std::size_t, kNumTrustClasses> counts{};
  for (const auto& ex : examples) {
    if (ex.features.values.size() != d || ex.features.schema_version != config.schema.version)
      throw Error(ErrorKind::SchemaMismatch, "example does not match the training schema");
    if (!is_likert(ex.label)) throw Error(ErrorKind::ValueOutOfRange, "label out of range", "trust");
    ++counts[static_cast<std::size_t>(ex.label - 1)];
  }
  if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2)
    throw Error(ErrorKind::DegenerateLabels, "training data contains a single trust class");

  LinearTrustClassifier m;
  m.schema_ = config.schema;
  m.mean_.assign(d, 0.0);
  m.scale_.assign(d, 1.0);
  const double n = static_cast<double>(examples.size());
  for (const auto& ex : examples)
    for (std::size_t i = 0; i < d; ++i) m.mean_[i] += ex.features.values[i] / n;
  std::vector<double> var(d, 0.0);
  for (const auto& ex : examples)
    for (std::size_t i = 0; i < d; ++i) {
      const double c = ex.features.values[i] - m.mean_[i];
      var[i] += c * c / n;
    }
  for (std::size_t i = 0; i < d; ++i) m.scale_[i] = var[i] > 1e-12 ? std::sqrt(var[i]) : 1.0;

  std::vector<std::vector<double>> xs(examples.size(), std::vector<double>(d));
  for (std::size_t e = 0; e < examples.size(); ++e)
    for (std::size_t i = 0; i < d; ++i) xs[e][i] = (examples[e].features.values[i] - m.mean_[i]) / m.scale_[i];

  const RandomStream root(config.seed);
  const double radius = 1.0 / std::sqrt(config.lambda);
  for (std::size_t k = 0; k < kNumTrustClasses; ++k) {
    // Coordinate d is the bias, paired with a constant input of 1.
    std::vector<double> w(d + 1, 0.0), w_avg(d + 1, 0.0);
    std::size_t t = 0, averaged = 0;
    const RandomStream class_rng = root.substream(static_cast<std::uint64_t>(k));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      const auto order = seeded_permutation(examples.size(), class_rng.substream(static_cast<std::uint64_t>(epoch)));
      const bool last = epoch == config.epochs - 1;
      for (std::size_t idx : order) {
        ++t;
        const double eta = 1.0 / (config.lambda * static_cast<double>(t));
        const double y = examples[idx].label == static_cast<int>(k) + 1 ? 1.0 : -1.0;
        const auto& x = xs[idx];
        double margin = w[d];
        for (std::size_t i = 0; i < d; ++i) margin += w[i] * x[i];
        const double shrink = 1.0 - eta * config.lambda;
        for (double& wi : w) wi *= shrink;
        if (y * margin < 1.0) {
          for (std::size_t i = 0; i < d; ++i) w[i] += eta * y * x[i];
          w[d] += eta * y;
        }
        double norm2 = 0.0;
        for (double wi : w) norm2 += wi * wi;
        if (norm2 > radius * radius) {
          const double f = radius / std::sqrt(norm2);
          for (double& wi : w) wi *= f;
        }
        if (last) {
          ++averaged;
          for (std::size_t i = 0; i <= d; ++i) w_avg[i] += (w[i] - w_avg[i]) / static_cast<double>(averaged);
        }
      }
    }
    m.bias_[k] = w_avg[d];
    w_avg.pop_back();
    m.weights_[k] = std::move(w_avg);
  }
  return m;
}

/// Dialog-level training on every exchange of the corpus.
inline LinearTrustClassifier train_classifier(const Corpus& corpus, const TrainingConfig& config = {}) {
  if (corpus.empty()) throw Error(ErrorKind::InsufficientData, "cannot train on an empty corpus");
  const auto examples = labeled_examples(corpus, config.schema);
  return train_linear_classifier(examples, config);
}

// --- metrics ---------------------------------------------------------------

struct ClassifierMetrics {
  std::size_t n = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double majority_baseline = 0.0;
  int majority_label = kNeutralTrust;
  /// confusion[truth - 1][predicted - 1]
  std::array<std::array<std::size_t, kNumTrustClasses>, kNumTrustClasses> confusion{};
  std::array<double, kNumTrustClasses> precision{};
  std::array<double, kNumTrustClasses> recall{};
  std::array<double, kNumTrustClasses> f1{};
};

/// Macro-F1 averages the classes that occur in the truth or the predictions.
inline ClassifierMetrics compute_metrics(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw Error(ErrorKind::LengthMismatch, "truth/prediction length mismatch");
  if (truth.empty()) throw Error(ErrorKind::EmptyTestSet, "no test examples");
  ClassifierMetrics m;
  m.n = truth.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!is_likert(truth[i]) || !is_likert(predicted[i]))
      throw Error(ErrorKind::ValueOutOfRange, "labels must be in [1, 5]", "trust");
    ++m.confusion[static_cast<std::size_t>(truth[i] - 1)][static_cast<std::size_t>(predicted[i] - 1)];
    if (truth[i] == predicted[i]) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
  std::size_t best_support = 0;
  double f1_sum = 0.0;
  int f1_classes = 0;
  for (std::size_t k = 0; k < kNumTrustClasses; ++k) {
    std::size_t support = 0, predicted_k = 0;
    for (std::size_t j = 0; j < kNumTrustClasses; ++j) {
      support += m.confusion[k][j];
      predicted_k += m.confusion[j][k];
    }
    if (support > best_support) {
      best_support = support;
      m.majority_label = static_cast<int>(k) + 1;
    }
    const double tp = static_cast<double>(m.confusion[k][k]);
    m.precision[k] = predicted_k ? tp / static_cast<double>(predicted_k) : 0.0;
    m.recall[k] = support ? tp / static_cast<double>(support) : 0.0;
    const double pr = m.precision[k] + m.recall[k];
    m.f1[k] = pr > 0.0 ? 2.0 * m.precision[k] * m.recall[k] / pr : 0.0;
    if (support > 0 || predicted_k > 0) {
      f1_sum += m.f1[k];
      ++f1_classes;
    }
  }
  m.majority_baseline = static_cast<double>(best_support) / static_cast<double>(m.n);
  m.macro_f1 = f1_classes ? f1_sum / f1_classes : 0.0;
  return m;
}

/// Predictions use the annotated labels of earlier steps as history.
inline ClassifierMetrics evaluate_classifier(const TrustClassifier& model, const Corpus& test) {
  if (test.empty()) throw Error(ErrorKind::EmptyTestSet, "test corpus is empty");
  const auto examples = labeled_examples(test, model.schema());
  std::vector<int> truth, predicted;
  truth.reserve(examples.size());
  predicted.reserve(examples.size());
  for (const auto& ex : examples) {
    truth.push_back(ex.label);
    predicted.push_back(predict_trust(model, ex.features).label);
  }
  return compute_metrics(truth, predicted);
}

inline nlohmann::ordered_json to_json(const ClassifierMetrics& m) {
  nlohmann::ordered_json j;
  j["n"] = m.n;
  j["accuracy"] = m.accuracy;
  j["macro_f1"] = m.macro_f1;
  j["majority_label"] = m.majority_label;
  j["majority_baseline"] = m.majority_baseline;
  j["confusion"] = m.confusion;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  return j;
}

// --- serialization ---------------------------------------------------------

inline nlohmann::ordered_json to_json(const LinearTrustClassifier& m) {
  nlohmann::ordered_json j;
  j["format"] = "trustsim.trust_classifier";
  j["version"] = 1;
  j["kind"] = "ovr_linear_max_margin";
  j["schema"] = {{"version", m.schema_.version}, {"lag_window", m.schema_.lag_window}, {"names", m.schema_.names()}};
  j["feature_mean"] = m.mean_;
  j["feature_scale"] = m.scale_;
  j["weights"] = m.weights_;
  j["bias"] = m.bias_;
  return j;
}

inline LinearTrustClassifier linear_classifier_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "trustsim.trust_classifier" || j.value("version", 0) != 1)
      throw Error(ErrorKind::SchemaMismatch, "not a version-1 trust classifier file");
    LinearTrustClassifier m;
    m.schema_.version = j.at("schema").at("version").get<std::string>();
    m.schema_.lag_window = j.at("schema").at("lag_window").get<int>();
    if (m.schema_.version != kFeatureSchemaVersion)
      throw Error(ErrorKind::SchemaMismatch, "unsupported feature schema '" + m.schema_.version + "'");
    m.mean_ = j.at("feature_mean").get<std::vector<double>>();
    m.scale_ = j.at("feature_scale").get<std::vector<double>>();
    m.weights_ = j.at("weights").get<std::array<std::vector<double>, kNumTrustClasses>>();
    m.bias_ = j.at("bias").get<ClassScores>();
    const std::size_t d = m.schema_.length();
    bool ok = m.mean_.size() == d && m.scale_.size() == d;
    for (const auto& w : m.weights_) ok = ok && w.size() == d;
    if (!ok) throw Error(ErrorKind::SchemaMismatch, "classifier parameter sizes do not match its schema");
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::SchemaMismatch, std::string("malformed classifier file: ") + ex.what());
  }
}

}  // namespace trustsim
