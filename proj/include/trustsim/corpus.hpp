#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trustsim/csv.hpp"
#include "trustsim/error.hpp"
#include "trustsim/random.hpp"
#include "trustsim/types.hpp"

namespace trustsim {

enum class CorpusFormat { Csv, Jsonl };

inline std::optional<CorpusFormat> parse_format(std::string_view s) {
  if (s == "csv") return CorpusFormat::Csv;
  if (s == "jsonl") return CorpusFormat::Jsonl;
  return std::nullopt;
}

/// Column order of the flat corpus file: one row per exchange, user fields
/// repeated on every row of that user's dialog.
inline constexpr std::array<std::string_view, 23> kCorpusColumns = {
    "user_id",          "age",          "gender",        "technical_affinity", "trust_propensity",
    "domain_expertise", "openness",     "conscientiousness", "extraversion",   "agreeableness",
    "neuroticism",      "step",         "complexity",    "proactive_act",      "game_score",
    "help_request",     "suggestion_request", "duration", "difficulty",        "trust",
    "competence",       "reliability",  "predictability"};

namespace detail {

/// Uniform textual access to a record regardless of file format.
using FieldGetter = std::function<std::optional<std::string>(std::string_view)>;

class RecordParser {
 public:
  RecordParser(FieldGetter get, std::size_t row) : get_(std::move(get)), row_(row) {}

  std::string text(std::string_view field) const {
    auto v = get_(field);
    if (!v) throw Error(ErrorKind::MissingColumn, "missing field '" + std::string(field) + "'", std::string(field), row_);
    return *v;
  }
  double real(std::string_view field) const {
    auto v = csv::parse_double(text(field));
    if (!v) parse_fail(field);
    return *v;
  }
  int integer(std::string_view field) const {
    auto v = csv::parse_int(text(field));
    if (!v || *v < -1000000 || *v > 1000000) parse_fail(field);
    return static_cast<int>(*v);
  }
  bool boolean(std::string_view field) const {
    auto v = csv::parse_bool(text(field));
    if (!v) parse_fail(field);
    return *v;
  }
  [[noreturn]] void parse_fail(std::string_view field) const {
    throw Error(ErrorKind::ParseError, "cannot parse field '" + std::string(field) + "' at row " + std::to_string(row_),
                std::string(field), row_);
  }

  std::size_t row() const noexcept { return row_; }

 private:
  FieldGetter get_;
  std::size_t row_;
};

inline std::pair<UserRecord, Exchange> parse_record(const RecordParser& p) {
  UserRecord u;
  u.user_id = p.text("user_id");
  if (u.user_id.empty()) p.parse_fail("user_id");
  u.age = p.integer("age");
  auto g = parse_gender(p.text("gender"));
  if (!g) p.parse_fail("gender");
  u.gender = *g;
  u.technical_affinity = p.real("technical_affinity");
  u.trust_propensity = p.real("trust_propensity");
  u.domain_expertise = p.real("domain_expertise");
  for (std::size_t i = 0; i < 5; ++i) u.big5[i] = p.real(kBig5Names[i]);

  Exchange e;
  e.dialog_id = u.user_id;
  e.step = p.integer("step");
  e.complexity = p.integer("complexity");
  auto act = parse_act(p.text("proactive_act"));
  if (!act) p.parse_fail("proactive_act");
  e.proactive_act = *act;
  e.game_score = p.real("game_score");
  e.help_request = p.boolean("help_request");
  e.suggestion_request = p.boolean("suggestion_request");
  e.duration = p.real("duration");
  e.difficulty = p.integer("difficulty");
  e.trust = p.integer("trust");
  e.competence = p.integer("competence");
  e.reliability = p.integer("reliability");
  e.predictability = p.integer("predictability");

  validate_user(u, p.row());
  if (e.step < 1 || e.step > kStepsPerDialog)
    throw Error(ErrorKind::ValueOutOfRange, "step out of range at row " + std::to_string(p.row()), "step", p.row());
  validate_exchange(e, p.row());
  return {std::move(u), std::move(e)};
}

/// Groups parsed rows into dialogs in order of first appearance.
class CorpusAssembler {
 public:
  void add(UserRecord u, Exchange e, std::size_t row) {
    auto it = index_.find(u.user_id);
    if (it == index_.end()) {
      index_.emplace(u.user_id, pending_.size());
      pending_.push_back({u, {}});
      it = index_.find(u.user_id);
    } else if (!(pending_[it->second].user == u)) {
      throw Error(ErrorKind::InconsistentUser, "user '" + u.user_id + "' has differing user fields across rows",
                  "user_id", row);
    }
    pending_[it->second].exchanges.push_back(std::move(e));
  }

  Corpus finish() {
    Corpus c;
    c.dialogs.reserve(pending_.size());
    for (auto& p : pending_) {
      if (p.exchanges.size() != kStepsPerDialog)
        throw Error(ErrorKind::IncompleteDialog, "user '" + p.user.user_id + "' has " +
                                                      std::to_string(p.exchanges.size()) + " exchanges, expected 12",
                    "user_id");
      std::sort(p.exchanges.begin(), p.exchanges.end(),
                [](const Exchange& a, const Exchange& b) { return a.step < b.step; });
      Dialog d;
      d.user = p.user;
      for (int i = 0; i < kStepsPerDialog; ++i) {
        if (p.exchanges[static_cast<std::size_t>(i)].step != i + 1)
          throw Error(ErrorKind::IncompleteDialog,
                      "user '" + p.user.user_id + "' is missing step " + std::to_string(i + 1), "step");
        d.exchanges[static_cast<std::size_t>(i)] = std::move(p.exchanges[static_cast<std::size_t>(i)]);
      }
      c.dialogs.push_back(std::move(d));
    }
    return c;
  }

 private:
  struct Pending {
    UserRecord user;
    std::vector<Exchange> exchanges;
  };
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Pending> pending_;
};

inline std::string json_scalar_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return csv::format_double(v.get<double>());
  return v.dump();
}

}  // namespace detail

/// Parses a corpus from a stream. Rows are validated as they are read;
/// dialogs are checked for completeness after all rows are seen.
inline Corpus read_corpus(std::istream& in, CorpusFormat format) {
  detail::CorpusAssembler assembler;
  std::string line;
  if (format == CorpusFormat::Csv) {
    if (!std::getline(in, line)) throw Error(ErrorKind::MissingColumn, "empty file: no header", "user_id");
    const auto header = csv::split_record(line);
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);
    for (auto name : kCorpusColumns)
      if (!col.contains(std::string(name)))
        throw Error(ErrorKind::MissingColumn, "missing column '" + std::string(name) + "'", std::string(name));
    std::size_t row = 0;
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      ++row;
      const auto fields = csv::split_record(line);
      detail::FieldGetter get = [&](std::string_view name) -> std::optional<std::string> {
        auto it = col.find(std::string(name));
        if (it == col.end() || it->second >= fields.size()) return std::nullopt;
        return fields[it->second];
      };
      auto [u, e] = detail::parse_record(detail::RecordParser(get, row));
      assembler.add(std::move(u), std::move(e), row);
    }
  } else {
    std::size_t row = 0;
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      ++row;
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& ex) {
        throw Error(ErrorKind::ParseError, std::string("invalid JSON at row ") + std::to_string(row) + ": " + ex.what(),
                    std::nullopt, row);
      }
      if (!obj.is_object()) throw Error(ErrorKind::ParseError, "row is not a JSON object", std::nullopt, row);
      for (auto name : kCorpusColumns)
        if (!obj.contains(std::string(name)))
          throw Error(ErrorKind::MissingColumn, "missing column '" + std::string(name) + "' at row " + std::to_string(row),
                      std::string(name), row);
      detail::FieldGetter get = [&](std::string_view name) -> std::optional<std::string> {
        auto it = obj.find(std::string(name));
        if (it == obj.end()) return std::nullopt;
        return detail::json_scalar_text(*it);
      };
      auto [u, e] = detail::parse_record(detail::RecordParser(get, row));
      assembler.add(std::move(u), std::move(e), row);
    }
  }
  return assembler.finish();
}

inline Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open corpus file " + path.string());
  return read_corpus(in, format);
}

inline CorpusFormat format_from_extension(const std::filesystem::path& path) {
  return path.extension() == ".jsonl" ? CorpusFormat::Jsonl : CorpusFormat::Csv;
}

inline nlohmann::ordered_json exchange_row_json(const UserRecord& u, const Exchange& e) {
  nlohmann::ordered_json j;
  j["user_id"] = u.user_id;
  j["age"] = u.age;
  j["gender"] = std::string(to_string(u.gender));
  j["technical_affinity"] = u.technical_affinity;
  j["trust_propensity"] = u.trust_propensity;
  j["domain_expertise"] = u.domain_expertise;
  for (std::size_t i = 0; i < 5; ++i) j[std::string(kBig5Names[i])] = u.big5[i];
  j["step"] = e.step;
  j["complexity"] = e.complexity;
  j["proactive_act"] = std::string(to_string(e.proactive_act));
  j["game_score"] = e.game_score;
  j["help_request"] = e.help_request;
  j["suggestion_request"] = e.suggestion_request;
  j["duration"] = e.duration;
  j["difficulty"] = e.difficulty;
  j["trust"] = e.trust;
  j["competence"] = e.competence;
  j["reliability"] = e.reliability;
  j["predictability"] = e.predictability;
  return j;
}

/// CSV fields of the user part of a row, in kCorpusColumns order.
inline std::string user_csv_prefix(const UserRecord& u) {
  std::string s = csv::quote_if_needed(u.user_id);
  s += ',' + std::to_string(u.age);
  s += ',' + std::string(to_string(u.gender));
  s += ',' + csv::format_double(u.technical_affinity);
  s += ',' + csv::format_double(u.trust_propensity);
  s += ',' + csv::format_double(u.domain_expertise);
  for (double b : u.big5) s += ',' + csv::format_double(b);
  return s;
}

inline void write_corpus(std::ostream& out, const Corpus& corpus, CorpusFormat format) {
  if (format == CorpusFormat::Csv) {
    for (std::size_t i = 0; i < kCorpusColumns.size(); ++i) out << (i ? "," : "") << kCorpusColumns[i];
    out << '\n';
    for (const Dialog& d : corpus.dialogs) {
      const std::string prefix = user_csv_prefix(d.user);
      for (const Exchange& e : d.exchanges) {
        out << prefix << ',' << e.step << ',' << e.complexity << ',' << to_string(e.proactive_act) << ','
            << csv::format_double(e.game_score) << ',' << (e.help_request ? 1 : 0) << ','
            << (e.suggestion_request ? 1 : 0) << ',' << csv::format_double(e.duration) << ',' << e.difficulty << ','
            << e.trust << ',' << e.competence << ',' << e.reliability << ',' << e.predictability << '\n';
      }
    }
  } else {
    for (const Dialog& d : corpus.dialogs)
      for (const Exchange& e : d.exchanges) out << exchange_row_json(d.user, e).dump() << '\n';
  }
}

inline void save_corpus(const std::filesystem::path& path, const Corpus& corpus, CorpusFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write corpus file " + path.string());
  write_corpus(out, corpus, format);
}

/// Number of training dialogs for a split: round-half-up of fraction * n,
/// kept inside [1, n-1] whenever n >= 2 so neither side is empty.
inline std::size_t train_dialog_count(std::size_t n, double train_fraction) {
  auto k = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 0.5));
  if (n >= 2) k = std::clamp<std::size_t>(k, 1, n - 1);
  return std::min(k, n);
}

/// Seeded Fisher-Yates permutation of [0, n).
inline std::vector<std::size_t> seeded_permutation(std::size_t n, RandomStream rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

/// Dialog-granularity split. Both partitions keep the original dialog order.
inline std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double train_fraction, std::uint64_t seed) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyCorpus, "cannot split an empty corpus");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorKind::InvalidConfig, "train_fraction must be in (0, 1)");
  const std::size_t n = corpus.dialog_count();
  const std::size_t k = train_dialog_count(n, train_fraction);
  auto perm = seeded_permutation(n, RandomStream(seed).substream("split"));
  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < k; ++i) in_train[perm[i]] = true;
  Corpus train, test;
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? train : test).dialogs.push_back(corpus.dialogs[i]);
  return {std::move(train), std::move(test)};
}

}  // namespace trustsim
