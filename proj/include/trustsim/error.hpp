#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace trustsim {

enum class ErrorKind {
  MissingColumn,
  ValueOutOfRange,
  ParseError,
  IncompleteDialog,
  InconsistentUser,
  StepOutOfRange,
  InvalidConfig,
  EmptyCorpus,
  InsufficientUsers,
  InvalidBounds,
  NoDataForCondition,
  ModeMismatch,
  WrongActCount,
  SchemaMismatch,
  InsufficientData,
  DegenerateLabels,
  EmptyTestSet,
  EpisodeFinished,
  InvalidHyperparams,
  LengthMismatch,
  NegativeEntry,
  EmptySequence,
  AlignmentError,
  IoError,
};

inline constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IncompleteDialog: return "IncompleteDialog";
    case ErrorKind::InconsistentUser: return "InconsistentUser";
    case ErrorKind::StepOutOfRange: return "StepOutOfRange";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::InsufficientUsers: return "InsufficientUsers";
    case ErrorKind::InvalidBounds: return "InvalidBounds";
    case ErrorKind::NoDataForCondition: return "NoDataForCondition";
    case ErrorKind::ModeMismatch: return "ModeMismatch";
    case ErrorKind::WrongActCount: return "WrongActCount";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::EmptyTestSet: return "EmptyTestSet";
    case ErrorKind::EpisodeFinished: return "EpisodeFinished";
    case ErrorKind::InvalidHyperparams: return "InvalidHyperparams";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NegativeEntry: return "NegativeEntry";
    case ErrorKind::EmptySequence: return "EmptySequence";
    case ErrorKind::AlignmentError: return "AlignmentError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Validation errors are the ones a user can fix by correcting input data.
inline constexpr bool is_validation_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingColumn:
    case ErrorKind::ValueOutOfRange:
    case ErrorKind::ParseError:
    case ErrorKind::IncompleteDialog:
    case ErrorKind::InconsistentUser:
    case ErrorKind::InvalidConfig:
    case ErrorKind::SchemaMismatch:
    case ErrorKind::ModeMismatch:
      return true;
    default:
      return false;
  }
}

/// Single exception type for the library. `field` and `row` are filled in
/// when the failure can be pinned to a record (row is 1-based, header excluded).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::string> field = std::nullopt,
        std::optional<std::size_t> row = std::nullopt)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        field_(std::move(field)),
        row_(row) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::optional<std::string>& field() const noexcept { return field_; }
  std::optional<std::size_t> row() const noexcept { return row_; }

 private:
  ErrorKind kind_;
  std::optional<std::string> field_;
  std::optional<std::size_t> row_;
};

}  // namespace trustsim
