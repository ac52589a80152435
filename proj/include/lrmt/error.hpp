#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lrmt {

enum class ErrorCode {
  // corpus
  UnknownLanguage,
  LineCountMismatch,
  EmptyLine,
  EncodingError,
  EmptyText,
  GroupMembershipViolation,
  EmptyMixture,
  // bpe
  VocabTooSmall,
  EmptyCorpus,
  IdOutOfRange,
  // augment
  MalformedLine,
  EmptyDictionary,
  LanguageMismatch,
  // model / optim
  InvalidConfig,
  ShapeMismatch,
  NonFiniteLoss,
  NonFiniteGradient,
  EmptySource,
  // trainer
  VocabMismatch,
  ConfigMismatch,
  DivergedLoss,
  MissingLanguageTag,
  // experiment runner
  IncompatibleTokenizers,
  ConfigError,
  DataError,
  // io
  IoError,
  FormatError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownLanguage: return "UnknownLanguage";
    case ErrorCode::LineCountMismatch: return "LineCountMismatch";
    case ErrorCode::EmptyLine: return "EmptyLine";
    case ErrorCode::EncodingError: return "EncodingError";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::GroupMembershipViolation: return "GroupMembershipViolation";
    case ErrorCode::EmptyMixture: return "EmptyMixture";
    case ErrorCode::VocabTooSmall: return "VocabTooSmall";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::IdOutOfRange: return "IdOutOfRange";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::EmptyDictionary: return "EmptyDictionary";
    case ErrorCode::LanguageMismatch: return "LanguageMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::EmptySource: return "EmptySource";
    case ErrorCode::VocabMismatch: return "VocabMismatch";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::MissingLanguageTag: return "MissingLanguageTag";
    case ErrorCode::IncompatibleTokenizers: return "IncompatibleTokenizers";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DataError: return "DataError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
  }
  return "Unknown";
}

}  // namespace lrmt
