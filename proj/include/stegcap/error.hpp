#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stegcap {

enum class ErrorCode {
  // weight store format
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  DuplicateTensorName,
  DimOverflow,
  BadTensor,
  UnknownTensorName,
  // codec
  InvalidPlan,
  CapacityExceeded,
  FrameNotFound,
  LengthOverrun,
  // corpus
  EmptyInput,
  ClassTooSmall,
  InvalidCorpusSpec,
  // models
  NonFiniteLoss,
  DimMismatch,
  ShapeMismatch,
  RoleMismatch,
  InvalidHyperparameters,
  // sweeper
  InvalidSweep,
  ParseError,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::DuplicateTensorName: return "DuplicateTensorName";
    case ErrorCode::DimOverflow: return "DimOverflow";
    case ErrorCode::BadTensor: return "BadTensor";
    case ErrorCode::UnknownTensorName: return "UnknownTensorName";
    case ErrorCode::InvalidPlan: return "InvalidPlan";
    case ErrorCode::CapacityExceeded: return "CapacityExceeded";
    case ErrorCode::FrameNotFound: return "FrameNotFound";
    case ErrorCode::LengthOverrun: return "LengthOverrun";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::InvalidCorpusSpec: return "InvalidCorpusSpec";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::RoleMismatch: return "RoleMismatch";
    case ErrorCode::InvalidHyperparameters: return "InvalidHyperparameters";
    case ErrorCode::InvalidSweep: return "InvalidSweep";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI's exit-code mapping) can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stegcap
