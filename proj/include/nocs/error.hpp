#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nocs {

enum class ErrorCode {
  NonPositiveDepth,
  DegenerateInput,
  DimensionMismatch,
  InvalidBox,
  InvalidSize,
  CorruptStream,
  RangeViolation,
  NegativeDepthSolution,
  Underdetermined,
  DegenerateConfiguration,
  NoConsensus,
  InsufficientCorrespondences,
  InvalidGroundTruth,
  OutOfRange,
  NonFinite,
  EmptyInput,
  InvalidOffset,
  NotGravityAligned,
  IoFailure,
  SchemaViolation,
  EmptyScene,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidBox: return "InvalidBox";
    case ErrorCode::InvalidSize: return "InvalidSize";
    case ErrorCode::CorruptStream: return "CorruptStream";
    case ErrorCode::RangeViolation: return "RangeViolation";
    case ErrorCode::NegativeDepthSolution: return "NegativeDepthSolution";
    case ErrorCode::Underdetermined: return "Underdetermined";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorCode::InvalidGroundTruth: return "InvalidGroundTruth";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidOffset: return "InvalidOffset";
    case ErrorCode::NotGravityAligned: return "NotGravityAligned";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::EmptyScene: return "EmptyScene";
  }
  return "Unknown";
}

/// Exception carrying one of the library's error variants. what() is
/// prefixed with the variant name so it survives crossing a language boundary.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace nocs
