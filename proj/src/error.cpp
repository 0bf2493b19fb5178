#include "spectrahack/error.hpp"

#include <algorithm>

namespace spectrahack {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::DuplicateModelId: return "DuplicateModelId";
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::EmptyProbs: return "EmptyProbs";
    case ErrorCode::DegenerateCompression: return "DegenerateCompression";
    case ErrorCode::BetaOutOfRange: return "BetaOutOfRange";
    case ErrorCode::IntensityOutOfRange: return "IntensityOutOfRange";
    case ErrorCode::RemoveCountOutOfRange: return "RemoveCountOutOfRange";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ConstantInput: return "ConstantInput";
    case ErrorCode::DegenerateX: return "DegenerateX";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::InsufficientModels: return "InsufficientModels";
    case ErrorCode::JoinMiss: return "JoinMiss";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::uint64_t> index)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      message_(message),
      index_(index) {}

std::string Error::one_line() const {
  std::string msg = message_;
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  std::string out = "error code=" + std::string(to_string(code_));
  if (index_) out += " index=" + std::to_string(*index_);
  out += " msg=" + msg;
  return out;
}

}  // namespace spectrahack
