#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace spectrahack {

enum class ErrorCode {
  MalformedHeader,
  ShapeMismatch,
  NonFiniteValue,
  IoFailure,
  RaggedRows,
  ParseFailure,
  DuplicateModelId,
  ZeroRow,
  EigenFailure,
  EmptyProbs,
  DegenerateCompression,
  BetaOutOfRange,
  IntensityOutOfRange,
  RemoveCountOutOfRange,
  LengthMismatch,
  ConstantInput,
  DegenerateX,
  EmptySample,
  EmptyInput,
  InvalidArgument,
  DimMismatch,
  InsufficientModels,
  JoinMiss,
  InvalidSpec,
  InsufficientPoints,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception. `index` carries the
// offending element/row/sample when the error has one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::uint64_t> index = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::uint64_t> index() const noexcept { return index_; }
  // The message without the "<Code>: " prefix that what() carries.
  const std::string& message() const noexcept { return message_; }

  // Single-line machine-parsable form: "error code=<Code> [index=<n>] msg=<...>"
  std::string one_line() const;

 private:
  ErrorCode code_;
  std::string message_;
  std::optional<std::uint64_t> index_;
};

}  // namespace spectrahack
