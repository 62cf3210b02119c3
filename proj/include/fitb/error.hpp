#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fitb {

/// Every failure the library reports carries one of these kinds so callers
/// (and tests) can branch on the cause without parsing messages.
enum class ErrorKind {
  Io,
  BadMagic,
  BadVersion,
  ModalityMismatch,
  TruncatedRecord,
  DuplicateId,
  NonFinite,
  DimensionMismatch,
  MissingProduct,
  MalformedRecord,
  DuplicateOutfit,
  DuplicateItem,
  InsufficientPool,
  InvalidArgument,
  CorruptCheckpoint,
  ShapeMismatch,
  NoTrainablePairs,
  NoScorableQueries,
  ZeroNorm,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace fitb
