#include "fitb/error.hpp"

namespace fitb {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::BadMagic: return "bad-magic";
    case ErrorKind::BadVersion: return "bad-version";
    case ErrorKind::ModalityMismatch: return "modality-mismatch";
    case ErrorKind::TruncatedRecord: return "truncated-record";
    case ErrorKind::DuplicateId: return "duplicate-id";
    case ErrorKind::NonFinite: return "non-finite";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::MissingProduct: return "missing-product";
    case ErrorKind::MalformedRecord: return "malformed-record";
    case ErrorKind::DuplicateOutfit: return "duplicate-outfit";
    case ErrorKind::DuplicateItem: return "duplicate-item";
    case ErrorKind::InsufficientPool: return "insufficient-pool";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::CorruptCheckpoint: return "corrupt-checkpoint";
    case ErrorKind::ShapeMismatch: return "shape-mismatch";
    case ErrorKind::NoTrainablePairs: return "no-trainable-pairs";
    case ErrorKind::NoScorableQueries: return "no-scorable-queries";
    case ErrorKind::ZeroNorm: return "zero-norm";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace fitb
