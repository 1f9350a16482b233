#include "mlvat/error.hpp"

namespace mlvat {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ZeroNorm: return "ZeroNorm";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionUnsupported: return "VersionUnsupported";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::NotFound: return "NotFound";
    case Errc::MissingEmbedding: return "MissingEmbedding";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::LayerOutOfRange: return "LayerOutOfRange";
    case Errc::ZeroDenominator: return "ZeroDenominator";
    case Errc::NumericalFailure: return "NumericalFailure";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

bool is_config_error(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidConfig:
    case Errc::InvalidSpec:
    case Errc::LayerOutOfRange:
      return true;
    default:
      return false;
  }
}

}  // namespace mlvat
