#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mlvat {

enum class Errc {
  ZeroNorm,
  LengthMismatch,
  ShapeMismatch,
  EmptyBatch,
  MalformedRow,
  BadMagic,
  VersionUnsupported,
  TruncatedFile,
  DuplicateId,
  NotFound,
  MissingEmbedding,
  InvalidSpec,
  LayerOutOfRange,
  ZeroDenominator,
  NumericalFailure,
  InvalidConfig,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

// Configuration problems map to CLI exit status 1, data problems to 2.
bool is_config_error(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mlvat
