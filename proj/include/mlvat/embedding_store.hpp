#pragma once

// MLVE embedding store: per-sentence, per-layer, token-averaged vectors.
//
// Layout (little-endian):
//   "MLVE" | u32 version | u32 n_sentences | u32 n_layers | u32 dim
//   n_sentences x (u32 byte length, UTF-8 id bytes)
//   n_sentences x n_layers x dim f32

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mlvat/numkit.hpp"

namespace mlvat {

inline constexpr std::uint32_t kEmbeddingStoreVersion = 1;

class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  // Throws DuplicateId, InvalidSpec (zero layers/dim or size mismatch).
  EmbeddingStore(std::vector<std::string> ids, std::size_t n_layers, std::size_t dim, std::vector<float> data);

  // Throws BadMagic, VersionUnsupported, TruncatedFile, DuplicateId, NotFound.
  static EmbeddingStore open(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;

  std::size_t size() const { return ids_.size(); }
  std::size_t n_layers() const { return n_layers_; }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<float>& data() const { return data_; }

  bool contains(const std::string& id) const { return index_.contains(id); }
  // Throws NotFound.
  std::size_t index_of(const std::string& id) const;
  // n_layers x dim block for one sentence.
  std::span<const float> lookup(const std::string& id) const;
  std::span<const float> vector(std::size_t index, std::size_t layer) const;

  bool operator==(const EmbeddingStore& other) const {
    return ids_ == other.ids_ && n_layers_ == other.n_layers_ && dim_ == other.dim_ && data_ == other.data_;
  }

 private:
  std::vector<std::string> ids_;
  std::size_t n_layers_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class LayerPooling {
  Single,          // vector of one layer
  CumulativeMean,  // mean of layers 0..layer
};

struct FeatureSpec {
  LayerPooling pooling = LayerPooling::Single;
  // Negative counts from the top: -1 is the last layer.
  int layer = -1;

  bool operator==(const FeatureSpec&) const = default;
};

// Resolves a possibly negative layer index; throws LayerOutOfRange.
std::size_t resolve_layer(const EmbeddingStore& store, int layer);

// One row per id, promoted to f64. Throws MissingEmbedding, LayerOutOfRange.
Mat64 gather_features(const EmbeddingStore& store, const std::vector<std::string>& ids, const FeatureSpec& spec);

}  // namespace mlvat
