#include "mlvat/embedding_store.hpp"

#include <cstring>
#include <fstream>

#include "binary_io.hpp"
#include "mlvat/error.hpp"

namespace mlvat {

namespace {

constexpr char kMagic[4] = {'M', 'L', 'V', 'E'};
// Ids longer than this are treated as corruption rather than allocated.
constexpr std::uint32_t kMaxIdBytes = 1u << 20;

}  // namespace

EmbeddingStore::EmbeddingStore(std::vector<std::string> ids, std::size_t n_layers, std::size_t dim,
                               std::vector<float> data)
    : ids_(std::move(ids)), n_layers_(n_layers), dim_(dim), data_(std::move(data)) {
  if (n_layers_ == 0 || dim_ == 0) throw Error(Errc::InvalidSpec, "EmbeddingStore: n_layers and dim must be >= 1");
  if (data_.size() != ids_.size() * n_layers_ * dim_) {
    throw Error(Errc::InvalidSpec, "EmbeddingStore: data size does not match n_sentences x n_layers x dim");
  }
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw Error(Errc::DuplicateId, "EmbeddingStore: duplicate id '" + ids_[i] + "'");
  }
}

EmbeddingStore EmbeddingStore::open(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::NotFound, "cannot open embedding store " + path.string());
  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);

  binio::Reader in(is, path.string());
  char magic[4];
  in.read_bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw Error(Errc::BadMagic, path.string() + ": not an MLVE store");
  const auto version = in.read_uint<std::uint32_t>();
  if (version != kEmbeddingStoreVersion) {
    throw Error(Errc::VersionUnsupported, path.string() + ": MLVE version " + std::to_string(version));
  }
  const auto n = in.read_uint<std::uint32_t>();
  const auto n_layers = in.read_uint<std::uint32_t>();
  const auto dim = in.read_uint<std::uint32_t>();
  const std::uint64_t payload = static_cast<std::uint64_t>(n) * n_layers * dim * sizeof(float);
  if (!ec && payload > file_size) throw Error(Errc::TruncatedFile, path.string() + ": header promises more data than the file holds");

  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = in.read_uint<std::uint32_t>();
    if (len > kMaxIdBytes || (!ec && len > file_size)) throw Error(Errc::TruncatedFile, path.string() + ": id length out of range");
    std::string id(len, '\0');
    in.read_bytes(id.data(), len);
    ids.push_back(std::move(id));
  }
  std::vector<float> data(static_cast<std::size_t>(n) * n_layers * dim);
  for (float& x : data) x = in.read_f32();
  return EmbeddingStore(std::move(ids), n_layers, dim, std::move(data));
}

void EmbeddingStore::write(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof(kMagic));
  binio::write_uint<std::uint32_t>(os, kEmbeddingStoreVersion);
  binio::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(ids_.size()));
  binio::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(n_layers_));
  binio::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(dim_));
  for (const auto& id : ids_) {
    binio::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(id.size()));
    os.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  for (float x : data_) binio::write_f32(os, x);
  if (!os) throw Error(Errc::Io, "write failed for " + path.string());
}

std::size_t EmbeddingStore::index_of(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw Error(Errc::NotFound, "no embedding for id '" + id + "'");
  return it->second;
}

std::span<const float> EmbeddingStore::lookup(const std::string& id) const {
  const std::size_t block = n_layers_ * dim_;
  return {data_.data() + index_of(id) * block, block};
}

std::span<const float> EmbeddingStore::vector(std::size_t index, std::size_t layer) const {
  return {data_.data() + (index * n_layers_ + layer) * dim_, dim_};
}

std::size_t resolve_layer(const EmbeddingStore& store, int layer) {
  const auto n = static_cast<long long>(store.n_layers());
  const long long resolved = layer < 0 ? n + layer : layer;
  if (resolved < 0 || resolved >= n) {
    throw Error(Errc::LayerOutOfRange,
                "layer " + std::to_string(layer) + " out of range for store with " + std::to_string(n) + " layers");
  }
  return static_cast<std::size_t>(resolved);
}

Mat64 gather_features(const EmbeddingStore& store, const std::vector<std::string>& ids, const FeatureSpec& spec) {
  const std::size_t top = resolve_layer(store, spec.layer);
  const std::size_t first = spec.pooling == LayerPooling::CumulativeMean ? 0 : top;
  const auto count = static_cast<double>(top - first + 1);
  Mat64 out(ids.size(), store.dim());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (!store.contains(ids[r])) throw Error(Errc::MissingEmbedding, "no embedding for id '" + ids[r] + "'");
    const std::size_t idx = store.index_of(ids[r]);
    auto row = out.row(r);
    for (std::size_t l = first; l <= top; ++l) {
      const auto v = store.vector(idx, l);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += static_cast<double>(v[j]);
    }
    if (count > 1.0) {
      for (double& x : row) x /= count;
    }
  }
  return out;
}

}  // namespace mlvat
