#pragma once

// Gaussian-cluster multilabel corpora standing in for encoder features.
// Each cluster carries a fixed binary label pattern; "domains" play the role
// of languages via a per-domain mean offset.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mlvat/dataset.hpp"
#include "mlvat/embedding_store.hpp"
#include "mlvat/numkit.hpp"

namespace mlvat {

struct SynthSpec {
  std::size_t n_per_cluster = 250;  // per cluster and per domain
  std::size_t dim = 32;
  std::size_t n_labels = 6;
  // Empty: centers are drawn as N(0, center_spread^2 I).
  std::vector<Vec64> cluster_centers;
  double center_spread = 1.0;
  // One K-vector per cluster; at least two clusters must share a label.
  std::vector<std::vector<std::uint8_t>> label_patterns;
  double noise_sigma = 0.5;
  std::size_t domains = 1;
  double domain_shift_sigma = 0.0;
  std::uint64_t seed = 0;
  double train_fraction = 0.6;
  double dev_fraction = 0.1;
  // Layer l mixes the clean point with independent noise, weight (l+1)/n_layers
  // on the point, so the last layer carries the full signal.
  std::size_t n_layers = 1;
};

struct SynthData {
  std::vector<LabeledRecord> records;
  EmbeddingStore store;
};

// Cluster c activates labels floor(c*K/C) and the next one (mod K), so
// neighbouring clusters share a label.
std::vector<std::vector<std::uint8_t>> chained_label_patterns(std::size_t n_clusters, std::size_t n_labels);

// Throws InvalidSpec.
SynthData gen_synthetic(const SynthSpec& spec);

std::string synthetic_language(std::size_t domain);

}  // namespace mlvat
