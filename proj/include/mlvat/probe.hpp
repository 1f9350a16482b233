#pragma once

// Layer-wise probing: a fresh head per layer (or per cumulative layer prefix)
// and the expected-layer statistic over cumulative gains.

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "mlvat/dataset.hpp"
#include "mlvat/embedding_store.hpp"
#include "mlvat/metrics.hpp"
#include "mlvat/trainer.hpp"

namespace mlvat {

// Trains on the vectors of one layer and evaluates on cfg.eval_split.
// cfg.features is ignored. Throws LayerOutOfRange.
MetricReport layer_eval(const EmbeddingStore& store, const std::vector<LabeledRecord>& records, std::size_t layer,
                        const RunConfig& cfg);
// Same, on the mean of layers 0..max_layer.
MetricReport cumulative_layer_eval(const EmbeddingStore& store, const std::vector<LabeledRecord>& records,
                                   std::size_t max_layer, const RunConfig& cfg);

// E = sum_l l * d[l] / sum_l d[l], with deltas[0] belonging to layer 1.
// Throws ZeroDenominator when the deltas sum to zero.
double expected_layer(std::span<const double> deltas);

struct LayerEvalReport {
  std::vector<std::pair<std::size_t, MetricReport>> per_layer;
  std::vector<std::pair<std::size_t, MetricReport>> cumulative;
  // Jaccard change when adding layer l, for l = 1..n_layers-1.
  std::vector<double> deltas;
  // Empty when the deltas sum to zero (single layer or no change).
  std::optional<double> expected_layer;
  bool negative_delta = false;
};

// Runs every layer and every cumulative prefix; cells run on up to `jobs` threads.
LayerEvalReport probe_layers(const EmbeddingStore& store, const std::vector<LabeledRecord>& records,
                             const RunConfig& cfg, std::size_t jobs = 1);

// "kind,layer,jaccard,micro_f1,macro_f1" rows followed by a '#' summary line.
void write_probe_csv(std::ostream& os, const LayerEvalReport& report);

}  // namespace mlvat
