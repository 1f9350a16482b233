#include "mlvat/probe.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "mlvat/error.hpp"

namespace mlvat {

namespace {

MetricReport probe_run(const EmbeddingStore& store, const std::vector<LabeledRecord>& records, std::size_t layer,
                       LayerPooling pooling, const RunConfig& cfg) {
  if (layer >= store.n_layers()) {
    throw Error(Errc::LayerOutOfRange,
                "layer " + std::to_string(layer) + " out of range for " + std::to_string(store.n_layers()) + " layers");
  }
  RunConfig c = cfg;
  c.features.pooling = pooling;
  c.features.layer = static_cast<int>(layer);
  return run_experiment(c, records, store).report;
}

}  // namespace

MetricReport layer_eval(const EmbeddingStore& store, const std::vector<LabeledRecord>& records, std::size_t layer,
                        const RunConfig& cfg) {
  return probe_run(store, records, layer, LayerPooling::Single, cfg);
}

MetricReport cumulative_layer_eval(const EmbeddingStore& store, const std::vector<LabeledRecord>& records,
                                   std::size_t max_layer, const RunConfig& cfg) {
  return probe_run(store, records, max_layer, LayerPooling::CumulativeMean, cfg);
}

double expected_layer(std::span<const double> deltas) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    num += static_cast<double>(i + 1) * deltas[i];
    den += deltas[i];
  }
  if (den == 0.0) throw Error(Errc::ZeroDenominator, "expected_layer: deltas sum to zero");
  return num / den;
}

LayerEvalReport probe_layers(const EmbeddingStore& store, const std::vector<LabeledRecord>& records,
                             const RunConfig& cfg, std::size_t jobs) {
  const std::size_t n = store.n_layers();
  std::vector<MetricReport> cells(2 * n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        cells[i] = i < n ? layer_eval(store, records, i, cfg) : cumulative_layer_eval(store, records, i - n, cfg);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next.store(cells.size());
        return;
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);

  LayerEvalReport report;
  for (std::size_t l = 0; l < n; ++l) {
    report.per_layer.emplace_back(l, cells[l]);
    report.cumulative.emplace_back(l, cells[n + l]);
  }
  for (std::size_t l = 1; l < n; ++l) {
    const double d = cells[n + l].jaccard - cells[n + l - 1].jaccard;
    report.negative_delta = report.negative_delta || d < 0.0;
    report.deltas.push_back(d);
  }
  try {
    report.expected_layer = expected_layer(report.deltas);
  } catch (const Error& e) {
    if (e.code() != Errc::ZeroDenominator) throw;
  }
  return report;
}

void write_probe_csv(std::ostream& os, const LayerEvalReport& report) {
  auto row = [&os](const char* kind, std::size_t layer, const MetricReport& m) {
    os << kind << ',' << layer << ',' << m.jaccard << ',' << m.micro_f1 << ',' << m.macro_f1 << '\n';
  };
  os << "kind,layer,jaccard,micro_f1,macro_f1\n";
  for (const auto& [l, m] : report.per_layer) row("layer", l, m);
  for (const auto& [l, m] : report.cumulative) row("cumulative", l, m);
  os << "# expected_layer=";
  if (report.expected_layer) {
    os << *report.expected_layer;
  } else {
    os << "undefined";
  }
  os << " negative_delta=" << (report.negative_delta ? "yes" : "no") << '\n';
}

}  // namespace mlvat
