#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mlvat/dataset.hpp"
#include "mlvat/embedding_store.hpp"
#include "mlvat/metrics.hpp"
#include "mlvat/net.hpp"
#include "mlvat/semisup.hpp"
#include "mlvat/vat.hpp"

namespace mlvat {

enum class TrainMode { Sup, Mlvat };

std::string_view mode_name(TrainMode m) noexcept;
TrainMode parse_mode(std::string_view name);

struct RunConfig {
  TrainMode mode = TrainMode::Sup;
  std::string target_language = "en";
  double rho = 0.10;
  VatConfig vat;
  BatchPlan plan;
  std::size_t epochs = 30;
  double lr = 2e-5;
  double weight_decay = 0.01;
  double dropout = 0.1;
  std::size_t hidden_dim = 768;
  std::uint64_t seed = 1;
  bool train_on_train_plus_dev = false;
  Split eval_split = Split::Test;
  // Empty: evaluate on the target language.
  std::string eval_language;
  // Empty: every other language present in the corpus.
  std::vector<std::string> unlabeled_sources;
  double threshold = 0.5;
  FeatureSpec features;

  // Throws InvalidConfig.
  void validate() const;
};

// Flat key=value form; keys mirror the CLI flag names with '_' for '-'.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);
// Throws InvalidConfig on an unknown key or unparsable value.
void apply_config_entry(RunConfig& cfg, std::string_view key, std::string_view value);
std::string format_config(const RunConfig& cfg);
RunConfig parse_config_text(std::string_view text, RunConfig base = {});
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});

struct RunResult {
  RunConfig config;
  MetricReport report;
  std::vector<double> epoch_losses;  // mean batch loss per epoch
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_labeled = 0;
  std::size_t n_unlabeled = 0;
  std::size_t n_eval = 0;
  std::size_t steps = 0;
  MlpParams params;
};

// Called after every optimizer step with the updated parameters.
using StepObserver = std::function<void(std::size_t step, const MlpParams& params, double loss)>;

// Throws InvalidConfig (including mode mismatch or an empty labelled pool),
// MissingEmbedding, NumericalFailure on a non-finite loss.
RunResult train_supervised(const RunConfig& cfg, const std::vector<LabeledRecord>& records,
                           const EmbeddingStore& store, const StepObserver& observer = {});
RunResult train_mlvat(const RunConfig& cfg, const std::vector<LabeledRecord>& records, const EmbeddingStore& store,
                      const StepObserver& observer = {});
// Dispatches on cfg.mode.
RunResult run_experiment(const RunConfig& cfg, const std::vector<LabeledRecord>& records,
                         const EmbeddingStore& store, const StepObserver& observer = {});

// Deterministic, dropout disabled. Throws MissingEmbedding.
MetricReport evaluate(const MlpParams& params, const std::vector<LabeledRecord>& records, const EmbeddingStore& store,
                      const FeatureSpec& features, double threshold = 0.5);

// One JSON object per line. Wall-clock time is left out unless asked for, so
// identical runs produce identical records.
std::string result_to_json(const RunResult& result, bool include_timing = false);

enum class SweepAxis { Epsilon, Alpha, Rho, Ratio, UnlabeledBatch, Divergence, Mode, Seed };

std::string_view axis_name(SweepAxis a) noexcept;
SweepAxis parse_axis(std::string_view name);

struct SweepCell {
  std::string value;
  RunConfig config;
};

// Cartesian product of axis values and seeds. For Ratio the unlabelled batch
// is value * labeled_batch.
std::vector<SweepCell> expand_sweep(const RunConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                                    const std::vector<std::uint64_t>& seeds);

// Runs cells on up to `jobs` threads; results keep cell order.
std::vector<RunResult> run_sweep(const std::vector<SweepCell>& cells, const std::vector<LabeledRecord>& records,
                                 const EmbeddingStore& store, std::size_t jobs = 1);

std::string sweep_csv_header();
std::string sweep_csv_row(SweepAxis axis, const SweepCell& cell, const RunResult& result);

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single value
};
Summary summarize(const std::vector<double>& values);

}  // namespace mlvat
