#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mlvat/numkit.hpp"

namespace mlvat {

// Row-major 0/1 matrix: samples x labels.
struct LabelMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> values;

  LabelMatrix() = default;
  LabelMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0) {}

  std::uint8_t operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::uint8_t& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }

  static LabelMatrix from_dense(const Mat64& m);

  bool operator==(const LabelMatrix&) const = default;
};

struct MetricReport {
  double jaccard = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double threshold = 0.5;
  std::vector<double> per_label_f1;
  std::size_t n_samples = 0;

  bool operator==(const MetricReport&) const = default;
};

// 1 iff sigmoid(logit) > threshold.
LabelMatrix predict_labels(const Mat64& logits, double threshold);

// Mean per-sample |G n P| / |G u P|; a row with both sets empty scores 1.
double jaccard_index(const LabelMatrix& gold, const LabelMatrix& pred);
double micro_f1(const LabelMatrix& gold, const LabelMatrix& pred);
// Unweighted mean of per-label F1; a label with TP+FP+FN == 0 scores 0.
double macro_f1(const LabelMatrix& gold, const LabelMatrix& pred);

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
};

double f1_from_counts(const Confusion& c);

// Pools counts across shards. Feeding shards in order gives bit-identical
// results to feeding the concatenation.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(std::size_t n_labels);

  void add(const LabelMatrix& gold, const LabelMatrix& pred);
  MetricReport report(double threshold = 0.5) const;

  const std::vector<Confusion>& per_label() const { return per_label_; }

 private:
  std::vector<Confusion> per_label_;
  double jaccard_sum_ = 0.0;
  std::size_t n_samples_ = 0;
};

MetricReport evaluate_predictions(const LabelMatrix& gold, const LabelMatrix& pred, double threshold = 0.5);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricReport& r);
// Aligned text table, one row per (name, report), metrics in percent.
void print_metrics_table(std::ostream& os, const std::vector<std::pair<std::string, MetricReport>>& rows);

}  // namespace mlvat
