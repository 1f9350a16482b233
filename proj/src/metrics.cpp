#include "mlvat/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "mlvat/error.hpp"

namespace mlvat {

namespace {

void require_same_shape(const LabelMatrix& gold, const LabelMatrix& pred) {
  if (gold.rows != pred.rows || gold.cols != pred.cols) {
    throw Error(Errc::ShapeMismatch, "metrics: gold is " + std::to_string(gold.rows) + "x" +
                                         std::to_string(gold.cols) + ", pred is " + std::to_string(pred.rows) +
                                         "x" + std::to_string(pred.cols));
  }
}

std::string fixed(double v, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

LabelMatrix LabelMatrix::from_dense(const Mat64& m) {
  LabelMatrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.size(); ++i) out.values[i] = m.values[i] > 0.5 ? 1 : 0;
  return out;
}

LabelMatrix predict_labels(const Mat64& logits, double threshold) {
  LabelMatrix out(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.size(); ++i) out.values[i] = sigmoid(logits.values[i]) > threshold ? 1 : 0;
  return out;
}

double f1_from_counts(const Confusion& c) {
  const std::uint64_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 0.0;
  return static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

MetricAccumulator::MetricAccumulator(std::size_t n_labels) : per_label_(n_labels) {}

void MetricAccumulator::add(const LabelMatrix& gold, const LabelMatrix& pred) {
  require_same_shape(gold, pred);
  if (gold.cols != per_label_.size()) {
    throw Error(Errc::ShapeMismatch, "MetricAccumulator: label count changed between shards");
  }
  for (std::size_t r = 0; r < gold.rows; ++r) {
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t c = 0; c < gold.cols; ++c) {
      const bool g = gold(r, c) != 0;
      const bool p = pred(r, c) != 0;
      inter += (g && p) ? 1 : 0;
      uni += (g || p) ? 1 : 0;
      Confusion& conf = per_label_[c];
      if (g && p) ++conf.tp;
      else if (p) ++conf.fp;
      else if (g) ++conf.fn;
    }
    jaccard_sum_ += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  n_samples_ += gold.rows;
}

MetricReport MetricAccumulator::report(double threshold) const {
  MetricReport r;
  r.threshold = threshold;
  r.n_samples = n_samples_;
  r.jaccard = n_samples_ == 0 ? 0.0 : jaccard_sum_ / static_cast<double>(n_samples_);
  Confusion pooled;
  r.per_label_f1.reserve(per_label_.size());
  double macro_sum = 0.0;
  for (const Confusion& c : per_label_) {
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
    const double f1 = f1_from_counts(c);
    r.per_label_f1.push_back(f1);
    macro_sum += f1;
  }
  r.micro_f1 = f1_from_counts(pooled);
  r.macro_f1 = per_label_.empty() ? 0.0 : macro_sum / static_cast<double>(per_label_.size());
  return r;
}

MetricReport evaluate_predictions(const LabelMatrix& gold, const LabelMatrix& pred, double threshold) {
  MetricAccumulator acc(gold.cols);
  acc.add(gold, pred);
  return acc.report(threshold);
}

double jaccard_index(const LabelMatrix& gold, const LabelMatrix& pred) {
  return evaluate_predictions(gold, pred).jaccard;
}

double micro_f1(const LabelMatrix& gold, const LabelMatrix& pred) {
  return evaluate_predictions(gold, pred).micro_f1;
}

double macro_f1(const LabelMatrix& gold, const LabelMatrix& pred) {
  return evaluate_predictions(gold, pred).macro_f1;
}

std::string metrics_csv_header() { return "jaccard,micro_f1,macro_f1,threshold,n_samples"; }

std::string metrics_csv_row(const MetricReport& r) {
  return fixed(r.jaccard, 6) + "," + fixed(r.micro_f1, 6) + "," + fixed(r.macro_f1, 6) + "," +
         fixed(r.threshold, 3) + "," + std::to_string(r.n_samples);
}

void print_metrics_table(std::ostream& os, const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::size_t name_width = 4;
  for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
  os << std::left << std::setw(static_cast<int>(name_width)) << "Name" << std::right << std::setw(9) << "JI"
     << std::setw(9) << "MiF1" << std::setw(9) << "MaF1" << '\n';
  for (const auto& [name, r] : rows) {
    os << std::left << std::setw(static_cast<int>(name_width)) << name << std::right << std::setw(9)
       << fixed(100.0 * r.jaccard, 2) << std::setw(9) << fixed(100.0 * r.micro_f1, 2) << std::setw(9)
       << fixed(100.0 * r.macro_f1, 2) << '\n';
  }
}

}  // namespace mlvat
