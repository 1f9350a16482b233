#include "mlvat/semisup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mlvat/error.hpp"

namespace mlvat {

namespace {

constexpr std::uint64_t kSplitStream = 0x5b1d;
constexpr std::uint64_t kLabeledStream = 0x1ab;
constexpr std::uint64_t kUnlabeledStream = 0x2ab;

}  // namespace

std::size_t labeled_budget(std::size_t pool_size, double rho) {
  // The small slack keeps products such as 0.29 * 100 from flooring to 28.
  const double exact = rho * static_cast<double>(pool_size);
  return std::min(pool_size, static_cast<std::size_t>(std::floor(exact + 1e-9)));
}

SemiSupSplit make_semisup_split(const std::vector<LabeledRecord>& records, std::string_view target_language,
                                double rho, const std::vector<LabeledRecord>& other_language_records,
                                std::uint64_t seed, bool include_dev) {
  if (!(rho > 0.0 && rho <= 1.0)) throw Error(Errc::InvalidConfig, "rho must lie in (0, 1]");

  std::vector<const LabeledRecord*> pool;
  for (const auto& r : records) {
    if (r.language != target_language) continue;
    if (r.split == Split::Train || (include_dev && r.split == Split::Dev)) pool.push_back(&r);
  }

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed, kSplitStream);
  shuffle(order, rng);

  SemiSupSplit split;
  split.seed = seed;
  const std::size_t n_labeled = labeled_budget(pool.size(), rho);
  split.labeled_ids.reserve(n_labeled);
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < n_labeled ? split.labeled_ids : split.unlabeled_ids;
    dst.push_back(pool[order[i]]->id);
  }
  for (const auto& r : other_language_records) {
    if (r.language == target_language || r.split != Split::Train) continue;
    split.unlabeled_ids.push_back(r.id);
  }
  return split;
}

Mat64 gather_rows(const Mat64& source, const std::vector<std::size_t>& rows) {
  Mat64 out(rows.size(), source.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = source.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

BatchComposer::BatchComposer(const Mat64& labeled_x, const Mat64& labeled_y, const Mat64& unlabeled_x,
                             const BatchPlan& plan)
    : labeled_x_(&labeled_x),
      labeled_y_(&labeled_y),
      unlabeled_x_(&unlabeled_x),
      plan_(plan),
      labeled_rng_(plan.shuffle_seed, kLabeledStream),
      unlabeled_rng_(plan.shuffle_seed, kUnlabeledStream) {
  if (plan.labeled_batch == 0) throw Error(Errc::InvalidConfig, "labeled_batch must be >= 1");
  if (labeled_x.rows != labeled_y.rows) throw Error(Errc::ShapeMismatch, "labelled features and labels differ in rows");
  if (labeled_x.rows > 0 && unlabeled_x.rows > 0 && labeled_x.cols != unlabeled_x.cols) {
    throw Error(Errc::ShapeMismatch, "labelled and unlabelled features differ in width");
  }
  unlabeled_order_.resize(unlabeled_x.rows);
  std::iota(unlabeled_order_.begin(), unlabeled_order_.end(), std::size_t{0});
  if (plan_.unlabeled_batch > 0) shuffle(unlabeled_order_, unlabeled_rng_);
}

void BatchComposer::begin_epoch() {
  labeled_order_.resize(labeled_x_->rows);
  std::iota(labeled_order_.begin(), labeled_order_.end(), std::size_t{0});
  shuffle(labeled_order_, labeled_rng_);
  cursor_ = 0;
  ++epoch_;
}

std::size_t BatchComposer::batches_per_epoch() const {
  return (labeled_x_->rows + plan_.labeled_batch - 1) / plan_.labeled_batch;
}

Batch BatchComposer::next_batch() {
  if (!has_next()) throw Error(Errc::EmptyBatch, "BatchComposer: epoch exhausted; call begin_epoch()");
  Batch b;
  const std::size_t end = std::min(cursor_ + plan_.labeled_batch, labeled_order_.size());
  b.labeled_rows.assign(labeled_order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                        labeled_order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;

  if (plan_.unlabeled_batch > 0 && !unlabeled_order_.empty()) {
    b.unlabeled_rows.reserve(plan_.unlabeled_batch);
    while (b.unlabeled_rows.size() < plan_.unlabeled_batch) {
      if (unlabeled_cursor_ == unlabeled_order_.size()) {
        shuffle(unlabeled_order_, unlabeled_rng_);
        unlabeled_cursor_ = 0;
      }
      b.unlabeled_rows.push_back(unlabeled_order_[unlabeled_cursor_++]);
    }
  }

  b.labeled_x = gather_rows(*labeled_x_, b.labeled_rows);
  b.labeled_y = gather_rows(*labeled_y_, b.labeled_rows);
  b.unlabeled_x = gather_rows(*unlabeled_x_, b.unlabeled_rows);
  if (b.unlabeled_rows.empty()) b.unlabeled_x.cols = labeled_x_->cols;
  return b;
}

}  // namespace mlvat
