#pragma once

// Labelled/unlabelled pools and the composed batches drawn from them.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mlvat/dataset.hpp"
#include "mlvat/numkit.hpp"

namespace mlvat {

struct SemiSupSplit {
  // Both lists are in sampling order.
  std::vector<std::string> labeled_ids;
  std::vector<std::string> unlabeled_ids;
  std::uint64_t seed = 0;
};

// Labelled = first floor(rho * N) ids of a seeded permutation of the target
// language's training pool, so smaller rho yields a prefix of larger rho.
// Unlabelled = rest of that pool followed by the training records of
// other_language_records (in their given order). With include_dev the target
// pool also takes the target's dev records.
SemiSupSplit make_semisup_split(const std::vector<LabeledRecord>& records, std::string_view target_language,
                                double rho, const std::vector<LabeledRecord>& other_language_records,
                                std::uint64_t seed, bool include_dev = false);

std::size_t labeled_budget(std::size_t pool_size, double rho);

struct BatchPlan {
  std::size_t labeled_batch = 8;
  std::size_t unlabeled_batch = 24;
  std::uint64_t shuffle_seed = 0;

  bool operator==(const BatchPlan&) const = default;
};

struct Batch {
  Mat64 labeled_x;
  Mat64 labeled_y;
  Mat64 unlabeled_x;
  std::vector<std::size_t> labeled_rows;
  std::vector<std::size_t> unlabeled_rows;
};

// Epochs are defined by the labelled pool (every labelled row once per epoch,
// last batch possibly short). The unlabelled pool cycles on its own and is
// reshuffled each time it wraps. The two pools draw from separate streams,
// so the labelled order does not depend on unlabeled_batch.
//
// The composer keeps pointers to the pools; they must outlive it.
class BatchComposer {
 public:
  BatchComposer(const Mat64& labeled_x, const Mat64& labeled_y, const Mat64& unlabeled_x, const BatchPlan& plan);

  void begin_epoch();
  bool has_next() const { return cursor_ < labeled_order_.size(); }
  Batch next_batch();

  std::size_t batches_per_epoch() const;
  std::size_t epoch() const { return epoch_; }

 private:
  const Mat64* labeled_x_;
  const Mat64* labeled_y_;
  const Mat64* unlabeled_x_;
  BatchPlan plan_;
  Rng labeled_rng_;
  Rng unlabeled_rng_;
  std::vector<std::size_t> labeled_order_;
  std::vector<std::size_t> unlabeled_order_;
  std::size_t cursor_ = 0;
  std::size_t unlabeled_cursor_ = 0;
  std::size_t epoch_ = 0;
};

Mat64 gather_rows(const Mat64& source, const std::vector<std::size_t>& rows);

}  // namespace mlvat
