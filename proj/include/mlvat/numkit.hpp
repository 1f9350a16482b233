#pragma once

// Minimal dense math for the classifier head: row-major matrices, stable
// sigmoid/BCE/MSE, and a counter-based random generator whose draw sequence
// depends only on (seed, stream), never on the platform's <random>.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mlvat {

using Vec64 = std::vector<double>;

struct Mat64 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Mat64() = default;
  Mat64(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  std::size_t size() const { return values.size(); }
  bool empty() const { return rows == 0; }

  bool operator==(const Mat64&) const = default;
};

// Splittable counter-based generator. Each draw is mix(key + counter * gamma),
// so a (seed, stream) pair fully determines the sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random mantissa bits.
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller.
  double normal();
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Independent substream; does not advance this generator.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  bool operator==(const Rng&) const = default;

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

double l2_norm(std::span<const double> v);
// Throws Error(ZeroNorm) when ||v|| < 1e-12.
Vec64 l2_normalize(std::span<const double> v);
Vec64 sample_unit_vector(Rng& rng, std::size_t dim);

double sigmoid(double z) noexcept;
// log(sigmoid(z)) without overflow.
double log_sigmoid(double z) noexcept;
Vec64 stable_sigmoid(std::span<const double> z);

// Mean over components of binary cross entropy on logits.
double bce_with_logits(std::span<const double> z, std::span<const double> y);
double mse(std::span<const double> p, std::span<const double> q);

bool all_finite(std::span<const double> v) noexcept;

}  // namespace mlvat
