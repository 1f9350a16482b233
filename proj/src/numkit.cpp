#include "mlvat/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mlvat/error.hpp"

namespace mlvat {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
constexpr double kZeroNormTol = 1e-12;
constexpr int kUnitVectorRetries = 8;

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(Errc::LengthMismatch,
                std::string(what) + ": length " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), key_(mix64(mix64(seed + kGamma) ^ mix64(stream * kGamma + 0x632be59bd9b4e019ULL))) {}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling: discard the biased low tail.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

Rng Rng::split(std::uint64_t stream) const {
  Rng child(seed_, 0);
  child.key_ = mix64(key_ ^ mix64(stream + 0x2545f4914f6cdd1dULL));
  return child;
}

double l2_norm(std::span<const double> v) {
  // Scale by the largest magnitude so tiny or huge inputs neither underflow nor overflow.
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 0.0;
  double sum = 0.0;
  for (double x : v) {
    const double t = x / scale;
    sum += t * t;
  }
  return scale * std::sqrt(sum);
}

Vec64 l2_normalize(std::span<const double> v) {
  const double norm = l2_norm(v);
  if (!(norm >= kZeroNormTol)) {
    throw Error(Errc::ZeroNorm, "l2_normalize: norm " + std::to_string(norm) + " below 1e-12");
  }
  Vec64 out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

Vec64 sample_unit_vector(Rng& rng, std::size_t dim) {
  if (dim == 0) throw Error(Errc::InvalidSpec, "sample_unit_vector: dim must be >= 1");
  Vec64 draw(dim);
  for (int attempt = 0; attempt < kUnitVectorRetries; ++attempt) {
    for (double& x : draw) x = rng.normal();
    if (l2_norm(draw) >= kZeroNormTol) return l2_normalize(draw);
  }
  throw Error(Errc::ZeroNorm, "sample_unit_vector: all Gaussian draws vanished");
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sigmoid(double z) noexcept {
  // log sigma(z) = -softplus(-z)
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

Vec64 stable_sigmoid(std::span<const double> z) {
  Vec64 out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = sigmoid(z[i]);
  return out;
}

double bce_with_logits(std::span<const double> z, std::span<const double> y) {
  require_same_length(z.size(), y.size(), "bce_with_logits");
  if (z.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    sum += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  return sum / static_cast<double>(z.size());
}

double mse(std::span<const double> p, std::span<const double> q) {
  require_same_length(p.size(), q.size(), "mse");
  if (p.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - q[i];
    sum += d * d;
  }
  return sum / static_cast<double>(p.size());
}

bool all_finite(std::span<const double> v) noexcept {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace mlvat
