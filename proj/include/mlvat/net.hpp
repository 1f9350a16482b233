#pragma once

// Two-layer classifier head: linear -> tanh -> dropout -> linear, with
// hand-written reverse mode and an AdamW optimizer.

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "mlvat/numkit.hpp"

namespace mlvat {

struct MlpParams {
  Mat64 w1;  // d_in x d_hidden
  Vec64 b1;
  Mat64 w2;  // d_hidden x d_out
  Vec64 b2;

  std::size_t d_in() const { return w1.rows; }
  std::size_t d_hidden() const { return w1.cols; }
  std::size_t d_out() const { return w2.cols; }

  static MlpParams zeros(std::size_t d_in, std::size_t d_hidden, std::size_t d_out);

  bool operator==(const MlpParams&) const = default;
};

struct MlpGrads {
  Mat64 w1;
  Vec64 b1;
  Mat64 w2;
  Vec64 b2;
  Mat64 grad_input;  // batch x d_in

  static MlpGrads zeros_like(const MlpParams& params, std::size_t batch);
};

enum class Mode { Train, Eval };

struct ForwardTrace {
  Mat64 input;
  Mat64 hidden_pre;
  Mat64 hidden_act;
  // Inverted dropout: entries are 0 or 1/(1-p); all ones in eval mode.
  Mat64 dropout_mask;
  Mat64 hidden_out;
  Mat64 logits;
};

// Xavier-uniform weights, zero biases.
MlpParams init_params(Rng& rng, std::size_t d_in, std::size_t d_hidden, std::size_t d_out);

// The generator is only consumed in train mode with dropout > 0.
ForwardTrace forward(const MlpParams& params, const Mat64& x, Mode mode, double dropout, Rng& rng);
Mat64 predict_logits(const MlpParams& params, const Mat64& x);

MlpGrads backward(const MlpParams& params, const ForwardTrace& trace, const Mat64& dloss_dlogits);

// acc += scale * g over the parameter blocks (grad_input is left alone).
void accumulate(MlpGrads& acc, const MlpGrads& g, double scale);

struct AdamWConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct OptimizerState {
  AdamWConfig hp;
  std::uint64_t step = 0;
  MlpParams m;
  MlpParams v;

  static OptimizerState init(const MlpParams& params, const AdamWConfig& hp);
};

// Decoupled weight decay (param *= 1 - lr*wd) followed by the bias-corrected
// Adam update. Applied to every parameter block, biases included.
void adamw_step(OptimizerState& state, MlpParams& params, const MlpGrads& grads);

bool all_finite(const MlpParams& params);

// "MLVP" checkpoint: magic, u32 version, u32 d_in/d_hidden/d_out, then
// w1, b1, w2, b2 as little-endian f64 in row-major order.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_params(const std::filesystem::path& path, const MlpParams& params);
MlpParams load_params(const std::filesystem::path& path);

}  // namespace mlvat
