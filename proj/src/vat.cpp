#include "mlvat/vat.hpp"

#include <cmath>
#include <string>

#include "mlvat/error.hpp"

namespace mlvat {

namespace {

constexpr double kZeroNormTol = 1e-12;

void require_same_shape(const Mat64& a, const Mat64& b, const char* what) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw Error(Errc::ShapeMismatch, std::string(what) + ": " + std::to_string(a.rows) + "x" +
                                         std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                                         std::to_string(b.cols));
  }
}

// Bernoulli KL(sigma(a) || sigma(b)) evaluated in log space.
double bernoulli_kl(double a, double b) {
  const double p = sigmoid(a);
  const double log_p = log_sigmoid(a);
  const double log_1mp = log_sigmoid(-a);
  const double log_q = log_sigmoid(b);
  const double log_1mq = log_sigmoid(-b);
  double kl = 0.0;
  if (p > 0.0) kl += p * (log_p - log_q);
  if (p < 1.0) kl += (1.0 - p) * (log_1mp - log_1mq);
  return std::max(kl, 0.0);
}

// Per-entry gradient of the divergence w.r.t. the perturbed logit, before the
// 1/count mean factor.
double entry_grad(Divergence variant, double ref, double pert) {
  switch (variant) {
    case Divergence::MseSigmoid: {
      const double sp = sigmoid(pert);
      return 2.0 * (sp - sigmoid(ref)) * sp * (1.0 - sp);
    }
    case Divergence::MseLogits:
      return 2.0 * (pert - ref);
    case Divergence::KlPerLabel:
      return sigmoid(pert) - sigmoid(ref);
  }
  return 0.0;
}

Mat64 add(const Mat64& a, const Mat64& b) {
  Mat64 out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += b.values[i];
  return out;
}

// Divergence gradient for each row normalised per sample (1/d_out), so row i
// does not depend on the batch it sits in.
Mat64 per_sample_divergence_grad(Divergence variant, const Mat64& ref, const Mat64& pert) {
  Mat64 g(ref.rows, ref.cols);
  const double inv = 1.0 / static_cast<double>(ref.cols);
  for (std::size_t i = 0; i < g.size(); ++i) g.values[i] = entry_grad(variant, ref.values[i], pert.values[i]) * inv;
  return g;
}

}  // namespace

std::string_view divergence_name(Divergence d) noexcept {
  switch (d) {
    case Divergence::MseSigmoid: return "mse_sigmoid";
    case Divergence::MseLogits: return "mse_logits";
    case Divergence::KlPerLabel: return "kl_per_label";
  }
  return "unknown";
}

Divergence parse_divergence(std::string_view name) {
  if (name == "mse_sigmoid") return Divergence::MseSigmoid;
  if (name == "mse_logits") return Divergence::MseLogits;
  if (name == "kl_per_label") return Divergence::KlPerLabel;
  throw Error(Errc::InvalidConfig, "unknown divergence '" + std::string(name) + "'");
}

void VatConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(Errc::InvalidConfig, "epsilon must be > 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(Errc::InvalidConfig, "alpha must be >= 0");
  if (power_iters < 1) throw Error(Errc::InvalidConfig, "power_iters must be >= 1");
}

double divergence(Divergence variant, const Mat64& logits_ref, const Mat64& logits_pert) {
  require_same_shape(logits_ref, logits_pert, "divergence");
  if (logits_ref.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < logits_ref.size(); ++i) {
    const double a = logits_ref.values[i];
    const double b = logits_pert.values[i];
    switch (variant) {
      case Divergence::MseSigmoid: {
        const double d = sigmoid(a) - sigmoid(b);
        sum += d * d;
        break;
      }
      case Divergence::MseLogits: {
        const double d = a - b;
        sum += d * d;
        break;
      }
      case Divergence::KlPerLabel:
        sum += bernoulli_kl(a, b);
        break;
    }
  }
  return sum / static_cast<double>(logits_ref.size());
}

Mat64 divergence_grad(Divergence variant, const Mat64& logits_ref, const Mat64& logits_pert) {
  require_same_shape(logits_ref, logits_pert, "divergence_grad");
  Mat64 g(logits_ref.rows, logits_ref.cols);
  if (g.size() == 0) return g;
  const double inv = 1.0 / static_cast<double>(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.values[i] = entry_grad(variant, logits_ref.values[i], logits_pert.values[i]) * inv;
  }
  return g;
}

Perturbations compute_perturbations(const MlpParams& params, const Mat64& x, const VatConfig& cfg, Rng& rng) {
  cfg.validate();
  if (x.cols != params.d_in()) throw Error(Errc::ShapeMismatch, "compute_perturbations: input width mismatch");

  Perturbations out{Mat64(x.rows, x.cols), std::vector<bool>(x.rows, true)};
  for (std::size_t i = 0; i < x.rows; ++i) {
    Rng row_rng = rng.split(i);
    const Vec64 q = sample_unit_vector(row_rng, x.cols);
    auto r = out.r.row(i);
    for (std::size_t j = 0; j < x.cols; ++j) r[j] = cfg.epsilon * q[j];
  }
  rng.next_u64();

  const Mat64 ref = predict_logits(params, x);
  Rng no_dropout(0);
  for (std::size_t iter = 0; iter < cfg.power_iters; ++iter) {
    const ForwardTrace trace = forward(params, add(x, out.r), Mode::Eval, 0.0, no_dropout);
    const MlpGrads g = backward(params, trace, per_sample_divergence_grad(cfg.divergence, ref, trace.logits));
    for (std::size_t i = 0; i < x.rows; ++i) {
      if (!out.valid[i]) continue;
      auto r = out.r.row(i);
      const auto gi = g.grad_input.row(i);
      const double norm = l2_norm(gi);
      if (!(norm >= kZeroNormTol)) {
        out.valid[i] = false;
        std::fill(r.begin(), r.end(), 0.0);
        continue;
      }
      for (std::size_t j = 0; j < x.cols; ++j) r[j] = cfg.epsilon * (gi[j] / norm);
    }
  }
  return out;
}

Vec64 compute_r_vadv(const MlpParams& params, std::span<const double> x, const VatConfig& cfg, Rng& rng) {
  if (x.size() != params.d_in()) throw Error(Errc::ShapeMismatch, "compute_r_vadv: input width mismatch");
  Mat64 single(1, x.size());
  std::copy(x.begin(), x.end(), single.values.begin());
  const Perturbations p = compute_perturbations(params, single, cfg, rng);
  if (!p.valid[0]) throw Error(Errc::ZeroNorm, "compute_r_vadv: divergence gradient vanished");
  return p.r.values;
}

LossAndGrads vadv_loss_at(const MlpParams& params, const Mat64& x, const Perturbations& pert,
                          const Mat64& logits_ref, Divergence variant) {
  require_same_shape(x, pert.r, "vadv_loss_at");
  Rng no_dropout(0);
  const ForwardTrace trace = forward(params, add(x, pert.r), Mode::Eval, 0.0, no_dropout);
  require_same_shape(logits_ref, trace.logits, "vadv_loss_at");

  Mat64 dlogits = divergence_grad(variant, logits_ref, trace.logits);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    if (!pert.valid[i]) {
      auto row = dlogits.row(i);
      std::fill(row.begin(), row.end(), 0.0);
      continue;
    }
    Mat64 ref_row(1, logits_ref.cols);
    Mat64 pert_row(1, logits_ref.cols);
    std::copy(logits_ref.row(i).begin(), logits_ref.row(i).end(), ref_row.values.begin());
    std::copy(trace.logits.row(i).begin(), trace.logits.row(i).end(), pert_row.values.begin());
    sum += divergence(variant, ref_row, pert_row);
  }
  LossAndGrads out;
  out.loss = x.rows == 0 ? 0.0 : sum / static_cast<double>(x.rows);
  out.grads = backward(params, trace, dlogits);
  return out;
}

LossAndGrads vadv_loss(const MlpParams& params, const Mat64& x, const VatConfig& cfg, Rng& rng) {
  if (x.rows == 0) throw Error(Errc::EmptyBatch, "vadv_loss: empty batch");
  const Perturbations pert = compute_perturbations(params, x, cfg, rng);
  return vadv_loss_at(params, x, pert, predict_logits(params, x), cfg.divergence);
}

LossAndGrads supervised_loss(const MlpParams& params, const Mat64& x, const Mat64& y, double dropout, Rng& rng) {
  if (x.rows == 0) throw Error(Errc::EmptyBatch, "supervised_loss: empty batch");
  if (y.rows != x.rows || y.cols != params.d_out()) {
    throw Error(Errc::ShapeMismatch, "supervised_loss: labels do not align with features/head");
  }
  const ForwardTrace trace = forward(params, x, Mode::Train, dropout, rng);
  Mat64 dlogits(y.rows, y.cols);
  const double inv = 1.0 / static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    dlogits.values[i] = (sigmoid(trace.logits.values[i]) - y.values[i]) * inv;
  }
  LossAndGrads out;
  out.loss = bce_with_logits(trace.logits.values, y.values);
  out.grads = backward(params, trace, dlogits);
  return out;
}

Mat64 concat_rows(const Mat64& top, const Mat64& bottom) {
  if (top.rows == 0) return bottom;
  if (bottom.rows == 0) return top;
  if (top.cols != bottom.cols) throw Error(Errc::ShapeMismatch, "concat_rows: column mismatch");
  Mat64 out(top.rows + bottom.rows, top.cols);
  std::copy(top.values.begin(), top.values.end(), out.values.begin());
  std::copy(bottom.values.begin(), bottom.values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(top.size()));
  return out;
}

MlvatLoss mlvat_loss(const MlpParams& params, const Mat64& labeled_x, const Mat64& labeled_y,
                     const Mat64& unlabeled_x, const VatConfig& cfg, double dropout, Rng& rng) {
  cfg.validate();
  if (labeled_x.rows == 0 && unlabeled_x.rows == 0) {
    throw Error(Errc::EmptyBatch, "mlvat_loss: both labelled and unlabelled batches are empty");
  }
  MlvatLoss out;
  if (labeled_x.rows > 0) {
    LossAndGrads sup = supervised_loss(params, labeled_x, labeled_y, dropout, rng);
    out.bce = sup.loss;
    out.grads = std::move(sup.grads);
  } else {
    out.grads = MlpGrads::zeros_like(params, 0);
  }
  out.total = out.bce;
  if (cfg.alpha == 0.0) return out;

  const Mat64 pool = concat_rows(labeled_x, unlabeled_x);
  const LossAndGrads adv = vadv_loss(params, pool, cfg, rng);
  out.vadv = adv.loss;
  out.total += cfg.alpha * adv.loss;
  accumulate(out.grads, adv.grads, cfg.alpha);
  return out;
}

}  // namespace mlvat
