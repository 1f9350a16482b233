#pragma once

// Multilabel virtual adversarial training on fixed feature vectors.
//
// The perturbation is found with one (or more) gradient steps from a random
// point on the epsilon-sphere: r = eps*q, g = d/dr D[p(y|x), p(y|x+r)],
// r_vadv = eps * g/||g||. Parameters are held constant while searching, and
// the reference prediction p(y|x) never carries gradient.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "mlvat/net.hpp"
#include "mlvat/numkit.hpp"

namespace mlvat {

enum class Divergence {
  MseSigmoid,  // MSE between sigmoid outputs (mlVAT)
  MseLogits,   // MSE on raw logits
  KlPerLabel,  // mean Bernoulli KL(ref || pert) over labels
};

std::string_view divergence_name(Divergence d) noexcept;
// Accepts mse_sigmoid, mse_logits, kl_per_label.
Divergence parse_divergence(std::string_view name);

struct VatConfig {
  double epsilon = 0.5;
  double alpha = 1.0;
  Divergence divergence = Divergence::MseSigmoid;
  std::size_t power_iters = 1;

  // Throws InvalidConfig unless epsilon > 0, alpha >= 0, power_iters >= 1.
  void validate() const;
};

// Mean over every (sample, label) entry.
double divergence(Divergence variant, const Mat64& logits_ref, const Mat64& logits_pert);
// d divergence / d logits_pert, with the same mean normalisation.
Mat64 divergence_grad(Divergence variant, const Mat64& logits_ref, const Mat64& logits_pert);

// Single-sample perturbation. ||result|| == epsilon. Throws ZeroNorm when the
// divergence gradient vanishes (e.g. a head whose output ignores x).
Vec64 compute_r_vadv(const MlpParams& params, std::span<const double> x, const VatConfig& cfg, Rng& rng);

struct Perturbations {
  Mat64 r;                  // batch x d_in; zero rows where the gradient vanished
  std::vector<bool> valid;  // false where ZeroNorm occurred
};

// Batched version: row i draws its start direction from rng.split(i), then rng
// advances by one draw so repeated calls see fresh directions.
Perturbations compute_perturbations(const MlpParams& params, const Mat64& x, const VatConfig& cfg, Rng& rng);

struct LossAndGrads {
  double loss = 0.0;
  MlpGrads grads;
};

// Divergence between the fixed reference logits and the head evaluated at
// x + r. Gradients flow only through the perturbed branch. Rows marked
// invalid contribute zero loss but still count in the batch mean.
LossAndGrads vadv_loss_at(const MlpParams& params, const Mat64& x, const Perturbations& pert,
                          const Mat64& logits_ref, Divergence variant);

LossAndGrads vadv_loss(const MlpParams& params, const Mat64& x, const VatConfig& cfg, Rng& rng);

// BCE on the labelled batch with dropout in train mode.
LossAndGrads supervised_loss(const MlpParams& params, const Mat64& x, const Mat64& y, double dropout, Rng& rng);

struct MlvatLoss {
  double total = 0.0;
  double bce = 0.0;
  double vadv = 0.0;
  MlpGrads grads;
};

// L = bce(labelled) + alpha * vadv(labelled ++ unlabelled). With alpha == 0
// the adversarial branch is skipped entirely, so the result (and the
// generator state) equals supervised_loss exactly.
MlvatLoss mlvat_loss(const MlpParams& params, const Mat64& labeled_x, const Mat64& labeled_y,
                     const Mat64& unlabeled_x, const VatConfig& cfg, double dropout, Rng& rng);

Mat64 concat_rows(const Mat64& top, const Mat64& bottom);

}  // namespace mlvat
