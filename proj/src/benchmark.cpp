#include "mlvat/benchmark.hpp"

namespace mlvat {

SynthSpec standard_benchmark_spec(std::uint64_t data_seed) {
  SynthSpec spec;
  spec.n_per_cluster = 250;
  spec.dim = 32;
  spec.n_labels = 6;
  spec.label_patterns = chained_label_patterns(4, 6);
  spec.center_spread = 0.125;
  spec.noise_sigma = 0.25;
  spec.domains = 3;
  spec.domain_shift_sigma = 0.0375;
  spec.seed = data_seed;
  return spec;
}

RunConfig benchmark_run_config(TrainMode mode, std::uint64_t seed) {
  RunConfig cfg;
  cfg.mode = mode;
  cfg.target_language = synthetic_language(0);
  cfg.rho = 0.10;
  cfg.epochs = 30;
  cfg.lr = 1e-2;
  cfg.hidden_dim = 64;
  cfg.seed = seed;
  return cfg;
}

}  // namespace mlvat
