#pragma once

// The standard synthetic benchmark: three domains standing in for
// languages, four correlated-label clusters, labelled data scarce in the
// target domain.

#include <cstdint>

#include "mlvat/synthetic.hpp"
#include "mlvat/trainer.hpp"

namespace mlvat {

SynthSpec standard_benchmark_spec(std::uint64_t data_seed);

// Desk-scale head and schedule for the benchmark; target is domain 0.
RunConfig benchmark_run_config(TrainMode mode, std::uint64_t seed);

}  // namespace mlvat
