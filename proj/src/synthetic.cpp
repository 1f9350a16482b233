#include "mlvat/synthetic.hpp"

#include <numeric>
#include <string>

#include "mlvat/error.hpp"
#include "mlvat/semisup.hpp"

namespace mlvat {

namespace {

enum Stream : std::uint64_t {
  kCenters = 1,
  kDomainShift = 2,
  kPoints = 3,
  kSplits = 4,
  kLayerNoise = 5,
};

void validate(const SynthSpec& spec, std::size_t n_clusters) {
  auto invalid = [](const std::string& why) { throw Error(Errc::InvalidSpec, "synthetic spec: " + why); };
  if (spec.n_per_cluster == 0 || spec.dim == 0 || spec.n_labels == 0) invalid("sizes must be >= 1");
  if (spec.domains == 0) invalid("domains must be >= 1");
  if (spec.n_layers == 0) invalid("n_layers must be >= 1");
  if (n_clusters < 2) invalid("need at least two clusters");
  if (spec.label_patterns.size() != n_clusters) invalid("one label pattern per cluster required");
  if (!spec.cluster_centers.empty() && spec.cluster_centers.size() != n_clusters) {
    invalid("cluster_centers and label_patterns disagree on the cluster count");
  }
  for (const auto& c : spec.cluster_centers) {
    if (c.size() != spec.dim) invalid("cluster center has wrong dimension");
  }
  for (const auto& p : spec.label_patterns) {
    if (p.size() != spec.n_labels) invalid("label pattern has wrong length");
    for (auto b : p) {
      if (b > 1) invalid("label patterns must be binary");
    }
  }
  if (!(spec.noise_sigma >= 0.0) || !(spec.domain_shift_sigma >= 0.0) || !(spec.center_spread >= 0.0)) {
    invalid("scales must be non-negative");
  }
  if (!(spec.train_fraction > 0.0) || !(spec.dev_fraction >= 0.0) || spec.train_fraction + spec.dev_fraction > 1.0) {
    invalid("split fractions must satisfy 0 < train, 0 <= dev, train + dev <= 1");
  }
  bool co_occur = false;
  for (std::size_t k = 0; k < spec.n_labels && !co_occur; ++k) {
    std::size_t holders = 0;
    for (const auto& p : spec.label_patterns) holders += p[k];
    co_occur = holders >= 2;
  }
  if (!co_occur) invalid("at least two clusters must share an active label");
}

}  // namespace

std::string synthetic_language(std::size_t domain) { return "synthetic-" + std::to_string(domain); }

std::vector<std::vector<std::uint8_t>> chained_label_patterns(std::size_t n_clusters, std::size_t n_labels) {
  std::vector<std::vector<std::uint8_t>> patterns(n_clusters, std::vector<std::uint8_t>(n_labels, 0));
  if (n_labels == 0) return patterns;
  for (std::size_t c = 0; c < n_clusters; ++c) {
    const std::size_t first = (c * n_labels) / n_clusters % n_labels;
    patterns[c][first] = 1;
    patterns[c][(first + 1) % n_labels] = 1;
  }
  return patterns;
}

SynthData gen_synthetic(const SynthSpec& spec) {
  const std::size_t n_clusters =
      !spec.label_patterns.empty() ? spec.label_patterns.size() : spec.cluster_centers.size();
  validate(spec, n_clusters);

  const Rng root(spec.seed);
  std::vector<Vec64> centers = spec.cluster_centers;
  if (centers.empty()) {
    Rng rng = root.split(kCenters);
    centers.assign(n_clusters, Vec64(spec.dim));
    for (auto& c : centers) {
      for (double& x : c) x = spec.center_spread * rng.normal();
    }
  }
  std::vector<Vec64> shifts(spec.domains, Vec64(spec.dim, 0.0));
  {
    Rng rng = root.split(kDomainShift);
    for (auto& s : shifts) {
      for (double& x : s) x = spec.domain_shift_sigma * rng.normal();
    }
  }

  Rng point_rng = root.split(kPoints);
  Rng split_rng = root.split(kSplits);
  Rng layer_rng = root.split(kLayerNoise);
  const std::size_t n_train = labeled_budget(spec.n_per_cluster, spec.train_fraction);
  const std::size_t n_dev = labeled_budget(spec.n_per_cluster, spec.dev_fraction);

  const std::size_t total = spec.domains * n_clusters * spec.n_per_cluster;
  SynthData out;
  out.records.reserve(total);
  std::vector<std::string> ids;
  ids.reserve(total);
  std::vector<float> data;
  data.reserve(total * spec.n_layers * spec.dim);

  Vec64 point(spec.dim);
  for (std::size_t d = 0; d < spec.domains; ++d) {
    for (std::size_t c = 0; c < n_clusters; ++c) {
      std::vector<std::size_t> order(spec.n_per_cluster);
      std::iota(order.begin(), order.end(), std::size_t{0});
      shuffle(order, split_rng);
      std::vector<Split> split_of(spec.n_per_cluster, Split::Test);
      for (std::size_t i = 0; i < order.size(); ++i) {
        split_of[order[i]] = i < n_train ? Split::Train : (i < n_train + n_dev ? Split::Dev : Split::Test);
      }

      for (std::size_t i = 0; i < spec.n_per_cluster; ++i) {
        for (std::size_t j = 0; j < spec.dim; ++j) {
          point[j] = centers[c][j] + shifts[d][j] + spec.noise_sigma * point_rng.normal();
        }
        for (std::size_t l = 0; l < spec.n_layers; ++l) {
          const double w = static_cast<double>(l + 1) / static_cast<double>(spec.n_layers);
          for (std::size_t j = 0; j < spec.dim; ++j) {
            const double noise = w < 1.0 ? (1.0 - w) * spec.center_spread * layer_rng.normal() : 0.0;
            data.push_back(static_cast<float>(w * point[j] + noise));
          }
        }
        LabeledRecord rec;
        rec.id = "syn-" + std::to_string(d) + "-" + std::to_string(c) + "-" + std::to_string(i);
        rec.language = synthetic_language(d);
        rec.labels = spec.label_patterns[c];
        rec.split = split_of[i];
        ids.push_back(rec.id);
        out.records.push_back(std::move(rec));
      }
    }
  }
  out.store = EmbeddingStore(std::move(ids), spec.n_layers, spec.dim, std::move(data));
  return out;
}

}  // namespace mlvat
