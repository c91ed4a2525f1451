#include "lpattack/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace lpattack {

namespace {

Vec class_template(const DatasetSpec& spec, std::uint64_t pattern_seed) {
  const Index n = spec.shape.size();
  Vec tpl = Vec::Constant(n, 0.5);
  const Index signal =
      std::clamp<Index>(std::lround(spec.signal_fraction * n), 1, n);

  std::mt19937_64 rng(pattern_seed);
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first `signal` slots are the signal pixels.
  for (Index i = 0; i < signal; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::uniform_int_distribution<int> side(0, 1);
  for (Index i = 0; i < signal; ++i) {
    const double offset = side(rng) ? spec.contrast : -spec.contrast;
    tpl[order[i]] = std::clamp(0.5 + offset, 0.0, 1.0);
  }
  return tpl;
}

}  // namespace

std::vector<std::uint64_t> derived_pattern_seeds(std::uint64_t pattern_seed,
                                                 int classes) {
  std::vector<std::uint64_t> seeds;
  seeds.reserve(classes);
  for (int c = 0; c < classes; ++c) {
    seeds.push_back(derive_seed(pattern_seed, 1000 + c));
  }
  return seeds;
}

SyntheticDataset generate_dataset(const DatasetSpec& spec) {
  if (spec.classes < 2) {
    throw UsageError("dataset needs at least 2 classes");
  }
  if (spec.count < 1) {
    throw UsageError("dataset count must be >= 1");
  }
  if (spec.shape.size() <= 0) {
    throw UsageError("dataset shape is empty");
  }
  if (!spec.pattern_seeds.empty() &&
      spec.pattern_seeds.size() != static_cast<std::size_t>(spec.classes)) {
    throw UsageError("pattern_seeds must be empty or have one seed per class");
  }

  SyntheticDataset ds;
  ds.spec = spec;

  const std::vector<std::uint64_t> pattern_seeds =
      spec.pattern_seeds.empty()
          ? derived_pattern_seeds(spec.seed, spec.classes)
          : spec.pattern_seeds;
  std::vector<Vec> templates;
  templates.reserve(spec.classes);
  for (int c = 0; c < spec.classes; ++c) {
    templates.push_back(class_template(spec, pattern_seeds[c]));
  }

  std::mt19937_64 rng(derive_seed(spec.seed, 0));
  std::normal_distribution<double> noise(0.0, 1.0);
  ds.images.reserve(spec.count);
  ds.labels.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    const int label = i % spec.classes;  // round-robin keeps classes balanced
    Image img = make_image(spec.shape);
    for (Index j = 0; j < img.data.size(); ++j) {
      img.data[j] =
          std::clamp(templates[label][j] + spec.sigma * noise(rng), 0.0, 1.0);
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  return ds;
}

}  // namespace lpattack
