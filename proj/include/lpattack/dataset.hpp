#ifndef LPATTACK_DATASET_HPP
#define LPATTACK_DATASET_HPP

#include <cstdint>
#include <vector>

#include "lpattack/types.hpp"

namespace lpattack {

// Synthetic classification task: each class is a fixed seeded template
// (flat 0.5 background plus a sparse seeded set of signal pixels offset by
// +-contrast) with per-image Gaussian noise, clamped to [0,1]. Labels cycle
// round-robin so classes stay balanced within one sample.
struct DatasetSpec {
  int classes = 2;
  ImageShape shape{1, 8, 8};
  int count = 2000;
  double sigma = 0.1;             // per-pixel noise
  double signal_fraction = 0.125; // share of pixels carrying class signal
  double contrast = 0.3;          // signal offset from the 0.5 background
  std::uint64_t seed = 7;
  // One template seed per class; derived from `seed` when empty. Set these
  // explicitly to draw a fresh noise sample over the same class templates.
  std::vector<std::uint64_t> pattern_seeds;
};

struct SyntheticDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  DatasetSpec spec;
};

SyntheticDataset generate_dataset(const DatasetSpec& spec);

// Template seeds that generate_dataset derives from `pattern_seed` when
// DatasetSpec::pattern_seeds is empty; pass them explicitly to evaluate on
// the same classes a model was trained on.
std::vector<std::uint64_t> derived_pattern_seeds(std::uint64_t pattern_seed,
                                                 int classes);

}  // namespace lpattack

#endif
