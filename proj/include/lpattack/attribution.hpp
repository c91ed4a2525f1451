#ifndef LPATTACK_ATTRIBUTION_HPP
#define LPATTACK_ATTRIBUTION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "lpattack/model.hpp"
#include "lpattack/types.hpp"

namespace lpattack {

// Per-pixel integrated-gradients scores for one input.
struct AttributionMap {
  Vec scores;      // length N
  Image baseline;  // path start point
  int steps = 0;   // Riemann resolution used
};

// Path integral of the logit-of-`label` gradient from `baseline` to `x`,
// midpoint Riemann rule with `steps` samples:
//   scores_i = (x_i - b_i) * (1/steps) * sum_k dF/dx_i at b + (k-1/2)/steps * (x-b)
AttributionMap integrated_gradients(const Classifier& model, const Image& x,
                                    const Image& baseline, int label,
                                    int steps);

enum class SelectorStrategy { ig_top, ig_bottom, random };

std::string strategy_name(SelectorStrategy s);
SelectorStrategy strategy_from_name(const std::string& name);

struct SelectorOptions {
  SelectorStrategy strategy = SelectorStrategy::ig_top;
  std::uint64_t seed = 0;  // used by the random strategy only
  int ig_steps = 256;
};

// Split of an image into K perturbable components and the frozen rest.
// `indices` is the sparse encoding of the 0/1 position map (one selected
// flat index per slot); `frozen` equals the source image with the selected
// entries zeroed, so putting `selected` back through the index list
// reproduces the source exactly.
struct PixelSelection {
  std::vector<Index> indices;  // K distinct flat indices
  Vec selected;                // values of the source image at `indices`
  Image frozen;                // source image zeroed at `indices`
  int budget = 0;              // K
};

// Ranks pixels by |integrated-gradients score| of the true-class logit
// (zero baseline) and keeps K of them: the largest for ig_top, the
// smallest for ig_bottom, or a seeded draw without replacement for random.
// Ties on |score| break toward the lower flat index.
PixelSelection select_pixels(const Classifier& model, const Image& x,
                             int label, int k, const SelectorOptions& opts);

// Image equal to `frozen` except selection.indices[p] = values[p].
Image reconstruct(const PixelSelection& selection, const Vec& values);

}  // namespace lpattack

#endif
