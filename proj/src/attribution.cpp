#include "lpattack/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace lpattack {

std::string strategy_name(SelectorStrategy s) {
  switch (s) {
    case SelectorStrategy::ig_top:
      return "ig-top";
    case SelectorStrategy::ig_bottom:
      return "ig-bottom";
    case SelectorStrategy::random:
      return "random";
  }
  throw UsageError("unknown selector strategy");
}

SelectorStrategy strategy_from_name(const std::string& name) {
  if (name == "ig-top") return SelectorStrategy::ig_top;
  if (name == "ig-bottom") return SelectorStrategy::ig_bottom;
  if (name == "random") return SelectorStrategy::random;
  throw UsageError("unknown selector strategy '" + name +
                   "' (expected ig-top|ig-bottom|random)");
}

AttributionMap integrated_gradients(const Classifier& model, const Image& x,
                                    const Image& baseline, int label,
                                    int steps) {
  if (steps < 1) {
    throw UsageError("integrated gradients needs steps >= 1, got " +
                     std::to_string(steps));
  }
  if (!(baseline.shape == x.shape) || baseline.data.size() != x.data.size()) {
    throw UsageError("baseline shape does not match input shape");
  }
  if (label < 0 || label >= model.classes) {
    throw UsageError("attribution label out of range");
  }

  const Vec diff = x.data - baseline.data;
  Vec acc = Vec::Zero(x.data.size());
  Image point = x;
  for (int k = 1; k <= steps; ++k) {
    const double t = (k - 0.5) / steps;  // midpoint rule
    point.data = baseline.data + t * diff;
    acc += input_gradient(model, point, LogitObjective{label});
  }
  AttributionMap map;
  map.scores = diff.cwiseProduct(acc / steps);
  map.baseline = baseline;
  map.steps = steps;
  return map;
}

namespace {

// Flat indices ordered by |score|, ties toward the lower index.
std::vector<Index> rank_by_magnitude(const Vec& scores, bool descending) {
  std::vector<Index> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const double ma = std::abs(scores[a]);
    const double mb = std::abs(scores[b]);
    if (ma != mb) return descending ? ma > mb : ma < mb;
    return a < b;
  });
  return order;
}

}  // namespace

PixelSelection select_pixels(const Classifier& model, const Image& x,
                             int label, int k, const SelectorOptions& opts) {
  const Index n = x.data.size();
  if (k < 1 || static_cast<Index>(k) > n) {
    throw UsageError("pixel budget K must satisfy 1 <= K <= " +
                     std::to_string(n) + ", got " + std::to_string(k));
  }

  std::vector<Index> picked;
  picked.reserve(k);
  switch (opts.strategy) {
    case SelectorStrategy::ig_top:
    case SelectorStrategy::ig_bottom: {
      const AttributionMap map = integrated_gradients(
          model, x, make_image(x.shape), label, opts.ig_steps);
      std::vector<Index> order = rank_by_magnitude(
          map.scores, opts.strategy == SelectorStrategy::ig_top);
      picked.assign(order.begin(), order.begin() + k);
      break;
    }
    case SelectorStrategy::random: {
      std::vector<Index> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::mt19937_64 rng(opts.seed);
      // Partial Fisher-Yates; the prefix is the draw order.
      for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<Index> pick(i, n - 1);
        std::swap(order[i], order[pick(rng)]);
      }
      picked.assign(order.begin(), order.begin() + k);
      break;
    }
  }

  PixelSelection sel;
  sel.budget = k;
  sel.indices = std::move(picked);
  sel.selected = Vec(k);
  sel.frozen = x;
  for (int p = 0; p < k; ++p) {
    sel.selected[p] = x.data[sel.indices[p]];
    sel.frozen.data[sel.indices[p]] = 0.0;
  }
  return sel;
}

Image reconstruct(const PixelSelection& selection, const Vec& values) {
  if (values.size() != selection.budget) {
    throw UsageError("reconstruct values length " +
                     std::to_string(values.size()) +
                     " does not match budget K = " +
                     std::to_string(selection.budget));
  }
  Image out = selection.frozen;
  for (int p = 0; p < selection.budget; ++p) {
    out.data[selection.indices[p]] = values[p];
  }
  return out;
}

}  // namespace lpattack
