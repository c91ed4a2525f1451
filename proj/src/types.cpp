#include "lpattack/types.hpp"

#include <random>

namespace lpattack {

void validate_image(const Image& img) {
  if (img.data.size() != img.shape.size()) {
    throw UsageError("image data length " + std::to_string(img.data.size()) +
                     " does not match shape C*H*W = " +
                     std::to_string(img.shape.size()));
  }
  for (Index i = 0; i < img.data.size(); ++i) {
    const double v = img.data[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw UsageError("image component " + std::to_string(i) + " = " +
                       std::to_string(v) + " outside [0,1]");
    }
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base),
                    static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace lpattack
