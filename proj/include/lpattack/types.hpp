#ifndef LPATTACK_TYPES_HPP
#define LPATTACK_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lpattack {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

// Caller mistakes: bad flags, out-of-range arguments, mismatched lengths.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Inconsistent model/data wiring (dimension chains, shape mismatches).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed files; the message names the offending field.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf surfaced where a finite value is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Attack invoked on an input the model already misclassifies.
struct RejectedInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ImageShape {
  int channels = 0;
  int height = 0;
  int width = 0;

  Index size() const {
    return static_cast<Index>(channels) * height * width;
  }
  bool operator==(const ImageShape&) const = default;
};

// Flat pixel vector in [0,1], channel-major then row-major.
struct Image {
  Vec data;
  ImageShape shape;
};

inline Image make_image(const ImageShape& shape, double fill = 0.0) {
  return Image{Vec::Constant(shape.size(), fill), shape};
}

// Throws UsageError if data length disagrees with the shape or any
// component falls outside [0,1].
void validate_image(const Image& img);

// Deterministic per-example seed derivation (std::seed_seq expansion).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace lpattack

#endif
