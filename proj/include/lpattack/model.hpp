#ifndef LPATTACK_MODEL_HPP
#define LPATTACK_MODEL_HPP

#include <string>
#include <variant>
#include <vector>

#include "lpattack/types.hpp"

namespace lpattack {

enum class Activation { relu, tanh, identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct Layer {
  Mat weight;  // out_dim x in_dim
  Vec bias;    // out_dim
  Activation activation = Activation::identity;
};

// Fully connected classifier. Immutable after construction; every
// operation below is a pure function of (model, input) and safe to call
// concurrently on a shared model.
struct Classifier {
  std::vector<Layer> layers;
  int classes = 0;
  ImageShape input_shape;
};

// Checks layer dimension chaining, first in-dim == C*H*W, last out-dim ==
// classes and last activation identity. Throws ConfigError; messages cite
// the layer index.
void validate_classifier(const Classifier& model);

// Per-layer pre-activations and activations cached by a forward pass,
// reused by the backward passes below.
struct ForwardTrace {
  std::vector<Vec> pre;  // z[l] = W[l] a[l-1] + b[l]
  std::vector<Vec> act;  // a[l] = sigma(z[l]); act.back() are the logits

  const Vec& logits() const { return act.back(); }
};

ForwardTrace forward_trace(const Classifier& model, const Vec& input);

Vec forward_logits(const Classifier& model, const Image& x);
Vec softmax_probs(const Classifier& model, const Image& x);
int predict(const Classifier& model, const Image& x);

// Numerically stable softmax / log-softmax of a logit vector.
Vec softmax(const Vec& logits);
Vec log_softmax(const Vec& logits);

// d(scalar)/d(input) for a scalar with known logit-space gradient `seed`:
// reverse pass through the cached trace.
Vec backward_input(const Classifier& model, const ForwardTrace& trace,
                   const Vec& seed);

// Scalar objectives whose input gradient can be requested directly.
struct LogitObjective {
  int index = 0;  // d Z_index / dx
};
struct LogProbObjective {
  int index = 0;  // d log softmax(Z)_index / dx
};
struct CrossEntropyObjective {
  int label = 0;  // d( -log softmax(Z)_label ) / dx
};
using GradientObjective =
    std::variant<LogitObjective, LogProbObjective, CrossEntropyObjective>;

Vec input_gradient(const Classifier& model, const Image& x,
                   const GradientObjective& objective);

// classes x N matrix; row i == input_gradient(model, x, LogitObjective{i}).
Mat logit_jacobian(const Classifier& model, const Image& x);

}  // namespace lpattack

#endif
