#include "lpattack/model.hpp"

#include <cmath>

namespace lpattack {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::identity:
      return "identity";
  }
  throw UsageError("unknown activation");
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw UsageError("unknown activation '" + name +
                   "' (expected relu|tanh|identity)");
}

void validate_classifier(const Classifier& model) {
  if (model.layers.empty()) {
    throw ConfigError("classifier has no layers");
  }
  if (model.classes < 2) {
    throw ConfigError("classifier needs at least 2 classes, got " +
                      std::to_string(model.classes));
  }
  Index in_dim = model.input_shape.size();
  if (in_dim <= 0) {
    throw ConfigError("classifier input shape is empty");
  }
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer& layer = model.layers[l];
    if (layer.weight.cols() != in_dim) {
      throw ConfigError("layer " + std::to_string(l) + " expects input dim " +
                        std::to_string(layer.weight.cols()) + " but gets " +
                        std::to_string(in_dim));
    }
    if (layer.bias.size() != layer.weight.rows()) {
      throw ConfigError("layer " + std::to_string(l) + " bias length " +
                        std::to_string(layer.bias.size()) +
                        " does not match weight rows " +
                        std::to_string(layer.weight.rows()));
    }
    in_dim = layer.weight.rows();
  }
  if (in_dim != model.classes) {
    throw ConfigError("last layer emits " + std::to_string(in_dim) +
                      " values but classifier declares " +
                      std::to_string(model.classes) + " classes");
  }
  if (model.layers.back().activation != Activation::identity) {
    throw ConfigError("last layer (index " +
                      std::to_string(model.layers.size() - 1) +
                      ") must use identity activation to emit logits");
  }
}

namespace {

Vec apply_activation(Activation a, const Vec& z) {
  switch (a) {
    case Activation::relu:
      return z.cwiseMax(0.0);
    case Activation::tanh:
      return z.array().tanh().matrix();
    case Activation::identity:
      return z;
  }
  throw UsageError("unknown activation");
}

// d sigma(z) / dz expressed through the cached pre/post activation values.
Vec activation_derivative(Activation a, const Vec& z, const Vec& out) {
  switch (a) {
    case Activation::relu:
      return (z.array() > 0.0).cast<double>().matrix();
    case Activation::tanh:
      return (1.0 - out.array().square()).matrix();
    case Activation::identity:
      return Vec::Ones(z.size());
  }
  throw UsageError("unknown activation");
}

void check_input_dims(const Classifier& model, const Vec& input) {
  if (input.size() != model.input_shape.size() ||
      (!model.layers.empty() && model.layers.front().weight.cols() != input.size())) {
    throw ConfigError("input length " + std::to_string(input.size()) +
                      " does not match model input dim " +
                      std::to_string(model.input_shape.size()));
  }
}

}  // namespace

ForwardTrace forward_trace(const Classifier& model, const Vec& input) {
  check_input_dims(model, input);
  ForwardTrace trace;
  trace.pre.reserve(model.layers.size());
  trace.act.reserve(model.layers.size());
  const Vec* prev = &input;
  for (const Layer& layer : model.layers) {
    trace.pre.push_back(layer.weight * (*prev) + layer.bias);
    trace.act.push_back(apply_activation(layer.activation, trace.pre.back()));
    prev = &trace.act.back();
  }
  return trace;
}

Vec forward_logits(const Classifier& model, const Image& x) {
  return forward_trace(model, x.data).logits();
}

Vec softmax(const Vec& logits) {
  const double shift = logits.maxCoeff();
  Vec e = (logits.array() - shift).exp().matrix();
  return e / e.sum();
}

Vec log_softmax(const Vec& logits) {
  const double shift = logits.maxCoeff();
  Eigen::ArrayXd centered = logits.array() - shift;
  const double lse = std::log(centered.exp().sum());
  return (centered - lse).matrix();
}

Vec softmax_probs(const Classifier& model, const Image& x) {
  return softmax(forward_logits(model, x));
}

int predict(const Classifier& model, const Image& x) {
  const Vec z = forward_logits(model, x);
  Index best = 0;
  for (Index i = 1; i < z.size(); ++i) {
    if (z[i] > z[best]) best = i;  // ties keep the lowest index
  }
  return static_cast<int>(best);
}

Vec backward_input(const Classifier& model, const ForwardTrace& trace,
                   const Vec& seed) {
  if (seed.size() != model.classes) {
    throw UsageError("logit seed length " + std::to_string(seed.size()) +
                     " does not match class count " +
                     std::to_string(model.classes));
  }
  Vec delta = seed;
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const Layer& layer = model.layers[l];
    delta = delta.cwiseProduct(
        activation_derivative(layer.activation, trace.pre[l], trace.act[l]));
    delta = layer.weight.transpose() * delta;
  }
  return delta;
}

Vec input_gradient(const Classifier& model, const Image& x,
                   const GradientObjective& objective) {
  const ForwardTrace trace = forward_trace(model, x.data);
  const int m = model.classes;
  auto unit = [m](int i) {
    Vec e = Vec::Zero(m);
    e[i] = 1.0;
    return e;
  };
  Vec seed;
  if (const auto* o = std::get_if<LogitObjective>(&objective)) {
    if (o->index < 0 || o->index >= m)
      throw UsageError("logit objective index out of range");
    seed = unit(o->index);
  } else if (const auto* o = std::get_if<LogProbObjective>(&objective)) {
    if (o->index < 0 || o->index >= m)
      throw UsageError("log-prob objective index out of range");
    seed = unit(o->index) - softmax(trace.logits());
  } else if (const auto* o = std::get_if<CrossEntropyObjective>(&objective)) {
    if (o->label < 0 || o->label >= m)
      throw UsageError("cross-entropy objective label out of range");
    seed = softmax(trace.logits()) - unit(o->label);
  } else {
    throw UsageError("unknown gradient objective");
  }
  return backward_input(model, trace, seed);
}

Mat logit_jacobian(const Classifier& model, const Image& x) {
  Mat jac(model.classes, x.data.size());
  for (int i = 0; i < model.classes; ++i) {
    jac.row(i) = input_gradient(model, x, LogitObjective{i}).transpose();
  }
  return jac;
}

}  // namespace lpattack
