#include "lpattack/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace lpattack {

double accuracy(const Classifier& model, const std::vector<Image>& images,
                const std::vector<int>& labels) {
  if (images.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (predict(model, images[i]) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(images.size());
}

namespace {

Classifier init_classifier(const TrainSpec& spec, std::mt19937_64& rng) {
  Classifier model;
  model.classes = spec.dataset.classes;
  model.input_shape = spec.dataset.shape;

  std::vector<Index> dims;
  dims.push_back(spec.dataset.shape.size());
  for (int h : spec.hidden) dims.push_back(h);
  dims.push_back(spec.dataset.classes);

  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Layer layer;
    const Index rows = dims[l + 1];
    const Index cols = dims[l];
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    layer.weight = Mat(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        layer.weight(r, c) = scale * normal(rng);
      }
    }
    layer.bias = Vec::Zero(rows);
    layer.activation =
        (l + 2 == dims.size()) ? Activation::identity : spec.activation;
    model.layers.push_back(std::move(layer));
  }
  validate_classifier(model);
  return model;
}

}  // namespace

TrainResult train_toy(const TrainSpec& spec) {
  if (spec.epochs < 0) throw UsageError("epochs must be >= 0");
  if (spec.learning_rate <= 0) throw UsageError("learning rate must be > 0");
  if (spec.test_fraction < 0 || spec.test_fraction >= 1) {
    throw UsageError("test fraction must be in [0,1)");
  }

  SyntheticDataset data = generate_dataset(spec.dataset);
  const std::size_t total = data.images.size();
  const std::size_t test_count =
      static_cast<std::size_t>(std::lround(spec.test_fraction * total));
  const std::size_t train_count = total - test_count;
  // Labels cycle round-robin, so a prefix split stays balanced.
  std::vector<Image> train_images(data.images.begin(),
                                  data.images.begin() + train_count);
  std::vector<int> train_labels(data.labels.begin(),
                                data.labels.begin() + train_count);
  std::vector<Image> test_images(data.images.begin() + train_count,
                                 data.images.end());
  std::vector<int> test_labels(data.labels.begin() + train_count,
                               data.labels.end());

  std::mt19937_64 rng(spec.seed);
  Classifier model = init_classifier(spec, rng);

  const std::size_t n_layers = model.layers.size();
  std::vector<std::size_t> order(train_count);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const Image& x = train_images[order[pos]];
      const int y = train_labels[order[pos]];

      ForwardTrace trace = forward_trace(model, x.data);
      Vec probs = softmax(trace.logits());
      const double loss = -std::log(std::max(probs[y], 1e-300));
      if (!std::isfinite(loss)) {
        throw TrainingError("training diverged: non-finite loss at epoch " +
                            std::to_string(epoch) + ", sample " +
                            std::to_string(pos));
      }

      // Backprop of softmax cross entropy; last layer is identity.
      Vec delta = probs;
      delta[y] -= 1.0;
      for (std::size_t l = n_layers; l-- > 0;) {
        Layer& layer = model.layers[l];
        if (layer.activation == Activation::tanh) {
          delta = delta.cwiseProduct(
              (1.0 - trace.act[l].array().square()).matrix());
        } else if (layer.activation == Activation::relu) {
          delta = delta.cwiseProduct(
              (trace.pre[l].array() > 0.0).cast<double>().matrix());
        }
        const Vec& below = (l == 0) ? x.data : trace.act[l - 1];
        Vec delta_below = layer.weight.transpose() * delta;
        layer.weight.noalias() -= spec.learning_rate * delta * below.transpose();
        layer.bias -= spec.learning_rate * delta;
        delta = std::move(delta_below);
      }
    }
  }

  TrainResult result;
  result.train_accuracy = accuracy(model, train_images, train_labels);
  result.test_accuracy =
      test_images.empty() ? 0.0 : accuracy(model, test_images, test_labels);
  result.model = std::move(model);
  return result;
}

}  // namespace lpattack
