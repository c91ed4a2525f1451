#ifndef LPATTACK_TRAIN_HPP
#define LPATTACK_TRAIN_HPP

#include <cstdint>
#include <vector>

#include "lpattack/dataset.hpp"
#include "lpattack/model.hpp"

namespace lpattack {

struct TrainSpec {
  DatasetSpec dataset;
  int epochs = 30;
  double learning_rate = 0.05;
  std::vector<int> hidden{64, 32};
  Activation activation = Activation::tanh;
  double test_fraction = 0.2;
  std::uint64_t seed = 7;  // weight init and epoch shuffling
};

struct TrainResult {
  Classifier model;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

// Plain per-sample SGD on softmax cross entropy over the synthetic task.
// Deterministic given the spec. Throws TrainingError if the loss goes
// non-finite, with the epoch/sample in the message.
TrainResult train_toy(const TrainSpec& spec);

// Fraction of (image, label) pairs the model classifies correctly.
double accuracy(const Classifier& model, const std::vector<Image>& images,
                const std::vector<int>& labels);

}  // namespace lpattack

#endif
