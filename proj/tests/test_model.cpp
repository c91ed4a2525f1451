#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "lpattack/io.hpp"
#include "lpattack/model.hpp"
#include "lpattack/train.hpp"
#include "oracles.hpp"

using namespace lpattack;

namespace {

Classifier identity_model(int n) {
  Classifier model;
  model.classes = n;
  model.input_shape = ImageShape{1, 1, n};
  model.layers.push_back(
      Layer{Mat::Identity(n, n), Vec::Zero(n), Activation::identity});
  return model;
}

Image image_of(std::initializer_list<double> values) {
  Image img;
  img.data = Vec(static_cast<Index>(values.size()));
  Index i = 0;
  for (double v : values) img.data[i++] = v;
  img.shape = ImageShape{1, 1, static_cast<int>(values.size())};
  return img;
}

}  // namespace

TEST_CASE("forward_logits on an identity network returns the input") {
  const Classifier model = identity_model(2);
  const Vec z = forward_logits(model, image_of({0.2, 0.8}));
  CHECK(z[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(z[1] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("forward_logits applies the bias") {
  Classifier model = identity_model(2);
  model.layers[0].bias << 1.0, -1.0;
  const Vec z = forward_logits(model, image_of({0.0, 0.0}));
  CHECK(z[0] == 1.0);
  CHECK(z[1] == -1.0);
}

TEST_CASE("forward_logits matches a naive scalar reimplementation") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const Classifier model =
        oracles::random_tanh_model(seed, ImageShape{1, 4, 4}, 3, {10});
    const Image x = oracles::random_image(seed + 100, ImageShape{1, 4, 4});
    const Vec z = forward_logits(model, x);
    const std::vector<double> in(x.data.data(), x.data.data() + x.data.size());
    const std::vector<double> naive = oracles::naive_forward(model, in);
    REQUIRE(z.size() == static_cast<Index>(naive.size()));
    for (Index i = 0; i < z.size(); ++i) {
      CHECK(std::abs(z[i] - naive[i]) < 1e-12);
    }
  }
}

TEST_CASE("forward_logits rejects dimension mismatches") {
  const Classifier model = identity_model(2);
  CHECK_THROWS_AS(forward_logits(model, image_of({0.1, 0.2, 0.3})),
                  ConfigError);
}

TEST_CASE("softmax of equal logits is uniform") {
  const Vec p = softmax(image_of({0.0, 0.0, 0.0}).data);
  for (int i = 0; i < 3; ++i) {
    CHECK(p[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }
}

TEST_CASE("softmax survives huge logits via max subtraction") {
  const Vec p = softmax(image_of({1000.0, 0.0}).data);
  CHECK(std::isfinite(p[0]));
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p[1] >= 0.0);
  CHECK(p[1] < 1e-300);
}

TEST_CASE("softmax matches the direct definition") {
  // exp(1)/(exp(1)+exp(2)) and exp(2)/(exp(1)+exp(2))
  const Vec p = softmax(image_of({1.0, 2.0}).data);
  CHECK(p[0] == doctest::Approx(0.26894142136999512).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.73105857863000488).epsilon(1e-12));
}

TEST_CASE("softmax components sum to one even at logit magnitude 1e3") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(-1000.0, 1000.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vec z(4);
    for (int i = 0; i < 4; ++i) z[i] = uni(rng);
    const Vec p = softmax(z);
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    CHECK(p.minCoeff() >= 0.0);
  }
}

TEST_CASE("predict picks the max logit, ties to the lowest index") {
  Classifier model = identity_model(3);
  CHECK(predict(model, image_of({0.1, 0.9, 0.3})) == 1);
  const Classifier two = identity_model(2);
  CHECK(predict(two, image_of({0.5, 0.5})) == 0);
  const Classifier ten = identity_model(10);
  Image onehot = make_image(ImageShape{1, 1, 10});
  onehot.data[3] = 1.0;
  CHECK(predict(ten, onehot) == 3);
}

TEST_CASE("input_gradient of a logit on a linear model is the weight row") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal(0.0, 1.0);
  Classifier model;
  model.classes = 3;
  model.input_shape = ImageShape{1, 1, 5};
  Layer layer;
  layer.weight = Mat(3, 5);
  for (Index r = 0; r < 3; ++r) {
    for (Index c = 0; c < 5; ++c) layer.weight(r, c) = normal(rng);
  }
  layer.bias = Vec::Zero(3);
  layer.activation = Activation::identity;
  model.layers.push_back(layer);

  const Image x = oracles::random_image(22, model.input_shape);
  for (int t = 0; t < 3; ++t) {
    const Vec g = input_gradient(model, x, LogitObjective{t});
    CHECK((g.transpose() - layer.weight.row(t)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("a zero logit seed backpropagates to a zero input gradient") {
  const Classifier model =
      oracles::random_tanh_model(31, ImageShape{1, 3, 3}, 2, {6});
  const Image x = oracles::random_image(32, ImageShape{1, 3, 3});
  const ForwardTrace trace = forward_trace(model, x.data);
  const Vec g = backward_input(model, trace, Vec::Zero(2));
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("input_gradient matches finite differences on tanh models") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Classifier model =
        oracles::random_tanh_model(40 + seed, ImageShape{1, 3, 4}, 3, {8});
    const Image x = oracles::random_image(90 + seed, ImageShape{1, 3, 4});
    const int target = static_cast<int>(seed % 3);

    GradientObjective objective = LogitObjective{target};
    if (seed % 3 == 1) objective = LogProbObjective{target};
    if (seed % 3 == 2) objective = CrossEntropyObjective{target};

    const Vec analytic = input_gradient(model, x, objective);
    const Vec numeric = oracles::finite_difference_gradient(
        [&](const Vec& v) {
          const Image probe{v, x.shape};
          if (std::holds_alternative<LogitObjective>(objective)) {
            return forward_logits(model, probe)[target];
          }
          if (std::holds_alternative<LogProbObjective>(objective)) {
            return log_softmax(forward_logits(model, probe))[target];
          }
          return -log_softmax(forward_logits(model, probe))[target];
        },
        x.data);
    CHECK(oracles::max_relative_error(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("logit_jacobian equals W on a linear model") {
  Classifier model = identity_model(4);
  model.layers[0].weight(1, 2) = -0.75;
  model.layers[0].weight(3, 0) = 2.5;
  const Image x = oracles::random_image(55, ImageShape{1, 1, 4});
  const Mat jac = logit_jacobian(model, x);
  CHECK((jac - model.layers[0].weight).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("logit_jacobian rows equal input_gradient calls bit for bit") {
  const Classifier model =
      oracles::random_tanh_model(60, ImageShape{1, 4, 4}, 4, {12});
  const Image x = oracles::random_image(61, ImageShape{1, 4, 4});
  const Mat jac = logit_jacobian(model, x);
  for (int i = 0; i < 4; ++i) {
    const Vec row = input_gradient(model, x, LogitObjective{i});
    for (Index j = 0; j < row.size(); ++j) {
      CHECK(jac(i, j) == row[j]);
    }
  }
}

TEST_CASE("logit_jacobian matches a finite-difference jacobian") {
  const Classifier model =
      oracles::random_tanh_model(70, ImageShape{1, 3, 3}, 3, {7});
  const Image x = oracles::random_image(71, ImageShape{1, 3, 3});
  const Mat jac = logit_jacobian(model, x);
  for (int i = 0; i < 3; ++i) {
    const Vec numeric = oracles::finite_difference_gradient(
        [&](const Vec& v) {
          return forward_logits(model, Image{v, x.shape})[i];
        },
        x.data);
    CHECK(oracles::max_relative_error(jac.row(i).transpose(), numeric) < 1e-4);
  }
}

TEST_CASE("train_toy separates the two-class blob task") {
  TrainSpec spec;  // defaults: 8x8x1, 2 classes, 2000 samples, seed 7
  const TrainResult result = train_toy(spec);
  CHECK(result.test_accuracy >= 0.95);
  CHECK(result.train_accuracy >= 0.95);
}

TEST_CASE("train_toy with zero epochs returns an untrained network") {
  TrainSpec spec;
  spec.epochs = 0;
  spec.dataset.count = 600;
  const TrainResult result = train_toy(spec);
  // Chance level is 1/M = 0.5; allow generous sampling noise.
  CHECK(result.test_accuracy > 0.25);
  CHECK(result.test_accuracy < 0.75);
}

TEST_CASE("train_toy is deterministic") {
  TrainSpec spec;
  spec.epochs = 2;
  spec.dataset.count = 300;
  const TrainResult a = train_toy(spec);
  const TrainResult b = train_toy(spec);
  REQUIRE(a.model.layers.size() == b.model.layers.size());
  for (std::size_t l = 0; l < a.model.layers.size(); ++l) {
    CHECK((a.model.layers[l].weight.array() ==
           b.model.layers[l].weight.array())
              .all());
    CHECK((a.model.layers[l].bias.array() == b.model.layers[l].bias.array())
              .all());
  }
}

TEST_CASE("save/load round-trips the model bit-exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "lpattack_model_io";
  std::filesystem::create_directories(dir);
  const Classifier model =
      oracles::random_tanh_model(80, ImageShape{1, 3, 3}, 3, {5});
  const auto path = dir / "model.json";
  save_model(model, path);
  const Classifier loaded = load_model(path);

  for (std::uint64_t s = 0; s < 100; ++s) {
    const Image x = oracles::random_image(200 + s, model.input_shape);
    const Vec za = forward_logits(model, x);
    const Vec zb = forward_logits(loaded, x);
    for (Index i = 0; i < za.size(); ++i) {
      CHECK(za[i] == zb[i]);  // zero ULP difference
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("load_model rejects truncated files") {
  const auto dir = std::filesystem::temp_directory_path() / "lpattack_model_io2";
  std::filesystem::create_directories(dir);
  const Classifier model =
      oracles::random_tanh_model(81, ImageShape{1, 2, 2}, 2, {3});
  const auto path = dir / "model.json";
  save_model(model, path);

  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  in.close();
  std::ofstream out(dir / "truncated.json");
  out << text.substr(0, text.size() / 2);
  out.close();
  CHECK_THROWS_AS(load_model(dir / "truncated.json"), ParseError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("load_model cites the layer index for mismatched dimensions") {
  const auto dir = std::filesystem::temp_directory_path() / "lpattack_model_io3";
  std::filesystem::create_directories(dir);
  const auto path = dir / "bad.json";
  std::ofstream out(path);
  out << R"({"classes": 2, "input_shape": [1, 1, 2],
             "layers": [
               {"activation": "tanh", "rows": 3, "cols": 2,
                "weight": [1, 0, 0, 1, 1, 1], "bias": [0, 0, 0]},
               {"activation": "identity", "rows": 2, "cols": 4,
                "weight": [1, 0, 0, 0, 0, 1, 0, 0], "bias": [0, 0]}]})";
  out.close();
  try {
    load_model(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("image files round-trip exactly and reject bad input") {
  const auto dir = std::filesystem::temp_directory_path() / "lpattack_img_io";
  std::filesystem::create_directories(dir);
  const Image img = oracles::random_image(90, ImageShape{2, 3, 4});
  const auto path = dir / "img.txt";
  save_image(img, path);
  const Image loaded = load_image(path);
  CHECK(loaded.shape == img.shape);
  for (Index i = 0; i < img.data.size(); ++i) {
    CHECK(loaded.data[i] == img.data[i]);
  }

  std::ofstream bad(dir / "bad.txt");
  bad << "IMGF 1 2 2\n0.5 0.5 0.5\n";  // one value short
  bad.close();
  CHECK_THROWS_AS(load_image(dir / "bad.txt"), ParseError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("forward passes are deterministic") {
  const Classifier model =
      oracles::random_tanh_model(95, ImageShape{1, 4, 4}, 3, {9});
  const Image x = oracles::random_image(96, ImageShape{1, 4, 4});
  const Vec z1 = forward_logits(model, x);
  const Vec z2 = forward_logits(model, x);
  CHECK((z1.array() == z2.array()).all());
  const Vec g1 = input_gradient(model, x, LogitObjective{0});
  const Vec g2 = input_gradient(model, x, LogitObjective{0});
  CHECK((g1.array() == g2.array()).all());
}
