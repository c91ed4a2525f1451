#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lpattack/harness.hpp"
#include "lpattack/train.hpp"
#include "oracles.hpp"

using namespace lpattack;

namespace {

// Drop the trailing time_ms column from every CSV line.
std::string strip_time_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string out, line;
  while (std::getline(in, line)) {
    const auto pos = line.rfind(',');
    out += line.substr(0, pos);
    out += '\n';
  }
  return out;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("sigma = 0 makes every image of a class equal its template") {
  DatasetSpec spec;
  spec.count = 40;
  spec.sigma = 0.0;
  const SyntheticDataset ds = generate_dataset(spec);
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const std::size_t ref = ds.labels[i];  // first `classes` entries cycle
    CHECK((ds.images[i].data.array() == ds.images[ref].data.array()).all());
  }
}

TEST_CASE("dataset generation is deterministic and balanced") {
  DatasetSpec spec;
  spec.count = 101;
  const SyntheticDataset a = generate_dataset(spec);
  const SyntheticDataset b = generate_dataset(spec);
  REQUIRE(a.images.size() == b.images.size());
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    CHECK((a.images[i].data.array() == b.images[i].data.array()).all());
    CHECK(a.labels[i] == b.labels[i]);
    CHECK(a.images[i].data.minCoeff() >= 0.0);
    CHECK(a.images[i].data.maxCoeff() <= 1.0);
  }
  int counts[2] = {0, 0};
  for (int label : a.labels) ++counts[label];
  CHECK(std::abs(counts[0] - counts[1]) <= 1);
}

TEST_CASE("explicit pattern seeds reproduce the templates across noise seeds") {
  DatasetSpec base;
  base.count = 2;
  base.sigma = 0.0;
  const SyntheticDataset a = generate_dataset(base);

  DatasetSpec other = base;
  other.seed = 12345;
  other.pattern_seeds = derived_pattern_seeds(base.seed, base.classes);
  const SyntheticDataset b = generate_dataset(other);
  for (int i = 0; i < 2; ++i) {
    CHECK((a.images[i].data.array() == b.images[i].data.array()).all());
  }
}

TEST_CASE("perturbation norms") {
  CHECK(perturbation_norms(Vec::Zero(5)).l0 == 0.0);
  CHECK(perturbation_norms(Vec::Zero(5)).l2 == 0.0);

  Vec r(3);
  r << 0.5, 0.0, -0.5;
  const Norms n = perturbation_norms(r);
  CHECK(n.l0 == 2.0);
  CHECK(n.l1 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(n.l2 == doctest::Approx(0.7071067811865476).epsilon(1e-15));
  CHECK(n.linf == 0.5);

  // Values at the float-noise scale do not count toward L0.
  Vec tiny(2);
  tiny << 1e-12, -1e-16;
  CHECK(perturbation_norms(tiny).l0 == 0.0);
}

namespace {

// Small trained model + matching evaluation set, shared across cases.
struct Fixture {
  Classifier model;
  SyntheticDataset eval;

  Fixture() {
    TrainSpec spec;
    spec.dataset.count = 600;
    spec.epochs = 10;
    const TrainResult trained = train_toy(spec);
    REQUIRE(trained.test_accuracy >= 0.9);
    model = trained.model;

    DatasetSpec espec = spec.dataset;
    espec.count = 60;
    espec.seed = 99;
    espec.pattern_seeds =
        derived_pattern_seeds(spec.dataset.seed, spec.dataset.classes);
    eval = generate_dataset(espec);
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("evaluate_attack with eps = 0 fgsm yields zero ASR and norms") {
  AttackConfig cfg;
  cfg.attack = AttackKind::fgsm;
  cfg.eps_fgsm = 0.0;
  cfg.pixels = 4;
  cfg.ig_steps = 16;
  const EvalResult result = evaluate_attack(fixture().model, fixture().eval, cfg);
  CHECK(result.row.asr == 0.0);
  CHECK(result.row.norms.l0 == 0.0);
  CHECK(result.row.norms.l2 == 0.0);
  CHECK(result.row.confidence == 0.0);
}

TEST_CASE("evaluate_attack reaches 100% ASR with a label-flipping stub") {
  AttackConfig cfg;
  cfg.pixels = 4;
  const AttackRunner oracle = [](const Classifier& model, const Image& x,
                                 int label, const AttackConfig&) {
    AttackResult res;
    res.adversarial = x;
    res.original_label = label;
    res.adversarial_label = 1 - label;
    res.success = true;
    res.confidence = 1.0;
    res.perturbation = Vec::Zero(x.data.size());
    res.iterations = 0;
    res.time_ms = 0.0;
    (void)model;
    return res;
  };
  const EvalResult result =
      evaluate_attack(fixture().model, fixture().eval, cfg, 1, oracle);
  CHECK(result.row.asr == 100.0);
}

TEST_CASE("evaluate_attack skips misclassified inputs") {
  int calls = 0;
  const AttackRunner probe = [&](const Classifier& model, const Image& x,
                                 int label, const AttackConfig&) {
    CHECK(predict(model, x) == label);  // only eligible inputs arrive
    ++calls;
    AttackResult res;
    res.adversarial = x;
    res.original_label = label;
    res.adversarial_label = label;
    res.success = false;
    res.perturbation = Vec::Zero(x.data.size());
    return res;
  };
  AttackConfig cfg;
  cfg.pixels = 4;
  const EvalResult result =
      evaluate_attack(fixture().model, fixture().eval, cfg, 1, probe);
  CHECK(calls == static_cast<int>(result.records.size()));
  CHECK(calls <= static_cast<int>(fixture().eval.images.size()));
  CHECK(calls > 0);
}

TEST_CASE("evaluate_attack fails when nothing is eligible") {
  // Constant-logit model predicting class 0 against all-ones labels.
  Classifier constant;
  constant.classes = 2;
  constant.input_shape = ImageShape{1, 2, 2};
  constant.layers.push_back(
      Layer{Mat::Zero(2, 4), Vec::Zero(2), Activation::identity});

  SyntheticDataset ds;
  ds.spec.shape = constant.input_shape;
  ds.spec.classes = 2;
  for (int i = 0; i < 4; ++i) {
    ds.images.push_back(make_image(constant.input_shape, 0.5));
    ds.labels.push_back(1);
  }
  AttackConfig cfg;
  cfg.pixels = 2;
  CHECK_THROWS_AS(evaluate_attack(constant, ds, cfg), EvaluationError);
}

TEST_CASE("metrics rows are recomputable from their per-example records") {
  AttackConfig cfg;
  cfg.attack = AttackKind::fgsm;
  cfg.pixels = 4;
  cfg.ig_steps = 16;
  const EvalResult result = evaluate_attack(fixture().model, fixture().eval, cfg);
  const MetricsRow again = aggregate_records(result.records, cfg);
  CHECK(again.asr == result.row.asr);
  CHECK(again.confidence == result.row.confidence);
  CHECK(again.norms.l0 == result.row.norms.l0);
  CHECK(again.norms.l1 == result.row.norms.l1);
  CHECK(again.norms.l2 == result.row.norms.l2);
  CHECK(again.norms.linf == result.row.norms.linf);
  CHECK(again.time_ms == result.row.time_ms);
}

TEST_CASE("evaluate_attack results do not depend on the job count") {
  AttackConfig cfg;
  cfg.attack = AttackKind::lpbfgs;
  cfg.pixels = 4;
  cfg.iterations = 20;
  cfg.ig_steps = 16;
  const EvalResult serial = evaluate_attack(fixture().model, fixture().eval, cfg, 1);
  const EvalResult parallel =
      evaluate_attack(fixture().model, fixture().eval, cfg, 4);
  CHECK(serial.row.asr == parallel.row.asr);
  CHECK(serial.row.confidence == parallel.row.confidence);
  CHECK(serial.row.norms.l2 == parallel.row.norms.l2);
  REQUIRE(serial.records.size() == parallel.records.size());
  for (std::size_t i = 0; i < serial.records.size(); ++i) {
    CHECK(serial.records[i].seed == parallel.records[i].seed);
    CHECK(serial.records[i].success == parallel.records[i].success);
  }
}

TEST_CASE("run_experiment emits one row per cell and is deterministic") {
  const auto dir =
      std::filesystem::temp_directory_path() / "lpattack_experiment";
  std::filesystem::remove_all(dir);

  ExperimentGrid grid;
  grid.attacks = {AttackKind::fgsm};
  grid.strategies = {SelectorStrategy::ig_top};
  grid.pixel_budgets = {4};
  grid.base.ig_steps = 16;
  grid.base.iterations = 20;

  const ExperimentReport a =
      run_experiment(fixture().model, fixture().eval, grid, dir / "run_a");
  CHECK(a.rows.size() == 1);

  const std::string csv_a = read_file(a.csv_path);
  // header + one data row
  CHECK(std::count(csv_a.begin(), csv_a.end(), '\n') == 2);

  const ExperimentReport b =
      run_experiment(fixture().model, fixture().eval, grid, dir / "run_b");
  const std::string csv_b = read_file(b.csv_path);
  CHECK(strip_time_column(csv_a) == strip_time_column(csv_b));

  const std::string manifest = read_file(a.manifest_path);
  CHECK(manifest.find("config_hash") != std::string::npos);
  CHECK(manifest == read_file(b.manifest_path));

  std::filesystem::remove_all(dir);
}

TEST_CASE("lpbfgs rows expand across losses; baselines get a single row") {
  const auto dir =
      std::filesystem::temp_directory_path() / "lpattack_experiment2";
  std::filesystem::remove_all(dir);

  ExperimentGrid grid;
  grid.attacks = {AttackKind::lpbfgs, AttackKind::fgsm};
  grid.losses = {LossKind::cw, LossKind::ce};
  grid.strategies = {SelectorStrategy::ig_top};
  grid.pixel_budgets = {4};
  grid.base.ig_steps = 16;
  grid.base.iterations = 15;

  const ExperimentReport report =
      run_experiment(fixture().model, fixture().eval, grid, dir);
  REQUIRE(report.rows.size() == 3);  // lpbfgs x {cw, ce} + fgsm
  CHECK(report.rows[0].attack == "lpbfgs");
  CHECK(report.rows[0].loss == "cw");
  CHECK(report.rows[1].attack == "lpbfgs");
  CHECK(report.rows[1].loss == "ce");
  CHECK(report.rows[2].attack == "fgsm");
  CHECK(report.rows[2].loss == "-");

  std::filesystem::remove_all(dir);
}
