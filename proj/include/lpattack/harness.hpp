#ifndef LPATTACK_HARNESS_HPP
#define LPATTACK_HARNESS_HPP

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lpattack/attacks.hpp"
#include "lpattack/dataset.hpp"
#include "lpattack/model.hpp"

namespace lpattack {

struct Norms {
  double l0 = 0.0;  // entries with |r_i| > 1e-8
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
};

Norms perturbation_norms(const Vec& r);

struct PerExampleRecord {
  int index = 0;  // position in the dataset
  std::uint64_t seed = 0;
  bool success = false;
  int original_label = 0;
  int adversarial_label = 0;
  double confidence = 0.0;
  Norms norms;
  int iterations = 0;
  double time_ms = 0.0;
};

// One aggregate row in the report CSV.
struct MetricsRow {
  std::string attack;
  std::string loss;
  std::string strategy;
  int k = 0;
  double asr = 0.0;         // percent over attempted examples
  double confidence = 0.0;  // mean over successful examples
  Norms norms;              // means over successful examples
  double time_ms = 0.0;     // mean over attempted examples
};

// Pure reduction from per-example records to the aggregate row; means over
// an empty subset are zero.
MetricsRow aggregate_records(const std::vector<PerExampleRecord>& records,
                             const AttackConfig& cfg);

struct EvalResult {
  MetricsRow row;
  std::vector<PerExampleRecord> records;
};

using AttackRunner = std::function<AttackResult(
    const Classifier&, const Image&, int, const AttackConfig&)>;

// Attacks every dataset example the model classifies correctly (skipping
// the rest) and aggregates. Per-example seeds derive from cfg.seed and the
// dataset index, so results do not depend on `jobs`. Throws
// EvaluationError when no example is eligible. `runner` defaults to
// run_attack and exists so tests can substitute a stub.
EvalResult evaluate_attack(const Classifier& model,
                           const SyntheticDataset& dataset,
                           const AttackConfig& cfg, int jobs = 1,
                           const AttackRunner& runner = {});

struct ExperimentGrid {
  std::vector<AttackKind> attacks{AttackKind::lpbfgs};
  std::vector<LossKind> losses{LossKind::cw};  // applied to lpbfgs rows only
  std::vector<SelectorStrategy> strategies{SelectorStrategy::ig_top};
  std::vector<int> pixel_budgets{8};
  AttackConfig base;  // attack/loss/strategy/pixels overridden per cell
  int jobs = 1;
};

struct ExperimentReport {
  std::vector<MetricsRow> rows;
  std::filesystem::path csv_path;
  std::filesystem::path manifest_path;
};

// Renders rows as the report CSV (header
// attack,loss,strategy,k,asr,confidence,l0,l1,l2,linf,time_ms; floats with
// four decimals).
std::string metrics_csv(const std::vector<MetricsRow>& rows);

// Runs the K x strategy x attack (x loss for lpbfgs) grid and writes
// report.csv plus manifest.json (full config, seeds, config hash,
// versions) under out_dir. Deterministic given the seed except for the
// time_ms column.
ExperimentReport run_experiment(const Classifier& model,
                                const SyntheticDataset& dataset,
                                const ExperimentGrid& grid,
                                const std::filesystem::path& out_dir);

}  // namespace lpattack

#endif
