#include "lpattack/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "lpattack/io.hpp"

#ifndef LPATTACK_VERSION
#define LPATTACK_VERSION "0.0.0"
#endif

namespace lpattack {

Norms perturbation_norms(const Vec& r) {
  Norms n;
  for (Index i = 0; i < r.size(); ++i) {
    if (std::abs(r[i]) > 1e-8) n.l0 += 1.0;
  }
  n.l1 = r.lpNorm<1>();
  n.l2 = r.norm();
  n.linf = r.size() ? r.lpNorm<Eigen::Infinity>() : 0.0;
  return n;
}

MetricsRow aggregate_records(const std::vector<PerExampleRecord>& records,
                             const AttackConfig& cfg) {
  MetricsRow row;
  row.attack = attack_name(cfg.attack);
  if (cfg.attack == AttackKind::lpbfgs) {
    row.loss = loss_name(cfg.loss);
  } else if (cfg.attack == AttackKind::cw) {
    row.loss = loss_name(LossKind::cw);
  } else {
    row.loss = "-";
  }
  row.strategy = strategy_name(cfg.strategy);
  row.k = cfg.pixels;

  if (records.empty()) return row;
  std::size_t successes = 0;
  for (const PerExampleRecord& rec : records) {
    row.time_ms += rec.time_ms;
    if (!rec.success) continue;
    ++successes;
    row.confidence += rec.confidence;
    row.norms.l0 += rec.norms.l0;
    row.norms.l1 += rec.norms.l1;
    row.norms.l2 += rec.norms.l2;
    row.norms.linf += rec.norms.linf;
  }
  row.asr = 100.0 * static_cast<double>(successes) /
            static_cast<double>(records.size());
  row.time_ms /= static_cast<double>(records.size());
  if (successes > 0) {
    const double inv = 1.0 / static_cast<double>(successes);
    row.confidence *= inv;
    row.norms.l0 *= inv;
    row.norms.l1 *= inv;
    row.norms.l2 *= inv;
    row.norms.linf *= inv;
  }
  return row;
}

EvalResult evaluate_attack(const Classifier& model,
                           const SyntheticDataset& dataset,
                           const AttackConfig& cfg, int jobs,
                           const AttackRunner& runner) {
  validate_config(cfg);
  if (jobs < 1) throw UsageError("jobs must be >= 1");
  if (dataset.images.empty()) {
    throw EvaluationError("dataset is empty");
  }
  if (!(dataset.spec.shape == model.input_shape)) {
    throw EvaluationError("dataset shape does not match model input shape");
  }

  std::vector<int> eligible;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    if (predict(model, dataset.images[i]) == dataset.labels[i]) {
      eligible.push_back(static_cast<int>(i));
    }
  }
  if (eligible.empty()) {
    throw EvaluationError(
        "no eligible examples: the model misclassifies every input");
  }

  const AttackRunner run = runner ? runner : AttackRunner(&run_attack);

  std::vector<PerExampleRecord> records(eligible.size());
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= eligible.size()) return;
      const int idx = eligible[slot];
      try {
        AttackConfig per_example = cfg;
        per_example.seed =
            derive_seed(cfg.seed, static_cast<std::uint64_t>(idx));
        const auto start = std::chrono::steady_clock::now();
        const AttackResult res =
            run(model, dataset.images[idx], dataset.labels[idx], per_example);
        PerExampleRecord rec;
        rec.index = idx;
        rec.seed = per_example.seed;
        rec.success = res.success;
        rec.original_label = res.original_label;
        rec.adversarial_label = res.adversarial_label;
        rec.confidence = res.confidence;
        rec.norms = perturbation_norms(res.perturbation);
        rec.iterations = res.iterations;
        rec.time_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
        records[slot] = rec;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const int thread_count =
      std::min<int>(jobs, static_cast<int>(eligible.size()));
  if (thread_count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    for (int t = 0; t < thread_count; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  EvalResult out;
  out.records = std::move(records);
  out.row = aggregate_records(out.records, cfg);
  return out;
}

namespace {

std::string fmt4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

nlohmann::json config_json(const AttackConfig& cfg) {
  nlohmann::json j;
  j["attack"] = attack_name(cfg.attack);
  j["loss"] = loss_name(cfg.loss);
  j["c"] = cfg.c;
  j["kappa"] = cfg.kappa;
  j["eps_fgsm"] = cfg.eps_fgsm;
  j["iterations"] = cfg.iterations;
  j["tolerance"] = cfg.tolerance;
  j["pixels"] = cfg.pixels;
  j["strategy"] = strategy_name(cfg.strategy);
  j["ig_steps"] = cfg.ig_steps;
  j["adam_step"] = cfg.adam_step;
  j["jsma_theta"] = cfg.jsma_theta;
  j["seed"] = cfg.seed;
  j["clamp_delta"] = cfg.clamp_delta;
  return j;
}

nlohmann::json dataset_json(const DatasetSpec& spec) {
  nlohmann::json j;
  j["classes"] = spec.classes;
  j["shape"] = {spec.shape.channels, spec.shape.height, spec.shape.width};
  j["count"] = spec.count;
  j["sigma"] = spec.sigma;
  j["signal_fraction"] = spec.signal_fraction;
  j["contrast"] = spec.contrast;
  j["seed"] = spec.seed;
  j["pattern_seeds"] = spec.pattern_seeds;
  return j;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 1099511628211ULL;
  }
  return hash;
}

}  // namespace

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string csv =
      "attack,loss,strategy,k,asr,confidence,l0,l1,l2,linf,time_ms\n";
  for (const MetricsRow& row : rows) {
    csv += row.attack + ',' + row.loss + ',' + row.strategy + ',' +
           std::to_string(row.k) + ',' + fmt4(row.asr) + ',' +
           fmt4(row.confidence) + ',' + fmt4(row.norms.l0) + ',' +
           fmt4(row.norms.l1) + ',' + fmt4(row.norms.l2) + ',' +
           fmt4(row.norms.linf) + ',' + fmt4(row.time_ms) + '\n';
  }
  return csv;
}

ExperimentReport run_experiment(const Classifier& model,
                                const SyntheticDataset& dataset,
                                const ExperimentGrid& grid,
                                const std::filesystem::path& out_dir) {
  if (grid.attacks.empty() || grid.strategies.empty() ||
      grid.pixel_budgets.empty()) {
    throw UsageError("experiment grid has an empty axis");
  }
  if (std::find(grid.attacks.begin(), grid.attacks.end(),
                AttackKind::lpbfgs) != grid.attacks.end() &&
      grid.losses.empty()) {
    throw UsageError("experiment grid needs at least one loss for lpbfgs");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory " +
                             out_dir.string() + ": " + ec.message());
  }

  ExperimentReport report;
  for (int k : grid.pixel_budgets) {
    for (SelectorStrategy strategy : grid.strategies) {
      for (AttackKind attack : grid.attacks) {
        std::vector<LossKind> losses{grid.base.loss};
        if (attack == AttackKind::lpbfgs) losses = grid.losses;
        for (LossKind loss : losses) {
          AttackConfig cfg = grid.base;
          cfg.attack = attack;
          cfg.loss = loss;
          cfg.strategy = strategy;
          cfg.pixels = k;
          EvalResult cell = evaluate_attack(model, dataset, cfg, grid.jobs);
          report.rows.push_back(cell.row);
        }
      }
    }
  }

  nlohmann::json manifest;
  manifest["base_config"] = config_json(grid.base);
  manifest["dataset"] = dataset_json(dataset.spec);
  nlohmann::json jgrid;
  jgrid["attacks"] = nlohmann::json::array();
  for (AttackKind a : grid.attacks) jgrid["attacks"].push_back(attack_name(a));
  jgrid["losses"] = nlohmann::json::array();
  for (LossKind l : grid.losses) jgrid["losses"].push_back(loss_name(l));
  jgrid["strategies"] = nlohmann::json::array();
  for (SelectorStrategy s : grid.strategies) {
    jgrid["strategies"].push_back(strategy_name(s));
  }
  jgrid["pixel_budgets"] = grid.pixel_budgets;
  jgrid["jobs"] = grid.jobs;
  manifest["grid"] = std::move(jgrid);
  manifest["seed"] = grid.base.seed;
  manifest["rows"] = report.rows.size();
  manifest["versions"] = {{"lpattack", LPATTACK_VERSION},
                          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                        std::to_string(EIGEN_MAJOR_VERSION) +
                                        "." +
                                        std::to_string(EIGEN_MINOR_VERSION)}};
  // Hash everything that determines the results (not the results).
  manifest["config_hash"] = [&] {
    nlohmann::json key;
    key["base_config"] = manifest["base_config"];
    key["dataset"] = manifest["dataset"];
    key["grid"] = manifest["grid"];
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(key.dump())));
    return std::string(buf);
  }();

  report.csv_path = out_dir / "report.csv";
  report.manifest_path = out_dir / "manifest.json";
  atomic_write_text(report.csv_path, metrics_csv(report.rows));
  atomic_write_text(report.manifest_path, manifest.dump(2) + "\n");
  return report;
}

}  // namespace lpattack
