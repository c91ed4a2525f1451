#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lpattack/attacks.hpp"
#include "lpattack/attribution.hpp"
#include "lpattack/harness.hpp"
#include "lpattack/io.hpp"
#include "lpattack/train.hpp"

namespace {

using namespace lpattack;

std::vector<int> parse_shape(const std::vector<int>& shape) {
  if (shape.size() != 3) {
    throw UsageError("--shape expects three values: C,H,W");
  }
  return shape;
}

int cmd_train(const std::string& out_path, const std::vector<int>& shape,
              int classes, int samples, int epochs, double lr, double sigma,
              double signal_frac, double contrast,
              const std::vector<int>& hidden, const std::string& activation,
              double test_frac, std::uint64_t seed,
              const std::string& dump_dir, int dump_count) {
  TrainSpec spec;
  const auto chw = parse_shape(shape);
  spec.dataset.shape = ImageShape{chw[0], chw[1], chw[2]};
  spec.dataset.classes = classes;
  spec.dataset.count = samples;
  spec.dataset.sigma = sigma;
  spec.dataset.signal_fraction = signal_frac;
  spec.dataset.contrast = contrast;
  spec.dataset.seed = seed;
  spec.epochs = epochs;
  spec.learning_rate = lr;
  spec.hidden = hidden;
  spec.activation = activation_from_name(activation);
  spec.test_fraction = test_frac;
  spec.seed = seed;

  const TrainResult result = train_toy(spec);
  save_model(result.model, out_path);
  std::cout << "model: " << out_path << "\n"
            << "train accuracy: " << result.train_accuracy << "\n"
            << "test accuracy: " << result.test_accuracy << "\n";

  if (!dump_dir.empty()) {
    std::filesystem::create_directories(dump_dir);
    SyntheticDataset sample = generate_dataset(spec.dataset);
    const int n = std::min(dump_count, static_cast<int>(sample.images.size()));
    for (int i = 0; i < n; ++i) {
      std::ostringstream name;
      name << "img_" << std::setw(3) << std::setfill('0') << i << "_label"
           << sample.labels[i] << ".txt";
      save_image(sample.images[i], std::filesystem::path(dump_dir) / name.str());
    }
    std::cout << "wrote " << n << " sample images to " << dump_dir << "\n";
  }
  return 0;
}

int cmd_attribute(const std::string& model_path, const std::string& image_path,
                  int label_flag, const std::string& baseline_path,
                  int ig_steps, const std::string& out_path,
                  const std::string& csv_path) {
  const Classifier model = load_model(model_path);
  const Image x = load_image(image_path);
  const Image baseline =
      baseline_path.empty() ? make_image(x.shape) : load_image(baseline_path);
  const int label = label_flag >= 0 ? label_flag : predict(model, x);

  const AttributionMap map =
      integrated_gradients(model, x, baseline, label, ig_steps);

  std::ostringstream out;
  out << "ATTR " << map.scores.size() << "\n" << std::setprecision(17);
  for (Index i = 0; i < map.scores.size(); ++i) {
    out << map.scores[i] << "\n";
  }
  atomic_write_text(out_path, out.str());
  std::cout << "wrote " << map.scores.size() << " scores to " << out_path
            << "\n";

  if (!csv_path.empty()) {
    // rank 1 = largest |score|, ties toward the lower index
    std::vector<Index> order(map.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      const double ma = std::abs(map.scores[a]);
      const double mb = std::abs(map.scores[b]);
      if (ma != mb) return ma > mb;
      return a < b;
    });
    std::vector<Index> rank(map.scores.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
      rank[order[r]] = static_cast<Index>(r) + 1;
    }
    std::ostringstream csv;
    csv << "index,score,abs_score,rank\n" << std::setprecision(17);
    for (Index i = 0; i < map.scores.size(); ++i) {
      csv << i << ',' << map.scores[i] << ',' << std::abs(map.scores[i]) << ','
          << rank[i] << "\n";
    }
    atomic_write_text(csv_path, csv.str());
  }
  return 0;
}

int cmd_attack(const std::string& model_path, const std::string& image_path,
               int label_flag, AttackConfig cfg, const std::string& out_path,
               const std::string& trace_path) {
  const Classifier model = load_model(model_path);
  const Image x = load_image(image_path);
  const int label = label_flag >= 0 ? label_flag : predict(model, x);
  validate_config(cfg);

  AttackResult result;
  if (!trace_path.empty() && cfg.attack == AttackKind::lpbfgs) {
    // Deterministic re-run of the BFGS loop with an observer wired to the
    // trace file; the reported result below is identical.
    std::ostringstream trace;
    trace << "k,f,grad_norm,alpha,curvature_skipped\n"
          << std::setprecision(17);
    SelectorOptions sopts{cfg.strategy, cfg.seed, cfg.ig_steps};
    const PixelSelection sel =
        select_pixels(model, x, label, cfg.pixels, sopts);
    Vec w0(sel.budget);
    for (int i = 0; i < sel.budget; ++i) {
      const double v = std::clamp(sel.selected[i], cfg.clamp_delta,
                                  1.0 - cfg.clamp_delta);
      w0[i] = std::atanh(2.0 * v - 1.0);
    }
    ObjectiveFn obj{
        [&](const Vec& w) {
          return attack_loss(model, sel, w, x, label, cfg.loss, cfg.c,
                             cfg.kappa)
              .value;
        },
        [&](const Vec& w) {
          return attack_loss(model, sel, w, x, label, cfg.loss, cfg.c,
                             cfg.kappa)
              .gradient;
        }};
    BfgsOptions bopts;
    bopts.grad_tol = cfg.tolerance;
    bopts.max_iterations = cfg.iterations;
    bopts.first_step_cap = 1.0;
    bopts.step_cap = 8.0;
    bopts.observer = [&](const BfgsTrace& t) {
      trace << t.k << ',' << t.value << ',' << t.grad_norm << ',' << t.alpha
            << ',' << (t.curvature_skipped ? 1 : 0) << "\n";
    };
    bfgs_minimize(obj, w0, bopts);
    atomic_write_text(trace_path, trace.str());
  }
  result = run_attack(model, x, label, cfg);

  atomic_write_text(out_path, attack_result_json(result, cfg));
  std::cout << (result.success ? "success" : "no flip") << ": label "
            << result.original_label << " -> " << result.adversarial_label
            << " (confidence " << result.confidence << ")\n"
            << "result: " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::vector<int>& shape,
                 int classes, int count, double sigma, double signal_frac,
                 double contrast, std::uint64_t data_seed,
                 std::uint64_t pattern_seed,
                 const std::vector<std::string>& attacks,
                 const std::vector<std::string>& losses,
                 const std::vector<std::string>& strategies,
                 const std::vector<int>& pixels, AttackConfig base,
                 int jobs, const std::string& out_dir) {
  const Classifier model = load_model(model_path);

  DatasetSpec dspec;
  const auto chw = parse_shape(shape);
  dspec.shape = ImageShape{chw[0], chw[1], chw[2]};
  dspec.classes = classes;
  dspec.count = count;
  dspec.sigma = sigma;
  dspec.signal_fraction = signal_frac;
  dspec.contrast = contrast;
  dspec.seed = data_seed;
  dspec.pattern_seeds = derived_pattern_seeds(pattern_seed, classes);
  const SyntheticDataset dataset = generate_dataset(dspec);

  ExperimentGrid grid;
  grid.attacks.clear();
  for (const std::string& a : attacks) grid.attacks.push_back(attack_from_name(a));
  grid.losses.clear();
  for (const std::string& l : losses) grid.losses.push_back(loss_from_name(l));
  grid.strategies.clear();
  for (const std::string& s : strategies) {
    grid.strategies.push_back(strategy_from_name(s));
  }
  grid.pixel_budgets = pixels;
  grid.base = base;
  grid.jobs = jobs;

  const ExperimentReport report =
      run_experiment(model, dataset, grid, out_dir);
  std::cout << "report: " << report.csv_path.string() << "\n"
            << "manifest: " << report.manifest_path.string() << "\n"
            << metrics_csv(report.rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse pixel-budget adversarial attacks on a toy classifier"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train the toy classifier");
  std::string train_out = "model.json";
  std::vector<int> shape{1, 8, 8};
  int classes = 2, samples = 2000, epochs = 30, dump_count = 8;
  double lr = 0.05, sigma = 0.1, signal_frac = 0.125, contrast = 0.3,
         test_frac = 0.2;
  std::vector<int> hidden{64, 32};
  std::string activation = "tanh", dump_dir;
  std::uint64_t train_seed = 7;
  train->add_option("--out", train_out, "Model output path");
  train->add_option("--shape", shape, "Image shape C,H,W")->expected(3);
  train->add_option("--classes", classes, "Class count");
  train->add_option("--samples", samples, "Dataset size");
  train->add_option("--epochs", epochs, "SGD epochs");
  train->add_option("--lr", lr, "Learning rate");
  train->add_option("--sigma", sigma, "Per-pixel noise");
  train->add_option("--signal-frac", signal_frac, "Signal pixel fraction");
  train->add_option("--contrast", contrast, "Signal contrast");
  train->add_option("--hidden", hidden, "Hidden layer widths");
  train->add_option("--activation", activation, "relu|tanh");
  train->add_option("--test-frac", test_frac, "Held-out fraction");
  train->add_option("--seed", train_seed, "Seed");
  train->add_option("--dump-images", dump_dir,
                    "Also write sample IMGF images to this directory");
  train->add_option("--dump-count", dump_count, "How many samples to dump");

  // attribute
  auto* attribute =
      app.add_subcommand("attribute", "Integrated-gradients scores");
  std::string attr_model, attr_image, attr_baseline, attr_out = "scores.txt",
              attr_csv;
  int attr_label = -1, attr_steps = 256;
  attribute->add_option("--model", attr_model)->required();
  attribute->add_option("--image", attr_image)->required();
  attribute->add_option("--label", attr_label,
                        "Attribution label (default: model prediction)");
  attribute->add_option("--baseline", attr_baseline,
                        "Baseline image (default: black)");
  attribute->add_option("--ig-steps", attr_steps, "Riemann steps");
  attribute->add_option("--out", attr_out, "Scores output path");
  attribute->add_option("--csv", attr_csv, "Optional per-pixel CSV path");

  // attack
  auto* attack = app.add_subcommand("attack", "Run one attack on one image");
  std::string atk_model, atk_image, atk_out = "result.json", atk_trace;
  std::string atk_kind = "lpbfgs", atk_loss = "cw", atk_selector = "ig-top";
  int atk_label = -1;
  AttackConfig atk_cfg;
  attack->add_option("--model", atk_model)->required();
  attack->add_option("--image", atk_image)->required();
  attack->add_option("--label", atk_label,
                     "True label (default: model prediction)");
  attack->add_option("--attack", atk_kind, "lpbfgs|fgsm|cw|jsma");
  attack->add_option("--loss", atk_loss, "ce|cw|cwlog");
  attack->add_option("--selector", atk_selector, "ig-top|random|ig-bottom");
  attack->add_option("--pixels", atk_cfg.pixels, "Pixel budget K");
  attack->add_option("--c", atk_cfg.c, "Classification loss weight");
  attack->add_option("--kappa", atk_cfg.kappa, "Margin clamp");
  attack->add_option("--iters", atk_cfg.iterations, "Iteration budget");
  attack->add_option("--tol", atk_cfg.tolerance, "Gradient tolerance");
  attack->add_option("--eps-fgsm", atk_cfg.eps_fgsm, "FGSM magnitude");
  attack->add_option("--ig-steps", atk_cfg.ig_steps, "IG Riemann steps");
  attack->add_option("--adam-step", atk_cfg.adam_step, "Adam step size");
  attack->add_option("--seed", atk_cfg.seed, "Seed");
  attack->add_option("--out", atk_out, "Result JSON path");
  attack->add_option("--trace", atk_trace,
                     "Optional per-iteration CSV (lpbfgs only)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Run an experiment grid");
  std::string eval_model, eval_out = "reports";
  std::vector<int> eval_shape{1, 8, 8}, eval_pixels{8};
  int eval_classes = 2, eval_count = 250, eval_jobs = 1;
  double eval_sigma = 0.1, eval_signal = 0.125, eval_contrast = 0.3;
  std::uint64_t eval_data_seed = 99, eval_pattern_seed = 7;
  std::vector<std::string> eval_attacks{"lpbfgs"}, eval_losses{"cw"},
      eval_strategies{"ig-top"};
  AttackConfig eval_base;
  evaluate->add_option("--model", eval_model)->required();
  evaluate->add_option("--shape", eval_shape, "Image shape C,H,W")->expected(3);
  evaluate->add_option("--classes", eval_classes, "Class count");
  evaluate->add_option("--count", eval_count, "Evaluation set size");
  evaluate->add_option("--sigma", eval_sigma, "Per-pixel noise");
  evaluate->add_option("--signal-frac", eval_signal, "Signal pixel fraction");
  evaluate->add_option("--contrast", eval_contrast, "Signal contrast");
  evaluate->add_option("--data-seed", eval_data_seed, "Dataset noise seed");
  evaluate->add_option("--pattern-seed", eval_pattern_seed,
                       "Class template seed (match the training seed)");
  evaluate->add_option("--attacks", eval_attacks, "Attacks to run");
  evaluate->add_option("--losses", eval_losses, "Losses for lpbfgs rows");
  evaluate->add_option("--strategies", eval_strategies, "Selector strategies");
  evaluate->add_option("--pixels", eval_pixels, "Pixel budgets");
  evaluate->add_option("--c", eval_base.c, "Classification loss weight");
  evaluate->add_option("--kappa", eval_base.kappa, "Margin clamp");
  evaluate->add_option("--iters", eval_base.iterations, "Iteration budget");
  evaluate->add_option("--eps-fgsm", eval_base.eps_fgsm, "FGSM magnitude");
  evaluate->add_option("--ig-steps", eval_base.ig_steps, "IG Riemann steps");
  evaluate->add_option("--adam-step", eval_base.adam_step, "Adam step size");
  evaluate->add_option("--seed", eval_base.seed, "Attack seed");
  evaluate->add_option("--jobs", eval_jobs, "Concurrent per-example attacks");
  evaluate->add_option("--out", eval_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help
    }
    app.exit(e);
    return 1;
  }

  try {
    if (*train) {
      return cmd_train(train_out, shape, classes, samples, epochs, lr, sigma,
                       signal_frac, contrast, hidden, activation, test_frac,
                       train_seed, dump_dir, dump_count);
    }
    if (*attribute) {
      return cmd_attribute(attr_model, attr_image, attr_label, attr_baseline,
                           attr_steps, attr_out, attr_csv);
    }
    if (*attack) {
      atk_cfg.attack = attack_from_name(atk_kind);
      atk_cfg.loss = loss_from_name(atk_loss);
      atk_cfg.strategy = strategy_from_name(atk_selector);
      return cmd_attack(atk_model, atk_image, atk_label, atk_cfg, atk_out,
                        atk_trace);
    }
    if (*evaluate) {
      return cmd_evaluate(eval_model, eval_shape, eval_classes, eval_count,
                          eval_sigma, eval_signal, eval_contrast,
                          eval_data_seed, eval_pattern_seed, eval_attacks,
                          eval_losses, eval_strategies, eval_pixels, eval_base,
                          eval_jobs, eval_out);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
