#include "lpattack/attacks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include <json.hpp>

#include "lpattack/harness.hpp"

namespace lpattack {

std::string attack_name(AttackKind a) {
  switch (a) {
    case AttackKind::lpbfgs:
      return "lpbfgs";
    case AttackKind::fgsm:
      return "fgsm";
    case AttackKind::cw:
      return "cw";
    case AttackKind::jsma:
      return "jsma";
  }
  throw UsageError("unknown attack kind");
}

AttackKind attack_from_name(const std::string& name) {
  if (name == "lpbfgs") return AttackKind::lpbfgs;
  if (name == "fgsm") return AttackKind::fgsm;
  if (name == "cw") return AttackKind::cw;
  if (name == "jsma") return AttackKind::jsma;
  throw UsageError("unknown attack '" + name +
                   "' (expected lpbfgs|fgsm|cw|jsma)");
}

std::string loss_name(LossKind l) {
  switch (l) {
    case LossKind::ce:
      return "ce";
    case LossKind::cw:
      return "cw";
    case LossKind::cwlog:
      return "cwlog";
  }
  throw UsageError("unknown loss kind");
}

LossKind loss_from_name(const std::string& name) {
  if (name == "ce") return LossKind::ce;
  if (name == "cw") return LossKind::cw;
  if (name == "cwlog") return LossKind::cwlog;
  throw UsageError("unknown loss '" + name + "' (expected ce|cw|cwlog)");
}

void validate_config(const AttackConfig& cfg) {
  if (cfg.c <= 0.0) throw UsageError("loss trade-off c must be > 0");
  if (cfg.kappa < 0.0) throw UsageError("margin kappa must be >= 0");
  if (cfg.iterations < 1) throw UsageError("iterations T must be >= 1");
  if (cfg.pixels < 1) throw UsageError("pixel budget K must be >= 1");
  if (!(cfg.clamp_delta > 0.0 && cfg.clamp_delta < 0.5)) {
    throw UsageError("clamp delta must lie in (0, 1/2)");
  }
  if (cfg.ig_steps < 1) throw UsageError("ig-steps must be >= 1");
  if (cfg.adam_step <= 0.0) throw UsageError("adam step must be > 0");
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

// argmax over classes other than `label`, ties toward the lower index.
int runner_up(const Vec& values, int label) {
  int best = -1;
  for (Index i = 0; i < values.size(); ++i) {
    if (static_cast<int>(i) == label) continue;
    if (best < 0 || values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

Vec substituted_pixels(const Vec& w) {
  return (0.5 * (w.array().tanh() + 1.0)).matrix();
}

void check_attack_input(const Classifier& model, const Image& x, int label) {
  validate_image(x);
  if (!(x.shape == model.input_shape)) {
    throw ConfigError("image shape does not match model input shape");
  }
  if (label < 0 || label >= model.classes) {
    throw UsageError("label out of range");
  }
  if (predict(model, x) != label) {
    throw RejectedInputError("input is already misclassified; attack is "
                             "defined on correctly classified inputs");
  }
}

AttackResult finish_result(const Classifier& model, const Image& x, int label,
                           Image adversarial, int iterations,
                           Clock::time_point start) {
  AttackResult res;
  const Vec probs = softmax_probs(model, adversarial);
  int adv = 0;
  for (Index i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[adv]) adv = static_cast<int>(i);
  }
  res.success = adv != label;
  res.original_label = label;
  res.adversarial_label = adv;
  res.confidence = probs[adv];
  res.perturbation = adversarial.data - x.data;
  res.adversarial = std::move(adversarial);
  res.iterations = iterations;
  res.time_ms = elapsed_ms(start);
  return res;
}

Vec initial_substitution(const Vec& selected, double delta) {
  Vec w(selected.size());
  for (Index i = 0; i < w.size(); ++i) {
    const double v = std::clamp(selected[i], delta, 1.0 - delta);
    w[i] = std::atanh(2.0 * v - 1.0);
  }
  return w;
}

}  // namespace

LossEval attack_loss(const Classifier& model, const PixelSelection& selection,
                     const Vec& w, const Image& x, int label, LossKind kind,
                     double c, double kappa) {
  if (w.size() != selection.budget) {
    throw UsageError("attack_loss variable length does not match budget K");
  }
  const Vec pixels = substituted_pixels(w);
  const Image xhat = reconstruct(selection, pixels);
  const Vec diff = xhat.data - x.data;
  const double dist = diff.norm();

  const ForwardTrace trace = forward_trace(model, xhat.data);
  const Vec& z = trace.logits();
  const int m = model.classes;

  double lhat = 0.0;
  Vec seed = Vec::Zero(m);
  switch (kind) {
    case LossKind::ce: {
      const Vec logp = log_softmax(z);
      lhat = logp[label];
      seed = -softmax(z);
      seed[label] += 1.0;
      break;
    }
    case LossKind::cw: {
      const int other = runner_up(z, label);
      const double margin = z[label] - z[other];
      if (margin > -kappa) {
        lhat = margin;
        seed[label] = 1.0;
        seed[other] = -1.0;
      } else {
        lhat = -kappa;  // clamped branch: no classification gradient
      }
      break;
    }
    case LossKind::cwlog: {
      const Vec logp = log_softmax(z);
      const int other = runner_up(logp, label);
      const double margin = logp[label] - logp[other];
      if (margin > -kappa) {
        lhat = margin;
        // d(logp_y - logp_other)/dz: the softmax terms cancel.
        seed[label] = 1.0;
        seed[other] = -1.0;
      } else {
        lhat = -kappa;
      }
      break;
    }
  }

  LossEval out;
  out.value = dist + c * lhat;

  Vec dL_dx = Vec::Zero(x.data.size());
  if (!seed.isZero(0.0)) {
    dL_dx = c * backward_input(model, trace, seed);
  }
  if (dist > 0.0) {
    dL_dx += diff / dist;
  }
  out.gradient = Vec(selection.budget);
  for (int p = 0; p < selection.budget; ++p) {
    const double t = 2.0 * pixels[p] - 1.0;  // tanh(w_p)
    out.gradient[p] = dL_dx[selection.indices[p]] * 0.5 * (1.0 - t * t);
  }
  return out;
}

AttackResult lp_bfgs_attack(const Classifier& model, const Image& x, int label,
                            const AttackConfig& cfg) {
  validate_config(cfg);
  const auto start = Clock::now();
  check_attack_input(model, x, label);

  SelectorOptions sopts;
  sopts.strategy = cfg.strategy;
  sopts.seed = cfg.seed;
  sopts.ig_steps = cfg.ig_steps;
  const PixelSelection sel =
      select_pixels(model, x, label, cfg.pixels, sopts);

  const Vec w0 = initial_substitution(sel.selected, cfg.clamp_delta);
  ObjectiveFn obj{
      [&](const Vec& w) {
        return attack_loss(model, sel, w, x, label, cfg.loss, cfg.c, cfg.kappa)
            .value;
      },
      [&](const Vec& w) {
        return attack_loss(model, sel, w, x, label, cfg.loss, cfg.c, cfg.kappa)
            .gradient;
      }};

  BfgsOptions bopts;
  bopts.grad_tol = cfg.tolerance;
  bopts.max_iterations = cfg.iterations;
  // With H = I the first direction carries the c-scaled gradient magnitude;
  // an uncapped trial would park the substitution deep in tanh saturation
  // where the gradient underflows. Keep single steps inside the live range.
  bopts.first_step_cap = 1.0;
  bopts.step_cap = 8.0;
  const MinimizeReport report = bfgs_minimize(obj, w0, bopts);

  Image xhat = reconstruct(sel, substituted_pixels(report.point));
  return finish_result(model, x, label, std::move(xhat), report.iterations,
                       start);
}

AttackResult fgsm_attack(const Classifier& model, const Image& x, int label,
                         const PixelSelection& selection, double eps) {
  const auto start = Clock::now();
  check_attack_input(model, x, label);

  const Vec g = input_gradient(model, x, CrossEntropyObjective{label});
  Image xhat = x;
  for (int p = 0; p < selection.budget; ++p) {
    const Index i = selection.indices[p];
    const double step = (g[i] > 0.0) ? eps : (g[i] < 0.0 ? -eps : 0.0);
    xhat.data[i] = std::clamp(x.data[i] + step, 0.0, 1.0);
  }
  return finish_result(model, x, label, std::move(xhat), 1, start);
}

AttackResult cw_attack(const Classifier& model, const Image& x, int label,
                       const PixelSelection& selection,
                       const AttackConfig& cfg) {
  validate_config(cfg);
  const auto start = Clock::now();
  check_attack_input(model, x, label);

  const Vec w0 = initial_substitution(selection.selected, cfg.clamp_delta);
  ObjectiveFn obj{
      [&](const Vec& w) {
        return attack_loss(model, selection, w, x, label, LossKind::cw, cfg.c,
                           cfg.kappa)
            .value;
      },
      [&](const Vec& w) {
        return attack_loss(model, selection, w, x, label, LossKind::cw, cfg.c,
                           cfg.kappa)
            .gradient;
      }};

  // Track the lowest-objective successful iterate alongside the plain best.
  bool have_success = false;
  double best_success_value = 0.0;
  Vec best_success_w;
  auto consider = [&](const Vec& w, double value) {
    const Image cand = reconstruct(selection, substituted_pixels(w));
    if (predict(model, cand) != label &&
        (!have_success || value < best_success_value)) {
      have_success = true;
      best_success_value = value;
      best_success_w = w;
    }
  };

  AdamOptions aopts;
  aopts.step = cfg.adam_step;
  aopts.iterations = cfg.iterations;
  aopts.observer = [&](int, const Vec& w, double f) { consider(w, f); };
  consider(w0, obj.value(w0));
  const MinimizeReport report = adam_minimize(obj, w0, aopts);

  const Vec& w_final = have_success ? best_success_w : report.point;
  Image xhat = reconstruct(selection, substituted_pixels(w_final));
  return finish_result(model, x, label, std::move(xhat), report.iterations,
                       start);
}

AttackResult jsma_attack(const Classifier& model, const Image& x, int label,
                         int target, int max_pixels, double theta) {
  const auto start = Clock::now();
  if (target == label) {
    throw UsageError("jsma target must differ from the true label");
  }
  if (target < 0 || target >= model.classes) {
    throw UsageError("jsma target out of range");
  }
  if (max_pixels < 1) throw UsageError("jsma budget must be >= 1");
  if (theta <= 0.0) throw UsageError("jsma theta must be > 0");
  check_attack_input(model, x, label);

  constexpr double kSaturated = 1.0 - 1e-12;
  Image xhat = x;
  const int max_iters = max_pixels / 2;
  int iters = 0;
  for (; iters < max_iters; ++iters) {
    if (predict(model, xhat) == target) break;

    const Mat jac = logit_jacobian(model, xhat);
    // Saliency: positive pull toward the target whose net effect on the
    // other logits is negative.
    Index first = -1, second = -1;
    double s_first = 0.0, s_second = 0.0;
    for (Index i = 0; i < xhat.data.size(); ++i) {
      if (xhat.data[i] >= kSaturated) continue;  // increase-only steps
      const double toward = jac(target, i);
      const double others = jac.col(i).sum() - toward;
      if (toward < 0.0 || others > 0.0) continue;
      const double saliency = toward * std::abs(others);
      if (saliency <= 0.0) continue;
      if (first < 0 || saliency > s_first) {
        second = first;
        s_second = s_first;
        first = i;
        s_first = saliency;
      } else if (second < 0 || saliency > s_second) {
        second = i;
        s_second = saliency;
      }
    }
    if (first < 0) break;  // nothing modifiable is useful

    xhat.data[first] = std::min(1.0, xhat.data[first] + theta);
    if (second >= 0) {
      xhat.data[second] = std::min(1.0, xhat.data[second] + theta);
    }
  }
  return finish_result(model, x, label, std::move(xhat), iters, start);
}

AttackResult run_attack(const Classifier& model, const Image& x, int label,
                        const AttackConfig& cfg) {
  validate_config(cfg);
  switch (cfg.attack) {
    case AttackKind::lpbfgs:
      return lp_bfgs_attack(model, x, label, cfg);
    case AttackKind::fgsm:
    case AttackKind::cw: {
      SelectorOptions sopts;
      sopts.strategy = cfg.strategy;
      sopts.seed = cfg.seed;
      sopts.ig_steps = cfg.ig_steps;
      check_attack_input(model, x, label);
      const PixelSelection sel =
          select_pixels(model, x, label, cfg.pixels, sopts);
      return cfg.attack == AttackKind::fgsm
                 ? fgsm_attack(model, x, label, sel, cfg.eps_fgsm)
                 : cw_attack(model, x, label, sel, cfg);
    }
    case AttackKind::jsma: {
      std::mt19937_64 rng(cfg.seed);
      std::uniform_int_distribution<int> pick(0, model.classes - 2);
      int target = pick(rng);
      if (target >= label) ++target;  // skip the true label
      return jsma_attack(model, x, label, target, cfg.pixels, cfg.jsma_theta);
    }
  }
  throw UsageError("unknown attack kind");
}

std::string attack_result_json(const AttackResult& result,
                               const AttackConfig& cfg) {
  const Norms norms = perturbation_norms(result.perturbation);
  nlohmann::json doc;
  doc["attack"] = attack_name(cfg.attack);
  std::string loss = "-";
  if (cfg.attack == AttackKind::lpbfgs) loss = loss_name(cfg.loss);
  if (cfg.attack == AttackKind::cw) loss = loss_name(LossKind::cw);
  doc["loss"] = loss;
  doc["k"] = cfg.pixels;
  doc["strategy"] = strategy_name(cfg.strategy);
  doc["success"] = result.success;
  doc["orig_label"] = result.original_label;
  doc["adv_label"] = result.adversarial_label;
  doc["confidence"] = result.confidence;
  doc["l0"] = norms.l0;
  doc["l1"] = norms.l1;
  doc["l2"] = norms.l2;
  doc["linf"] = norms.linf;
  doc["iterations"] = result.iterations;
  doc["time_ms"] = result.time_ms;
  doc["seed"] = cfg.seed;
  return doc.dump(2) + "\n";
}

}  // namespace lpattack
