#ifndef LPATTACK_ATTACKS_HPP
#define LPATTACK_ATTACKS_HPP

#include <cstdint>
#include <functional>
#include <string>

#include "lpattack/attribution.hpp"
#include "lpattack/model.hpp"
#include "lpattack/optim.hpp"
#include "lpattack/types.hpp"

namespace lpattack {

enum class AttackKind { lpbfgs, fgsm, cw, jsma };
enum class LossKind { ce, cw, cwlog };

std::string attack_name(AttackKind a);
AttackKind attack_from_name(const std::string& name);
std::string loss_name(LossKind l);
LossKind loss_from_name(const std::string& name);

struct AttackConfig {
  AttackKind attack = AttackKind::lpbfgs;
  LossKind loss = LossKind::cw;
  double c = 1e3;          // classification-loss weight
  double kappa = 0.0;      // margin clamp
  double eps_fgsm = 1.0;   // FGSM step magnitude
  int iterations = 200;
  double tolerance = 1e-6;          // gradient tolerance for the BFGS loop
  int pixels = 8;                   // budget K
  SelectorStrategy strategy = SelectorStrategy::ig_top;
  int ig_steps = 256;
  double adam_step = 0.1;
  double jsma_theta = 1.0;
  std::uint64_t seed = 0;
  double clamp_delta = 1e-6;  // pull x~ into [delta, 1-delta] before atanh
};

// Throws UsageError naming the violated invariant.
void validate_config(const AttackConfig& cfg);

struct AttackResult {
  Image adversarial;
  bool success = false;  // predict(adversarial) != original_label
  int original_label = 0;
  int adversarial_label = 0;
  double confidence = 0.0;  // softmax probability of adversarial_label
  Vec perturbation;         // adversarial - original
  int iterations = 0;
  double time_ms = 0.0;
};

struct LossEval {
  double value = 0.0;
  Vec gradient;  // w.r.t. the K substituted variables
};

// Total objective over the substituted variables w:
//   L(w) = |R(w) - x|_2 + c * Lhat,
// where R(w) = reconstruct(selection, (tanh(w)+1)/2) and Lhat is one of
//   ce:    log softmax(Z)_y
//   cw:    max(Z_y - max_{i != y} Z_i, -kappa)
//   cwlog: max(log softmax(Z)_y - max_{i != y} log softmax(Z)_i, -kappa)
// The gradient chains d/dx through the selected indices times the
// substitution derivative (1 - tanh(w)^2)/2; the clamped margin branch
// contributes zero gradient.
LossEval attack_loss(const Classifier& model, const PixelSelection& selection,
                     const Vec& w, const Image& x, int label, LossKind kind,
                     double c, double kappa);

// BFGS attack over the K selected pixels under the tanh box substitution.
// Selects pixels by cfg.strategy, starts at w0 = atanh(2 x~ - 1) (x~
// clamped into [delta, 1-delta]), minimizes attack_loss, reconstructs.
// Untouched components equal the input exactly. Throws RejectedInputError
// when the model already misclassifies x.
AttackResult lp_bfgs_attack(const Classifier& model, const Image& x, int label,
                            const AttackConfig& cfg);

// Single signed-gradient step of magnitude eps on the selected pixels,
// clamped to [0,1]. The gradient is of the true-class cross entropy.
AttackResult fgsm_attack(const Classifier& model, const Image& x, int label,
                         const PixelSelection& selection, double eps);

// Adam on the cw-margin objective in the same substituted space. Keeps the
// lowest-objective successful iterate, else the lowest-objective one.
AttackResult cw_attack(const Classifier& model, const Image& x, int label,
                       const PixelSelection& selection,
                       const AttackConfig& cfg);

// Greedy targeted saliency attack: per iteration the two highest-saliency
// unsaturated pixels each increase by theta (clamped to 1). Saliency of
// pixel i for target t is zero when dZ_t/dx_i < 0 or sum_{j != t} dZ_j/dx_i
// > 0, else the product of the two factors. Runs floor(max_pixels/2)
// iterations or until the prediction reaches `target`; the result's
// success flag still scores the untargeted flip predict != label.
AttackResult jsma_attack(const Classifier& model, const Image& x, int label,
                         int target, int max_pixels, double theta);

// Dispatch on cfg.attack; builds the pixel selection for the
// selection-restricted attacks and draws the JSMA target from cfg.seed.
AttackResult run_attack(const Classifier& model, const Image& x, int label,
                        const AttackConfig& cfg);

// JSON record for one attack run (schema: attack, loss, k, strategy,
// success, orig_label, adv_label, confidence, l0, l1, l2, linf,
// iterations, time_ms, seed).
std::string attack_result_json(const AttackResult& result,
                               const AttackConfig& cfg);

}  // namespace lpattack

#endif
