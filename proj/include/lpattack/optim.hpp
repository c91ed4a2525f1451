#ifndef LPATTACK_OPTIM_HPP
#define LPATTACK_OPTIM_HPP

#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "lpattack/types.hpp"

namespace lpattack {

// Minimization target: value and gradient callables over R^n.
struct ObjectiveFn {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
};

struct WolfeParams {
  double c1 = 1e-4;      // sufficient-decrease constant
  double c2 = 0.9;       // curvature constant
  double alpha0 = 1.0;   // first trial step
  double alpha_max = 1e3;
  int max_evals = 60;    // (value, gradient) pairs
};

struct LineSearchResult {
  bool ok = false;
  double alpha = 0.0;
  int evaluations = 0;
  Vec point;
  double value = 0.0;
  Vec gradient;
};

// Strong-Wolfe bracket/zoom search along a descent direction d from x.
// f0/g0 are the objective value and gradient at x. The returned step
// satisfies both the sufficient-decrease and curvature inequalities.
// Throws UsageError when g0'd >= 0; exhausting max_evals yields ok=false
// with the best point evaluated so far.
LineSearchResult wolfe_line_search(const ObjectiveFn& obj, const Vec& x,
                                   const Vec& d, double f0, const Vec& g0,
                                   const WolfeParams& params = {});

// Rank-two inverse-Hessian update
//   H' = (I - rho s y') H (I - rho y s') + rho s s',  rho = 1/(y's).
// Returns nullopt (curvature skip) when y's <= 1e-10 * |s||y|; callers keep
// the previous H in that case.
std::optional<Mat> bfgs_update(const Mat& H, const Vec& s, const Vec& y);

enum class StopReason {
  gradient_tolerance,
  max_iterations,
  line_search_failure,
  curvature_skip_limit,
};

std::string stop_reason_name(StopReason r);

struct MinimizeReport {
  Vec point;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  StopReason reason = StopReason::max_iterations;
};

// One accepted iteration, reported to BfgsOptions::observer when set.
struct BfgsTrace {
  int k = 0;
  double value = 0.0;
  double grad_norm = 0.0;
  double alpha = 0.0;
  bool curvature_skipped = false;
  Vec s;
  Vec y;
  Mat H_after;
};

struct BfgsOptions {
  double grad_tol = 1e-8;
  int max_iterations = 100;
  WolfeParams wolfe;
  int curvature_skip_limit = 10;  // consecutive skipped updates
  // Cap on |alpha d| for the first iteration's trial step. With H = I the
  // first direction inherits the raw gradient magnitude; objectives with
  // large loss weights need the cap to keep the trial inside the region
  // where the objective still has curvature.
  double first_step_cap = std::numeric_limits<double>::infinity();
  // Cap on |alpha d| for every line search. Bounds how far a single
  // iteration may travel; tanh-substituted objectives go flat beyond a few
  // units and an unbounded search would park there with a dead gradient.
  double step_cap = std::numeric_limits<double>::infinity();
  // When set, replaces the Wolfe search: returns alpha for (x, d, g).
  std::function<double(const Vec&, const Vec&, const Vec&)> step_override;
  std::function<void(const BfgsTrace&)> observer;
};

// Full-matrix BFGS from H = I. Descent direction d = -H g, Wolfe step,
// inverse-Hessian update (skipped when the curvature condition fails).
// Stops when |g| <= grad_tol or the iteration budget is spent; a failed
// line search returns the best iterate seen with that reason.
// Throws NumericError on non-finite values or gradients.
MinimizeReport bfgs_minimize(const ObjectiveFn& obj, const Vec& x0,
                             const BfgsOptions& opts);
MinimizeReport bfgs_minimize(const ObjectiveFn& obj, const Vec& x0,
                             double grad_tol, int max_iterations);

struct AdamOptions {
  double step = 0.1;
  int iterations = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Called after every update with (k, iterate, objective value).
  std::function<void(int, const Vec&, double)> observer;
};

// Adam with bias correction; returns the best-objective iterate seen
// (including x0), not merely the last.
MinimizeReport adam_minimize(const ObjectiveFn& obj, const Vec& x0,
                             const AdamOptions& opts);

}  // namespace lpattack

#endif
