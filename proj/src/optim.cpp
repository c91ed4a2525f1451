#include "lpattack/optim.hpp"

#include <algorithm>
#include <cmath>

namespace lpattack {

std::string stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::gradient_tolerance:
      return "gradient-tolerance";
    case StopReason::max_iterations:
      return "max-iterations";
    case StopReason::line_search_failure:
      return "line-search-failure";
    case StopReason::curvature_skip_limit:
      return "curvature-skip-limit";
  }
  throw UsageError("unknown stop reason");
}

namespace {

void check_finite(double value, const Vec& gradient) {
  if (!std::isfinite(value) || !gradient.allFinite()) {
    throw NumericError("objective produced a non-finite value or gradient");
  }
}

struct Probe {
  double alpha;
  double value;
  double slope;  // gradient(x + alpha d) . d
  Vec point;
  Vec gradient;
};

}  // namespace

LineSearchResult wolfe_line_search(const ObjectiveFn& obj, const Vec& x,
                                   const Vec& d, double f0, const Vec& g0,
                                   const WolfeParams& params) {
  const double slope0 = g0.dot(d);
  if (slope0 >= 0.0) {
    throw UsageError("line search direction is not a descent direction "
                     "(g'd = " +
                     std::to_string(slope0) + ")");
  }

  LineSearchResult result;
  int evals = 0;
  bool have_best = false;
  Probe best{};  // lowest value probed, reported on failure

  auto probe = [&](double alpha) {
    Probe p;
    p.alpha = alpha;
    p.point = x + alpha * d;
    p.value = obj.value(p.point);
    p.gradient = obj.gradient(p.point);
    check_finite(p.value, p.gradient);
    p.slope = p.gradient.dot(d);
    ++evals;
    if (!have_best || p.value < best.value) {
      best = p;
      have_best = true;
    }
    return p;
  };

  auto accept = [&](const Probe& p) {
    result.ok = true;
    result.alpha = p.alpha;
    result.evaluations = evals;
    result.point = p.point;
    result.value = p.value;
    result.gradient = p.gradient;
    return result;
  };
  auto fail = [&]() {
    result.ok = false;
    result.evaluations = evals;
    if (have_best) {
      result.alpha = best.alpha;
      result.point = best.point;
      result.value = best.value;
      result.gradient = best.gradient;
    } else {
      result.alpha = 0.0;
      result.point = x;
      result.value = f0;
      result.gradient = g0;
    }
    return result;
  };

  auto armijo = [&](const Probe& p) {
    return p.value <= f0 + params.c1 * p.alpha * slope0;
  };
  // Strong form: implies the curvature inequality and rejects overshoots.
  auto curvature_ok = [&](const Probe& p) {
    return std::abs(p.slope) <= -params.c2 * slope0;
  };

  // Bisection zoom on a bracket [lo, hi] with lo the lower-value endpoint.
  auto zoom = [&](Probe lo, Probe hi) {
    while (evals < params.max_evals) {
      Probe mid = probe(0.5 * (lo.alpha + hi.alpha));
      if (!armijo(mid) || mid.value >= lo.value) {
        hi = mid;
      } else {
        if (curvature_ok(mid)) return accept(mid);
        if (mid.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = mid;
      }
      if (std::abs(hi.alpha - lo.alpha) <
          1e-14 * std::max(1.0, std::abs(lo.alpha))) {
        break;  // bracket collapsed without satisfying both conditions
      }
    }
    return fail();
  };

  // Bracketing stage: grow alpha until the minimum is straddled.
  Probe prev;
  prev.alpha = 0.0;
  prev.value = f0;
  prev.slope = slope0;
  prev.point = x;
  prev.gradient = g0;
  double alpha = std::min(params.alpha0, params.alpha_max);
  bool first = true;
  while (evals < params.max_evals) {
    Probe cur = probe(alpha);
    if (!armijo(cur) || (!first && cur.value >= prev.value)) {
      return zoom(prev, cur);
    }
    if (curvature_ok(cur)) return accept(cur);
    if (cur.slope >= 0.0) return zoom(cur, prev);
    if (alpha >= params.alpha_max) break;
    prev = cur;
    alpha = std::min(2.0 * alpha, params.alpha_max);
    first = false;
  }
  return fail();
}

std::optional<Mat> bfgs_update(const Mat& H, const Vec& s, const Vec& y) {
  const double sy = s.dot(y);
  if (sy <= 1e-10 * s.norm() * y.norm()) {
    return std::nullopt;  // curvature condition failed
  }
  const double rho = 1.0 / sy;
  // Expanded form of (I - rho s y')H(I - rho y s') + rho s s'; sharing Hy
  // across the two rank-one terms keeps H' symmetric elementwise.
  const Vec Hy = H * y;
  const double yHy = y.dot(Hy);
  Mat Hn = H;
  Hn.noalias() -= rho * (s * Hy.transpose() + Hy * s.transpose());
  Hn.noalias() += (rho * rho * yHy + rho) * (s * s.transpose());
  return Hn;
}

MinimizeReport bfgs_minimize(const ObjectiveFn& obj, const Vec& x0,
                             const BfgsOptions& opts) {
  const Index n = x0.size();
  Vec x = x0;
  double f = obj.value(x);
  Vec g = obj.gradient(x);
  check_finite(f, g);

  Mat H = Mat::Identity(n, n);
  MinimizeReport best;
  best.point = x;
  best.value = f;
  best.grad_norm = g.norm();

  auto finish = [&](int iters, StopReason reason, bool use_best) {
    MinimizeReport rep;
    if (use_best) {
      rep = best;
    } else {
      rep.point = x;
      rep.value = f;
      rep.grad_norm = g.norm();
    }
    rep.iterations = iters;
    rep.reason = reason;
    return rep;
  };

  int consecutive_skips = 0;
  for (int k = 0; k < opts.max_iterations; ++k) {
    if (g.norm() <= opts.grad_tol) {
      return finish(k, StopReason::gradient_tolerance, false);
    }

    Vec d = -(H * g);
    if (g.dot(d) >= 0.0) {
      // H drifted off positive definite; restart from steepest descent.
      H.setIdentity();
      d = -g;
    }

    double alpha;
    Vec x_new;
    double f_new;
    Vec g_new;
    if (opts.step_override) {
      alpha = opts.step_override(x, d, g);
      x_new = x + alpha * d;
      f_new = obj.value(x_new);
      g_new = obj.gradient(x_new);
      check_finite(f_new, g_new);
    } else {
      WolfeParams wolfe = opts.wolfe;
      const double dnorm = d.norm();
      if (dnorm > 0.0) {
        if (std::isfinite(opts.step_cap)) {
          wolfe.alpha_max = std::min(wolfe.alpha_max, opts.step_cap / dnorm);
          wolfe.alpha0 = std::min(wolfe.alpha0, wolfe.alpha_max);
        }
        if (k == 0 && std::isfinite(opts.first_step_cap)) {
          wolfe.alpha0 = std::min(wolfe.alpha0, opts.first_step_cap / dnorm);
        }
      }
      LineSearchResult ls = wolfe_line_search(obj, x, d, f, g, wolfe);
      if (!ls.ok) {
        if (ls.value < best.value) {
          best.point = ls.point;
          best.value = ls.value;
          best.grad_norm = ls.gradient.norm();
        }
        return finish(k, StopReason::line_search_failure, true);
      }
      alpha = ls.alpha;
      x_new = std::move(ls.point);
      f_new = ls.value;
      g_new = std::move(ls.gradient);
    }

    const Vec s = x_new - x;
    const Vec y = g_new - g;
    x = std::move(x_new);
    f = f_new;
    g = std::move(g_new);
    if (f < best.value) {
      best.point = x;
      best.value = f;
      best.grad_norm = g.norm();
    }

    bool skipped = false;
    if (auto updated = bfgs_update(H, s, y)) {
      H = std::move(*updated);
      consecutive_skips = 0;
    } else {
      skipped = true;
      ++consecutive_skips;
    }

    if (opts.observer) {
      BfgsTrace trace;
      trace.k = k;
      trace.value = f;
      trace.grad_norm = g.norm();
      trace.alpha = alpha;
      trace.curvature_skipped = skipped;
      trace.s = s;
      trace.y = y;
      trace.H_after = H;
      opts.observer(trace);
    }

    if (consecutive_skips > opts.curvature_skip_limit) {
      return finish(k + 1, StopReason::curvature_skip_limit, true);
    }
  }
  if (g.norm() <= opts.grad_tol) {
    return finish(opts.max_iterations, StopReason::gradient_tolerance, false);
  }
  return finish(opts.max_iterations, StopReason::max_iterations, false);
}

MinimizeReport bfgs_minimize(const ObjectiveFn& obj, const Vec& x0,
                             double grad_tol, int max_iterations) {
  BfgsOptions opts;
  opts.grad_tol = grad_tol;
  opts.max_iterations = max_iterations;
  return bfgs_minimize(obj, x0, opts);
}

MinimizeReport adam_minimize(const ObjectiveFn& obj, const Vec& x0,
                             const AdamOptions& opts) {
  if (opts.iterations < 1) {
    throw UsageError("adam needs iterations >= 1");
  }
  Vec x = x0;
  Vec m = Vec::Zero(x.size());
  Vec v = Vec::Zero(x.size());

  double f = obj.value(x);
  Vec g = obj.gradient(x);
  check_finite(f, g);

  MinimizeReport best;
  best.point = x0;
  best.value = f;
  best.grad_norm = g.norm();

  for (int k = 1; k <= opts.iterations; ++k) {
    m = opts.beta1 * m + (1.0 - opts.beta1) * g;
    v = opts.beta2 * v + (1.0 - opts.beta2) * g.cwiseProduct(g).eval();
    const double m_corr = 1.0 - std::pow(opts.beta1, k);
    const double v_corr = 1.0 - std::pow(opts.beta2, k);
    x -= (opts.step / m_corr) *
         m.cwiseQuotient(((v / v_corr).cwiseSqrt().array() + opts.epsilon)
                             .matrix());

    f = obj.value(x);
    g = obj.gradient(x);
    check_finite(f, g);
    if (f < best.value) {
      best.point = x;
      best.value = f;
      best.grad_norm = g.norm();
    }
    if (opts.observer) opts.observer(k, x, f);
  }
  best.iterations = opts.iterations;
  best.reason = StopReason::max_iterations;
  return best;
}

}  // namespace lpattack
