/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include "stretchfit/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace stretchfit {

namespace {

struct Pair {
  VecX s;
  VecX y;
  double rho = 0.0;  // 1 / (y . s)
};

/// Two-loop recursion: returns the search direction -H g.
VecX lbfgs_direction(const std::deque<Pair>& pairs, const VecX& grad) {
  VecX q = grad;
  std::vector<double> alpha(pairs.size());
  for (int i = static_cast<int>(pairs.size()) - 1; i >= 0; --i) {
    alpha[i] = pairs[i].rho * pairs[i].s.dot(q);
    q -= alpha[i] * pairs[i].y;
  }
  if (!pairs.empty()) {
    const Pair& last = pairs.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double beta = pairs[i].rho * pairs[i].y.dot(q);
    q += (alpha[i] - beta) * pairs[i].s;
  }
  return -q;
}

struct LineSearchEval {
  double alpha = 0.0;
  double f = 0.0;
  VecX x;
  VecX grad;
  double slope = 0.0;  // grad . direction
};

}  // namespace

LbfgsResult minimize_lbfgs(const LbfgsObjective& fn, VecX x0,
                           const LbfgsOptions& options,
                           const LbfgsProjection& project) {
  if (x0.size() == 0) throw std::runtime_error("lbfgs: empty parameter vector");
  if (project) project(x0);

  LbfgsResult res;
  res.x = x0;
  res.gradient.resize(x0.size());
  res.f = fn(res.x, res.gradient);
  res.f_trace.push_back(res.f);

  std::deque<Pair> pairs;

  auto evaluate = [&](const VecX& base, const VecX& dir, double alpha,
                      LineSearchEval& out) {
    out.alpha = alpha;
    out.x = base + alpha * dir;
    out.grad.resize(base.size());
    out.f = fn(out.x, out.grad);
    out.slope = out.grad.dot(dir);
  };

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (res.gradient.cwiseAbs().maxCoeff() < options.grad_tol) {
      res.converged = true;
      res.stop_reason = "gradient";
      return res;
    }

    VecX dir = lbfgs_direction(pairs, res.gradient);
    double slope0 = dir.dot(res.gradient);
    if (!(slope0 < 0.0)) {
      // Curvature history turned the direction uphill; fall back to
      // steepest descent and drop the history.
      pairs.clear();
      dir = -res.gradient;
      slope0 = dir.dot(res.gradient);
    }

    // Strong-Wolfe line search (bracket then zoom).
    const double c1 = options.wolfe_c1, c2 = options.wolfe_c2;
    LineSearchEval lo, hi, cur;
    lo.alpha = 0.0;
    lo.f = res.f;
    lo.slope = slope0;
    lo.x = res.x;
    lo.grad = res.gradient;

    bool bracketed = false;
    bool found = false;
    LineSearchEval best = lo;
    double alpha = 1.0;
    double alpha_prev = 0.0;
    double f_prev = res.f;
    double slope_prev = slope0;
    LineSearchEval prev = lo;

    for (int ls = 0; ls < options.max_line_search_steps; ++ls) {
      evaluate(res.x, dir, alpha, cur);
      if (std::isfinite(cur.f) && cur.f < best.f) best = cur;
      if (!std::isfinite(cur.f) || cur.f > res.f + c1 * alpha * slope0 ||
          (ls > 0 && cur.f >= f_prev)) {
        lo = prev;
        hi = cur;
        bracketed = true;
        break;
      }
      if (std::abs(cur.slope) <= -c2 * slope0) {
        found = true;
        break;
      }
      if (cur.slope >= 0.0) {
        lo = cur;
        hi = prev;
        bracketed = true;
        break;
      }
      alpha_prev = alpha;
      f_prev = cur.f;
      slope_prev = cur.slope;
      prev = cur;
      alpha *= 2.0;
    }
    (void)alpha_prev;
    (void)slope_prev;

    if (bracketed && !found) {
      for (int z = 0; z < options.max_line_search_steps; ++z) {
        const double mid = 0.5 * (lo.alpha + hi.alpha);
        evaluate(res.x, dir, mid, cur);
        if (std::isfinite(cur.f) && cur.f < best.f) best = cur;
        if (!std::isfinite(cur.f) || cur.f > res.f + c1 * mid * slope0 ||
            cur.f >= lo.f) {
          hi = cur;
        } else {
          if (std::abs(cur.slope) <= -c2 * slope0) {
            found = true;
            break;
          }
          if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
          lo = cur;
        }
        if (std::abs(hi.alpha - lo.alpha) < 1e-16) break;
      }
      if (!found && lo.alpha > 0.0 && lo.f < res.f) {
        cur = lo;
        found = true;
      }
    }

    if (!found && best.alpha > 0.0 && best.f < res.f) {
      // Wolfe failed but some trial improved f; take the best trial so the
      // trajectory stays monotone.
      cur = best;
      found = true;
    }
    if (!found) {
      res.stop_reason = "line_search";
      res.converged = false;
      return res;
    }

    VecX x_new = cur.x;
    double f_new = cur.f;
    VecX g_new = cur.grad;
    if (project) {
      VecX projected = x_new;
      project(projected);
      if ((projected - x_new).norm() > 0.0) {
        g_new.resize(projected.size());
        f_new = fn(projected, g_new);
        double shrink = cur.alpha;
        // Projection may undo the decrease; shorten the step until the
        // projected point improves on the current iterate.
        int guard = 0;
        while (f_new > res.f && guard++ < 30) {
          shrink *= 0.5;
          projected = res.x + shrink * dir;
          project(projected);
          f_new = fn(projected, g_new);
        }
        if (f_new > res.f) {
          res.stop_reason = "line_search";
          res.converged = false;
          return res;
        }
        x_new = projected;
      }
    }

    const double improvement = res.f - f_new;
    Pair pair;
    pair.s = x_new - res.x;
    pair.y = g_new - res.gradient;
    const double sy = pair.s.dot(pair.y);
    if (sy > 1e-12 * pair.s.norm() * pair.y.norm()) {
      pair.rho = 1.0 / sy;
      pairs.push_back(std::move(pair));
      if (static_cast<int>(pairs.size()) > options.memory) pairs.pop_front();
    }

    res.x = x_new;
    res.f = f_new;
    res.gradient = g_new;
    res.iterations = iter + 1;
    res.f_trace.push_back(res.f);

    if (improvement < options.f_tol) {
      res.converged = true;
      res.stop_reason = "f_tol";
      return res;
    }
  }

  res.stop_reason = "max_iter";
  res.converged = res.gradient.cwiseAbs().maxCoeff() < options.grad_tol;
  return res;
}

}  // namespace stretchfit
