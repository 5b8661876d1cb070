/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stretchfit/geometry.hpp"

namespace stretchfit {

struct LbfgsOptions {
  int memory = 10;
  int max_iterations = 500;
  double grad_tol = 1e-8;  // infinity norm of the gradient
  double f_tol = 1e-12;    // minimum improvement per accepted iteration
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search_steps = 40;
};

struct LbfgsResult {
  VecX x;
  double f = 0.0;
  VecX gradient;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;       // "gradient", "f_tol", "max_iter", "line_search"
  std::vector<double> f_trace;   // f at x0 and after each accepted iteration
};

/// Objective callback: returns f(x) and fills grad (resized by the callee or
/// pre-sized by the caller to x.size()).
using LbfgsObjective = std::function<double(const VecX& x, VecX& grad)>;

/// Optional feasibility projection applied to the iterate after each line
/// search (box clamps and the like). May leave x unchanged.
using LbfgsProjection = std::function<void(VecX& x)>;

/// Limited-memory BFGS with a strong-Wolfe line search. When a projection
/// is supplied, the post-line-search iterate is projected and the step is
/// re-shortened if projection breaks monotonicity, so accepted iterations
/// never increase f.
LbfgsResult minimize_lbfgs(const LbfgsObjective& fn, VecX x0,
                           const LbfgsOptions& options = {},
                           const LbfgsProjection& project = nullptr);

}  // namespace stretchfit
