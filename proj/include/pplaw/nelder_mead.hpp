/*
Copyright 2026 The pplaw Authors. All rights reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "pplaw/error.hpp"

namespace pplaw {

struct NelderMeadOptions {
  int max_iterations = 2000;
  // Stop once every vertex lies within this (infinity-norm) distance of the best one.
  double simplex_tolerance = 1e-10;
  // Dimension-dependent coefficients (Gao & Han); the classic 1/2/0.5/0.5 otherwise.
  bool adaptive = true;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

// Minimises `f` from `start` with an axis-aligned initial simplex of the given
// per-coordinate steps. Non-finite objective values are treated as +inf. The
// best vertex value never increases, so the result is no worse than `start`.
template <class Objective>
NelderMeadResult nelder_mead(Objective&& f, std::span<const double> start, std::span<const double> step,
                             const NelderMeadOptions& opt = {}) {
  const std::size_t n = start.size();
  if (n == 0 || step.size() != n) throw InputError("nelder_mead: start and step must have equal, non-zero size");

  const double nd = static_cast<double>(n);
  // The adaptive shrink factor degenerates to 0 in one dimension.
  const bool adaptive = opt.adaptive && n >= 2;
  const double reflect = 1.0;
  const double expand = adaptive ? 1.0 + 2.0 / nd : 2.0;
  const double contract = adaptive ? 0.75 - 1.0 / (2.0 * nd) : 0.5;
  const double shrink = adaptive ? 1.0 - 1.0 / nd : 0.5;

  auto eval = [&](const std::vector<double>& x) {
    const double v = f(std::span<const double>(x));
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(start.begin(), start.end()));
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += step[i];
  std::vector<double> values(n + 1);
  for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);

  auto point_along = [&](double coef, const std::vector<double>& worst, std::vector<double>& out) {
    for (std::size_t k = 0; k < n; ++k) out[k] = centroid[k] + coef * (centroid[k] - worst[k]);
  };

  NelderMeadResult result;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[n - 1];

    double size = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t k = 0; k < n; ++k) size = std::max(size, std::abs(simplex[i][k] - simplex[best][k]));
    }
    if (size < opt.simplex_tolerance && std::isfinite(values[best])) {
      result.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k];
    }
    for (auto& c : centroid) c /= nd;

    point_along(reflect, simplex[worst], trial);
    const double fr = eval(trial);
    if (fr < values[best]) {
      point_along(expand, simplex[worst], trial2);
      const double fe = eval(trial2);
      if (fe < fr) {
        simplex[worst] = trial2;
        values[worst] = fe;
      } else {
        simplex[worst] = trial;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second_worst]) {
      simplex[worst] = trial;
      values[worst] = fr;
      continue;
    }
    if (fr < values[worst]) {
      point_along(contract * reflect, simplex[worst], trial2);  // outside contraction
      const double fc = eval(trial2);
      if (fc <= fr) {
        simplex[worst] = trial2;
        values[worst] = fc;
        continue;
      }
    } else {
      point_along(-contract, simplex[worst], trial2);  // inside contraction
      const double fc = eval(trial2);
      if (fc < values[worst]) {
        simplex[worst] = trial2;
        values[worst] = fc;
        continue;
      }
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t k = 0; k < n; ++k) {
        simplex[i][k] = simplex[best][k] + shrink * (simplex[i][k] - simplex[best][k]);
      }
      values[i] = eval(simplex[i]);
    }
  }

  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  result.x = simplex[best];
  result.value = values[best];
  result.iterations = it;
  return result;
}

}  // namespace pplaw
