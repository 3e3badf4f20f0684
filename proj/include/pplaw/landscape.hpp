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
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pplaw/error.hpp"
#include "pplaw/law_fitting.hpp"
#include "pplaw/scaling_law.hpp"

namespace pplaw {

// Axis-aligned search region in the (mu, sigma) plane.
struct SearchBox {
  double mu_lo = 0.0;
  double mu_hi = 0.0;
  double sigma_lo = 0.0;
  double sigma_hi = 0.0;

  bool contains(double mu, double sigma) const {
    return mu >= mu_lo && mu <= mu_hi && sigma >= sigma_lo && sigma <= sigma_hi;
  }
};

inline void check_box(const SearchBox& b) {
  auto ok = [](double lo, double hi) { return std::isfinite(lo) && std::isfinite(hi) && lo > 0.0 && lo < hi; };
  if (!ok(b.mu_lo, b.mu_hi)) throw InputError("invalid mu range: need 0 < lo < hi");
  if (!ok(b.sigma_lo, b.sigma_hi)) throw InputError("invalid sigma range: need 0 < lo < hi");
}

// Observed bounds widened by `expand` of the log-width on each side. A
// zero-width axis is widened by a factor of (1 + expand) instead.
inline SearchBox default_search_box(const ObservedRange& r, double expand = 0.1) {
  auto widen = [expand](double lo, double hi) {
    const double a = std::log(lo), b = std::log(hi);
    const double pad = b > a ? expand * (b - a) : std::log1p(expand);
    return std::pair{std::exp(a - pad), std::exp(b + pad)};
  };
  auto [ml, mh] = widen(r.mu_lo, r.mu_hi);
  auto [sl, sh] = widen(r.sigma_lo, r.sigma_hi);
  return {ml, mh, sl, sh};
}

// Log-uniform axis with exact endpoints.
inline std::vector<double> log_axis(double lo, double hi, std::size_t n) {
  std::vector<double> axis(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    axis[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  axis.front() = lo;
  axis.back() = hi;
  return axis;
}

struct LandscapeGrid {
  std::vector<double> mu_axis;
  std::vector<double> sigma_axis;
  double d_tokens = 0.0;
  std::vector<double> loss;  // row-major, mu index outer

  double at(std::size_t i, std::size_t j) const { return loss[i * sigma_axis.size() + j]; }
};

inline LandscapeGrid evaluate_grid(const LawParams& p, const SearchBox& box, std::size_t resolution, double d_tokens) {
  check_box(box);
  if (resolution < 2) throw InputError("grid resolution must be at least 2");
  if (!(std::isfinite(d_tokens) && d_tokens > 0.0)) throw InputError("d_tokens must be positive");
  LandscapeGrid g;
  g.mu_axis = log_axis(box.mu_lo, box.mu_hi, resolution);
  g.sigma_axis = log_axis(box.sigma_lo, box.sigma_hi, resolution);
  g.d_tokens = d_tokens;
  g.loss.reserve(resolution * resolution);
  for (double mu : g.mu_axis)
    for (double sigma : g.sigma_axis) g.loss.push_back(predict_loss(p, {mu, sigma, d_tokens}));
  return g;
}

struct PathPoint {
  double mu = 0.0;
  double sigma = 0.0;
  double loss = 0.0;
};

struct DescentConfig {
  double grad_tolerance = 1e-6;
  int max_iterations = 10000;
};

struct OptimumReport {
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
  double loss_at_opt = 0.0;
  double grad_norm = 0.0;
  bool clamped = false;
  int iterations = 0;
};

namespace detail {

struct DescentState {
  double u = 0.0;  // log mu
  double v = 0.0;  // log sigma
  double g = 0.0;  // data term; loss = E + g
  LossGradient raw;
};

class Descender {
 public:
  Descender(const LawParams& p, const SearchBox& box, double d_tokens)
      : p_(p), d_(d_tokens), ulo_(std::log(box.mu_lo)), uhi_(std::log(box.mu_hi)), vlo_(std::log(box.sigma_lo)),
        vhi_(std::log(box.sigma_hi)), box_(box) {}

  DescentState at(double u, double v) const {
    DescentState s{u, v, 0.0, {}};
    const LawInput x = input(u, v);
    s.g = data_term(p_, x);
    s.raw = grad_loss(p_, x);
    return s;
  }

  LawInput input(double u, double v) const {
    // Exact endpoints at the bounds keep clamped coordinates on the box.
    const double mu = u == ulo_ ? box_.mu_lo : u == uhi_ ? box_.mu_hi : std::exp(u);
    const double sigma = v == vlo_ ? box_.sigma_lo : v == vhi_ ? box_.sigma_hi : std::exp(v);
    return {mu, sigma, d_};
  }

  // Raw-coordinate gradient with components that push against an active bound removed.
  double projected_norm(const DescentState& s) const {
    double gm = s.raw.dL_dmu, gs = s.raw.dL_dsigma;
    if ((s.u <= ulo_ && gm > 0.0) || (s.u >= uhi_ && gm < 0.0)) gm = 0.0;
    if ((s.v <= vlo_ && gs > 0.0) || (s.v >= vhi_ && gs < 0.0)) gs = 0.0;
    return std::hypot(gm, gs);
  }

  bool on_boundary(const DescentState& s) const { return s.u <= ulo_ || s.u >= uhi_ || s.v <= vlo_ || s.v >= vhi_; }

  // Projected gradient descent in log coordinates. Barzilai-Borwein trial steps,
  // halved until the loss strictly decreases. Calls visit(state) for the start
  // and every accepted step.
  template <class Visit>
  std::pair<DescentState, int> run(DescentState s, double tol, int max_iter, Visit&& visit) const {
    visit(s);
    double step = 0.0;
    double prev_du = 0.0, prev_dv = 0.0, prev_gu = 0.0, prev_gv = 0.0;
    int it = 0;
    for (; it < max_iter; ++it) {
      if (projected_norm(s) < tol) break;
      const double gu = std::exp(s.u) * s.raw.dL_dmu;
      const double gv = std::exp(s.v) * s.raw.dL_dsigma;
      if (it == 0 || step <= 0.0) {
        step = 0.05 / std::max(std::hypot(gu, gv), 1e-300);
      } else {
        const double yu = gu - prev_gu, yv = gv - prev_gv;
        const double sy = prev_du * yu + prev_dv * yv;
        const double ss = prev_du * prev_du + prev_dv * prev_dv;
        step = sy > 0.0 ? ss / sy : 0.05 / std::max(std::hypot(gu, gv), 1e-300);
      }
      bool accepted = false;
      for (int halving = 0; halving < 80; ++halving, step *= 0.5) {
        const double nu = std::clamp(s.u - step * gu, ulo_, uhi_);
        const double nv = std::clamp(s.v - step * gv, vlo_, vhi_);
        if (nu == s.u && nv == s.v) break;
        const DescentState next = at(nu, nv);
        if (next.g < s.g) {
          prev_du = nu - s.u;
          prev_dv = nv - s.v;
          prev_gu = gu;
          prev_gv = gv;
          s = next;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      visit(s);
    }
    return {s, it};
  }

 private:
  LawParams p_;
  double d_;
  double ulo_, uhi_, vlo_, vhi_;
  SearchBox box_;
};

}  // namespace detail

// Coarse 64x64 log grid scan followed by projected gradient descent from the
// best cell, to grad_norm < 1e-8 or 10,000 iterations.
inline OptimumReport find_optimum(const LawParams& p, const SearchBox& box, double d_tokens) {
  const auto grid = evaluate_grid(p, box, 64, d_tokens);
  std::size_t best = 0;
  for (std::size_t k = 0; k < grid.loss.size(); ++k) {
    if (!std::isfinite(grid.loss[k])) throw DomainError("non-finite loss on the coarse landscape grid");
    if (grid.loss[k] < grid.loss[best]) best = k;
  }
  const std::size_t n = grid.sigma_axis.size();
  const detail::Descender desc(p, box, d_tokens);
  const auto start = desc.at(std::log(grid.mu_axis[best / n]), std::log(grid.sigma_axis[best % n]));
  auto [s, iters] = desc.run(start, 1e-8, 10000, [](const detail::DescentState&) {});

  const auto x = desc.input(s.u, s.v);
  OptimumReport r;
  r.mu_hat = x.mu;
  r.sigma_hat = x.sigma;
  r.loss_at_opt = p.E + s.g;
  r.grad_norm = std::hypot(s.raw.dL_dmu, s.raw.dL_dsigma);
  r.clamped = desc.on_boundary(s);
  r.iterations = iters;
  return r;
}

using DescentPath = std::vector<PathPoint>;

inline std::vector<DescentPath> descent_paths(const LawParams& p, std::span<const std::pair<double, double>> starts,
                                              const SearchBox& box, double d_tokens, const DescentConfig& cfg = {}) {
  check_box(box);
  const detail::Descender desc(p, box, d_tokens);
  std::vector<DescentPath> paths;
  for (const auto& [mu, sigma] : starts) {
    if (!box.contains(mu, sigma)) throw InputError("descent path start lies outside the search box");
    DescentPath path;
    const auto s0 = desc.at(std::log(mu), std::log(sigma));
    desc.run(s0, cfg.grad_tolerance, cfg.max_iterations, [&](const detail::DescentState& s) {
      const auto x = desc.input(s.u, s.v);
      path.push_back({x.mu, x.sigma, p.E + s.g});
    });
    paths.push_back(std::move(path));
  }
  return paths;
}

inline std::vector<std::pair<double, double>> corner_starts(const SearchBox& box) {
  return {{box.mu_lo, box.sigma_lo}, {box.mu_lo, box.sigma_hi}, {box.mu_hi, box.sigma_lo}};
}

inline nlohmann::json optimum_to_json(const OptimumReport& r) {
  return {{"mu_hat", r.mu_hat},       {"sigma_hat", r.sigma_hat}, {"sigma2_hat", r.sigma_hat * r.sigma_hat},
          {"loss_at_opt", r.loss_at_opt}, {"grad_norm", r.grad_norm}, {"clamped", r.clamped},
          {"iterations", r.iterations}};
}

inline nlohmann::json box_to_json(const SearchBox& b) {
  return {{"mu_lo", b.mu_lo}, {"mu_hi", b.mu_hi}, {"sigma_lo", b.sigma_lo}, {"sigma_hi", b.sigma_hi}};
}

inline nlohmann::json grid_to_json(const LandscapeGrid& g) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < g.mu_axis.size(); ++i) {
    std::vector<double> row(g.loss.begin() + static_cast<std::ptrdiff_t>(i * g.sigma_axis.size()),
                            g.loss.begin() + static_cast<std::ptrdiff_t>((i + 1) * g.sigma_axis.size()));
    rows.push_back(row);
  }
  return {{"mu_axis", g.mu_axis}, {"sigma_axis", g.sigma_axis}, {"d_tokens", g.d_tokens}, {"loss", rows}};
}

}  // namespace pplaw
