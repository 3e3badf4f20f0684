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

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pplaw/corpus.hpp"
#include "pplaw/dos_selector.hpp"
#include "pplaw/error.hpp"
#include "pplaw/law_fitting.hpp"
#include "pplaw/scaling_law.hpp"

namespace pplaw {

struct Range {
  double lo = 1.0;
  double hi = 1.0;
};

// Interaction law whose loss has a strict interior minimum at (mu_star, sigma_star).
// With alpha1 = -x / sigma_star and beta1 = -y / mu_star, the intercepts
//   alpha0 = x + y * log(sigma_star),  beta0 = y + x * log(mu_star)
// zero both partial derivatives there; the point is a minimum when
// x * y * log(mu_star) * log(sigma_star) > (x + y)^2.
inline LawParams interior_optimum_law(double mu_star, double sigma_star, double x, double y, double E, double D_c,
                                      double alphaD) {
  if (!(mu_star > 1.0 && sigma_star > 1.0 && x > 0.0 && y > 0.0)) {
    throw InputError("interior optimum needs mu*, sigma* > 1 and positive coupling strengths");
  }
  const double lm = std::log(mu_star), ls = std::log(sigma_star);
  if (!(x * y * lm * ls > (x + y) * (x + y))) throw InputError("coupling strengths do not give a minimum");
  LawParams p;
  p.E = E;
  p.D_c = D_c;
  p.alphaD = alphaD;
  p.alpha1 = -x / sigma_star;
  p.beta1 = -y / mu_star;
  p.alpha0 = x + y * ls;
  p.beta0 = y + x * lm;
  checked(p);
  return p;
}

// Default ground truth for synthetic pipelines: minimum at mu = 13, sigma = 8.
inline LawParams default_truth_law() { return interior_optimum_law(13.0, 8.0, 0.2, 0.2, 1.6, 400.0, 0.25); }

struct SyntheticSpec {
  LawParams truth;
  Range mu_range{5.0, 30.0};
  Range sigma_range{10.0, 200.0};
  Range d_range{1e7, 1e9};
  std::size_t n_obs = 200;
  double noise_tau = 0.0;  // std of additive Gaussian loss noise
  std::uint64_t seed = 0;
};

namespace detail {

inline void check_range(const Range& r, const char* what) {
  if (!(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo > 0.0 && r.lo <= r.hi)) {
    throw InputError(std::string("invalid ") + what + " range");
  }
}

inline double log_uniform(std::mt19937_64& rng, const Range& r) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = std::log(r.lo), b = std::log(r.hi);
  return std::exp(a + (b - a) * u(rng));
}

}  // namespace detail

// (mu, sigma, D) drawn log-uniformly; loss = truth law + N(0, tau). Noise draws
// that would make a loss non-positive are redrawn.
inline std::vector<Observation> generate_observations(const SyntheticSpec& spec) {
  checked(spec.truth);
  detail::check_range(spec.mu_range, "mu");
  detail::check_range(spec.sigma_range, "sigma");
  detail::check_range(spec.d_range, "d_tokens");
  if (spec.n_obs == 0) throw InputError("n_obs must be positive");
  if (!(spec.noise_tau >= 0.0 && std::isfinite(spec.noise_tau))) throw InputError("noise_tau must be >= 0");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Observation> out;
  out.reserve(spec.n_obs);
  for (std::size_t i = 0; i < spec.n_obs; ++i) {
    Observation o;
    o.mu = detail::log_uniform(rng, spec.mu_range);
    o.sigma = detail::log_uniform(rng, spec.sigma_range);
    o.d_tokens = detail::log_uniform(rng, spec.d_range);
    const double clean = predict_loss(spec.truth, o.input());
    o.test_loss = clean;
    if (spec.noise_tau > 0.0) {
      do {
        o.test_loss = clean + spec.noise_tau * noise(rng);
      } while (o.test_loss <= 0.0);
    }
    o.tag = "syn-" + std::to_string(i);
    out.push_back(std::move(o));
  }
  return out;
}

enum class PplLaw { lognormal, zipf_mixture };

inline std::string_view to_string(PplLaw law) { return law == PplLaw::lognormal ? "lognormal" : "zipf_mixture"; }

inline PplLaw parse_ppl_law(std::string_view s) {
  if (s == "lognormal") return PplLaw::lognormal;
  if (s == "zipf_mixture") return PplLaw::zipf_mixture;
  throw InputError("unknown ppl law '" + std::string(s) + "'");
}

struct SyntheticCorpusSpec {
  std::size_t n_docs = 1000;
  PplLaw ppl_law = PplLaw::lognormal;
  double log_mean = 2.6;  // location of log ppl (of the rank-1 component for zipf_mixture)
  double log_std = 0.5;
  // zipf_mixture: component rank r ~ r^-zipf_s over 1..n_components; the
  // component location is log_mean + component_growth * log r.
  double zipf_s = 1.0;
  std::size_t n_components = 8;
  double component_growth = 1.0;
  double token_mean = 1000.0;
  double token_log_std = 0.5;
  std::uint64_t seed = 0;
};

inline std::string doc_name(std::size_t i) {
  auto s = std::to_string(i);
  return "doc-" + std::string(s.size() < 7 ? 7 - s.size() : 0, '0') + s;
}

inline Corpus generate_corpus(const SyntheticCorpusSpec& spec) {
  if (spec.n_docs == 0) throw InputError("n_docs must be positive");
  if (!(spec.log_std >= 0.0) || !(spec.token_log_std >= 0.0) || !(spec.token_mean >= 1.0)) {
    throw InputError("invalid corpus distribution parameters");
  }
  if (spec.ppl_law == PplLaw::zipf_mixture && spec.n_components == 0) {
    throw InputError("zipf_mixture needs at least one component");
  }
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> z(0.0, 1.0);

  std::vector<double> rank_weights;
  for (std::size_t r = 1; r <= spec.n_components; ++r) {
    rank_weights.push_back(std::pow(static_cast<double>(r), -spec.zipf_s));
  }
  std::discrete_distribution<std::size_t> rank(rank_weights.begin(), rank_weights.end());

  const double token_loc = std::log(spec.token_mean) - 0.5 * spec.token_log_std * spec.token_log_std;
  std::vector<Document> docs;
  docs.reserve(spec.n_docs);
  for (std::size_t i = 0; i < spec.n_docs; ++i) {
    double loc = spec.log_mean;
    if (spec.ppl_law == PplLaw::zipf_mixture) {
      loc += spec.component_growth * std::log(static_cast<double>(rank(rng) + 1));
    }
    Document d;
    d.id = doc_name(i);
    d.ppl = std::exp(loc + spec.log_std * z(rng));
    const double t = std::exp(token_loc + spec.token_log_std * z(rng));
    d.n_tokens = static_cast<std::uint64_t>(std::max(1.0, std::round(t)));
    d.source = "synthetic";
    docs.push_back(std::move(d));
  }
  return Corpus(std::move(docs));
}

struct LossCurve {
  SelectionMethod method = SelectionMethod::DOS;
  double mu = 0.0;
  double sigma = 0.0;
  std::vector<double> d_tokens;
  std::vector<double> loss;
};

// Loss trajectory the law predicts for each manifest's final (mu(S), sigma(S)).
inline std::vector<LossCurve> simulate_training_curves(const LawParams& truth,
                                                       std::span<const SelectionManifest> manifests,
                                                       std::span<const double> d_schedule) {
  std::vector<LossCurve> curves;
  for (const auto& m : manifests) {
    if (m.trajectory.empty()) throw DomainError("manifest has no selected chunks");
    const auto& last = m.trajectory.back();
    if (!(last.sigma2_S > 0.0)) throw DomainError("degenerate subset statistics (sigma = 0)");
    LossCurve c;
    c.method = m.method;
    c.mu = last.mu_S;
    c.sigma = std::sqrt(last.sigma2_S);
    for (double d : d_schedule) {
      c.d_tokens.push_back(d);
      c.loss.push_back(predict_loss(truth, {c.mu, c.sigma, d}));
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

}  // namespace pplaw
