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
#include <string>
#include <string_view>

#include <json.hpp>

#include "pplaw/error.hpp"

namespace pplaw {

enum class LawForm { basic, interaction };

inline std::string_view to_string(LawForm form) { return form == LawForm::basic ? "basic" : "interaction"; }

inline LawForm parse_law_form(std::string_view s) {
  if (s == "basic") return LawForm::basic;
  if (s == "interaction") return LawForm::interaction;
  throw InputError("unknown law form '" + std::string(s) + "'");
}

// Parameters of the perplexity-aware data law
//
//   L(mu, sigma, D) = E + D_c / (mu^(alpha0 + alpha1*sigma) * sigma^(beta0 + beta1*mu) * D^alphaD)
//
// The basic law is the alpha1 = beta1 = 0 special case.
struct LawParams {
  double E = 0.0;
  double D_c = 1.0;
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double beta0 = 0.0;
  double beta1 = 0.0;
  double alphaD = 1.0;

  bool operator==(const LawParams&) const = default;
};

// Throws DomainError unless E >= 0, D_c > 0, alphaD > 0 and every field is finite.
inline const LawParams& checked(const LawParams& p) {
  const bool finite = std::isfinite(p.E) && std::isfinite(p.D_c) && std::isfinite(p.alpha0) &&
                      std::isfinite(p.alpha1) && std::isfinite(p.beta0) && std::isfinite(p.beta1) &&
                      std::isfinite(p.alphaD);
  if (!finite) throw DomainError("law parameters must be finite");
  if (p.E < 0.0) throw DomainError("E must be non-negative");
  if (p.D_c <= 0.0) throw DomainError("D_c must be positive");
  if (p.alphaD <= 0.0) throw DomainError("alphaD must be positive");
  return p;
}

inline LawParams make_law_params(double E, double D_c, double alpha0, double alpha1, double beta0, double beta1,
                                 double alphaD) {
  LawParams p{E, D_c, alpha0, alpha1, beta0, beta1, alphaD};
  checked(p);
  return p;
}

// Same parameters with the interaction coefficients zeroed.
inline LawParams as_basic(LawParams p) {
  p.alpha1 = 0.0;
  p.beta1 = 0.0;
  return p;
}

struct LawInput {
  double mu = 1.0;
  double sigma = 1.0;
  double d_tokens = 1.0;
};

inline void check_input(const LawInput& x) {
  if (!(std::isfinite(x.mu) && x.mu > 0.0)) throw DomainError("mu must be positive and finite");
  if (!(std::isfinite(x.sigma) && x.sigma > 0.0)) throw DomainError("sigma must be positive and finite");
  if (!(std::isfinite(x.d_tokens) && x.d_tokens > 0.0)) throw DomainError("d_tokens must be positive and finite");
}

namespace detail {

// log(D_c) - log(denominator), with exponents alpha_mu = alpha0 + alpha1*sigma
// and alpha_sigma = beta0 + beta1*mu already formed by the caller.
inline double log_data_term(double log_dc, double alpha_mu, double alpha_sigma, double alpha_d, double log_mu,
                            double log_sigma, double log_d) {
  return log_dc - (alpha_mu * log_mu + alpha_sigma * log_sigma + alpha_d * log_d);
}

inline double exp_checked(double v) {
  const double r = std::exp(v);
  if (!std::isfinite(r) || !std::isfinite(v)) throw DomainError("law evaluation overflowed");
  return r;
}

}  // namespace detail

// D_c / denominator, evaluated in log space.
inline double data_term(const LawParams& p, const LawInput& x) {
  checked(p);
  check_input(x);
  const double alpha_mu = p.alpha0 + p.alpha1 * x.sigma;
  const double alpha_sigma = p.beta0 + p.beta1 * x.mu;
  return detail::exp_checked(detail::log_data_term(std::log(p.D_c), alpha_mu, alpha_sigma, p.alphaD, std::log(x.mu),
                                                   std::log(x.sigma), std::log(x.d_tokens)));
}

inline double predict_loss(const LawParams& p, const LawInput& x) { return p.E + data_term(p, x); }

inline double predict_loss(const LawParams& p, LawForm form, const LawInput& x) {
  return predict_loss(form == LawForm::basic ? as_basic(p) : p, x);
}

// The basic law E + D_c / (mu^alpha0 * sigma^beta0 * D^alphaD). Shares the
// log-space kernel with predict_loss, so zero interaction coefficients give
// bit-identical results.
inline double predict_basic_loss(const LawParams& p, const LawInput& x) {
  checked(p);
  check_input(x);
  return p.E + detail::exp_checked(detail::log_data_term(std::log(p.D_c), p.alpha0, p.beta0, p.alphaD,
                                                         std::log(x.mu), std::log(x.sigma), std::log(x.d_tokens)));
}

struct Decomposition {
  double independence_factor = 1.0;    // mu^alpha0 * sigma^beta0
  double interdependence_factor = 1.0; // mu^(alpha1*sigma) * sigma^(beta1*mu)
  double size_factor = 1.0;            // D^alphaD
};

inline Decomposition decompose(const LawParams& p, const LawInput& x) {
  checked(p);
  check_input(x);
  const double lm = std::log(x.mu);
  const double ls = std::log(x.sigma);
  Decomposition d;
  d.independence_factor = detail::exp_checked(p.alpha0 * lm + p.beta0 * ls);
  d.interdependence_factor = detail::exp_checked(p.alpha1 * x.sigma * lm + p.beta1 * x.mu * ls);
  d.size_factor = detail::exp_checked(p.alphaD * std::log(x.d_tokens));
  return d;
}

struct LossGradient {
  double dL_dmu = 0.0;
  double dL_dsigma = 0.0;
};

// Partial derivatives at fixed D. With g = D_c / denominator:
//   dL/dmu    = -g * ((alpha0 + alpha1*sigma) / mu + beta1 * log(sigma))
//   dL/dsigma = -g * (alpha1 * log(mu) + (beta0 + beta1*mu) / sigma)
inline LossGradient grad_loss(const LawParams& p, const LawInput& x) {
  const double g = data_term(p, x);
  const double alpha_mu = p.alpha0 + p.alpha1 * x.sigma;
  const double alpha_sigma = p.beta0 + p.beta1 * x.mu;
  LossGradient out;
  out.dL_dmu = -g * (alpha_mu / x.mu + p.beta1 * std::log(x.sigma));
  out.dL_dsigma = -g * (p.alpha1 * std::log(x.mu) + alpha_sigma / x.sigma);
  if (!std::isfinite(out.dL_dmu) || !std::isfinite(out.dL_dsigma)) {
    throw DomainError("law gradient is not finite");
  }
  return out;
}

inline nlohmann::json law_params_to_json(const LawParams& p, LawForm form) {
  return {{"E", p.E},           {"D_c", p.D_c},       {"alpha0", p.alpha0}, {"alpha1", p.alpha1},
          {"beta0", p.beta0},   {"beta1", p.beta1},   {"alphaD", p.alphaD}, {"law_form", std::string(to_string(form))}};
}

struct FormedLaw {
  LawParams params;
  LawForm form = LawForm::interaction;
};

inline FormedLaw law_params_from_json(const nlohmann::json& j) {
  try {
    FormedLaw out;
    out.params.E = j.at("E").get<double>();
    out.params.D_c = j.at("D_c").get<double>();
    out.params.alpha0 = j.at("alpha0").get<double>();
    out.params.alpha1 = j.value("alpha1", 0.0);
    out.params.beta0 = j.at("beta0").get<double>();
    out.params.beta1 = j.value("beta1", 0.0);
    out.params.alphaD = j.at("alphaD").get<double>();
    out.form = parse_law_form(j.value("law_form", std::string("interaction")));
    if (out.form == LawForm::basic) out.params = as_basic(out.params);
    checked(out.params);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid law parameters: ") + e.what());
  }
}

}  // namespace pplaw
