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
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pplaw/error.hpp"
#include "pplaw/io.hpp"
#include "pplaw/nelder_mead.hpp"
#include "pplaw/scaling_law.hpp"

namespace pplaw {

// One fitting point: statistics of a trained subset and its measured loss.
struct Observation {
  double mu = 0.0;
  double sigma = 0.0;
  double d_tokens = 0.0;
  double test_loss = 0.0;
  std::optional<std::string> tag;

  LawInput input() const { return {mu, sigma, d_tokens}; }
  bool operator==(const Observation&) const = default;
};

inline void check_observation(const Observation& o) {
  auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!ok(o.mu) || !ok(o.sigma) || !ok(o.d_tokens) || !ok(o.test_loss)) {
    throw InputError("observation fields must be positive and finite");
  }
}

// ---------------------------------------------------------------------------
// Observation files: CSV with a header naming mu,sigma,d_tokens,test_loss[,tag]
// in any order, or JSONL with the same field names.

inline std::vector<Observation> read_observations_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open file");
  std::string line;
  if (!std::getline(in, line)) throw InputError(path.string() + ": empty file, header required");
  const auto header = io::split_csv_line(line);
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_mu = column("mu"), c_sigma = column("sigma"), c_d = column("d_tokens"), c_loss = column("test_loss");
  const auto c_tag = column("tag");
  if (!c_mu || !c_sigma || !c_d || !c_loss) {
    throw InputError(path.string() + ":1: header must name mu,sigma,d_tokens,test_loss");
  }
  std::vector<Observation> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = io::split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      if (fields.size() < header.size()) throw InputError("expected " + std::to_string(header.size()) + " fields");
      Observation o;
      o.mu = io::parse_number(fields[*c_mu], "mu");
      o.sigma = io::parse_number(fields[*c_sigma], "sigma");
      o.d_tokens = io::parse_number(fields[*c_d], "d_tokens");
      o.test_loss = io::parse_number(fields[*c_loss], "test_loss");
      if (c_tag && !fields[*c_tag].empty()) o.tag = fields[*c_tag];
      check_observation(o);
      out.push_back(std::move(o));
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<Observation> read_observations_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open file");
  std::vector<Observation> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      auto j = nlohmann::json::parse(line);
      Observation o;
      o.mu = j.at("mu").get<double>();
      o.sigma = j.at("sigma").get<double>();
      o.d_tokens = j.at("d_tokens").get<double>();
      o.test_loss = j.at("test_loss").get<double>();
      if (auto t = j.find("tag"); t != j.end() && t->is_string()) o.tag = t->get<std::string>();
      check_observation(o);
      out.push_back(std::move(o));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + ": malformed record: " + e.what());
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  return out;
}

// Dispatches on extension: .jsonl / .json are JSONL, anything else CSV.
inline std::vector<Observation> read_observations(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return ext == ".jsonl" || ext == ".json" ? read_observations_jsonl(path) : read_observations_csv(path);
}

inline void write_observations_csv(std::span<const Observation> obs, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  out << "mu,sigma,d_tokens,test_loss,tag\n";
  for (const auto& o : obs) {
    out << io::format_number(o.mu) << ',' << io::format_number(o.sigma) << ',' << io::format_number(o.d_tokens)
        << ',' << io::format_number(o.test_loss) << ',' << o.tag.value_or("") << '\n';
  }
}

// ---------------------------------------------------------------------------

struct ObservationSplit {
  std::vector<Observation> train;
  std::vector<Observation> val;
};

// Seeded shuffle, then the first round(val_fraction * n) (at least one) go to validation.
inline ObservationSplit split_observations(std::span<const Observation> obs, double val_fraction,
                                           std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw InputError("val_fraction must lie in (0, 1)");
  const std::size_t n = obs.size();
  const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(val_fraction * n)));
  if (n < 2 || n_val >= n) {
    throw InputError("too few observations (" + std::to_string(n) + ") to split into fit and validation parts");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  ObservationSplit split;
  split.val.reserve(n_val);
  split.train.reserve(n - n_val);
  for (std::size_t i = 0; i < n; ++i) (i < n_val ? split.val : split.train).push_back(obs[order[i]]);
  return split;
}

enum class FitLoss { squared, huber };

// Band of plausible losses at a given (sigma, D): the law evaluated over the mu
// uncertainty interval, widened by `loss_margin` on both sides. Defaults are
// the PubMed setting mu = 13.48 +- 2.17, sigma in [25, 1600].
struct BandConfig {
  double mu_center = 13.48;
  double mu_half_width = 2.17;
  double sigma_lo = 25.0;
  double sigma_hi = 1600.0;
  double loss_margin = 0.0;
  int mu_samples = 33;
};

struct FitConfig {
  // Restart grid is truncated to the first n_restarts points (max 162).
  int n_restarts = 162;
  FitLoss loss = FitLoss::squared;
  double huber_delta = 1e-2;
  NelderMeadOptions simplex{};
  // Extra Nelder-Mead passes restarted from each local result.
  int polish_cycles = 4;
  int threads = 1;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  BandConfig band{};
};

struct FitResult {
  LawParams params;
  LawForm law_form = LawForm::interaction;
  double objective = 0.0;
  double train_rmse = 0.0;
  double val_rmse = 0.0;
  double band_coverage = 0.0;
  int n_train = 0;
  int n_val = 0;
  int n_restarts_used = 0;
  bool converged = false;
};

namespace detail {

// Standardised log-space problem. Internal coordinates:
//   theta = [log E, c, log alphaD, s_mu, s_sigma, (s_int_mu, s_int_sigma)]
// with log g_i = c - alphaD*(lnD_i - mean) - sum_k s_k * z_ik for standardised
// features z (ln mu, ln sigma, sigma ln mu, mu ln sigma). This is a linear
// change of variables of the natural parameters that removes the strong
// D_c / alphaD / exponent correlations.
class FitProblem {
 public:
  static constexpr std::size_t kFeatures = 4;

  FitProblem(std::span<const Observation> obs, LawForm form, const FitConfig& cfg)
      : form_(form), loss_(cfg.loss), delta_(cfg.huber_delta) {
    const std::size_t n = obs.size();
    rows_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& o = obs[i];
      const double lm = std::log(o.mu), ls = std::log(o.sigma);
      rows_[i] = Row{std::log(o.d_tokens), {lm, ls, o.sigma * lm, o.mu * ls}, o.test_loss, {}};
    }
    auto stats = [&](auto get) {
      double m = 0.0;
      for (const auto& r : rows_) m += get(r);
      m /= static_cast<double>(n);
      double v = 0.0;
      for (const auto& r : rows_) v += (get(r) - m) * (get(r) - m);
      const double sd = std::sqrt(v / static_cast<double>(n));
      return std::pair{m, sd > 1e-12 * std::max(1.0, std::abs(m)) ? sd : 1.0};
    };
    d_mean_ = stats([](const Row& r) { return r.log_d; }).first;
    for (std::size_t k = 0; k < kFeatures; ++k) {
      std::tie(f_mean_[k], f_scale_[k]) = stats([k](const Row& r) { return r.feature[k]; });
    }
    for (auto& r : rows_) {
      r.centered_d = r.log_d - d_mean_;
      for (std::size_t k = 0; k < kFeatures; ++k) r.z[k] = (r.feature[k] - f_mean_[k]) / f_scale_[k];
    }
  }

  std::size_t dim() const { return form_ == LawForm::basic ? 5 : 7; }

  double objective(std::span<const double> t) const {
    const double E = std::exp(t[0]);
    const double alpha_d = std::exp(t[2]);
    const std::size_t nf = form_ == LawForm::basic ? 2 : 4;
    double sum = 0.0;
    for (const auto& r : rows_) {
      double lg = t[1] - alpha_d * r.centered_d;
      for (std::size_t k = 0; k < nf; ++k) lg -= t[3 + k] * r.z[k];
      const double res = E + std::exp(lg) - r.loss;
      if (loss_ == FitLoss::squared) {
        sum += res * res;
      } else {
        const double a = std::abs(res);
        sum += a <= delta_ ? 0.5 * res * res : delta_ * (a - 0.5 * delta_);
      }
    }
    return std::isfinite(sum) ? sum : std::numeric_limits<double>::infinity();
  }

  LawParams to_params(std::span<const double> t) const {
    LawParams p;
    p.E = std::exp(t[0]);
    p.alphaD = std::exp(t[2]);
    std::array<double, kFeatures> coef{};
    const std::size_t nf = form_ == LawForm::basic ? 2 : 4;
    for (std::size_t k = 0; k < nf; ++k) coef[k] = t[3 + k] / f_scale_[k];
    p.alpha0 = coef[0];
    p.beta0 = coef[1];
    p.alpha1 = coef[2];
    p.beta1 = coef[3];
    double log_dc = t[1] + p.alphaD * d_mean_;
    for (std::size_t k = 0; k < kFeatures; ++k) log_dc += coef[k] * f_mean_[k];
    p.D_c = std::exp(log_dc);
    return p;
  }

  std::vector<double> from_params(const LawParams& p) const {
    std::vector<double> t(dim());
    t[0] = std::log(p.E);
    t[2] = std::log(p.alphaD);
    const std::array<double, kFeatures> coef{p.alpha0, p.beta0, p.alpha1, p.beta1};
    double c = std::log(p.D_c) - p.alphaD * d_mean_;
    const std::size_t nf = form_ == LawForm::basic ? 2 : 4;
    for (std::size_t k = 0; k < nf; ++k) {
      c -= coef[k] * f_mean_[k];
      t[3 + k] = coef[k] * f_scale_[k];
    }
    t[1] = c;
    return t;
  }

  std::vector<double> steps() const {
    std::vector<double> s(dim(), 0.05);
    s[0] = 0.1;
    s[1] = 0.2;
    s[2] = 0.1;
    return s;
  }

 private:
  struct Row {
    double log_d;
    std::array<double, kFeatures> feature;
    double loss;
    std::array<double, kFeatures> z;
    double centered_d = 0.0;
  };

  LawForm form_;
  FitLoss loss_;
  double delta_;
  std::vector<Row> rows_;
  double d_mean_ = 0.0;
  std::array<double, kFeatures> f_mean_{};
  std::array<double, kFeatures> f_scale_{};
};

struct RestartOutcome {
  std::vector<double> theta;
  double value = std::numeric_limits<double>::infinity();
  bool hit_cap = true;
};

inline RestartOutcome run_restart(const FitProblem& problem, std::vector<double> start, const FitConfig& cfg) {
  const auto step = problem.steps();
  auto f = [&](std::span<const double> t) { return problem.objective(t); };
  auto r = nelder_mead(f, start, step, cfg.simplex);
  RestartOutcome out{r.x, r.value, !r.converged};
  for (int c = 0; c < cfg.polish_cycles && std::isfinite(out.value); ++c) {
    auto again = nelder_mead(f, out.theta, step, cfg.simplex);
    const bool improved = again.value < out.value * (1.0 - 1e-9);
    if (again.value <= out.value) {
      out.theta = std::move(again.x);
      out.value = again.value;
      out.hit_cap = !again.converged;
    }
    if (!improved) break;
  }
  return out;
}

// Natural-parameter starting points: E in {min loss, 1}, D_c in {1, 1e2, 1e4},
// alphaD in {0.1, 0.3, 0.5}, alpha0, beta0 in {-0.2, 0, 0.2}; interaction terms start at 0.
inline std::vector<LawParams> restart_grid(std::span<const Observation> obs) {
  double min_loss = std::numeric_limits<double>::infinity();
  for (const auto& o : obs) min_loss = std::min(min_loss, o.test_loss);
  std::vector<LawParams> grid;
  for (double E : {min_loss, 1.0})
    for (double dc : {1.0, 1e2, 1e4})
      for (double ad : {0.1, 0.3, 0.5})
        for (double a0 : {-0.2, 0.0, 0.2})
          for (double b0 : {-0.2, 0.0, 0.2}) grid.push_back(LawParams{E, dc, a0, 0.0, b0, 0.0, ad});
  return grid;
}

inline double rmse(const LawParams& p, std::span<const Observation> obs) {
  if (obs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& o : obs) {
    const double r = predict_loss(p, o.input()) - o.test_loss;
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(obs.size()));
}

inline std::size_t free_parameters(LawForm form) { return form == LawForm::basic ? 5 : 7; }

inline std::vector<RestartOutcome> run_restarts(const FitProblem& problem, const std::vector<std::vector<double>>& starts,
                                                const FitConfig& cfg) {
  std::vector<RestartOutcome> outcomes(starts.size());
  const auto n_threads = static_cast<std::size_t>(std::max(1, cfg.threads));
  if (n_threads == 1 || starts.size() < 2) {
    for (std::size_t i = 0; i < starts.size(); ++i) outcomes[i] = run_restart(problem, starts[i], cfg);
    return outcomes;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < starts.size(); i += n_threads) outcomes[i] = run_restart(problem, starts[i], cfg);
    });
  }
  for (auto& th : pool) th.join();
  return outcomes;
}

}  // namespace detail

// Multi-start Nelder-Mead fit of the chosen law form. The interaction fit is
// seeded with the basic optimum as its first restart, so its objective is never
// worse than the basic fit on the same data.
inline FitResult fit(std::span<const Observation> train, LawForm form, const FitConfig& cfg = {}) {
  for (const auto& o : train) check_observation(o);
  if (train.size() < detail::free_parameters(form)) {
    throw InputError("underdetermined fit: " + std::to_string(train.size()) + " observations for " +
                     std::to_string(detail::free_parameters(form)) + " free parameters");
  }
  if (cfg.n_restarts < 1) throw InputError("n_restarts must be positive");

  const detail::FitProblem problem(train, form, cfg);
  const auto grid = detail::restart_grid(train);
  const auto n_grid = std::min<std::size_t>(grid.size(), static_cast<std::size_t>(cfg.n_restarts));

  std::vector<std::vector<double>> starts;
  if (form == LawForm::interaction) {
    const auto basic = fit(train, LawForm::basic, cfg);
    starts.push_back(problem.from_params(basic.params));
  }
  for (std::size_t i = 0; i < n_grid; ++i) starts.push_back(problem.from_params(grid[i]));

  const auto outcomes = detail::run_restarts(problem, starts, cfg);

  std::size_t best = outcomes.size();
  bool any_converged = false;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    any_converged = any_converged || !outcomes[i].hit_cap;
    if (!std::isfinite(outcomes[i].value)) continue;
    if (best == outcomes.size() || outcomes[i].value < outcomes[best].value) best = i;
  }
  if (best == outcomes.size()) throw DomainError("every restart produced a non-finite objective");

  FitResult result;
  result.law_form = form;
  result.params = problem.to_params(outcomes[best].theta);
  if (form == LawForm::basic) result.params = as_basic(result.params);
  checked(result.params);
  result.objective = outcomes[best].value;
  result.train_rmse = detail::rmse(result.params, train);
  result.n_train = static_cast<int>(train.size());
  result.n_restarts_used = static_cast<int>(outcomes.size());
  result.converged = any_converged;
  return result;
}

struct BandEnvelope {
  double lo = 0.0;
  double mid = 0.0;
  double hi = 0.0;
};

// Envelope of the law over the band's mu interval at fixed (sigma, D). When
// `mu_extra` lies inside the interval it is included among the sampled mu.
inline BandEnvelope band_envelope(const LawParams& p, const BandConfig& band, double sigma, double d_tokens,
                                  std::optional<double> mu_extra = std::nullopt) {
  const double lo_mu = band.mu_center - band.mu_half_width;
  const double hi_mu = band.mu_center + band.mu_half_width;
  if (!(lo_mu > 0.0) || band.mu_samples < 2) throw InputError("invalid band configuration");
  BandEnvelope env;
  env.lo = std::numeric_limits<double>::infinity();
  env.hi = -std::numeric_limits<double>::infinity();
  auto visit = [&](double mu) {
    const double l = predict_loss(p, {mu, sigma, d_tokens});
    env.lo = std::min(env.lo, l);
    env.hi = std::max(env.hi, l);
  };
  for (int i = 0; i < band.mu_samples; ++i) {
    visit(lo_mu + (hi_mu - lo_mu) * static_cast<double>(i) / static_cast<double>(band.mu_samples - 1));
  }
  if (mu_extra && *mu_extra >= lo_mu && *mu_extra <= hi_mu) visit(*mu_extra);
  env.mid = predict_loss(p, {band.mu_center, sigma, d_tokens});
  env.lo -= band.loss_margin;
  env.hi += band.loss_margin;
  return env;
}

struct Validation {
  double val_rmse = 0.0;
  double band_coverage = 0.0;
};

// RMSE on held-out points and the fraction of them inside the band. Points whose
// sigma falls outside the band's sigma range count as uncovered.
inline Validation validate(const FitResult& result, std::span<const Observation> val, const BandConfig& band = {}) {
  if (val.empty()) throw InputError("validation set is empty");
  Validation v;
  v.val_rmse = detail::rmse(result.params, val);
  std::size_t inside = 0;
  for (const auto& o : val) {
    if (o.sigma < band.sigma_lo || o.sigma > band.sigma_hi) continue;
    const auto env = band_envelope(result.params, band, o.sigma, o.d_tokens, o.mu);
    if (o.test_loss >= env.lo && o.test_loss <= env.hi) ++inside;
  }
  v.band_coverage = static_cast<double>(inside) / static_cast<double>(val.size());
  return v;
}

struct FitReport {
  FitResult result;
  ObservationSplit split;
};

// split -> fit -> validate, filling the validation fields of the result.
inline FitReport fit_and_validate(std::span<const Observation> obs, LawForm form, const FitConfig& cfg = {}) {
  FitReport report;
  report.split = split_observations(obs, cfg.val_fraction, cfg.seed);
  report.result = fit(report.split.train, form, cfg);
  const auto v = validate(report.result, report.split.val, cfg.band);
  report.result.val_rmse = v.val_rmse;
  report.result.band_coverage = v.band_coverage;
  report.result.n_val = static_cast<int>(report.split.val.size());
  return report;
}

struct BandRow {
  double sigma = 0.0;
  BandEnvelope envelope;
};

// Log-spaced sigma sweep of the band at a fixed D.
inline std::vector<BandRow> band_curve(const LawParams& p, const BandConfig& band, double d_tokens, int n_points = 64) {
  if (!(band.sigma_lo > 0.0 && band.sigma_hi > band.sigma_lo) || n_points < 2) {
    throw InputError("invalid band sigma range");
  }
  std::vector<BandRow> rows;
  const double a = std::log(band.sigma_lo), b = std::log(band.sigma_hi);
  for (int i = 0; i < n_points; ++i) {
    double s = std::exp(a + (b - a) * static_cast<double>(i) / (n_points - 1));
    if (i == 0) s = band.sigma_lo;
    if (i + 1 == n_points) s = band.sigma_hi;
    rows.push_back({s, band_envelope(p, band, s, d_tokens)});
  }
  return rows;
}

// Axis-aligned bounds of the observed (mu, sigma) pairs.
struct ObservedRange {
  double mu_lo = 0.0;
  double mu_hi = 0.0;
  double sigma_lo = 0.0;
  double sigma_hi = 0.0;
};

inline ObservedRange observed_range(std::span<const Observation> obs) {
  if (obs.empty()) throw InputError("no observations");
  ObservedRange r{obs[0].mu, obs[0].mu, obs[0].sigma, obs[0].sigma};
  for (const auto& o : obs) {
    r.mu_lo = std::min(r.mu_lo, o.mu);
    r.mu_hi = std::max(r.mu_hi, o.mu);
    r.sigma_lo = std::min(r.sigma_lo, o.sigma);
    r.sigma_hi = std::max(r.sigma_hi, o.sigma);
  }
  return r;
}

inline nlohmann::json fit_config_to_json(const FitConfig& cfg) {
  return {{"n_restarts", cfg.n_restarts},
          {"loss", cfg.loss == FitLoss::squared ? "squared" : "huber"},
          {"huber_delta", cfg.huber_delta},
          {"max_iterations", cfg.simplex.max_iterations},
          {"simplex_tolerance", cfg.simplex.simplex_tolerance},
          {"polish_cycles", cfg.polish_cycles},
          {"val_fraction", cfg.val_fraction},
          {"seed", cfg.seed},
          {"band",
           {{"mu_center", cfg.band.mu_center},
            {"mu_half_width", cfg.band.mu_half_width},
            {"sigma_lo", cfg.band.sigma_lo},
            {"sigma_hi", cfg.band.sigma_hi},
            {"loss_margin", cfg.band.loss_margin}}}};
}

inline nlohmann::json fit_result_to_json(const FitResult& r) {
  return {{"params", law_params_to_json(r.params, r.law_form)},
          {"law_form", std::string(to_string(r.law_form))},
          {"objective", r.objective},
          {"train_rmse", r.train_rmse},
          {"val_rmse", r.val_rmse},
          {"band_coverage", r.band_coverage},
          {"n_train", r.n_train},
          {"n_val", r.n_val},
          {"n_restarts_used", r.n_restarts_used},
          {"converged", r.converged}};
}

inline nlohmann::json observed_range_to_json(const ObservedRange& r) {
  return {{"mu_lo", r.mu_lo}, {"mu_hi", r.mu_hi}, {"sigma_lo", r.sigma_lo}, {"sigma_hi", r.sigma_hi}};
}

inline ObservedRange observed_range_from_json(const nlohmann::json& j) {
  return {j.at("mu_lo").get<double>(), j.at("mu_hi").get<double>(), j.at("sigma_lo").get<double>(),
          j.at("sigma_hi").get<double>()};
}

}  // namespace pplaw
