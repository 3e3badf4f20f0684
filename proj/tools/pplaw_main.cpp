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

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "commands.hpp"

namespace {

using namespace pplaw;

void add_common(CLI::App* sub, cli::Common& common) {
  sub->add_option("--output-dir,-o", common.output_dir, "Directory for artifacts and run.json")->required();
  sub->add_option("--threads", common.threads, "Worker threads (never changes results)")->check(CLI::PositiveNumber);
  sub->add_flag("--quiet,-q", common.quiet, "Suppress warnings on stderr");
}

// Two-value range option; converted with to_range() after parsing.
void add_range(CLI::App* sub, const std::string& name, std::vector<double>& storage, const std::string& help) {
  sub->add_option(name, storage, help)->expected(2);
}

std::optional<Range> to_range(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return Range{v[0], v[1]};
}

template <class T>
void add_optional(CLI::App* sub, const std::string& name, std::optional<T>& target, const std::string& help) {
  sub->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perplexity-aware data scaling: fit, landscape analysis and budgeted subset selection"};
  app.require_subcommand(1);

  cli::Common common;

  // stats
  cli::StatsOptions stats;
  std::string stats_mode = "per_document";
  bool stats_lenient = false;
  auto* s = app.add_subcommand("stats", "Perplexity statistics and histogram of a corpus");
  s->add_option("--corpus", stats.corpus, "Corpus JSONL file")->required()->check(CLI::ExistingFile);
  s->add_option("--mode", stats_mode, "per_document | token_weighted");
  s->add_flag("--lenient", stats_lenient, "Skip invalid records instead of failing");
  s->add_option("--bins", stats.bins, "Histogram bins")->check(CLI::PositiveNumber);
  add_common(s, common);

  // fit
  cli::FitOptions fit;
  std::string fit_form = "interaction", fit_loss = "squared";
  auto* f = app.add_subcommand("fit", "Fit the scaling law with a fit/validation split");
  f->add_option("--observations", fit.observations, "Observations CSV or JSONL")->required()->check(CLI::ExistingFile);
  f->add_option("--law-form", fit_form, "basic | interaction");
  f->add_option("--val-fraction", fit.config.val_fraction, "Validation fraction in (0,1)");
  f->add_option("--seed", fit.config.seed, "Split seed");
  f->add_option("--restarts", fit.config.n_restarts, "Restart grid prefix length (max 162)");
  f->add_option("--max-iterations", fit.config.simplex.max_iterations, "Simplex iteration cap per run");
  f->add_option("--loss", fit_loss, "squared | huber");
  f->add_option("--huber-delta", fit.config.huber_delta, "Huber transition point");
  f->add_option("--band-mu", fit.config.band.mu_center, "Band mu centre");
  f->add_option("--band-mu-half-width", fit.config.band.mu_half_width, "Band mu half-width");
  f->add_option("--band-sigma-lo", fit.config.band.sigma_lo, "Band sigma lower end");
  f->add_option("--band-sigma-hi", fit.config.band.sigma_hi, "Band sigma upper end");
  f->add_option("--band-margin", fit.config.band.loss_margin, "Extra loss half-width of the band");
  add_optional(f, "--band-d-tokens", fit.band_d_tokens, "D for band.csv (default: geometric mean of observed D)");
  add_common(f, common);

  // landscape
  cli::LandscapeOptions land;
  std::vector<double> land_mu, land_sigma;
  auto* l = app.add_subcommand("landscape", "Loss grid, descent paths and optimum over (mu, sigma)");
  l->add_option("--fit", land.fit, "fit.json or law parameter JSON")->required()->check(CLI::ExistingFile);
  add_range(l, "--mu-range", land_mu, "mu lower and upper bound");
  add_range(l, "--sigma-range", land_sigma, "sigma lower and upper bound");
  l->add_option("--resolution", land.resolution, "Grid points per axis")->check(CLI::Range(2, 4096));
  add_optional(l, "--d-tokens", land.d_tokens, "Training tokens D (default: d_reference of the fit)");
  l->add_option("--path-grad-tol", land.descent.grad_tolerance, "Descent path gradient tolerance");
  l->add_option("--path-max-iterations", land.descent.max_iterations, "Descent path iteration cap");
  add_common(l, common);

  // select
  cli::SelectOptions sel;
  std::string sel_method = "DOS", sel_mode = "per_document";
  std::vector<double> sel_mu, sel_sigma;
  bool sel_lenient = false;
  std::optional<std::string> sel_fit;
  auto* c = app.add_subcommand("select", "Budgeted subset selection (DOS, baselines, brute force)");
  c->add_option("--corpus", sel.corpus, "Corpus JSONL file")->required()->check(CLI::ExistingFile);
  add_optional(c, "--fit", sel_fit, "fit.json used to locate the optimum");
  c->add_option("--budget-tokens", sel.budget_tokens, "Token budget")->required();
  c->add_option("--n-chunks", sel.n_chunks, "Number of random chunks (default min(docs, 256))");
  c->add_option("--method", sel_method, "DOS | RS | LPS | HPS | BRUTE");
  c->add_option("--seed", sel.seed, "Chunking and RS seed");
  add_optional(c, "--target-mu", sel.target_mu, "Override target mean");
  add_optional(c, "--target-sigma2", sel.target_sigma2, "Override target variance");
  c->add_option("--w-mu", sel.w_mu, "Weight of the mean term");
  c->add_option("--w-sigma", sel.w_sigma, "Weight of the variance term");
  add_optional(c, "--ppl-cutoff", sel.ppl_cutoff, "LPS/HPS cutoff (default target mean)");
  add_range(c, "--mu-range", sel_mu, "Optimum search mu bounds");
  add_range(c, "--sigma-range", sel_sigma, "Optimum search sigma bounds");
  c->add_option("--mode", sel_mode, "per_document | token_weighted");
  c->add_flag("--lenient", sel_lenient, "Skip invalid corpus records");
  add_optional(c, "--early-stop", sel.early_stop_factor, "Stop DOS when best J exceeds factor * current J");
  add_common(c, common);

  // simulate
  cli::SimulateOptions sim;
  std::vector<std::string> sim_manifests;
  auto* m = app.add_subcommand("simulate", "Loss curves the law predicts for selected subsets");
  m->add_option("--truth", sim.truth, "Law parameter JSON or fit.json")->required()->check(CLI::ExistingFile);
  m->add_option("--manifest", sim_manifests, "Selection manifest JSON (repeatable)")->required();
  m->add_option("--d-schedule", sim.d_schedule, "Token counts to evaluate")->required();
  add_common(m, common);

  // gen
  cli::GenOptions gen;
  std::vector<double> g_mu, g_sigma, g_d;
  std::string g_law = "lognormal";
  std::optional<std::string> g_truth;
  std::uint64_t g_seed = 0;
  auto* g = app.add_subcommand("gen", "Synthetic observations and corpora");
  g->add_option("--what", gen.what, "observations | corpus | both");
  add_optional(g, "--truth", g_truth, "Ground-truth law JSON (default: built-in interior-optimum law)");
  add_range(g, "--mu-range", g_mu, "Observation mu range");
  add_range(g, "--sigma-range", g_sigma, "Observation sigma range");
  add_range(g, "--d-range", g_d, "Observation D range");
  g->add_option("--n-obs", gen.observations.n_obs, "Number of observations");
  g->add_option("--noise-tau", gen.observations.noise_tau, "Gaussian loss noise std");
  g->add_option("--n-docs", gen.corpus.n_docs, "Corpus documents");
  g->add_option("--ppl-law", g_law, "lognormal | zipf_mixture");
  g->add_option("--log-mean", gen.corpus.log_mean, "Location of log ppl");
  g->add_option("--log-std", gen.corpus.log_std, "Scale of log ppl");
  g->add_option("--zipf-s", gen.corpus.zipf_s, "Zipf exponent of component ranks");
  g->add_option("--components", gen.corpus.n_components, "Zipf mixture components");
  g->add_option("--component-growth", gen.corpus.component_growth, "Log-location growth per log rank");
  g->add_option("--token-mean", gen.corpus.token_mean, "Mean tokens per document");
  g->add_option("--token-log-std", gen.corpus.token_log_std, "Log-scale spread of token counts");
  g->add_option("--seed", g_seed, "Seed for both generators");
  add_common(g, common);

  CLI11_PARSE(app, argc, argv);

  try {
    nlohmann::json out;
    if (*s) {
      stats.mode = parse_weighting_mode(stats_mode);
      stats.strict = !stats_lenient;
      out = cli::run_stats(stats, common);
    } else if (*f) {
      fit.form = parse_law_form(fit_form);
      if (fit_loss != "squared" && fit_loss != "huber") throw InputError("--loss must be squared or huber");
      fit.config.loss = fit_loss == "huber" ? FitLoss::huber : FitLoss::squared;
      out = cli::run_fit(fit, common);
    } else if (*l) {
      land.mu_range = to_range(land_mu);
      land.sigma_range = to_range(land_sigma);
      out = cli::run_landscape(land, common);
    } else if (*c) {
      sel.method = parse_selection_method(sel_method);
      sel.mode = parse_weighting_mode(sel_mode);
      sel.strict = !sel_lenient;
      sel.mu_range = to_range(sel_mu);
      sel.sigma_range = to_range(sel_sigma);
      if (sel_fit) sel.fit = *sel_fit;
      out = cli::run_select(sel, common);
    } else if (*m) {
      sim.manifests.assign(sim_manifests.begin(), sim_manifests.end());
      out = cli::run_simulate(sim, common);
    } else if (*g) {
      if (g_truth) gen.truth = *g_truth;
      const auto g_mu_r = to_range(g_mu), g_sigma_r = to_range(g_sigma), g_d_r = to_range(g_d);
      if (g_mu_r) gen.observations.mu_range = *g_mu_r;
      if (g_sigma_r) gen.observations.sigma_range = *g_sigma_r;
      if (g_d_r) gen.observations.d_range = *g_d_r;
      gen.corpus.ppl_law = parse_ppl_law(g_law);
      gen.observations.seed = g_seed;
      gen.corpus.seed = g_seed;
      out = cli::run_gen(gen, common);
    }
    std::cout << out.dump(2) << '\n';
  } catch (const pplaw::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
