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

#include "commands.hpp"

#include <cmath>
#include <iostream>
#include <string>

namespace pplaw::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using io::format_number;

void warn(const Common& common, const std::string& msg) {
  if (!common.quiet) std::cerr << "warning: " << msg << '\n';
}

fs::path prepare_output(const Common& common) {
  if (common.output_dir.empty()) throw InputError("--output-dir is required");
  fs::create_directories(common.output_dir);
  return common.output_dir;
}

void write_run(const fs::path& dir, const std::string& subcommand, const Common& common, json config) {
  io::write_json(dir / "run.json", {{"subcommand", subcommand},
                                    {"output_dir", common.output_dir.string()},
                                    {"threads", common.threads},
                                    {"config", std::move(config)}});
}

json range_json(const std::optional<Range>& r) {
  if (!r) return nullptr;
  return json::array({r->lo, r->hi});
}

json optional_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

SearchBox resolve_box(const std::optional<Range>& mu, const std::optional<Range>& sigma,
                      const std::optional<ObservedRange>& observed) {
  SearchBox box;
  if (observed) box = default_search_box(*observed);
  if (!mu && !observed) throw InputError("--mu-range is required when the law carries no observed range");
  if (!sigma && !observed) throw InputError("--sigma-range is required when the law carries no observed range");
  if (mu) box.mu_lo = mu->lo, box.mu_hi = mu->hi;
  if (sigma) box.sigma_lo = sigma->lo, box.sigma_hi = sigma->hi;
  check_box(box);
  return box;
}

}  // namespace

LoadedLaw load_law(const fs::path& path) {
  const json j = io::read_json(path);
  LoadedLaw out;
  try {
    FormedLaw law;
    if (j.contains("result")) {
      law = law_params_from_json(j.at("result").at("params"));
      if (j.contains("observed_range")) out.observed = observed_range_from_json(j.at("observed_range"));
      if (j.contains("d_reference")) out.d_reference = j.at("d_reference").get<double>();
    } else if (j.contains("params")) {
      law = law_params_from_json(j.at("params"));
    } else {
      law = law_params_from_json(j);
    }
    out.params = law.params;
    out.form = law.form;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return out;
}

json run_stats(const StatsOptions& opt, const Common& common) {
  const auto dir = prepare_output(common);
  const auto ingested = ingest_corpus(opt.corpus, opt.strict);
  for (const auto& p : ingested.problems) warn(common, "skipped " + p);
  const auto& docs = ingested.corpus.documents();
  const auto stats = stats_from_documents(docs, opt.mode);

  json out = stats_to_json(stats);
  out["skipped"] = ingested.skipped;
  out["total_tokens"] = ingested.corpus.total_tokens();
  io::write_json(dir / "stats.json", out);

  auto hist = io::open_output(dir / "histogram.csv");
  hist << "bin,ppl_lo,ppl_hi,count\n";
  const auto bins = log_histogram(docs, opt.bins);
  for (std::size_t b = 0; b < bins.size(); ++b) {
    hist << b << ',' << format_number(bins[b].lo) << ',' << format_number(bins[b].hi) << ',' << bins[b].count << '\n';
  }
  write_run(dir, "stats", common,
            {{"corpus", opt.corpus.string()},
             {"mode", std::string(to_string(opt.mode))},
             {"strict", opt.strict},
             {"bins", opt.bins}});
  return out;
}

json run_fit(const FitOptions& opt, const Common& common) {
  const auto dir = prepare_output(common);
  const auto obs = read_observations(opt.observations);
  FitConfig cfg = opt.config;
  cfg.threads = common.threads;
  const auto report = fit_and_validate(obs, opt.form, cfg);
  const auto& r = report.result;

  double log_d = 0.0;
  for (const auto& o : obs) log_d += std::log(o.d_tokens);
  const double d_ref = std::exp(log_d / static_cast<double>(obs.size()));
  const double band_d = opt.band_d_tokens.value_or(d_ref);

  const json out{{"result", fit_result_to_json(r)},
                 {"observed_range", observed_range_to_json(observed_range(obs))},
                 {"d_reference", d_ref},
                 {"band_d_tokens", band_d},
                 {"observations", opt.observations.string()},
                 {"config", fit_config_to_json(cfg)}};
  io::write_json(dir / "fit.json", out);

  auto res = io::open_output(dir / "residuals.csv");
  res << "split,mu,sigma,d_tokens,test_loss,predicted,residual,tag\n";
  auto emit = [&](const char* split, const std::vector<Observation>& part) {
    for (const auto& o : part) {
      const double pred = predict_loss(r.params, o.input());
      res << split << ',' << format_number(o.mu) << ',' << format_number(o.sigma) << ','
          << format_number(o.d_tokens) << ',' << format_number(o.test_loss) << ',' << format_number(pred) << ','
          << format_number(o.test_loss - pred) << ',' << o.tag.value_or("") << '\n';
    }
  };
  emit("train", report.split.train);
  emit("val", report.split.val);

  auto band = io::open_output(dir / "band.csv");
  band << "sigma,d_tokens,mu_lo,mu_hi,loss_lo,loss_mid,loss_hi\n";
  for (const auto& row : band_curve(r.params, cfg.band, band_d)) {
    band << format_number(row.sigma) << ',' << format_number(band_d) << ','
         << format_number(cfg.band.mu_center - cfg.band.mu_half_width) << ','
         << format_number(cfg.band.mu_center + cfg.band.mu_half_width) << ',' << format_number(row.envelope.lo)
         << ',' << format_number(row.envelope.mid) << ',' << format_number(row.envelope.hi) << '\n';
  }
  write_run(dir, "fit", common,
            {{"observations", opt.observations.string()},
             {"law_form", std::string(to_string(opt.form))},
             {"band_d_tokens", band_d},
             {"fit", fit_config_to_json(cfg)}});
  return out;
}

json run_landscape(const LandscapeOptions& opt, const Common& common) {
  const auto dir = prepare_output(common);
  const auto law = load_law(opt.fit);
  const SearchBox box = resolve_box(opt.mu_range, opt.sigma_range, law.observed);
  if (!opt.d_tokens && !law.d_reference) throw InputError("--d-tokens is required for this law file");
  const double d = opt.d_tokens ? *opt.d_tokens : *law.d_reference;

  const auto grid = evaluate_grid(law.params, box, opt.resolution, d);
  {
    auto csv = io::open_output(dir / "grid.csv");
    csv << "mu,sigma,loss\n";
    for (std::size_t i = 0; i < grid.mu_axis.size(); ++i)
      for (std::size_t j = 0; j < grid.sigma_axis.size(); ++j)
        csv << format_number(grid.mu_axis[i]) << ',' << format_number(grid.sigma_axis[j]) << ','
            << format_number(grid.at(i, j)) << '\n';
  }
  io::write_json(dir / "grid.json", grid_to_json(grid));

  const auto optimum = find_optimum(law.params, box, d);
  if (optimum.clamped) warn(common, "optimum lies on the search-box boundary");
  const auto starts = corner_starts(box);
  const auto paths = descent_paths(law.params, starts, box, d, opt.descent);
  {
    auto csv = io::open_output(dir / "paths.csv");
    csv << "path_id,step,mu,sigma,loss\n";
    for (std::size_t p = 0; p < paths.size(); ++p)
      for (std::size_t s = 0; s < paths[p].size(); ++s)
        csv << p << ',' << s << ',' << format_number(paths[p][s].mu) << ',' << format_number(paths[p][s].sigma) << ','
            << format_number(paths[p][s].loss) << '\n';
  }
  json out = optimum_to_json(optimum);
  out["box"] = box_to_json(box);
  out["d_tokens"] = d;
  io::write_json(dir / "optimum.json", out);
  write_run(dir, "landscape", common,
            {{"fit", opt.fit.string()},
             {"box", box_to_json(box)},
             {"resolution", opt.resolution},
             {"d_tokens", d},
             {"path_grad_tolerance", opt.descent.grad_tolerance},
             {"path_max_iterations", opt.descent.max_iterations}});
  return out;
}

json run_select(const SelectOptions& opt, const Common& common) {
  const auto dir = prepare_output(common);
  if (opt.budget_tokens == 0) throw InputError("--budget-tokens must be positive");
  const auto ingested = ingest_corpus(opt.corpus, opt.strict);
  for (const auto& p : ingested.problems) warn(common, "skipped " + p);
  const auto& corpus = ingested.corpus;

  DosTarget target;
  json optimum_json = nullptr;
  if (opt.target_mu || opt.target_sigma2) {
    if (!opt.target_mu || !opt.target_sigma2) {
      throw InputError("--target-mu and --target-sigma2 must be given together");
    }
    target = make_target(*opt.target_mu, *opt.target_sigma2, opt.w_mu, opt.w_sigma);
  } else {
    if (!opt.fit) throw InputError("either --fit or --target-mu/--target-sigma2 is required");
    const auto law = load_law(*opt.fit);
    const SearchBox box = resolve_box(opt.mu_range, opt.sigma_range, law.observed);
    const auto optimum = find_optimum(law.params, box, static_cast<double>(opt.budget_tokens));
    if (optimum.clamped) warn(common, "optimum is clamped to the search box; proceeding with the boundary point");
    target = target_from_optimum(optimum, opt.w_mu, opt.w_sigma);
    optimum_json = optimum_to_json(optimum);
    optimum_json["box"] = box_to_json(box);
  }

  const std::size_t n_chunks = opt.n_chunks ? opt.n_chunks : std::min<std::size_t>(corpus.size(), 256);
  const auto chunks = chunk_corpus(corpus, n_chunks, opt.seed);
  SelectionOptions sel{opt.mode, opt.early_stop_factor};
  SelectionManifest m;
  switch (opt.method) {
    case SelectionMethod::DOS: m = greedy_select(chunks, corpus, target, opt.budget_tokens, sel); break;
    case SelectionMethod::BRUTE:
      m = brute_force_select(chunks, corpus, target, opt.budget_tokens, opt.mode);
      break;
    default:
      m = baseline_select(chunks, corpus, opt.method, target, opt.budget_tokens, opt.seed, opt.ppl_cutoff, opt.mode);
  }

  json out = manifest_to_json(m);
  io::write_json(dir / "manifest.json", out);
  write_chunk_manifest(chunks, dir / "chunks.jsonl");
  {
    auto ids = io::open_output(dir / "selected_ids.txt");
    for (const auto& id : selected_document_ids(m, chunks)) ids << id << '\n';
  }
  io::write_json(dir / "target.json", {{"target", target_to_json(target)}, {"optimum", optimum_json}});
  write_run(dir, "select", common,
            {{"corpus", opt.corpus.string()},
             {"fit", opt.fit ? json(opt.fit->string()) : json(nullptr)},
             {"budget_tokens", opt.budget_tokens},
             {"n_chunks", n_chunks},
             {"method", std::string(to_string(opt.method))},
             {"seed", opt.seed},
             {"target", target_to_json(target)},
             {"ppl_cutoff", optional_json(opt.ppl_cutoff)},
             {"mu_range", range_json(opt.mu_range)},
             {"sigma_range", range_json(opt.sigma_range)},
             {"mode", std::string(to_string(opt.mode))},
             {"strict", opt.strict},
             {"early_stop_factor", optional_json(opt.early_stop_factor)}});
  return out;
}

json run_simulate(const SimulateOptions& opt, const Common& common) {
  const auto dir = prepare_output(common);
  if (opt.manifests.empty()) throw InputError("at least one --manifest is required");
  if (opt.d_schedule.empty()) throw InputError("--d-schedule must list at least one token count");
  const auto truth = load_law(opt.truth);
  std::vector<SelectionManifest> manifests;
  for (const auto& p : opt.manifests) {
    try {
      manifests.push_back(manifest_from_json(io::read_json(p)));
    } catch (const InputError& e) {
      throw InputError(p.string() + ": " + e.what());
    }
  }
  const auto curves = simulate_training_curves(truth.params, manifests, opt.d_schedule);

  auto csv = io::open_output(dir / "curves.csv");
  csv << "manifest,method,mu,sigma,d_tokens,loss\n";
  json out = json::array();
  for (std::size_t c = 0; c < curves.size(); ++c) {
    for (std::size_t k = 0; k < curves[c].d_tokens.size(); ++k) {
      csv << c << ',' << to_string(curves[c].method) << ',' << format_number(curves[c].mu) << ','
          << format_number(curves[c].sigma) << ',' << format_number(curves[c].d_tokens[k]) << ','
          << format_number(curves[c].loss[k]) << '\n';
    }
    out.push_back({{"manifest", opt.manifests[c].string()},
                   {"method", std::string(to_string(curves[c].method))},
                   {"final_loss", curves[c].loss.back()}});
  }
  std::vector<std::string> paths;
  for (const auto& p : opt.manifests) paths.push_back(p.string());
  write_run(dir, "simulate", common, {{"truth", opt.truth.string()}, {"manifests", paths}, {"d_schedule", opt.d_schedule}});
  return out;
}

json run_gen(const GenOptions& opt, const Common& common) {
  const auto dir = prepare_output(common);
  if (opt.what != "observations" && opt.what != "corpus" && opt.what != "both") {
    throw InputError("--what must be observations, corpus or both");
  }
  SyntheticSpec spec = opt.observations;
  spec.truth = opt.truth ? load_law(*opt.truth).params : default_truth_law();
  json out{{"truth", law_params_to_json(spec.truth, LawForm::interaction)}};
  io::write_json(dir / "truth.json", out["truth"]);

  if (opt.what != "corpus") {
    const auto obs = generate_observations(spec);
    write_observations_csv(obs, dir / "observations.csv");
    out["n_obs"] = obs.size();
  }
  if (opt.what != "observations") {
    const auto corpus = generate_corpus(opt.corpus);
    write_corpus(corpus, dir / "corpus.jsonl");
    out["n_docs"] = corpus.size();
    out["total_tokens"] = corpus.total_tokens();
  }
  const auto& c = opt.corpus;
  write_run(dir, "gen", common,
            {{"what", opt.what},
             {"truth", opt.truth ? json(opt.truth->string()) : json("default")},
             {"observations",
              {{"mu_range", {spec.mu_range.lo, spec.mu_range.hi}},
               {"sigma_range", {spec.sigma_range.lo, spec.sigma_range.hi}},
               {"d_range", {spec.d_range.lo, spec.d_range.hi}},
               {"n_obs", spec.n_obs},
               {"noise_tau", spec.noise_tau},
               {"seed", spec.seed}}},
             {"corpus",
              {{"n_docs", c.n_docs},
               {"ppl_law", std::string(to_string(c.ppl_law))},
               {"log_mean", c.log_mean},
               {"log_std", c.log_std},
               {"zipf_s", c.zipf_s},
               {"n_components", c.n_components},
               {"component_growth", c.component_growth},
               {"token_mean", c.token_mean},
               {"token_log_std", c.token_log_std},
               {"seed", c.seed}}}});
  return out;
}

}  // namespace pplaw::cli
