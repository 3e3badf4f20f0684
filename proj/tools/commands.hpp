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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pplaw/pplaw.hpp"

// Subcommand implementations behind the `pplaw` binary. Each one reads its
// inputs, writes its artifacts plus run.json into `output_dir`, and returns the
// JSON it prints to stdout.
namespace pplaw::cli {

struct Common {
  std::filesystem::path output_dir;
  int threads = 1;
  bool quiet = false;
};

struct StatsOptions {
  std::filesystem::path corpus;
  WeightingMode mode = WeightingMode::per_document;
  bool strict = true;
  std::size_t bins = 64;
};

struct FitOptions {
  std::filesystem::path observations;
  LawForm form = LawForm::interaction;
  FitConfig config;
  // D at which band.csv is evaluated; geometric mean of the observed D when unset.
  std::optional<double> band_d_tokens;
};

struct LandscapeOptions {
  std::filesystem::path fit;
  std::optional<Range> mu_range;
  std::optional<Range> sigma_range;
  std::size_t resolution = 64;
  std::optional<double> d_tokens;
  DescentConfig descent;
};

struct SelectOptions {
  std::filesystem::path corpus;
  std::optional<std::filesystem::path> fit;
  std::uint64_t budget_tokens = 0;
  std::size_t n_chunks = 0;
  SelectionMethod method = SelectionMethod::DOS;
  std::uint64_t seed = 0;
  std::optional<double> target_mu;
  std::optional<double> target_sigma2;
  double w_mu = 1.0;
  double w_sigma = 1.0;
  std::optional<double> ppl_cutoff;
  std::optional<Range> mu_range;
  std::optional<Range> sigma_range;
  WeightingMode mode = WeightingMode::per_document;
  bool strict = true;
  std::optional<double> early_stop_factor;
};

struct SimulateOptions {
  std::filesystem::path truth;
  std::vector<std::filesystem::path> manifests;
  std::vector<double> d_schedule;
};

struct GenOptions {
  std::string what = "both";  // observations | corpus | both
  std::optional<std::filesystem::path> truth;
  // Ranges sit around the default truth's interior optimum (13, 8) so the
  // padded search box keeps it the global minimum.
  SyntheticSpec observations{.truth = {}, .mu_range = {8.0, 22.0}, .sigma_range = {4.0, 16.0}};
  SyntheticCorpusSpec corpus;
};

// A law loaded from either a fit.json artifact or a bare parameter file.
struct LoadedLaw {
  LawParams params;
  LawForm form = LawForm::interaction;
  std::optional<ObservedRange> observed;
  std::optional<double> d_reference;
};

LoadedLaw load_law(const std::filesystem::path& path);

nlohmann::json run_stats(const StatsOptions& opt, const Common& common);
nlohmann::json run_fit(const FitOptions& opt, const Common& common);
nlohmann::json run_landscape(const LandscapeOptions& opt, const Common& common);
nlohmann::json run_select(const SelectOptions& opt, const Common& common);
nlohmann::json run_simulate(const SimulateOptions& opt, const Common& common);
nlohmann::json run_gen(const GenOptions& opt, const Common& common);

}  // namespace pplaw::cli
