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
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pplaw/corpus.hpp"
#include "pplaw/error.hpp"
#include "pplaw/landscape.hpp"
#include "pplaw/ppl_stats.hpp"

namespace pplaw {

// Target statistics (mean and variance of ppl) with their J weights.
struct DosTarget {
  double mu_hat = 1.0;
  double sigma2_hat = 1.0;
  double w_mu = 1.0;
  double w_sigma = 1.0;
};

inline DosTarget make_target(double mu_hat, double sigma2_hat, double w_mu = 1.0, double w_sigma = 1.0) {
  auto pos = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!pos(mu_hat) || !pos(sigma2_hat)) throw InputError("target mean and variance must be positive");
  if (!pos(w_mu) || !pos(w_sigma)) throw InputError("objective weights must be positive");
  return {mu_hat, sigma2_hat, w_mu, w_sigma};
}

// The law's sigma is a standard deviation; the objective compares variances.
inline DosTarget target_from_optimum(const OptimumReport& opt, double w_mu = 1.0, double w_sigma = 1.0) {
  return make_target(opt.mu_hat, opt.sigma_hat * opt.sigma_hat, w_mu, w_sigma);
}

// J = w_mu (mu(S) - mu_hat)^2 + w_sigma (sigma^2(S) - sigma2_hat)^2
inline double objective_J(const PplStats& stats, const DosTarget& target) {
  if (stats.empty()) throw DomainError("objective of an empty selection is undefined");
  const double dm = stats.mean() - target.mu_hat;
  const double dv = stats.variance() - target.sigma2_hat;
  return target.w_mu * dm * dm + target.w_sigma * dv * dv;
}

enum class SelectionMethod { DOS, RS, LPS, HPS, BRUTE };

inline std::string_view to_string(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::DOS: return "DOS";
    case SelectionMethod::RS: return "RS";
    case SelectionMethod::LPS: return "LPS";
    case SelectionMethod::HPS: return "HPS";
    case SelectionMethod::BRUTE: return "BRUTE";
  }
  return "?";
}

inline SelectionMethod parse_selection_method(std::string_view s) {
  for (auto m : {SelectionMethod::DOS, SelectionMethod::RS, SelectionMethod::LPS, SelectionMethod::HPS,
                 SelectionMethod::BRUTE}) {
    if (s == to_string(m)) return m;
  }
  throw InputError("unknown selection method '" + std::string(s) + "'");
}

struct TrajectoryRow {
  std::size_t step = 0;
  std::string chunk_id;
  double mu_S = 0.0;
  double sigma2_S = 0.0;
  std::uint64_t tokens_so_far = 0;
  double J = 0.0;
};

struct SelectionManifest {
  std::vector<std::string> selected;
  std::vector<TrajectoryRow> trajectory;
  // J of the selected chunks' statistics merged in ascending chunk_id order, so
  // equal subsets give bit-identical values whatever order they were picked in.
  double final_J = 0.0;
  std::uint64_t t_budget = 0;
  DosTarget target;
  SelectionMethod method = SelectionMethod::DOS;

  std::uint64_t tokens() const { return trajectory.empty() ? 0 : trajectory.back().tokens_so_far; }
};

struct SelectionOptions {
  WeightingMode mode = WeightingMode::per_document;
  // Greedy stops once the best candidate's J exceeds factor * current J. Off when unset.
  std::optional<double> early_stop_factor;
};

namespace detail {

inline std::vector<PplStats> chunk_stats(std::span<const Chunk> chunks, const Corpus& corpus, WeightingMode mode) {
  std::vector<PplStats> out;
  out.reserve(chunks.size());
  for (const auto& c : chunks) out.push_back(stats_of_chunk(c, corpus, mode));
  return out;
}

// Appends chunk `j` to the manifest, recording the running statistics.
inline void record_step(SelectionManifest& m, const Chunk& chunk, PplStats& running, const PplStats& chunk_s) {
  running = merge(running, chunk_s);
  TrajectoryRow row;
  row.step = m.trajectory.size();
  row.chunk_id = chunk.chunk_id;
  row.mu_S = running.mean();
  row.sigma2_S = running.variance();
  row.tokens_so_far = (m.trajectory.empty() ? 0 : m.trajectory.back().tokens_so_far) + chunk.n_tokens;
  row.J = objective_J(running, m.target);
  m.selected.push_back(chunk.chunk_id);
  m.trajectory.push_back(std::move(row));
  m.final_J = m.trajectory.back().J;
}

inline PplStats canonical_stats(std::vector<std::size_t> members, std::span<const Chunk> chunks,
                                std::span<const PplStats> stats, WeightingMode mode) {
  std::sort(members.begin(), members.end(),
            [&](std::size_t a, std::size_t b) { return chunks[a].chunk_id < chunks[b].chunk_id; });
  PplStats s(mode);
  for (auto i : members) s = merge(s, stats[i]);
  return s;
}

inline void finalize(SelectionManifest& m, const std::vector<std::size_t>& members, std::span<const Chunk> chunks,
                     std::span<const PplStats> stats, WeightingMode mode) {
  m.final_J = objective_J(canonical_stats(members, chunks, stats, mode), m.target);
}

}  // namespace detail

// Greedy Distance-to-Optimum selection. Seeds with the budget-feasible chunk
// whose chunk_ppl is closest to mu_hat, then repeatedly adds the feasible chunk
// minimising J of the pooled document statistics until nothing else fits.
// Ties go to the smaller chunk_id.
inline SelectionManifest greedy_select(std::span<const Chunk> chunks, const Corpus& corpus, const DosTarget& target,
                                       std::uint64_t t_budget, const SelectionOptions& opt = {}) {
  if (chunks.empty()) throw InputError("no chunks to select from");
  const auto stats = detail::chunk_stats(chunks, corpus, opt.mode);

  SelectionManifest m;
  m.t_budget = t_budget;
  m.target = target;
  m.method = SelectionMethod::DOS;

  std::optional<std::size_t> seed;
  for (std::size_t j = 0; j < chunks.size(); ++j) {
    if (chunks[j].n_tokens > t_budget) continue;
    if (!seed) {
      seed = j;
      continue;
    }
    const double dj = std::abs(chunks[j].chunk_ppl - target.mu_hat);
    const double ds = std::abs(chunks[*seed].chunk_ppl - target.mu_hat);
    if (dj < ds || (dj == ds && chunks[j].chunk_id < chunks[*seed].chunk_id)) seed = j;
  }
  if (!seed) throw InfeasibleError("no chunk fits budget");

  std::vector<char> used(chunks.size(), 0);
  std::vector<std::size_t> members{*seed};
  PplStats running(opt.mode);
  detail::record_step(m, chunks[*seed], running, stats[*seed]);
  used[*seed] = 1;
  std::uint64_t tokens = chunks[*seed].n_tokens;

  while (tokens < t_budget) {
    std::optional<std::size_t> best;
    double best_j = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < chunks.size(); ++j) {
      if (used[j] || chunks[j].n_tokens > t_budget - tokens) continue;
      const double jv = objective_J(merge(running, stats[j]), target);
      if (!best || jv < best_j || (jv == best_j && chunks[j].chunk_id < chunks[*best].chunk_id)) {
        best = j;
        best_j = jv;
      }
    }
    if (!best) break;
    if (opt.early_stop_factor && best_j > *opt.early_stop_factor * m.final_J) break;
    detail::record_step(m, chunks[*best], running, stats[*best]);
    used[*best] = 1;
    members.push_back(*best);
    tokens += chunks[*best].n_tokens;
  }
  detail::finalize(m, members, chunks, stats, opt.mode);
  return m;
}

inline constexpr std::size_t kBruteForceLimit = 20;

// Exact minimiser of J over all budget-feasible non-empty subsets. Ties go to
// the lexicographically smallest sorted chunk_id list.
inline SelectionManifest brute_force_select(std::span<const Chunk> chunks, const Corpus& corpus,
                                            const DosTarget& target, std::uint64_t t_budget,
                                            WeightingMode mode = WeightingMode::per_document) {
  const std::size_t n = chunks.size();
  if (n == 0) throw InputError("no chunks to select from");
  if (n > kBruteForceLimit) {
    throw InputError("brute force is limited to " + std::to_string(kBruteForceLimit) + " chunks, got " +
                     std::to_string(n));
  }
  const auto stats = detail::chunk_stats(chunks, corpus, mode);
  std::vector<std::size_t> by_id(n);
  std::iota(by_id.begin(), by_id.end(), std::size_t{0});
  std::sort(by_id.begin(), by_id.end(), [&](auto a, auto b) { return chunks[a].chunk_id < chunks[b].chunk_id; });

  const std::uint32_t full = (std::uint32_t{1} << n) - 1;
  std::vector<PplStats> subset(std::size_t{full} + 1, PplStats(mode));
  std::vector<std::uint64_t> tokens(std::size_t{full} + 1, 0);

  // Bit b of a mask stands for chunk by_id[b]; folding the highest bit last
  // reproduces the ascending-id merge order of canonical_stats.
  auto ids_of = [&](std::uint32_t mask) {
    std::vector<std::string> ids;
    for (std::size_t b = 0; b < n; ++b)
      if (mask >> b & 1u) ids.push_back(chunks[by_id[b]].chunk_id);
    return ids;
  };

  std::optional<std::uint32_t> best;
  double best_j = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    const auto high = static_cast<std::size_t>(std::bit_width(mask)) - 1;
    const std::uint32_t rest = mask & ~(std::uint32_t{1} << high);
    subset[mask] = merge(subset[rest], stats[by_id[high]]);
    tokens[mask] = tokens[rest] + chunks[by_id[high]].n_tokens;
    if (tokens[mask] > t_budget) continue;
    const double jv = objective_J(subset[mask], target);
    if (!best || jv < best_j || (jv == best_j && ids_of(mask) < ids_of(*best))) {
      best = mask;
      best_j = jv;
    }
  }
  if (!best) throw InfeasibleError("no feasible subset within budget");

  SelectionManifest m;
  m.t_budget = t_budget;
  m.target = target;
  m.method = SelectionMethod::BRUTE;
  PplStats running(mode);
  std::vector<std::size_t> members;
  for (std::size_t b = 0; b < n; ++b) {
    if (!(*best >> b & 1u)) continue;
    members.push_back(by_id[b]);
    detail::record_step(m, chunks[by_id[b]], running, stats[by_id[b]]);
  }
  detail::finalize(m, members, chunks, stats, mode);
  return m;
}

// RS: seeded random order. LPS: chunk_ppl < cutoff, ascending. HPS: chunk_ppl >
// cutoff, descending. Chunks are taken in that order, skipping any that would
// overflow the budget. The cutoff defaults to the target mean.
inline SelectionManifest baseline_select(std::span<const Chunk> chunks, const Corpus& corpus, SelectionMethod method,
                                         const DosTarget& target, std::uint64_t t_budget, std::uint64_t seed,
                                         std::optional<double> ppl_cutoff = std::nullopt,
                                         WeightingMode mode = WeightingMode::per_document) {
  if (chunks.empty()) throw InputError("no chunks to select from");
  const double cutoff = ppl_cutoff.value_or(target.mu_hat);
  std::vector<std::size_t> order;
  switch (method) {
    case SelectionMethod::RS: {
      order.resize(chunks.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::mt19937_64 rng(seed);
      std::shuffle(order.begin(), order.end(), rng);
      break;
    }
    case SelectionMethod::LPS:
    case SelectionMethod::HPS: {
      const bool low = method == SelectionMethod::LPS;
      for (std::size_t j = 0; j < chunks.size(); ++j) {
        if (low ? chunks[j].chunk_ppl < cutoff : chunks[j].chunk_ppl > cutoff) order.push_back(j);
      }
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (chunks[a].chunk_ppl != chunks[b].chunk_ppl) {
          return low ? chunks[a].chunk_ppl < chunks[b].chunk_ppl : chunks[a].chunk_ppl > chunks[b].chunk_ppl;
        }
        return chunks[a].chunk_id < chunks[b].chunk_id;
      });
      break;
    }
    default:
      throw InputError("baseline_select supports RS, LPS and HPS only");
  }

  SelectionManifest m;
  m.t_budget = t_budget;
  m.target = target;
  m.method = method;
  const auto stats = detail::chunk_stats(chunks, corpus, mode);
  PplStats running(mode);
  std::vector<std::size_t> members;
  std::uint64_t tokens = 0;
  for (auto j : order) {
    if (chunks[j].n_tokens > t_budget - tokens) continue;
    detail::record_step(m, chunks[j], running, stats[j]);
    members.push_back(j);
    tokens += chunks[j].n_tokens;
  }
  if (m.selected.empty()) {
    throw InfeasibleError(order.empty() ? "no eligible chunk" : "no eligible chunk fits budget");
  }
  detail::finalize(m, members, chunks, stats, mode);
  return m;
}

// Document ids of the selected chunks, in selection order.
inline std::vector<std::string> selected_document_ids(const SelectionManifest& m, std::span<const Chunk> chunks) {
  std::vector<std::string> ids;
  for (const auto& cid : m.selected) {
    auto it = std::find_if(chunks.begin(), chunks.end(), [&](const Chunk& c) { return c.chunk_id == cid; });
    if (it == chunks.end()) throw InputError("manifest references unknown chunk '" + cid + "'");
    ids.insert(ids.end(), it->doc_ids.begin(), it->doc_ids.end());
  }
  return ids;
}

inline nlohmann::json target_to_json(const DosTarget& t) {
  return {{"mu_hat", t.mu_hat}, {"sigma2_hat", t.sigma2_hat}, {"w_mu", t.w_mu}, {"w_sigma", t.w_sigma}};
}

inline nlohmann::json manifest_to_json(const SelectionManifest& m) {
  nlohmann::json traj = nlohmann::json::array();
  for (const auto& r : m.trajectory) {
    traj.push_back({{"step", r.step},
                    {"chunk_id", r.chunk_id},
                    {"mu_S", r.mu_S},
                    {"sigma2_S", r.sigma2_S},
                    {"tokens_so_far", r.tokens_so_far},
                    {"J", r.J}});
  }
  return {{"method", std::string(to_string(m.method))},
          {"selected", m.selected},
          {"trajectory", traj},
          {"final_J", m.final_J},
          {"t_budget", m.t_budget},
          {"target", target_to_json(m.target)}};
}

inline SelectionManifest manifest_from_json(const nlohmann::json& j) {
  try {
    SelectionManifest m;
    m.method = parse_selection_method(j.at("method").get<std::string>());
    m.selected = j.at("selected").get<std::vector<std::string>>();
    for (const auto& r : j.at("trajectory")) {
      m.trajectory.push_back({r.at("step").get<std::size_t>(), r.at("chunk_id").get<std::string>(),
                              r.at("mu_S").get<double>(), r.at("sigma2_S").get<double>(),
                              r.at("tokens_so_far").get<std::uint64_t>(), r.at("J").get<double>()});
    }
    m.final_J = j.at("final_J").get<double>();
    m.t_budget = j.at("t_budget").get<std::uint64_t>();
    const auto& t = j.at("target");
    m.target = {t.at("mu_hat").get<double>(), t.at("sigma2_hat").get<double>(), t.at("w_mu").get<double>(),
                t.at("w_sigma").get<double>()};
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid selection manifest: ") + e.what());
  }
}

}  // namespace pplaw
