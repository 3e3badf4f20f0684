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
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pplaw/corpus.hpp"
#include "pplaw/error.hpp"

namespace pplaw {

enum class WeightingMode { per_document, token_weighted };

inline std::string_view to_string(WeightingMode mode) {
  return mode == WeightingMode::per_document ? "per_document" : "token_weighted";
}

inline WeightingMode parse_weighting_mode(std::string_view s) {
  if (s == "per_document") return WeightingMode::per_document;
  if (s == "token_weighted") return WeightingMode::token_weighted;
  throw InputError("unknown weighting mode '" + std::string(s) + "'");
}

// Mergeable summary of a perplexity distribution. Variance is the population
// variance: m2 divided by the total effective weight, which is the document
// count in per_document mode and the token count in token_weighted mode.
//
// Updates use the Welford / Chan pairwise forms so merging and removal keep
// full relative precision at realistic ppl magnitudes.
class PplStats {
 public:
  PplStats() = default;
  explicit PplStats(WeightingMode mode) : mode_(mode) {}

  static PplStats of(double ppl, std::uint64_t n_tokens, WeightingMode mode = WeightingMode::per_document) {
    PplStats s(mode);
    s.add(ppl, n_tokens);
    return s;
  }

  void add(double ppl, std::uint64_t n_tokens = 1) {
    const double w = mode_ == WeightingMode::per_document ? 1.0 : static_cast<double>(n_tokens);
    const double total = effective_weight() + w;
    const double delta = ppl - mean_;
    mean_ += delta * (w / total);
    m2_ += w * delta * (ppl - mean_);
    ++count_;
    weight_ += static_cast<double>(n_tokens);
  }

  void add(const Document& doc) { add(doc.ppl, doc.n_tokens); }

  std::uint64_t count() const noexcept { return count_; }
  // Total tokens represented, regardless of mode.
  double weight() const noexcept { return weight_; }
  WeightingMode mode() const noexcept { return mode_; }
  bool empty() const noexcept { return count_ == 0; }

  // Weight that divides m2: document count or token count.
  double effective_weight() const noexcept {
    return mode_ == WeightingMode::per_document ? static_cast<double>(count_) : weight_;
  }

  double mean() const {
    require_nonempty();
    return mean_;
  }
  double m2() const {
    require_nonempty();
    return m2_;
  }
  double variance() const {
    require_nonempty();
    return m2_ / effective_weight();
  }
  double stddev() const { return std::sqrt(variance()); }

  friend PplStats merge(const PplStats& a, const PplStats& b);
  friend PplStats remove(const PplStats& a, const PplStats& b);

 private:
  void require_nonempty() const {
    if (count_ == 0) throw DomainError("statistics of an empty population are undefined");
  }

  std::uint64_t count_ = 0;
  double weight_ = 0.0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  WeightingMode mode_ = WeightingMode::per_document;
};

inline PplStats merge(const PplStats& a, const PplStats& b) {
  if (a.mode_ != b.mode_) throw InputError("cannot merge statistics with different weighting modes");
  if (b.empty()) return a;
  if (a.empty()) return b;
  const double wa = a.effective_weight();
  const double wb = b.effective_weight();
  const double w = wa + wb;
  const double delta = b.mean_ - a.mean_;
  PplStats out(a.mode_);
  out.count_ = a.count_ + b.count_;
  out.weight_ = a.weight_ + b.weight_;
  out.mean_ = a.mean_ + delta * (wb / w);
  out.m2_ = a.m2_ + b.m2_ + delta * delta * (wa * wb / w);
  return out;
}

// Inverse of merge: the statistics of `a` with the sub-population `b` taken out.
// Small negative m2 from rounding is clamped to 0; anything larger means `b`
// was not part of `a`.
inline PplStats remove(const PplStats& a, const PplStats& b) {
  if (a.mode_ != b.mode_) throw InputError("cannot remove statistics with different weighting modes");
  if (b.empty()) return a;
  if (b.count_ > a.count_ || b.weight_ > a.weight_) {
    throw DomainError("removed population is larger than the source population");
  }
  if (b.count_ == a.count_) {
    if (b.weight_ != a.weight_) throw DomainError("removed population is not a sub-population");
    return PplStats(a.mode_);
  }
  const double wa = a.effective_weight();
  const double wb = b.effective_weight();
  const double wr = wa - wb;
  PplStats out(a.mode_);
  out.count_ = a.count_ - b.count_;
  out.weight_ = a.weight_ - b.weight_;
  out.mean_ = a.mean_ + (a.mean_ - b.mean_) * (wb / wr);
  const double delta = b.mean_ - out.mean_;
  double m2 = a.m2_ - b.m2_ - delta * delta * (wr * wb / wa);
  const double tol = std::max(1e-12, 1e-9 * a.m2_);
  if (m2 < -tol) throw DomainError("removal produced negative variance; operand is not a sub-population");
  out.m2_ = std::max(0.0, m2);
  return out;
}

inline PplStats stats_from_documents(std::span<const Document> docs,
                                     WeightingMode mode = WeightingMode::per_document) {
  if (docs.empty()) throw InputError("cannot compute statistics of an empty document sequence");
  PplStats s(mode);
  for (const auto& d : docs) s.add(d);
  return s;
}

inline PplStats stats_from_documents(const Corpus& corpus, WeightingMode mode = WeightingMode::per_document) {
  return stats_from_documents(std::span<const Document>(corpus.documents()), mode);
}

inline PplStats stats_of_chunk(const Chunk& chunk, const Corpus& corpus,
                               WeightingMode mode = WeightingMode::per_document) {
  PplStats s(mode);
  for (auto i : chunk.doc_indices) s.add(corpus[i]);
  return s;
}

inline nlohmann::json stats_to_json(const PplStats& s) {
  return {{"count", s.count()},
          {"weight", s.weight()},
          {"mean", s.mean()},
          {"variance", s.variance()},
          {"std", s.stddev()},
          {"mode", std::string(to_string(s.mode()))}};
}

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::uint64_t count = 0;
};

// Log-spaced histogram over [min ppl, max ppl]. A degenerate range yields one
// populated bin.
inline std::vector<HistogramBin> log_histogram(std::span<const Document> docs, std::size_t n_bins = 64) {
  if (docs.empty()) throw InputError("cannot build a histogram of zero documents");
  if (n_bins == 0) throw InputError("histogram needs at least one bin");
  auto [lo_it, hi_it] = std::minmax_element(docs.begin(), docs.end(),
                                            [](const Document& x, const Document& y) { return x.ppl < y.ppl; });
  const double lo = std::log(lo_it->ppl);
  const double hi = std::log(hi_it->ppl);
  const double width = (hi - lo) / static_cast<double>(n_bins);
  std::vector<HistogramBin> bins(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].lo = std::exp(lo + width * static_cast<double>(b));
    bins[b].hi = b + 1 == n_bins ? hi_it->ppl : std::exp(lo + width * static_cast<double>(b + 1));
  }
  bins.front().lo = lo_it->ppl;
  for (const auto& d : docs) {
    std::size_t b = 0;
    if (width > 0.0) {
      auto pos = static_cast<std::size_t>((std::log(d.ppl) - lo) / width);
      b = std::min(pos, n_bins - 1);
    }
    ++bins[b].count;
  }
  return bins;
}

}  // namespace pplaw
