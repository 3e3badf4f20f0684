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
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pplaw/error.hpp"

namespace pplaw {

// One perplexity-scored text unit. `text` is carried through untouched.
struct Document {
  std::string id;
  std::uint64_t n_tokens = 0;
  double ppl = 0.0;
  std::optional<std::string> source;
  std::optional<std::string> text;

  bool operator==(const Document&) const = default;
};

// Returns an empty string when the document is valid, otherwise the reason.
inline std::string document_problem(const Document& doc) {
  if (doc.id.empty()) return "empty id";
  if (doc.n_tokens < 1) return "n_tokens must be >= 1";
  if (!std::isfinite(doc.ppl) || doc.ppl <= 0.0) return "ppl must be positive and finite";
  return {};
}

class Corpus {
 public:
  Corpus() = default;

  // Validates every document and id uniqueness; throws InputError.
  explicit Corpus(std::vector<Document> documents) : documents_(std::move(documents)) {
    index_.reserve(documents_.size());
    for (std::size_t i = 0; i < documents_.size(); ++i) {
      const auto& doc = documents_[i];
      if (auto why = document_problem(doc); !why.empty()) {
        throw InputError("document '" + doc.id + "': " + why);
      }
      if (!index_.emplace(doc.id, i).second) {
        throw InputError("duplicate document id '" + doc.id + "'");
      }
      total_tokens_ += doc.n_tokens;
    }
  }

  const std::vector<Document>& documents() const noexcept { return documents_; }
  std::size_t size() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }
  std::uint64_t total_tokens() const noexcept { return total_tokens_; }
  const Document& operator[](std::size_t i) const { return documents_[i]; }

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const Corpus& other) const { return documents_ == other.documents_; }

 private:
  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t total_tokens_ = 0;
};

// A cell of the random partition used as the atomic unit of selection.
// `doc_indices` mirrors `doc_ids` as positions in the owning Corpus.
struct Chunk {
  std::string chunk_id;
  std::vector<std::string> doc_ids;
  std::vector<std::size_t> doc_indices;
  std::uint64_t n_tokens = 0;
  double chunk_ppl = 0.0;

  bool operator==(const Chunk&) const = default;
};

struct IngestResult {
  Corpus corpus;
  std::size_t skipped = 0;
  std::vector<std::string> problems;  // "path:line: reason", one per skipped record
};

namespace detail {

inline Document parse_document(const nlohmann::json& rec) {
  if (!rec.is_object()) throw InputError("record is not a JSON object");
  Document doc;
  auto id = rec.find("id");
  if (id == rec.end() || !id->is_string()) throw InputError("missing string field 'id'");
  doc.id = id->get<std::string>();

  auto nt = rec.find("n_tokens");
  if (nt == rec.end() || !nt->is_number_integer()) {
    throw InputError("missing integer field 'n_tokens'");
  }
  if (nt->is_number_unsigned()) {
    doc.n_tokens = nt->get<std::uint64_t>();
  } else {
    auto v = nt->get<std::int64_t>();
    if (v < 1) throw InputError("n_tokens must be >= 1");
    doc.n_tokens = static_cast<std::uint64_t>(v);
  }

  auto ppl = rec.find("ppl");
  if (ppl == rec.end() || !ppl->is_number()) throw InputError("missing numeric field 'ppl'");
  doc.ppl = ppl->get<double>();

  if (auto s = rec.find("source"); s != rec.end() && !s->is_null()) {
    if (!s->is_string()) throw InputError("field 'source' must be a string");
    doc.source = s->get<std::string>();
  }
  if (auto t = rec.find("text"); t != rec.end() && !t->is_null()) {
    if (!t->is_string()) throw InputError("field 'text' must be a string");
    doc.text = t->get<std::string>();
  }
  if (auto why = document_problem(doc); !why.empty()) throw InputError(why);
  return doc;
}

}  // namespace detail

// Reads the Corpus JSONL format. Strict mode throws on the first bad record
// (or duplicate id); lenient mode skips and counts them. Blank lines are ignored.
inline IngestResult ingest_corpus(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open file");

  IngestResult result;
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      auto rec = nlohmann::json::parse(line);
      Document doc = detail::parse_document(rec);
      if (seen.count(doc.id)) throw InputError("duplicate id '" + doc.id + "'");
      seen.emplace(doc.id, docs.size());
      docs.push_back(std::move(doc));
    } catch (const nlohmann::json::exception& e) {
      if (strict) throw InputError(where + ": malformed record: " + e.what());
      ++result.skipped;
      result.problems.push_back(where + ": malformed record");
    } catch (const InputError& e) {
      if (strict) throw InputError(where + ": " + e.what());
      ++result.skipped;
      result.problems.push_back(where + ": " + e.what());
    }
  }
  if (docs.empty()) throw InputError(path.string() + ": zero valid records");
  result.corpus = Corpus(std::move(docs));
  return result;
}

inline nlohmann::json document_to_json(const Document& doc) {
  nlohmann::json j{{"id", doc.id}, {"n_tokens", doc.n_tokens}, {"ppl", doc.ppl}};
  if (doc.source) j["source"] = *doc.source;
  if (doc.text) j["text"] = *doc.text;
  return j;
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError(path.string() + ": cannot write file");
  for (const auto& doc : corpus.documents()) out << document_to_json(doc).dump() << '\n';
}

// Builds a chunk from corpus positions; chunk_ppl is the token-weighted mean ppl.
inline Chunk make_chunk(const Corpus& corpus, std::string chunk_id, std::vector<std::size_t> members) {
  if (members.empty()) throw InputError("chunk '" + chunk_id + "' has no documents");
  Chunk chunk;
  chunk.chunk_id = std::move(chunk_id);
  double weighted = 0.0;
  for (auto i : members) {
    const auto& doc = corpus[i];
    chunk.doc_ids.push_back(doc.id);
    chunk.n_tokens += doc.n_tokens;
    weighted += static_cast<double>(doc.n_tokens) * doc.ppl;
  }
  chunk.chunk_ppl = weighted / static_cast<double>(chunk.n_tokens);
  chunk.doc_indices = std::move(members);
  return chunk;
}

inline std::string chunk_name(std::size_t index, std::size_t n_chunks) {
  auto digits = std::max<std::size_t>(6, std::to_string(n_chunks).size());
  auto s = std::to_string(index);
  return "chunk-" + std::string(digits - s.size(), '0') + s;
}

// Seeded random partition into n_chunks groups whose document counts differ by
// at most one. Chunk ids are zero-padded so lexicographic order is index order.
inline std::vector<Chunk> chunk_corpus(const Corpus& corpus, std::size_t n_chunks, std::uint64_t seed) {
  if (n_chunks == 0) throw InputError("n_chunks must be positive");
  if (n_chunks > corpus.size()) {
    throw InputError("n_chunks (" + std::to_string(n_chunks) + ") exceeds document count (" +
                     std::to_string(corpus.size()) + ")");
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t base = corpus.size() / n_chunks;
  const std::size_t extra = corpus.size() % n_chunks;
  std::vector<Chunk> chunks;
  chunks.reserve(n_chunks);
  std::size_t pos = 0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    const std::size_t len = base + (c < extra ? 1 : 0);
    std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                     order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
    chunks.push_back(make_chunk(corpus, chunk_name(c, n_chunks), std::move(members)));
  }
  return chunks;
}

inline nlohmann::json chunk_to_json(const Chunk& chunk) {
  return {{"chunk_id", chunk.chunk_id},
          {"doc_ids", chunk.doc_ids},
          {"n_tokens", chunk.n_tokens},
          {"chunk_ppl", chunk.chunk_ppl}};
}

inline void write_chunk_manifest(const std::vector<Chunk>& chunks, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError(path.string() + ": cannot write file");
  for (const auto& c : chunks) out << chunk_to_json(c).dump() << '\n';
}

}  // namespace pplaw
