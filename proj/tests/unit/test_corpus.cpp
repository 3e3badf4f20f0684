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

#include <algorithm>
#include <set>

#include "pplaw/corpus.hpp"
#include "pplaw/error.hpp"
#include "test_util.hpp"

using namespace pplaw;
using pplaw::test::scratch_dir;
using pplaw::test::write_text;

namespace {

Corpus ten_docs() {
  std::vector<Document> docs;
  for (int i = 0; i < 10; ++i) {
    docs.push_back({"d" + std::to_string(i), static_cast<std::uint64_t>(50 + 10 * i), 5.0 + i, {}, {}});
  }
  return Corpus(std::move(docs));
}

}  // namespace

TEST(Ingest, ThreeValidRecords) {
  auto path = write_text(scratch_dir() / "c.jsonl",
                         "{\"id\":\"a\",\"n_tokens\":10,\"ppl\":12.5}\n"
                         "{\"id\":\"b\",\"n_tokens\":20,\"ppl\":3.0,\"source\":\"web\"}\n"
                         "\n"
                         "{\"id\":\"c\",\"n_tokens\":5,\"ppl\":40.0,\"text\":\"hello\"}\n");
  auto r = ingest_corpus(path, true);
  EXPECT_EQ(r.corpus.size(), 3u);
  EXPECT_EQ(r.corpus.total_tokens(), 35u);
  EXPECT_EQ(r.skipped, 0u);
  EXPECT_EQ(r.corpus[1].source.value(), "web");
  EXPECT_EQ(r.corpus[2].text.value(), "hello");
}

TEST(Ingest, EmptyFileStrict) {
  auto path = write_text(scratch_dir() / "empty.jsonl", "");
  try {
    ingest_corpus(path, true);
    FAIL() << "expected an error";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("zero valid records"), std::string::npos);
  }
}

TEST(Ingest, LenientSkipsNegativePpl) {
  auto path = write_text(scratch_dir() / "c.jsonl",
                         "{\"id\":\"a\",\"n_tokens\":10,\"ppl\":12.5}\n"
                         "{\"id\":\"b\",\"n_tokens\":20,\"ppl\":-2.0}\n"
                         "{\"id\":\"c\",\"n_tokens\":5,\"ppl\":40.0}\n");
  auto r = ingest_corpus(path, false);
  EXPECT_EQ(r.corpus.size(), 2u);
  EXPECT_EQ(r.skipped, 1u);
  ASSERT_EQ(r.problems.size(), 1u);
  EXPECT_NE(r.problems[0].find(":2:"), std::string::npos);
  EXPECT_THROW(ingest_corpus(path, true), InputError);
}

TEST(Ingest, StrictErrorsCarryLine) {
  auto path = write_text(scratch_dir() / "c.jsonl",
                         "{\"id\":\"a\",\"n_tokens\":10,\"ppl\":12.5}\n"
                         "not json\n");
  try {
    ingest_corpus(path, true);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("c.jsonl:2"), std::string::npos) << e.what();
  }
}

TEST(Ingest, DuplicateIdsAndBadFields) {
  auto dir = scratch_dir();
  auto dup = write_text(dir / "dup.jsonl",
                        "{\"id\":\"a\",\"n_tokens\":10,\"ppl\":1.5}\n{\"id\":\"a\",\"n_tokens\":3,\"ppl\":2.0}\n");
  EXPECT_THROW(ingest_corpus(dup, true), InputError);
  auto r = ingest_corpus(dup, false);
  EXPECT_EQ(r.corpus.size(), 1u);
  EXPECT_EQ(r.skipped, 1u);

  auto bad = write_text(dir / "bad.jsonl",
                        "{\"id\":\"a\",\"n_tokens\":0,\"ppl\":1.5}\n"
                        "{\"id\":\"b\",\"n_tokens\":2.5,\"ppl\":1.5}\n"
                        "{\"id\":\"c\",\"ppl\":1.5}\n"
                        "{\"id\":\"d\",\"n_tokens\":4,\"ppl\":\"x\"}\n"
                        "{\"id\":\"e\",\"n_tokens\":4,\"ppl\":2}\n");
  auto rb = ingest_corpus(bad, false);
  EXPECT_EQ(rb.corpus.size(), 1u);
  EXPECT_EQ(rb.skipped, 4u);
  EXPECT_THROW(ingest_corpus(dir / "missing.jsonl", true), InputError);
}

TEST(Ingest, Idempotent) {
  auto dir = scratch_dir();
  auto c = ten_docs();
  write_corpus(c, dir / "c.jsonl");
  auto a = ingest_corpus(dir / "c.jsonl", true).corpus;
  auto b = ingest_corpus(dir / "c.jsonl", true).corpus;
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Chunking, Singletons) {
  auto c = ten_docs();
  auto chunks = chunk_corpus(c, 10, 7);
  ASSERT_EQ(chunks.size(), 10u);
  for (const auto& ch : chunks) {
    ASSERT_EQ(ch.doc_indices.size(), 1u);
    EXPECT_EQ(ch.chunk_ppl, c[ch.doc_indices[0]].ppl);
  }
}

TEST(Chunking, DeterministicPartition) {
  auto c = ten_docs();
  auto a = chunk_corpus(c, 3, 42);
  auto b = chunk_corpus(c, 3, 42);
  EXPECT_EQ(a, b);

  std::multiset<std::string> seen;
  std::uint64_t tokens = 0;
  std::size_t lo = 99, hi = 0;
  for (const auto& ch : a) {
    seen.insert(ch.doc_ids.begin(), ch.doc_ids.end());
    tokens += ch.n_tokens;
    lo = std::min(lo, ch.doc_ids.size());
    hi = std::max(hi, ch.doc_ids.size());
    double pmin = 1e300, pmax = 0;
    for (auto i : ch.doc_indices) {
      pmin = std::min(pmin, c[i].ppl);
      pmax = std::max(pmax, c[i].ppl);
    }
    EXPECT_GE(ch.chunk_ppl, pmin);
    EXPECT_LE(ch.chunk_ppl, pmax);
  }
  EXPECT_EQ(seen.size(), 10u);
  for (const auto& d : c.documents()) EXPECT_EQ(seen.count(d.id), 1u);
  EXPECT_EQ(tokens, c.total_tokens());
  EXPECT_LE(hi - lo, 1u);
}

TEST(Chunking, WeightedChunkPpl) {
  Corpus c({{"x", 100, 10.0, {}, {}}, {"y", 300, 20.0, {}, {}}});
  auto ch = make_chunk(c, "chunk-0", {0, 1});
  EXPECT_EQ(ch.n_tokens, 400u);
  EXPECT_DOUBLE_EQ(ch.chunk_ppl, 17.5);
}

TEST(Chunking, Errors) {
  auto c = ten_docs();
  EXPECT_THROW(chunk_corpus(c, 0, 1), InputError);
  EXPECT_THROW(chunk_corpus(c, 11, 1), InputError);
}

TEST(Chunking, Names) {
  EXPECT_EQ(chunk_name(3, 10), "chunk-000003");
  EXPECT_EQ(chunk_name(12, 2000000), "chunk-0000012");
}
