#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ragcheck/index.hpp"
#include "support.hpp"

using namespace ragcheck;
using ragcheck::testing::TempDir;

namespace {

Corpus image_corpus(const TempDir& dir, const std::vector<std::string>& ids) {
  Corpus c(dir.path());
  for (const auto& id : ids) {
    write_text_file(dir / (id + ".bin"), "bytes of " + id);
    c.add({id, Modality::image, id + ".bin", {}});
  }
  return c;
}

VectorIndex make_index(const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  std::vector<IndexEntry> entries;
  for (const auto& [id, v] : rows) entries.push_back({id, EmbeddingVector::unit(v)});
  return VectorIndex(rows.front().second.size(), std::move(entries));
}

std::vector<std::string> ids_of(const std::vector<RetrievalResult>& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs) out.push_back(r.piece_id);
  return out;
}

}  // namespace

TEST(Ingest, ThreeValidImageRecords) {
  TempDir dir;
  for (auto name : {"a.png", "b.png", "c.png"}) write_text_file(dir / name, name);
  write_text_file(dir / "m.jsonl",
                  R"({"id":"a","modality":"image","content_ref":"a.png","metadata":{"k":"v"}})"
                  "\n"
                  R"({"id":"b","modality":"image","content_ref":"b.png"})"
                  "\n"
                  R"({"id":"c","modality":"image","content_ref":"c.png"})"
                  "\n");
  auto r = ingest_corpus(dir / "m.jsonl", dir.path());
  ASSERT_EQ(r.corpus.size(), 3u);
  EXPECT_TRUE(r.warnings.empty());
  EXPECT_EQ(r.corpus.at("a").metadata.at("k"), "v");
  EXPECT_EQ(r.corpus.pieces()[2].id, "c");
}

TEST(Ingest, DuplicateIdCitesLine) {
  TempDir dir;
  write_text_file(dir / "a.png", "x");
  write_text_file(dir / "m.jsonl",
                  R"({"id":"a","modality":"image","content_ref":"a.png"})"
                  "\n"
                  R"({"id":"a","modality":"image","content_ref":"a.png"})"
                  "\n");
  try {
    ingest_corpus(dir / "m.jsonl", dir.path());
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  }
}

TEST(Ingest, EmptyManifestWarns) {
  TempDir dir;
  write_text_file(dir / "m.jsonl", "");
  auto r = ingest_corpus(dir / "m.jsonl", dir.path());
  EXPECT_TRUE(r.corpus.empty());
  ASSERT_EQ(r.warnings.size(), 1u);
}

TEST(Ingest, CollectsEveryBadLine) {
  TempDir dir;
  write_text_file(dir / "m.jsonl",
                  "{not json\n"
                  R"({"id":"a","modality":"image","content_ref":"missing.png"})"
                  "\n"
                  R"({"id":"b","modality":"video","content_ref":"x"})"
                  "\n"
                  R"({"id":"t","modality":"text","content_ref":"inline text is fine"})"
                  "\n");
  try {
    ingest_corpus(dir / "m.jsonl", dir.path());
    FAIL();
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("line 1: malformed"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 2: missing content"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_EQ(msg.find("line 4"), std::string::npos) << msg;
  }
}

TEST(BuildIndex, NormalizesHandExample) {
  TempDir dir;
  auto corpus = image_corpus(dir, {"p", "q"});
  FixtureEmbedder e;
  e.add_image("p.bin", {3, 4});
  e.add_image("q.bin", {1, 0});
  auto index = build_index(corpus, e);
  ASSERT_EQ(index.size(), 2u);
  EXPECT_EQ(index.dimension(), 2u);
  EXPECT_NEAR(index.entries()[0].vector.values[0], 0.6, 1e-12);
  EXPECT_NEAR(index.entries()[0].vector.values[1], 0.8, 1e-12);
  EXPECT_NEAR(index.entries()[1].vector.values[0], 1.0, 1e-12);
  EXPECT_NEAR(index.entries()[1].vector.values[1], 0.0, 1e-12);
}

TEST(BuildIndex, TextAndImagesShareTheSpace) {
  TempDir dir;
  auto corpus = image_corpus(dir, {"p"});
  corpus.add({"t", Modality::text, "a caption", {}});
  FixtureEmbedder e;
  e.add_image("p.bin", {0, 2});
  e.add_text("a caption", {5, 0});
  auto index = build_index(corpus, e);
  EXPECT_EQ(index.entries()[1].piece_id, "t");
  EXPECT_NEAR(index.entries()[1].vector.values[0], 1.0, 1e-12);
}

TEST(BuildIndex, DimensionMismatch) {
  TempDir dir;
  auto corpus = image_corpus(dir, {"p", "q"});
  FixtureEmbedder e;
  e.add_image("p.bin", std::vector<double>(512, 1.0));
  e.add_image("q.bin", std::vector<double>(768, 1.0));
  EXPECT_THROW(build_index(corpus, e), ValidationError);
}

TEST(BuildIndex, ZeroVectorRejected) {
  TempDir dir;
  auto corpus = image_corpus(dir, {"p"});
  FixtureEmbedder e;
  e.add_image("p.bin", {0, 0, 0});
  try {
    build_index(corpus, e);
    FAIL();
  } catch (const ValidationError& err) {
    EXPECT_NE(std::string(err.what()).find("zero vector"), std::string::npos);
  }
}

TEST(BuildIndex, RetriesTransientFailuresThenAborts) {
  TempDir dir;
  auto corpus = image_corpus(dir, {"p"});
  int calls = 0;
  struct Flaky : EmbeddingBackend {
    int& calls;
    int fail;
    Flaky(int& c, int f) : calls(c), fail(f) {}
    std::string id() const override { return "flaky"; }
    std::vector<double> embed_text(const std::string&) override { return {1}; }
    std::vector<double> embed_image(const ImageContent&) override {
      if (calls++ < fail) throw EndpointError("timeout");
      return {1, 1};
    }
  };
  Flaky ok(calls, 2);
  EXPECT_EQ(build_index(corpus, ok, {2, 1}).size(), 1u);
  EXPECT_EQ(calls, 3);
  calls = 0;
  Flaky bad(calls, 5);
  EXPECT_THROW(build_index(corpus, bad, {2, 1}), EndpointError);
  EXPECT_EQ(calls, 3);
}

TEST(BuildIndex, SaveLoadRoundTrip) {
  TempDir dir;
  auto index = make_index({{"A", {1, 0}}, {"B", {0.3, 0.4}}});
  index.save(dir / "idx.jsonl");
  auto back = VectorIndex::load(dir / "idx.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.entries()[1].piece_id, "B");
  EXPECT_NEAR(back.entries()[1].vector.values[1], 0.8, 1e-12);
}

TEST(Cosine, HandExamples) {
  auto v = [](std::vector<double> x) { return EmbeddingVector{std::move(x), false}; };
  EXPECT_DOUBLE_EQ(cosine_similarity(v({1, 0}), v({1, 0})), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(v({1, 0}), v({0, 1})), 0.0);
  EXPECT_NEAR(cosine_similarity(v({1, 1}), v({1, 0})), 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(cosine_similarity(v({1, 1}), v({1, 0})), 0.70710678, 1e-8);
  EXPECT_THROW(cosine_similarity(v({1, 0}), v({1, 0, 0})), ValidationError);
  EXPECT_THROW(cosine_similarity(v({0, 0}), v({1, 0})), ValidationError);
}

TEST(Cosine, SymmetricScaleInvariantBounded) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> lambda(0.01, 100.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> a(8), b(8);
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng);
    double l = lambda(rng);
    std::vector<double> la = a;
    for (auto& x : la) x *= l;
    EmbeddingVector A{a}, B{b}, LA{la};
    double ab = cosine_similarity(A, B);
    EXPECT_NEAR(ab, cosine_similarity(B, A), 1e-9);
    EXPECT_NEAR(ab, cosine_similarity(LA, B), 1e-9);
    auto na = EmbeddingVector::unit(a), nb = EmbeddingVector::unit(b);
    EXPECT_LE(std::abs(cosine_similarity(na, nb)), 1.0 + 1e-9);
  }
}

TEST(TopK, HandExample) {
  auto index = make_index({{"A", {1, 0}}, {"B", {0, 1}}, {"C", {0.6, 0.8}}});
  auto r = top_k_select(index, EmbeddingVector::unit({1, 0}), 2);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].piece_id, "A");
  EXPECT_NEAR(r[0].similarity, 1.0, 1e-12);
  EXPECT_EQ(r[0].rank, 1u);
  EXPECT_EQ(r[1].piece_id, "C");
  EXPECT_NEAR(r[1].similarity, 0.6, 1e-12);
  EXPECT_EQ(r[1].rank, 2u);
}

TEST(TopK, TruncatesAndBreaksTiesByInsertion) {
  auto index = make_index({{"A", {0, 1}}, {"B", {1, 1}}, {"C", {1, 1}}});
  auto r = top_k_select(index, EmbeddingVector::unit({1, 1}), 10);
  EXPECT_EQ(ids_of(r), (std::vector<std::string>{"B", "C", "A"}));
  auto swapped = make_index({{"C", {1, 1}}, {"B", {1, 1}}});
  EXPECT_EQ(top_k_select(swapped, EmbeddingVector::unit({1, 1}), 1)[0].piece_id, "C");
}

TEST(TopK, Errors) {
  auto index = make_index({{"A", {1, 0}}});
  EXPECT_THROW(top_k_select(index, EmbeddingVector::unit({1, 0}), 0), ValidationError);
  EXPECT_THROW(top_k_select(index, EmbeddingVector::unit({1, 0, 0}), 1), ValidationError);
  VectorIndex empty(2, {});
  EXPECT_THROW(top_k_select(empty, EmbeddingVector::unit({1, 0}), 1), ValidationError);
}

TEST(TopK, MatchesSortOracleWithDuplicates) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> coord(-2, 2);  // small lattice forces ties
    std::size_t n = 1 + rng() % 200, d = 1 + rng() % 4, k = 1 + rng() % 20;
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(d);
      do
        for (auto& x : v) x = coord(rng);
      while (std::all_of(v.begin(), v.end(), [](double x) { return x == 0; }));
      rows.push_back({"p" + std::to_string(i), v});
    }
    auto index = make_index(rows);
    std::vector<double> q(d, 1.0);
    auto query = EmbeddingVector::unit(q);
    std::vector<std::pair<double, std::size_t>> oracle;
    for (std::size_t i = 0; i < n; ++i) oracle.push_back({-dot(index.entries()[i].vector.values, query.values), i});
    std::sort(oracle.begin(), oracle.end());
    auto got = top_k_select(index, query, k);
    ASSERT_EQ(got.size(), std::min(k, n));
    for (std::size_t r = 0; r < got.size(); ++r) EXPECT_EQ(got[r].piece_id, rows[oracle[r].second].first);
  }
}

TEST(Rescore, FixtureTable) {
  TempDir dir;
  auto corpus = image_corpus(dir, {"A", "B", "C"});
  TableRelevanceScorer s({{"A", 0.9}, {"B", 0.1}, {"C", 0.5}});
  auto r = rescore_select(corpus, "q", s, 2);
  EXPECT_EQ(ids_of(r), (std::vector<std::string>{"A", "C"}));
  EXPECT_DOUBLE_EQ(r[1].similarity, 0.5);
}

TEST(Rescore, SingletonAndOutOfRange) {
  TempDir dir;
  auto one = image_corpus(dir, {"A"});
  TableRelevanceScorer s({{"A", 0.3}});
  EXPECT_EQ(rescore_select(one, "q", s, 1)[0].piece_id, "A");
  TableRelevanceScorer bad({{"A", 1.2}});
  try {
    rescore_select(one, "q", bad, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("outside [0,1]"), std::string::npos);
  }
}

TEST(Rescore, PartialScoringListsUnscoredPieces) {
  TempDir dir;
  auto corpus = image_corpus(dir, {"A", "B", "C"});
  TableRelevanceScorer s({{"A", 0.9}});
  try {
    rescore_select(corpus, "q", s, 2, {1});
    FAIL();
  } catch (const Error& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("partial scoring"), std::string::npos);
    EXPECT_NE(msg.find("[B,C]"), std::string::npos) << msg;
  }
}

TEST(Rescore, AgreesWithTopKWhenScoreIsCosine) {
  TempDir dir;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::string> ids;
  for (int i = 0; i < 40; ++i) ids.push_back("p" + std::to_string(i));
  auto corpus = image_corpus(dir, ids);
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (const auto& id : ids) rows.push_back({id, {u(rng), u(rng), u(rng)}});
  auto index = make_index(rows);
  auto query = EmbeddingVector::unit({0.2, 0.5, 0.9});
  std::map<std::string, double> table;
  // positive vectors give cosine in [0,1], a valid RS range
  for (const auto& e : index.entries()) table[e.piece_id] = dot(e.vector.values, query.values);
  TableRelevanceScorer s(table);
  EXPECT_EQ(ids_of(rescore_select(corpus, "q", s, 7)), ids_of(top_k_select(index, query, 7)));
}
