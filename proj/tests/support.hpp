#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "ragcheck/backends.hpp"
#include "ragcheck/config.hpp"
#include "ragcheck/corpus.hpp"
#include "ragcheck/index.hpp"
#include "ragcheck/pipeline.hpp"
#include "ragcheck/jsonl.hpp"

namespace ragcheck::testing {

namespace fs = std::filesystem;

inline fs::path source_dir() { return RAGCHECK_SOURCE_DIR; }
inline fs::path fixtures() { return source_dir() / "tests" / "fixtures"; }
inline fs::path e2e_dir() { return fixtures() / "e2e"; }

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("ragcheck-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

/// Writes a harness config binding every endpoint to the e2e fixtures, with
/// the index and data directory inside `dir`.
inline fs::path write_e2e_config(const fs::path& dir, const std::string& extra_rag = "") {
  auto e2e = e2e_dir().string();
  std::string text =
      "[paths]\n"
      "corpus_root = " + e2e + "/corpus\n"
      "manifest = " + e2e + "/manifest.jsonl\n"
      "data_dir = data\n"
      "index = index.jsonl\n"
      "\n[rag]\n"
      "selection = cosine_topk\n"
      "k = 3\n"
      "generation_mode = per_piece_vlm_then_llm\n" + extra_rag +
      "\n[runtime]\nmax_in_flight = 2\nretries = 1\n"
      "\n[embedder]\nkind = fixture\ntable = " + e2e + "/embedder.jsonl\n"
      "\n[rs]\nkind = fixture\ntable = " + e2e + "/rs.jsonl\n"
      "\n[cs]\nkind = fixture\ntable = " + e2e + "/cs.jsonl\n"
      "\n[vlm]\nkind = fixture\ntable = " + e2e + "/vlm.jsonl\n"
      "\n[llm]\nkind = fixture\ntable = " + e2e + "/llm.jsonl\n"
      "\n[mllm]\nkind = fixture\ntable = " + e2e + "/mllm.jsonl\n";
  auto path = dir / "ragcheck.ini";
  write_text_file(path, text);
  return path;
}

/// Counts calls and optionally fails the first `failures` of them.
class FlakyScorer final : public ScorerBackend {
 public:
  FlakyScorer(double logit, int failures, bool malformed = false)
      : logit_(logit), failures_(failures), malformed_(malformed) {}
  std::string id() const override { return "flaky"; }
  double logit(const ScoreRequest&) override {
    int n = calls_++;
    if (n < failures_) {
      if (malformed_) throw MalformedReplyError("not a number");
      throw EndpointError("connection refused");
    }
    return logit_;
  }
  int calls() const { return calls_; }

 private:
  double logit_;
  int failures_;
  bool malformed_;
  std::atomic<int> calls_{0};
};

/// The e2e fixture corpus with every endpoint bound to its replay table.
struct E2E {
  HarnessConfig config;
  BackendSet backends;
  Corpus corpus;
  std::optional<VectorIndex> index;

  explicit E2E(const fs::path& dir, const std::string& extra_rag = "")
      : config(HarnessConfig::load(write_e2e_config(dir, extra_rag))),
        backends(BackendSet::from_config(config)),
        corpus(ingest_corpus(config.manifest, config.corpus_root).corpus) {
    index = build_index(corpus, *backends.embedder);
  }

  RagEndpoints endpoints(RelevanceScorer* relevance = nullptr) {
    return {backends.embedder.get(), relevance, backends.vlm.get(), backends.llm.get(),
            backends.mllm.get()};
  }

  static std::vector<std::pair<std::string, std::string>> queries() {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& r : read_jsonl(e2e_dir() / "queries.jsonl"))
      out.emplace_back(r.value["query_id"].get<std::string>(), r.value["query"].get<std::string>());
    return out;
  }
};

}  // namespace ragcheck::testing
