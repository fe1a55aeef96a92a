#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ragcheck/backends.hpp"
#include "ragcheck/error.hpp"
#include "ragcheck/pipeline.hpp"

namespace ragcheck {

/// One endpoint binding from the configuration file.
struct EndpointBinding {
  std::string kind;  // "fixture" or "http"
  std::filesystem::path table;  // fixture replay file
  std::optional<double> default_logit;  // fixture scorers: replay for missing keys
  EndpointConfig http;
};

inline constexpr std::array<const char*, 7> kEndpointNames = {"embedder", "rs",  "cs",      "vlm",
                                                              "llm",      "mllm", "rewriter"};

/// Harness configuration, read from an INI-style file with keyed sections:
///
///   [paths]    corpus_root, manifest, data_dir, index, lexicon, static_dir
///   [rag]      selection, k, generation_mode, context_failure
///   [labeler]  rs_threshold, cs_threshold
///   [runtime]  max_in_flight, retries
///   [service]  listen
///   [embedder] [rs] [cs] [vlm] [llm] [mllm] [rewriter]
///              kind = fixture | http; table; default_logit;
///              base_url; auth_env; timeout_ms; retries; max_in_flight
///
/// Relative paths are resolved against the configuration file's directory.
struct HarnessConfig {
  std::filesystem::path corpus_root = ".";
  std::filesystem::path manifest;
  std::filesystem::path data_dir = "data";
  std::filesystem::path index;
  std::filesystem::path lexicon;
  std::filesystem::path static_dir;
  RagConfig rag;
  double rs_threshold = 0.7;
  double cs_threshold = 0.7;
  std::string listen = "127.0.0.1:8080";
  std::map<std::string, EndpointBinding> endpoints;

  void validate() const {
    if (rs_threshold < 0.0 || rs_threshold > 1.0 || cs_threshold < 0.0 || cs_threshold > 1.0)
      throw ValidationError("labeler thresholds must lie in [0,1]");
    if (rag.k < 1) throw ValidationError("k must be >= 1");
    if (rag.max_in_flight < 1) throw ValidationError("max_in_flight must be >= 1");
    if (rag.retries < 0) throw ValidationError("retries must be >= 0");
  }

  static HarnessConfig load(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path))
      throw ValidationError("config not found: " + path.string());
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ValidationError("config " + path.string() + ": " + e.what());
    }
    auto base = path.parent_path();
    auto resolve = [&](const std::string& p) -> std::filesystem::path {
      if (p.empty()) return {};
      std::filesystem::path fp(p);
      return fp.is_absolute() ? fp : base / fp;
    };
    HarnessConfig c;
    try {
      c.corpus_root = resolve(tree.get<std::string>("paths.corpus_root", "."));
      c.manifest = resolve(tree.get<std::string>("paths.manifest", ""));
      c.data_dir = resolve(tree.get<std::string>("paths.data_dir", "data"));
      c.index = resolve(tree.get<std::string>("paths.index", ""));
      c.lexicon = resolve(tree.get<std::string>("paths.lexicon", ""));
      c.static_dir = resolve(tree.get<std::string>("paths.static_dir", ""));
      c.rag.selection = parse_selection(tree.get<std::string>("rag.selection", "cosine_topk"));
      c.rag.k = tree.get<std::size_t>("rag.k", 5);
      c.rag.generation_mode =
          parse_generation_mode(tree.get<std::string>("rag.generation_mode", "per_piece_vlm_then_llm"));
      c.rag.context_failure =
          parse_context_policy(tree.get<std::string>("rag.context_failure", "fail_fast"));
      c.rag.max_in_flight = tree.get<int>("runtime.max_in_flight", 4);
      c.rag.retries = tree.get<int>("runtime.retries", 2);
      c.rs_threshold = tree.get<double>("labeler.rs_threshold", 0.7);
      c.cs_threshold = tree.get<double>("labeler.cs_threshold", 0.7);
      c.listen = tree.get<std::string>("service.listen", c.listen);
      for (const char* name : kEndpointNames) {
        auto section = tree.get_child_optional(name);
        if (!section) continue;
        EndpointBinding b;
        b.kind = section->get<std::string>("kind", "http");
        if (b.kind != "fixture" && b.kind != "http")
          throw ValidationError(std::string("[") + name + "]: kind must be fixture or http");
        b.table = resolve(section->get<std::string>("table", ""));
        if (auto d = section->get_optional<double>("default_logit")) b.default_logit = *d;
        b.http.base_url = section->get<std::string>("base_url", "");
        b.http.auth_env = section->get<std::string>("auth_env", "");
        b.http.timeout_ms = section->get<int>("timeout_ms", 30000);
        b.http.retries = section->get<int>("retries", c.rag.retries);
        b.http.max_in_flight = section->get<int>("max_in_flight", c.rag.max_in_flight);
        if (b.kind == "fixture" && b.table.empty())
          throw ValidationError(std::string("[") + name + "]: fixture endpoints need a table");
        if (b.kind == "http") b.http.validate();
        c.endpoints[name] = std::move(b);
      }
    } catch (const boost::property_tree::ptree_error& e) {
      throw ValidationError("config " + path.string() + ": " + e.what());
    }
    c.validate();
    return c;
  }
};

/// Backends instantiated from a configuration; owns them.
struct BackendSet {
  std::unique_ptr<EmbeddingBackend> embedder;
  std::unique_ptr<ScorerBackend> rs;
  std::unique_ptr<ScorerBackend> cs;
  std::unique_ptr<GenerationBackend> vlm;
  std::unique_ptr<GenerationBackend> llm;
  std::unique_ptr<GenerationBackend> mllm;
  std::unique_ptr<GenerationBackend> rewriter;

  static BackendSet from_config(const HarnessConfig& cfg) {
    BackendSet set;
    for (const auto& [name, b] : cfg.endpoints) {
      if (name == "embedder") {
        if (b.kind == "fixture")
          set.embedder = FixtureEmbedder::from_file(b.table, name);
        else
          set.embedder = std::make_unique<HttpEmbedder>(name, b.http);
      } else if (name == "rs" || name == "cs") {
        std::unique_ptr<ScorerBackend> s;
        if (b.kind == "fixture") {
          auto f = FixtureScorer::from_file(b.table, name);
          f->set_default_logit(b.default_logit);
          s = std::move(f);
        } else {
          s = std::make_unique<HttpScorer>(name, b.http);
        }
        (name == "rs" ? set.rs : set.cs) = std::move(s);
      } else {
        std::unique_ptr<GenerationBackend> g;
        if (b.kind == "fixture")
          g = FixtureGenerator::from_file(b.table, name);
        else
          g = std::make_unique<HttpGenerator>(name, b.http);
        if (name == "vlm") set.vlm = std::move(g);
        else if (name == "llm") set.llm = std::move(g);
        else if (name == "mllm") set.mllm = std::move(g);
        else set.rewriter = std::move(g);
      }
    }
    return set;
  }
};

}  // namespace ragcheck
