#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ragcheck/backends.hpp"
#include "ragcheck/corpus.hpp"
#include "ragcheck/index.hpp"
#include "ragcheck/parallel.hpp"
#include "ragcheck/prompts.hpp"

namespace ragcheck {

enum class SelectionStrategy { cosine_topk, rs_rescoring };
enum class GenerationMode { per_piece_vlm_then_llm, direct_mllm };
enum class ContextFailurePolicy { fail_fast, skip_with_placeholder };

inline const char* to_string(SelectionStrategy s) {
  return s == SelectionStrategy::cosine_topk ? "cosine_topk" : "rs_rescoring";
}
inline const char* to_string(GenerationMode m) {
  return m == GenerationMode::per_piece_vlm_then_llm ? "per_piece_vlm_then_llm" : "direct_mllm";
}
inline const char* to_string(ContextFailurePolicy p) {
  return p == ContextFailurePolicy::fail_fast ? "fail_fast" : "skip_with_placeholder";
}

inline SelectionStrategy parse_selection(const std::string& s) {
  if (s == "cosine_topk") return SelectionStrategy::cosine_topk;
  if (s == "rs_rescoring") return SelectionStrategy::rs_rescoring;
  throw ValidationError("unknown selection strategy '" + s + "'");
}
inline GenerationMode parse_generation_mode(const std::string& s) {
  if (s == "per_piece_vlm_then_llm") return GenerationMode::per_piece_vlm_then_llm;
  if (s == "direct_mllm") return GenerationMode::direct_mllm;
  throw ValidationError("unknown generation mode '" + s + "'");
}
inline ContextFailurePolicy parse_context_policy(const std::string& s) {
  if (s == "fail_fast") return ContextFailurePolicy::fail_fast;
  if (s == "skip_with_placeholder" || s == "skip") return ContextFailurePolicy::skip_with_placeholder;
  throw ValidationError("unknown context failure policy '" + s + "'");
}

inline constexpr std::string_view kContextPlaceholder = "[context unavailable]";

struct RagConfig {
  SelectionStrategy selection = SelectionStrategy::cosine_topk;
  std::size_t k = 5;
  GenerationMode generation_mode = GenerationMode::per_piece_vlm_then_llm;
  ContextFailurePolicy context_failure = ContextFailurePolicy::fail_fast;
  int retries = 2;
  int max_in_flight = 4;
};

/// Endpoint bindings for one pipeline. Non-owning.
struct RagEndpoints {
  EmbeddingBackend* embedder = nullptr;
  RelevanceScorer* relevance = nullptr;  // rs_rescoring selection
  GenerationBackend* vlm = nullptr;
  GenerationBackend* llm = nullptr;
  GenerationBackend* mllm = nullptr;
};

inline void validate_bindings(const RagConfig& cfg, const RagEndpoints& ep) {
  if (cfg.k < 1) throw ValidationError("k must be >= 1");
  if (cfg.selection == SelectionStrategy::cosine_topk && ep.embedder == nullptr)
    throw ValidationError("cosine_topk selection needs an embedder endpoint");
  if (cfg.selection == SelectionStrategy::rs_rescoring && ep.relevance == nullptr)
    throw ValidationError("rs_rescoring selection needs a relevance scorer endpoint");
  if (cfg.generation_mode == GenerationMode::per_piece_vlm_then_llm &&
      (ep.vlm == nullptr || ep.llm == nullptr))
    throw ValidationError("per_piece_vlm_then_llm mode needs vlm and llm endpoints");
  if (cfg.generation_mode == GenerationMode::direct_mllm && ep.mllm == nullptr)
    throw ValidationError("direct_mllm mode needs an mllm endpoint");
}

struct StageError {
  std::string stage;
  ErrorKind kind = ErrorKind::internal;
  std::string message;
};

struct RagTrace {
  std::string query_id;
  std::string query;
  std::vector<RetrievalResult> retrieved;
  std::vector<std::string> contexts;  // empty in direct_mllm mode
  std::string response;
  std::map<std::string, double> timing_ms;
  json config;
  std::vector<std::string> warnings;
  std::optional<StageError> error;

  bool ok() const { return !error.has_value(); }
};

inline json config_snapshot(const RagConfig& cfg, const RagEndpoints& ep) {
  json j{{"selection", to_string(cfg.selection)},
         {"k", cfg.k},
         {"generation_mode", to_string(cfg.generation_mode)},
         {"context_failure", to_string(cfg.context_failure)}};
  json endpoints = json::object();
  if (ep.embedder) endpoints["embedder"] = ep.embedder->id();
  if (ep.vlm) endpoints["vlm"] = ep.vlm->id();
  if (ep.llm) endpoints["llm"] = ep.llm->id();
  if (ep.mllm) endpoints["mllm"] = ep.mllm->id();
  j["endpoints"] = endpoints;
  return j;
}

/// Trace as a JSON record. `with_timing = false` drops the timing field,
/// which is the only nondeterministic part.
inline json to_json(const RagTrace& t, bool with_timing = true) {
  json retrieved = json::array();
  for (const auto& r : t.retrieved)
    retrieved.push_back({{"piece_id", r.piece_id}, {"similarity", r.similarity}, {"rank", r.rank}});
  json j{{"query_id", t.query_id}, {"query", t.query},     {"retrieved", retrieved},
         {"contexts", t.contexts}, {"response", t.response}, {"config", t.config},
         {"warnings", t.warnings}, {"status", t.ok() ? "ok" : "error"}};
  if (with_timing) j["timing_ms"] = t.timing_ms;
  if (t.error)
    j["error"] = {{"stage", t.error->stage},
                  {"kind", to_string(t.error->kind)},
                  {"message", t.error->message}};
  return j;
}

inline RagTrace trace_from_json(const json& j) {
  RagTrace t;
  t.query_id = j.value("query_id", "");
  t.query = j.at("query").get<std::string>();
  for (const auto& r : j.at("retrieved"))
    t.retrieved.push_back({r.at("piece_id").get<std::string>(), r.at("similarity").get<double>(),
                           r.at("rank").get<std::size_t>()});
  t.contexts = j.value("contexts", std::vector<std::string>{});
  t.response = j.value("response", "");
  t.config = j.value("config", json::object());
  t.warnings = j.value("warnings", std::vector<std::string>{});
  if (j.contains("timing_ms")) t.timing_ms = j["timing_ms"].get<std::map<std::string, double>>();
  if (j.contains("error")) {
    const auto& e = j["error"];
    auto kind = e.value("kind", "internal");
    t.error = StageError{e.value("stage", ""),
                         kind == "validation" ? ErrorKind::validation
                         : kind == "endpoint" ? ErrorKind::endpoint
                                              : ErrorKind::internal,
                         e.value("message", "")};
  }
  return t;
}

struct ContextResult {
  std::vector<std::string> texts;
  std::vector<std::string> warnings;
};

/// Narrates each retrieved piece into text, in retrieval order. Images go to
/// the VLM with the describe-the-image prompt; text pieces pass through.
inline ContextResult generate_context(const Corpus& corpus, const std::vector<Piece>& pieces,
                                      GenerationBackend& vlm, const RagConfig& cfg) {
  ContextResult out;
  out.texts.resize(pieces.size());
  auto failures = bounded_parallel_for(pieces.size(), cfg.max_in_flight, [&](std::size_t i) {
    const auto& p = pieces[i];
    if (p.modality == Modality::text) {
      out.texts[i] = p.content_ref;
      return;
    }
    auto image = corpus.load(p);
    auto text = with_retries(cfg.retries, [&] {
      return vlm.generate(std::string(prompts::kDescribeImage), std::span(&image, 1));
    });
    if (text.empty()) throw MalformedReplyError("empty description for piece '" + p.id + "'");
    out.texts[i] = std::move(text);
  });
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i]) continue;
    if (cfg.context_failure == ContextFailurePolicy::fail_fast) std::rethrow_exception(failures[i]);
    std::string why;
    try {
      std::rethrow_exception(failures[i]);
    } catch (const std::exception& e) {
      why = e.what();
    }
    out.texts[i] = std::string(kContextPlaceholder);
    out.warnings.push_back("context for piece '" + pieces[i].id + "' unavailable: " + why);
  }
  return out;
}

/// Numbered "Image i: <description>" blocks (or "Text i:" for text pieces)
/// followed by the question.
inline std::string render_context_prompt(const std::string& query,
                                         const std::vector<std::string>& contexts,
                                         const std::vector<Modality>& modalities) {
  std::string blocks;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    bool text = i < modalities.size() && modalities[i] == Modality::text;
    blocks += (text ? "Text " : "Image ") + std::to_string(i + 1) + ": " + contexts[i] + "\n";
  }
  auto prompt = fill_placeholder(prompts::kContextAnswer, "n", std::to_string(contexts.size()));
  prompt = fill_placeholder(prompt, "contexts", blocks.substr(0, blocks.size() - 1));
  return fill_placeholder(prompt, "query", query);
}

/// Per-piece mode: fuses the text contexts with the query for the LLM.
inline std::string generate_response(const std::string& query,
                                     const std::vector<std::string>& contexts,
                                     const std::vector<Modality>& modalities,
                                     GenerationBackend& llm, int retries = 0) {
  if (contexts.empty()) throw ValidationError("generate_response: no contexts to answer from");
  auto prompt = render_context_prompt(query, contexts, modalities);
  auto text = with_retries(retries, [&] { return llm.generate(prompt, {}); });
  if (text.empty()) throw MalformedReplyError("generation endpoint returned empty text");
  return text;
}

/// Direct mode: one multimodal call with every retrieved image attached.
/// Text pieces are inlined ahead of the question.
inline std::string generate_response_direct(const std::string& query, const Corpus& corpus,
                                            const std::vector<Piece>& pieces,
                                            GenerationBackend& mllm, int retries = 0) {
  if (pieces.empty()) throw ValidationError("generate_response: no retrieved pieces");
  std::vector<ImageContent> images;
  std::string texts;
  for (const auto& p : pieces) {
    if (p.modality == Modality::image)
      images.push_back(corpus.load(p));
    else
      texts += "Text " + std::to_string(images.size() + 1) + ": " + p.content_ref + "\n";
  }
  auto prompt = fill_placeholder(prompts::kDirectAnswer, "n", std::to_string(images.size()));
  prompt = texts + fill_placeholder(prompt, "query", query);
  auto text = with_retries(retries, [&] { return mllm.generate(prompt, images); });
  if (text.empty()) throw MalformedReplyError("generation endpoint returned empty text");
  return text;
}

/// select -> (context) -> respond. A stage failure stops the run and is
/// recorded on the returned (partial) trace; binding errors throw.
inline RagTrace run_query(const std::string& query_id, const std::string& query,
                          const Corpus& corpus, const VectorIndex* index, const RagConfig& cfg,
                          const RagEndpoints& ep) {
  validate_bindings(cfg, ep);
  RagTrace trace;
  trace.query_id = query_id;
  trace.query = query;
  trace.config = config_snapshot(cfg, ep);

  using clock = std::chrono::steady_clock;
  auto timed = [&](const char* stage, auto&& fn) -> bool {
    auto t0 = clock::now();
    try {
      fn();
    } catch (const Error& e) {
      trace.error = StageError{stage, e.kind(), e.what()};
    } catch (const std::exception& e) {
      trace.error = StageError{stage, ErrorKind::internal, e.what()};
    }
    trace.timing_ms[stage] = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    return trace.ok();
  };

  std::vector<Piece> pieces;
  bool ok = timed("selection", [&] {
    if (corpus.empty() || (cfg.selection == SelectionStrategy::cosine_topk &&
                           (index == nullptr || index->size() == 0)))
      throw ValidationError("selection is empty: corpus has no pieces");
    if (cfg.selection == SelectionStrategy::cosine_topk) {
      auto q = with_retries(cfg.retries, [&] { return ep.embedder->embed_text(query); });
      trace.retrieved = top_k_select(*index, EmbeddingVector::unit(std::move(q)), cfg.k);
    } else {
      trace.retrieved = rescore_select(corpus, query, *ep.relevance, cfg.k, {cfg.max_in_flight});
    }
    if (trace.retrieved.empty()) throw ValidationError("selection is empty");
    for (const auto& r : trace.retrieved) pieces.push_back(corpus.at(r.piece_id));
  });
  if (!ok) return trace;

  if (cfg.generation_mode == GenerationMode::per_piece_vlm_then_llm) {
    ok = timed("context", [&] {
      auto ctx = generate_context(corpus, pieces, *ep.vlm, cfg);
      trace.contexts = std::move(ctx.texts);
      for (auto& w : ctx.warnings) trace.warnings.push_back(std::move(w));
    });
    if (!ok) return trace;
    timed("response", [&] {
      std::vector<Modality> modalities;
      for (const auto& p : pieces) modalities.push_back(p.modality);
      trace.response = generate_response(query, trace.contexts, modalities, *ep.llm, cfg.retries);
    });
  } else {
    timed("response", [&] {
      trace.response = generate_response_direct(query, corpus, pieces, *ep.mllm, cfg.retries);
    });
  }
  return trace;
}

}  // namespace ragcheck
