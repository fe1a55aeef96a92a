#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ragcheck/corpus.hpp"
#include "ragcheck/pipeline.hpp"
#include "ragcheck/score_service.hpp"
#include "ragcheck/spans.hpp"

namespace ragcheck {

struct RetrievalScore {
  std::string piece_id;
  std::size_t rank = 0;
  ScoreResponse rs;
};

struct ScoredResponseSpan {
  Span span;
  std::optional<ScoreResponse> cs;  // objective spans only
};

/// RS for every retrieved piece and CS for every objective span of one trace.
struct TraceEvaluation {
  std::string query_id;
  std::vector<RetrievalScore> retrieval;
  std::vector<ScoredResponseSpan> spans;
  PartitionFidelity fidelity = PartitionFidelity::rule_fallback;
  std::vector<std::string> warnings;
};

struct EvaluationBackends {
  ScoreService* relevance = nullptr;
  ScoreService* correctness = nullptr;
  const MarkerLexicon* lexicon = nullptr;
  GenerationBackend* rewriter = nullptr;  // optional
};

inline TraceEvaluation evaluate_trace(const RagTrace& trace, const Corpus& corpus,
                                      const EvaluationBackends& be) {
  if (!trace.ok()) throw ValidationError("trace '" + trace.query_id + "' did not complete");
  if (be.relevance == nullptr || be.correctness == nullptr || be.lexicon == nullptr)
    throw ValidationError("evaluation needs relevance and correctness scorers and a lexicon");
  TraceEvaluation ev;
  ev.query_id = trace.query_id;

  std::vector<ImageContent> images;
  for (const auto& r : trace.retrieved) {
    const auto& piece = corpus.at(r.piece_id);
    auto content = corpus.load(piece);
    if (piece.modality == Modality::image) {
      ev.retrieval.push_back({r.piece_id, r.rank, be.relevance->score_relevance(content, trace.query)});
    } else {
      ev.warnings.push_back("piece '" + r.piece_id + "' is text; relevance not scored");
    }
    images.push_back(std::move(content));
  }

  auto spans = process_response(trace.response, *be.lexicon, be.rewriter);
  ev.fidelity = spans.fidelity;
  ev.warnings.insert(ev.warnings.end(), spans.warnings.begin(), spans.warnings.end());
  for (auto& span : spans.spans) {
    ScoredResponseSpan scored{std::move(span), std::nullopt};
    if (scored.span.category == Category::objective)
      scored.cs = be.correctness->score_correctness(images, scored.span.text);
    ev.spans.push_back(std::move(scored));
  }
  return ev;
}

inline json to_json(const ScoreResponse& r) { return {{"logit", r.logit}, {"score", r.score}}; }

inline json to_json(const TraceEvaluation& ev) {
  json retrieval = json::array();
  for (const auto& r : ev.retrieval)
    retrieval.push_back({{"piece_id", r.piece_id}, {"rank", r.rank}, {"rs", to_json(r.rs)}});
  json spans = json::array();
  for (const auto& s : ev.spans) {
    json j = to_json(s.span);
    j["cs"] = s.cs ? to_json(*s.cs) : json(nullptr);
    spans.push_back(std::move(j));
  }
  return {{"query_id", ev.query_id},
          {"retrieval", retrieval},
          {"spans", spans},
          {"partition", to_string(ev.fidelity)},
          {"warnings", ev.warnings}};
}

}  // namespace ragcheck
