#pragma once

#include <algorithm>
#include <exception>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "ragcheck/backends.hpp"
#include "ragcheck/corpus.hpp"
#include "ragcheck/parallel.hpp"
#include "ragcheck/score_service.hpp"

namespace ragcheck {

struct IndexEntry {
  std::string piece_id;
  EmbeddingVector vector;  // unit norm
};

/// Immutable vector database: one unit-normalized embedding per piece, in
/// corpus insertion order.
class VectorIndex {
 public:
  VectorIndex(std::size_t dimension, std::vector<IndexEntry> entries)
      : dimension_(dimension), entries_(std::move(entries)) {
    if (dimension_ == 0) throw ValidationError("index dimension must be positive");
    for (const auto& e : entries_) {
      if (e.vector.dimension() != dimension_)
        throw ValidationError("index entry '" + e.piece_id + "' has dimension " +
                              std::to_string(e.vector.dimension()) + ", expected " +
                              std::to_string(dimension_));
      if (!e.vector.normalized)
        throw ValidationError("index entry '" + e.piece_id + "' is not normalized");
    }
  }

  std::size_t dimension() const { return dimension_; }
  const std::vector<IndexEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// First line {"dimension": d}, then {"piece_id": ..., "vector": [...]} per entry.
  void save(const std::filesystem::path& path) const {
    std::vector<json> lines;
    lines.push_back({{"dimension", dimension_}});
    for (const auto& e : entries_) lines.push_back({{"piece_id", e.piece_id}, {"vector", e.vector.values}});
    write_jsonl(path, lines);
  }

  static VectorIndex load(const std::filesystem::path& path) {
    auto records = read_jsonl(path);
    if (records.empty() || !records[0].value.contains("dimension"))
      throw ValidationError(path.string() + ": missing index header");
    auto dim = records[0].value["dimension"].get<std::size_t>();
    std::vector<IndexEntry> entries;
    for (std::size_t i = 1; i < records.size(); ++i) {
      EmbeddingVector v{records[i].value.at("vector").get<std::vector<double>>(), true};
      if (std::abs(v.norm() - 1.0) > 1e-6)
        throw ValidationError(path.string() + ":" + std::to_string(records[i].line) +
                              ": stored vector is not unit norm");
      entries.push_back({require_string(records[i], "piece_id"), std::move(v)});
    }
    return VectorIndex(dim, std::move(entries));
  }

 private:
  std::size_t dimension_;
  std::vector<IndexEntry> entries_;
};

struct BuildOptions {
  int retries = 2;
  int max_in_flight = 4;
};

/// Embeds every piece (images and text into the same space), unit-normalizes
/// and stores it. Any embedder failure that survives the retry budget aborts
/// the build.
inline VectorIndex build_index(const Corpus& corpus, EmbeddingBackend& embedder,
                               BuildOptions options = {}) {
  const auto& pieces = corpus.pieces();
  std::vector<std::vector<double>> raw(pieces.size());
  auto failures = bounded_parallel_for(pieces.size(), options.max_in_flight, [&](std::size_t i) {
    const auto& p = pieces[i];
    raw[i] = with_retries(options.retries, [&] {
      return p.modality == Modality::text ? embedder.embed_text(p.content_ref)
                                          : embedder.embed_image(corpus.load(p));
    });
  });
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  if (pieces.empty()) throw ValidationError("cannot build an index over an empty corpus");

  std::size_t dim = raw.front().size();
  std::vector<IndexEntry> entries;
  entries.reserve(pieces.size());
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (raw[i].size() != dim)
      throw ValidationError("embedding dimension mismatch: piece '" + pieces[i].id + "' has " +
                            std::to_string(raw[i].size()) + ", expected " + std::to_string(dim));
    try {
      entries.push_back({pieces[i].id, EmbeddingVector::unit(std::move(raw[i]))});
    } catch (const ValidationError& e) {
      throw ValidationError("piece '" + pieces[i].id + "': " + e.what());
    }
  }
  return VectorIndex(dim, std::move(entries));
}

struct RetrievalResult {
  std::string piece_id;
  double similarity = 0.0;  // cosine in [-1,1] or RS in [0,1], per strategy
  std::size_t rank = 0;     // 1-based
};

namespace detail {

/// Orders (score, insertion position) pairs by descending score, then
/// ascending position, and keeps the first k.
inline std::vector<std::size_t> top_k_positions(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  auto keep = std::min(k, order.size());
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    better);
  order.resize(keep);
  return order;
}

}  // namespace detail

/// The k entries with the highest cosine similarity to the query. Ties go to
/// the earlier-inserted entry.
inline std::vector<RetrievalResult> top_k_select(const VectorIndex& index,
                                                 const EmbeddingVector& query, std::size_t k) {
  if (k < 1) throw ValidationError("top_k_select: k must be >= 1");
  if (index.size() == 0) throw ValidationError("top_k_select: index is empty");
  if (query.dimension() != index.dimension())
    throw ValidationError("top_k_select: query dimension " + std::to_string(query.dimension()) +
                          " does not match index dimension " + std::to_string(index.dimension()));
  auto q = query.normalized ? query : EmbeddingVector::unit(query.values);
  std::vector<double> scores;
  scores.reserve(index.size());
  for (const auto& e : index.entries()) scores.push_back(dot(e.vector.values, q.values));
  std::vector<RetrievalResult> out;
  std::size_t rank = 0;
  for (auto pos : detail::top_k_positions(scores, k))
    out.push_back({index.entries()[pos].piece_id, scores[pos], ++rank});
  return out;
}

/// Relevance-scorer contract used by RS rescoring: a score in [0,1] for one
/// (query, piece) pair.
class RelevanceScorer {
 public:
  virtual ~RelevanceScorer() = default;
  virtual double relevance(const std::string& query, const Piece& piece) = 0;
};

/// RS from a ScoreService: sigmoid of the backend's logit for the piece's image.
class ServiceRelevanceScorer final : public RelevanceScorer {
 public:
  ServiceRelevanceScorer(ScoreService& service, const Corpus& corpus)
      : service_(service), corpus_(corpus) {}

  double relevance(const std::string& query, const Piece& piece) override {
    if (piece.modality != Modality::image)
      throw ValidationError("piece '" + piece.id + "' is not an image; relevance scoring needs one");
    return service_.score_relevance(corpus_.load(piece), query).score;
  }

 private:
  ScoreService& service_;
  const Corpus& corpus_;
};

/// Fixed score per piece id, ignoring the query.
class TableRelevanceScorer final : public RelevanceScorer {
 public:
  explicit TableRelevanceScorer(std::map<std::string, double> scores) : scores_(std::move(scores)) {}
  double relevance(const std::string&, const Piece& piece) override {
    auto it = scores_.find(piece.id);
    if (it == scores_.end()) throw ValidationError("no relevance score for piece '" + piece.id + "'");
    return it->second;
  }

 private:
  std::map<std::string, double> scores_;
};

struct RescoreOptions {
  int max_in_flight = 4;
};

/// Scores every (query, piece) pair with the relevance scorer and keeps the k
/// highest. This costs one scorer call per piece instead of a dot product.
inline std::vector<RetrievalResult> rescore_select(const Corpus& corpus, const std::string& query,
                                                   RelevanceScorer& scorer, std::size_t k,
                                                   RescoreOptions options = {}) {
  if (k < 1) throw ValidationError("rescore_select: k must be >= 1");
  if (corpus.empty()) throw ValidationError("rescore_select: corpus is empty");
  const auto& pieces = corpus.pieces();
  std::vector<double> scores(pieces.size(), 0.0);
  auto failures = bounded_parallel_for(pieces.size(), options.max_in_flight, [&](std::size_t i) {
    double s = scorer.relevance(query, pieces[i]);
    if (!(s >= 0.0 && s <= 1.0))
      throw ValidationError("score outside [0,1] for piece '" + pieces[i].id + "': " +
                            std::to_string(s));
    scores[i] = s;
  });
  std::vector<std::string> unscored;
  std::exception_ptr first;
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i]) continue;
    unscored.push_back(pieces[i].id);
    if (!first) first = failures[i];
  }
  if (first) {
    std::string detail;
    ErrorKind kind = ErrorKind::internal;
    try {
      std::rethrow_exception(first);
    } catch (const Error& e) {
      detail = e.what();
      kind = e.kind();
    } catch (const std::exception& e) {
      detail = e.what();
    }
    std::string ids;
    for (std::size_t i = 0; i < unscored.size(); ++i) ids += (i ? "," : "") + unscored[i];
    throw Error(kind, "partial scoring: unscored pieces [" + ids + "]: " + detail);
  }
  std::vector<RetrievalResult> out;
  std::size_t rank = 0;
  for (auto pos : detail::top_k_positions(scores, k))
    out.push_back({pieces[pos].id, scores[pos], ++rank});
  return out;
}

}  // namespace ragcheck
