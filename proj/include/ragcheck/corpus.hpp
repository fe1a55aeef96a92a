#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ragcheck/content.hpp"
#include "ragcheck/error.hpp"
#include "ragcheck/jsonl.hpp"

namespace ragcheck {

enum class Modality { image, text };

inline const char* to_string(Modality m) { return m == Modality::image ? "image" : "text"; }

inline Modality parse_modality(const std::string& s) {
  if (s == "image") return Modality::image;
  if (s == "text") return Modality::text;
  throw ValidationError("unknown modality '" + s + "'");
}

/// One entry of the enterprise database. For text pieces content_ref holds
/// the inline text; for images it is a path relative to the corpus root.
struct Piece {
  std::string id;
  Modality modality = Modality::image;
  std::string content_ref;
  std::map<std::string, std::string> metadata;
};

class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::filesystem::path root) : root_(std::move(root)) {}

  /// Appends a piece; ids must be unique.
  void add(Piece piece) {
    if (piece.id.empty()) throw ValidationError("piece id is empty");
    if (!by_id_.emplace(piece.id, pieces_.size()).second)
      throw ValidationError("duplicate piece id '" + piece.id + "'");
    pieces_.push_back(std::move(piece));
  }

  const std::vector<Piece>& pieces() const { return pieces_; }
  std::size_t size() const { return pieces_.size(); }
  bool empty() const { return pieces_.empty(); }
  const std::filesystem::path& root() const { return root_; }

  const Piece& at(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw ValidationError("unknown piece id '" + id + "'");
    return pieces_[it->second];
  }
  bool contains(const std::string& id) const { return by_id_.count(id) != 0; }

  /// Raw content of a piece. Text pieces yield their inline text as bytes.
  ImageContent load(const Piece& piece) const {
    if (piece.modality == Modality::text)
      return ImageContent::from_bytes(piece.content_ref, piece.content_ref);
    return ImageContent::load(root_, piece.content_ref);
  }

 private:
  std::filesystem::path root_;
  std::vector<Piece> pieces_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct IngestResult {
  Corpus corpus;
  std::vector<std::string> warnings;
};

/// Reads a line-delimited manifest of {id, modality, content_ref, metadata}
/// records. All problems are collected and reported together, each with its
/// line number.
inline IngestResult ingest_corpus(const std::filesystem::path& manifest,
                                  const std::filesystem::path& corpus_root) {
  IngestResult result{Corpus(corpus_root), {}};
  std::vector<std::string> problems;
  std::vector<NumberedRecord> records;
  {
    std::ifstream in(manifest);
    if (!in) throw ValidationError("cannot open manifest " + manifest.string());
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        records.push_back({n, json::parse(line)});
      } catch (const json::parse_error&) {
        problems.push_back("line " + std::to_string(n) + ": malformed record");
      }
    }
  }
  for (const auto& rec : records) {
    auto where = "line " + std::to_string(rec.line) + ": ";
    try {
      Piece p;
      p.id = require_string(rec, "id");
      p.modality = parse_modality(require_string(rec, "modality"));
      p.content_ref = require_string(rec, "content_ref");
      if (p.content_ref.empty()) throw ValidationError("missing content");
      if (rec.value.contains("metadata")) {
        const auto& md = rec.value["metadata"];
        if (!md.is_object()) throw ValidationError("metadata must be an object");
        for (const auto& [k, v] : md.items())
          p.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
      if (p.modality == Modality::image &&
          !std::filesystem::is_regular_file(corpus_root / p.content_ref))
        throw ValidationError("missing content: " + p.content_ref);
      if (result.corpus.contains(p.id)) throw ValidationError("duplicate id '" + p.id + "'");
      result.corpus.add(std::move(p));
    } catch (const ValidationError& e) {
      std::string msg = e.what();
      problems.push_back(msg.rfind("line ", 0) == 0 ? msg : where + msg);
    }
  }
  if (!problems.empty()) {
    std::string msg = manifest.string() + ": ";
    for (std::size_t i = 0; i < problems.size(); ++i) msg += (i ? "; " : "") + problems[i];
    throw ValidationError(msg);
  }
  if (result.corpus.empty()) result.warnings.push_back("manifest is empty: corpus has no pieces");
  return result;
}

// ---------------------------------------------------------------------------

/// A dense embedding. `normalized` marks vectors known to have unit norm.
struct EmbeddingVector {
  std::vector<double> values;
  bool normalized = false;

  std::size_t dimension() const { return values.size(); }

  double norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }

  /// Unit-norm copy; zero or non-finite vectors are rejected.
  static EmbeddingVector unit(std::vector<double> values) {
    EmbeddingVector v{std::move(values), false};
    double n = v.norm();
    if (!std::isfinite(n)) throw ValidationError("embedding has non-finite entries");
    if (n == 0.0) throw ValidationError("zero vector cannot be normalized");
    for (double& x : v.values) x /= n;
    v.normalized = true;
    return v;
  }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// dot(a,b) / (|a||b|); a plain dot product when both are normalized.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension())
    throw ValidationError("cosine_similarity: dimension mismatch (" +
                          std::to_string(a.dimension()) + " vs " + std::to_string(b.dimension()) +
                          ")");
  if (a.normalized && b.normalized) return dot(a.values, b.values);
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw ValidationError("cosine_similarity: zero-norm input");
  return dot(a.values, b.values) / (na * nb);
}

}  // namespace ragcheck
