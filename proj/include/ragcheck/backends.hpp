#pragma once

#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "ragcheck/content.hpp"
#include "ragcheck/error.hpp"
#include "ragcheck/jsonl.hpp"

namespace ragcheck {

enum class PromptTemplate { relevance, correctness };

/// One scoring call: the rendered prompt plus its ordered image attachments.
struct ScoreRequest {
  PromptTemplate kind = PromptTemplate::relevance;
  std::string statement;  // query for relevance, span text for correctness
  std::string prompt;
  std::vector<ImageContent> images;
  std::string backend_id;

  std::vector<std::string> image_refs() const {
    std::vector<std::string> refs;
    refs.reserve(images.size());
    for (const auto& img : images) refs.push_back(img.ref);
    return refs;
  }
};

/// Relevance/correctness scorer. Returns the raw last-position logit.
class ScorerBackend {
 public:
  virtual ~ScorerBackend() = default;
  virtual std::string id() const = 0;
  virtual double logit(const ScoreRequest& request) = 0;
};

/// Maps text and images into one shared embedding space.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string id() const = 0;
  virtual std::vector<double> embed_text(const std::string& text) = 0;
  virtual std::vector<double> embed_image(const ImageContent& image) = 0;
};

/// Text generation, optionally conditioned on attached images (VLM/LLM/MLLM).
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string id() const = 0;
  virtual std::string generate(const std::string& prompt, std::span<const ImageContent> images) = 0;
};

// ---------------------------------------------------------------------------
// Fixture backends

/// Replays a table keyed by (statement, ordered image refs).
class FixtureScorer final : public ScorerBackend {
 public:
  using Key = std::pair<std::string, std::vector<std::string>>;

  explicit FixtureScorer(std::string id = "fixture-scorer") : id_(std::move(id)) {}

  /// Strict mode: a missing key is an error. Otherwise the default logit is replayed.
  void set_default_logit(std::optional<double> logit) { default_logit_ = logit; }

  void add(std::string statement, std::vector<std::string> refs, double logit) {
    Key key{std::move(statement), std::move(refs)};
    if (!table_.emplace(key, logit).second)
      throw ValidationError("duplicate fixture key for statement '" + key.first + "'");
  }

  /// Lines: {"text": ..., "images": [...], "logit": x}
  static std::unique_ptr<FixtureScorer> from_file(const std::filesystem::path& path,
                                                  std::string id) {
    auto scorer = std::make_unique<FixtureScorer>(std::move(id));
    for (const auto& rec : read_jsonl(path)) {
      std::vector<std::string> refs;
      if (rec.value.contains("images")) refs = rec.value["images"].get<std::vector<std::string>>();
      scorer->add(require_string(rec, "text"), std::move(refs), require_number(rec, "logit"));
    }
    return scorer;
  }

  std::string id() const override { return id_; }

  double logit(const ScoreRequest& request) override {
    auto it = table_.find({request.statement, request.image_refs()});
    if (it != table_.end()) return it->second;
    if (default_logit_) return *default_logit_;
    throw ValidationError("fixture scorer has no entry for statement '" + request.statement + "'");
  }

 private:
  std::string id_;
  std::map<Key, double> table_;
  std::optional<double> default_logit_;
};

class FunctionScorer final : public ScorerBackend {
 public:
  FunctionScorer(std::string id, std::function<double(const ScoreRequest&)> fn)
      : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string id() const override { return id_; }
  double logit(const ScoreRequest& request) override { return fn_(request); }

 private:
  std::string id_;
  std::function<double(const ScoreRequest&)> fn_;
};

/// Wraps a backend and records every request that reaches it.
class RecordingScorer final : public ScorerBackend {
 public:
  explicit RecordingScorer(ScorerBackend& inner) : inner_(inner) {}

  std::string id() const override { return inner_.id(); }

  double logit(const ScoreRequest& request) override {
    {
      std::lock_guard lock(mu_);
      requests_.push_back(request);
    }
    return inner_.logit(request);
  }

  std::vector<ScoreRequest> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }
  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return requests_.size();
  }

 private:
  ScorerBackend& inner_;
  mutable std::mutex mu_;
  std::vector<ScoreRequest> requests_;
};

/// Text keyed by the text itself, images keyed by content_ref.
class FixtureEmbedder final : public EmbeddingBackend {
 public:
  explicit FixtureEmbedder(std::string id = "fixture-embedder") : id_(std::move(id)) {}

  void add_text(std::string text, std::vector<double> v) { texts_[std::move(text)] = std::move(v); }
  void add_image(std::string ref, std::vector<double> v) { images_[std::move(ref)] = std::move(v); }

  /// Lines: {"text": ..., "vector": [...]} or {"image": ref, "vector": [...]}
  static std::unique_ptr<FixtureEmbedder> from_file(const std::filesystem::path& path,
                                                    std::string id) {
    auto e = std::make_unique<FixtureEmbedder>(std::move(id));
    for (const auto& rec : read_jsonl(path)) {
      if (!rec.value.contains("vector") || !rec.value["vector"].is_array())
        throw ValidationError("line " + std::to_string(rec.line) + ": missing 'vector'");
      auto v = rec.value["vector"].get<std::vector<double>>();
      if (rec.value.contains("image"))
        e->add_image(require_string(rec, "image"), std::move(v));
      else
        e->add_text(require_string(rec, "text"), std::move(v));
    }
    return e;
  }

  std::string id() const override { return id_; }

  std::vector<double> embed_text(const std::string& text) override {
    auto it = texts_.find(text);
    if (it == texts_.end()) throw ValidationError("fixture embedder has no text '" + text + "'");
    return it->second;
  }

  std::vector<double> embed_image(const ImageContent& image) override {
    auto it = images_.find(image.ref);
    if (it == images_.end())
      throw ValidationError("fixture embedder has no image '" + image.ref + "'");
    return it->second;
  }

 private:
  std::string id_;
  std::map<std::string, std::vector<double>> texts_;
  std::map<std::string, std::vector<double>> images_;
};

/// Ordered replay rules; an absent prompt, substring or image list matches anything.
class FixtureGenerator final : public GenerationBackend {
 public:
  struct Rule {
    std::optional<std::string> prompt;
    std::optional<std::string> contains;  // substring of the prompt
    std::optional<std::vector<std::string>> images;
    std::string text;
  };

  explicit FixtureGenerator(std::string id = "fixture-generator") : id_(std::move(id)) {}

  void add(Rule rule) { rules_.push_back(std::move(rule)); }

  /// Lines: {"prompt"?: ..., "contains"?: ..., "images"?: [...], "text": ...}
  static std::unique_ptr<FixtureGenerator> from_file(const std::filesystem::path& path,
                                                     std::string id) {
    auto g = std::make_unique<FixtureGenerator>(std::move(id));
    for (const auto& rec : read_jsonl(path)) {
      Rule rule;
      if (rec.value.contains("prompt")) rule.prompt = rec.value["prompt"].get<std::string>();
      if (rec.value.contains("contains"))
        rule.contains = rec.value["contains"].get<std::string>();
      if (rec.value.contains("images"))
        rule.images = rec.value["images"].get<std::vector<std::string>>();
      rule.text = require_string(rec, "text");
      g->add(std::move(rule));
    }
    return g;
  }

  std::string id() const override { return id_; }

  std::string generate(const std::string& prompt, std::span<const ImageContent> images) override {
    std::vector<std::string> refs;
    for (const auto& img : images) refs.push_back(img.ref);
    for (const auto& rule : rules_) {
      if (rule.prompt && *rule.prompt != prompt) continue;
      if (rule.contains && prompt.find(*rule.contains) == std::string::npos) continue;
      if (rule.images && *rule.images != refs) continue;
      return rule.text;
    }
    throw ValidationError("fixture generator has no rule for prompt '" + prompt.substr(0, 60) +
                          "'");
  }

 private:
  std::string id_;
  std::vector<Rule> rules_;
};

class FunctionGenerator final : public GenerationBackend {
 public:
  using Fn = std::function<std::string(const std::string&, std::span<const ImageContent>)>;
  FunctionGenerator(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string id() const override { return id_; }
  std::string generate(const std::string& prompt, std::span<const ImageContent> images) override {
    return fn_(prompt, images);
  }

 private:
  std::string id_;
  Fn fn_;
};

// ---------------------------------------------------------------------------
// HTTP backends

struct EndpointConfig {
  std::string base_url;  // scheme://host[:port][/path]
  std::string auth_env;  // name of the env var holding a bearer token; empty for none
  int timeout_ms = 30000;
  int retries = 2;
  int max_in_flight = 4;

  void validate() const {
    if (base_url.empty()) throw ValidationError("endpoint base_url is empty");
    if (timeout_ms <= 0) throw ValidationError("endpoint timeout must be positive");
    if (retries < 0) throw ValidationError("endpoint retry budget must be >= 0");
    if (max_in_flight < 1) throw ValidationError("endpoint max_in_flight must be >= 1");
  }
};

namespace detail {

/// Splits "http://host:port/path" into ("http://host:port", "/path").
inline std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ValidationError("endpoint url lacks a scheme: " + url);
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

/// POSTs a JSON body and parses a JSON reply.
/// Transport failures and 5xx raise EndpointError (retryable); 4xx and
/// non-JSON replies raise MalformedReplyError.
inline json post_json(const EndpointConfig& cfg, const json& body) {
  auto [host, path] = split_url(cfg.base_url);
  httplib::Client client(host);
  auto secs = cfg.timeout_ms / 1000;
  auto usecs = (cfg.timeout_ms % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!cfg.auth_env.empty()) {
    const char* token = std::getenv(cfg.auth_env.c_str());
    if (token == nullptr || *token == '\0')
      throw ValidationError("auth token variable " + cfg.auth_env + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) throw EndpointError(cfg.base_url + ": " + httplib::to_string(res.error()));
  if (res->status >= 500)
    throw EndpointError(cfg.base_url + ": HTTP " + std::to_string(res->status));
  if (res->status >= 400)
    throw MalformedReplyError(cfg.base_url + ": request rejected with HTTP " +
                              std::to_string(res->status));
  try {
    return json::parse(res->body);
  } catch (const json::parse_error&) {
    throw MalformedReplyError(cfg.base_url + ": reply is not JSON");
  }
}

}  // namespace detail

/// POST {prompt, images: [base64]} -> {logit}
class HttpScorer final : public ScorerBackend {
 public:
  HttpScorer(std::string id, EndpointConfig cfg) : id_(std::move(id)), cfg_(std::move(cfg)) {
    cfg_.validate();
  }
  std::string id() const override { return id_; }

  double logit(const ScoreRequest& request) override {
    json images = json::array();
    for (const auto& img : request.images) images.push_back(base64_encode(img.bytes));
    auto reply = detail::post_json(cfg_, {{"prompt", request.prompt}, {"images", images}});
    if (!reply.is_object() || !reply.contains("logit") || !reply["logit"].is_number())
      throw MalformedReplyError(cfg_.base_url + ": reply carries no numeric 'logit'");
    double logit = reply["logit"].get<double>();
    if (!std::isfinite(logit)) throw MalformedReplyError(cfg_.base_url + ": non-finite logit");
    return logit;
  }

 private:
  std::string id_;
  EndpointConfig cfg_;
};

/// POST {text} | {image: base64} -> {vector}
class HttpEmbedder final : public EmbeddingBackend {
 public:
  HttpEmbedder(std::string id, EndpointConfig cfg) : id_(std::move(id)), cfg_(std::move(cfg)) {
    cfg_.validate();
  }
  std::string id() const override { return id_; }

  std::vector<double> embed_text(const std::string& text) override {
    return parse(detail::post_json(cfg_, {{"text", text}}));
  }
  std::vector<double> embed_image(const ImageContent& image) override {
    return parse(detail::post_json(cfg_, {{"image", base64_encode(image.bytes)}}));
  }

 private:
  std::vector<double> parse(const json& reply) const {
    if (!reply.is_object() || !reply.contains("vector") || !reply["vector"].is_array())
      throw MalformedReplyError(cfg_.base_url + ": reply carries no 'vector'");
    std::vector<double> v;
    for (const auto& x : reply["vector"]) {
      if (!x.is_number()) throw MalformedReplyError(cfg_.base_url + ": non-numeric vector entry");
      v.push_back(x.get<double>());
    }
    return v;
  }

  std::string id_;
  EndpointConfig cfg_;
};

/// POST {prompt, images?: [base64]} -> {text}
class HttpGenerator final : public GenerationBackend {
 public:
  HttpGenerator(std::string id, EndpointConfig cfg) : id_(std::move(id)), cfg_(std::move(cfg)) {
    cfg_.validate();
  }
  std::string id() const override { return id_; }

  std::string generate(const std::string& prompt, std::span<const ImageContent> images) override {
    json body{{"prompt", prompt}};
    if (!images.empty()) {
      json arr = json::array();
      for (const auto& img : images) arr.push_back(base64_encode(img.bytes));
      body["images"] = arr;
    }
    auto reply = detail::post_json(cfg_, body);
    if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string())
      throw MalformedReplyError(cfg_.base_url + ": reply carries no 'text'");
    return reply["text"].get<std::string>();
  }

 private:
  std::string id_;
  EndpointConfig cfg_;
};

}  // namespace ragcheck
