#pragma once

#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include "ragcheck/backends.hpp"
#include "ragcheck/content.hpp"
#include "ragcheck/parallel.hpp"
#include "ragcheck/prompts.hpp"
#include "ragcheck/score_math.hpp"

namespace ragcheck {

struct ScoreResponse {
  double logit = 0.0;
  double score = 0.5;  // sigmoid(logit)
};

struct ScoreOptions {
  int retries = 2;
  int max_in_flight = 4;
};

/// Relevance and correctness scoring over one backend, with a response cache
/// keyed by (backend id, prompt hash, image content hashes).
///
/// Concurrent callers asking for the same key share one backend call; the
/// number of simultaneous backend calls never exceeds max_in_flight.
class ScoreService {
 public:
  ScoreService(ScorerBackend& backend, ScoreOptions options = {})
      : backend_(backend), options_(options), slots_(std::max(1, options.max_in_flight)) {}

  ScoreService(const ScoreService&) = delete;
  ScoreService& operator=(const ScoreService&) = delete;

  ScoreResponse score_relevance(const ImageContent& image, const std::string& query) {
    ScoreRequest req;
    req.kind = PromptTemplate::relevance;
    req.statement = query;
    req.prompt = render_rs_prompt(query);
    req.images = {image};
    return dispatch(std::move(req));
  }

  /// Attaches every retrieved image, or only the referenced ones when the
  /// statement carries `<imageN>` tokens (N indexes `retrieved`, 1-based).
  ScoreResponse score_correctness(std::span<const ImageContent> retrieved,
                                  const std::string& statement) {
    if (retrieved.empty()) throw ValidationError("correctness scoring needs at least one image");
    auto prompt = render_cs_prompt(retrieved.size(), statement);
    ScoreRequest req;
    req.kind = PromptTemplate::correctness;
    req.statement = statement;
    req.prompt = std::move(prompt.text);
    if (prompt.reference_scoped) {
      for (auto ref : prompt.refs) {
        if (ref > retrieved.size())
          throw ValidationError("statement references <image" + std::to_string(ref) + "> but only " +
                                std::to_string(retrieved.size()) + " images were retrieved");
        req.images.push_back(retrieved[ref - 1]);
      }
    } else {
      req.images.assign(retrieved.begin(), retrieved.end());
    }
    return dispatch(std::move(req));
  }

  std::size_t cache_size() const {
    std::lock_guard lock(mu_);
    return cache_.size();
  }

  const ScorerBackend& backend() const { return backend_; }

  static std::string cache_key(const ScoreRequest& req) {
    std::string key = req.backend_id + "|" + sha256_hex(req.prompt);
    for (const auto& img : req.images) key += "|" + img.hash;
    return key;
  }

 private:
  ScoreResponse dispatch(ScoreRequest req) {
    req.backend_id = backend_.id();
    auto key = cache_key(req);
    std::promise<ScoreResponse> promise;
    std::shared_future<ScoreResponse> future;
    bool owner = false;
    {
      std::lock_guard lock(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) {
        future = it->second;
      } else {
        future = promise.get_future().share();
        cache_.emplace(key, future);
        owner = true;
      }
    }
    if (!owner) return future.get();
    try {
      double logit = with_retries(options_.retries, [&] {
        slots_.acquire();
        struct Release {
          std::counting_semaphore<>& s;
          ~Release() { s.release(); }
        } release{slots_};
        return backend_.logit(req);
      });
      promise.set_value({logit, sigmoid_score(logit)});
    } catch (...) {
      {
        std::lock_guard lock(mu_);
        cache_.erase(key);  // failures are not cached
      }
      promise.set_exception(std::current_exception());
    }
    return future.get();
  }

  ScorerBackend& backend_;
  ScoreOptions options_;
  std::counting_semaphore<> slots_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_future<ScoreResponse>> cache_;
};

}  // namespace ragcheck
