#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <httplib.h>

#include "ragcheck/feedback.hpp"
#include "ragcheck/jsonl.hpp"

namespace ragcheck {

struct ServiceOptions {
  std::filesystem::path static_dir;  // annotation UI assets served at /
  std::filesystem::path report;      // report document served at /report
};

/// HTTP front of the feedback store for the annotation UI. Handlers only
/// translate between JSON and store calls.
///
///   GET  /tasks/next?kind=relevance|span_verdict&annotator=ID
///   POST /ratings   {task_id, annotator_id, rating, question_id?, piece_id?}
///   POST /verdicts  {task_id, annotator_id, verdict, question_id?, span_index?}
///   GET  /progress
///   GET  /report
///   GET  /          static UI
class AnnotationService {
 public:
  AnnotationService(FeedbackStore& store, ServiceOptions options)
      : store_(store), options_(std::move(options)) {
    register_routes();
  }

  httplib::Server& server() { return server_; }

  /// Binds to an ephemeral port on `host` and returns it (for tests).
  int bind_ephemeral(const std::string& host = "127.0.0.1") {
    return server_.bind_to_any_port(host);
  }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const TaskNotFound& e) {
      reply(res, 404, {{"error", e.what()}});
    } catch (const TaskConflict& e) {
      reply(res, 409, {{"error", e.what()}});
    } catch (const ValidationError& e) {
      reply(res, 400, {{"error", e.what()}});
    } catch (const json::exception& e) {
      reply(res, 400, {{"error", std::string("bad request body: ") + e.what()}});
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", e.what()}});
    }
  }

  static json parse_body(const httplib::Request& req) {
    try {
      auto body = json::parse(req.body);
      if (!body.is_object()) throw ValidationError("request body must be a JSON object");
      return body;
    } catch (const json::parse_error&) {
      throw ValidationError("request body is not JSON");
    }
  }

  static std::uint64_t task_id_of(const json& body) {
    if (!body.contains("task_id") || !body["task_id"].is_number_unsigned())
      throw ValidationError("task_id is required");
    return body["task_id"].get<std::uint64_t>();
  }

  void register_routes() {
    server_.Get("/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto annotator = req.get_param_value("annotator");
        if (annotator.empty()) throw ValidationError("annotator is required");
        auto kind = parse_task_kind(req.has_param("kind") ? req.get_param_value("kind") : "relevance");
        auto task = store_.next_task(annotator, kind);
        reply(res, 200, {{"task", task ? to_json(*task) : json(nullptr)}});
      });
    });

    server_.Post("/ratings", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto body = parse_body(req);
        if (!body.contains("rating") || !body["rating"].is_number_integer())
          throw ValidationError("rating must be an integer 0..4");
        HumanRating r;
        r.rating = body["rating"].get<int>();
        r.annotator_id = body.value("annotator_id", "");
        r.question_id = body.value("question_id", "");
        r.piece_id = body.value("piece_id", "");
        auto id = store_.submit_rating(task_id_of(body), r);
        reply(res, 200, {{"id", id}});
      });
    });

    server_.Post("/verdicts", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto body = parse_body(req);
        auto task_id = task_id_of(body);
        SpanVerdict v;
        v.verdict = parse_verdict(body.value("verdict", ""));
        v.annotator_id = body.value("annotator_id", "");
        v.question_id = body.value("question_id", "");
        if (body.contains("span_index")) {
          v.span_index = body["span_index"].get<std::size_t>();
        } else {
          auto task = store_.task(task_id);
          if (!task) throw TaskNotFound("unknown task " + std::to_string(task_id));
          v.span_index = task->payload.value("span_index", std::size_t{0});
        }
        auto id = store_.submit_verdict(task_id, v);
        reply(res, 200, {{"id", id}});
      });
    });

    server_.Get("/progress", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        json body = json::object();
        for (const auto& [kind, p] : store_.progress())
          body[kind] = {{"open", p.open}, {"complete", p.complete}, {"closed", p.closed}};
        reply(res, 200, body);
      });
    });

    server_.Get("/report", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        if (options_.report.empty() || !std::filesystem::is_regular_file(options_.report)) {
          reply(res, 404, {{"error", "no report available"}});
          return;
        }
        res.status = 200;
        res.set_content(read_text_file(options_.report), "application/json");
      });
    });

    if (!options_.static_dir.empty() && std::filesystem::is_directory(options_.static_dir)) {
      server_.set_mount_point("/", options_.static_dir.string());
    } else {
      server_.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(
            "<!doctype html><title>ragcheck</title><p>Annotation UI assets are not installed. "
            "The JSON API is available under /tasks/next, /ratings, /verdicts and /progress.</p>",
            "text/html");
      });
    }
  }

  FeedbackStore& store_;
  ServiceOptions options_;
  httplib::Server server_;
};

}  // namespace ragcheck
