#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ragcheck/config.hpp"
#include "ragcheck/corpus.hpp"
#include "ragcheck/evaluate.hpp"
#include "ragcheck/feedback.hpp"
#include "ragcheck/index.hpp"
#include "ragcheck/lexicon.hpp"
#include "ragcheck/metrics.hpp"
#include "ragcheck/pipeline.hpp"
#include "ragcheck/report.hpp"
#include "ragcheck/service.hpp"

namespace ragcheck::cli {

namespace fs = std::filesystem;

/// Reads scores from a line-delimited file: each line a bare number or {"score": x}.
inline std::vector<double> read_scores(const fs::path& path) {
  std::vector<double> out;
  for (const auto& rec : read_jsonl(path)) {
    if (rec.value.is_number())
      out.push_back(rec.value.get<double>());
    else
      out.push_back(require_number(rec, "score"));
  }
  return out;
}

inline std::vector<HumanRating> read_ratings(const fs::path& path) {
  std::vector<HumanRating> out;
  for (const auto& rec : read_jsonl(path)) {
    HumanRating r;
    r.question_id = require_string(rec, "question_id");
    r.piece_id = require_string(rec, "piece_id");
    r.rating = static_cast<int>(require_number(rec, "rating"));
    r.annotator_id = rec.value.value("annotator_id", "");
    r.timestamp = rec.value.value("timestamp", "");
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<SpanVerdict> read_verdicts(const fs::path& path) {
  std::vector<SpanVerdict> out;
  for (const auto& rec : read_jsonl(path)) {
    SpanVerdict v;
    v.question_id = require_string(rec, "question_id");
    v.span_index = static_cast<std::size_t>(require_number(rec, "span_index"));
    v.verdict = parse_verdict(require_string(rec, "verdict"));
    v.annotator_id = rec.value.value("annotator_id", "");
    out.push_back(std::move(v));
  }
  return out;
}

inline ScoreTable read_score_table(const fs::path& path) {
  ScoreTable table;
  for (const auto& rec : read_jsonl(path)) {
    double s = require_number(rec, "score");
    if (!table.emplace(std::pair(require_string(rec, "question_id"), require_string(rec, "piece_id")), s)
             .second)
      throw ValidationError("line " + std::to_string(rec.line) + ": duplicate score");
  }
  return table;
}

inline std::vector<json> read_records(const fs::path& path) {
  std::vector<json> out;
  for (auto& rec : read_jsonl(path)) out.push_back(std::move(rec.value));
  return out;
}

/// Spans and their CS from evaluation records, for config comparison.
inline std::vector<ScoredSpan> scored_spans(const std::vector<json>& evaluations) {
  std::vector<ScoredSpan> out;
  for (const auto& ev : evaluations)
    for (const auto& s : ev.at("spans")) {
      ScoredSpan span;
      span.category = s.at("category") == "subjective" ? Category::subjective : Category::objective;
      if (span.category == Category::objective) span.cs = s.at("cs").at("score").get<double>();
      out.push_back(span);
    }
  return out;
}

inline void write_output(const std::optional<fs::path>& path, const std::string& text,
                         std::ostream& out) {
  if (path)
    write_text_file(*path, text);
  else
    out << text;
}

/// Entry point shared by the ragcheck binary and the tests.
/// Returns 0 on success, 1 on validation errors, 2 on endpoint failures and
/// 3 on internal errors; errors are reported as one JSON line on `err`.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ragcheck: relevancy and correctness evaluation for multimodal RAG"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "Harness configuration file (or RAGCHECK_CONFIG)");

  auto load_config = [&]() -> HarnessConfig {
    std::string p = config_path;
    if (p.empty())
      if (const char* env = std::getenv("RAGCHECK_CONFIG")) p = env;
    if (p.empty()) throw ValidationError("no configuration: pass --config or set RAGCHECK_CONFIG");
    return HarnessConfig::load(p);
  };

  auto load_lexicon = [&](const std::string& flag, const HarnessConfig* cfg) -> MarkerLexicon {
    if (!flag.empty()) return MarkerLexicon::load(flag);
    if (cfg && !cfg->lexicon.empty()) return MarkerLexicon::load(cfg->lexicon);
    return default_lexicon();
  };

  std::function<void()> action;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a corpus manifest");
  std::string manifest_flag, root_flag;
  ingest->add_option("--manifest", manifest_flag, "Manifest file (overrides config)");
  ingest->add_option("--corpus-root", root_flag, "Corpus root (overrides config)");
  ingest->callback([&] {
    action = [&] {
      fs::path manifest = manifest_flag, root = root_flag;
      if (manifest.empty() || root.empty()) {
        auto cfg = load_config();
        if (manifest.empty()) manifest = cfg.manifest;
        if (root.empty()) root = cfg.corpus_root;
      }
      auto result = ingest_corpus(manifest, root);
      std::size_t images = 0;
      for (const auto& p : result.corpus.pieces()) images += p.modality == Modality::image;
      out << json{{"pieces", result.corpus.size()},
                  {"images", images},
                  {"texts", result.corpus.size() - images},
                  {"warnings", result.warnings}}
                 .dump()
          << "\n";
    };
  });

  // index
  auto* index_cmd = app.add_subcommand("index", "Embed the corpus and write the vector index");
  std::string index_out;
  index_cmd->add_option("--out", index_out, "Index file (overrides config)");
  index_cmd->callback([&] {
    action = [&] {
      auto cfg = load_config();
      auto corpus = ingest_corpus(cfg.manifest, cfg.corpus_root).corpus;
      auto backends = BackendSet::from_config(cfg);
      if (!backends.embedder) throw ValidationError("no [embedder] endpoint configured");
      auto index = build_index(corpus, *backends.embedder, {cfg.rag.retries, cfg.rag.max_in_flight});
      fs::path dest = index_out.empty() ? cfg.index : fs::path(index_out);
      if (dest.empty()) throw ValidationError("no index path: set [paths] index or pass --out");
      index.save(dest);
      out << json{{"entries", index.size()}, {"dimension", index.dimension()}, {"path", dest.string()}}
                 .dump()
          << "\n";
    };
  });

  // retrieve
  auto* retrieve = app.add_subcommand("retrieve", "Select the top-k pieces for a query");
  std::string query;
  std::size_t k_flag = 0;
  std::string strategy_flag;
  retrieve->add_option("--query", query, "Query text")->required();
  retrieve->add_option("--k", k_flag, "Number of pieces (overrides config)");
  retrieve->add_option("--strategy", strategy_flag, "cosine_topk or rs_rescoring");
  retrieve->callback([&] {
    action = [&] {
      auto cfg = load_config();
      std::size_t k = k_flag ? k_flag : cfg.rag.k;
      auto strategy = strategy_flag.empty() ? cfg.rag.selection : parse_selection(strategy_flag);
      auto corpus = ingest_corpus(cfg.manifest, cfg.corpus_root).corpus;
      auto backends = BackendSet::from_config(cfg);
      std::vector<RetrievalResult> results;
      if (strategy == SelectionStrategy::cosine_topk) {
        if (!backends.embedder) throw ValidationError("no [embedder] endpoint configured");
        auto index = VectorIndex::load(cfg.index);
        auto q = with_retries(cfg.rag.retries, [&] { return backends.embedder->embed_text(query); });
        results = top_k_select(index, EmbeddingVector::unit(std::move(q)), k);
      } else {
        if (!backends.rs) throw ValidationError("no [rs] endpoint configured");
        ScoreService service(*backends.rs, {cfg.rag.retries, cfg.rag.max_in_flight});
        ServiceRelevanceScorer scorer(service, corpus);
        results = rescore_select(corpus, query, scorer, k, {cfg.rag.max_in_flight});
      }
      for (const auto& r : results) out << fmt::format("{}\t{}\t{:.6f}\n", r.rank, r.piece_id, r.similarity);
    };
  });

  // run
  auto* run_cmd = app.add_subcommand("run", "Run the RAG pipeline over a query file");
  std::string queries_path, traces_out;
  run_cmd->add_option("--queries", queries_path, "Queries: lines of {query_id, query}")->required();
  run_cmd->add_option("--out", traces_out, "Trace file to write")->required();
  run_cmd->add_option("--k", k_flag, "Number of pieces (overrides config)");
  run_cmd->add_option("--strategy", strategy_flag, "cosine_topk or rs_rescoring");
  std::string mode_flag;
  run_cmd->add_option("--mode", mode_flag, "per_piece_vlm_then_llm or direct_mllm");
  run_cmd->callback([&] {
    action = [&] {
      auto cfg = load_config();
      if (k_flag) cfg.rag.k = k_flag;
      if (!strategy_flag.empty()) cfg.rag.selection = parse_selection(strategy_flag);
      if (!mode_flag.empty()) cfg.rag.generation_mode = parse_generation_mode(mode_flag);
      auto corpus = ingest_corpus(cfg.manifest, cfg.corpus_root).corpus;
      auto backends = BackendSet::from_config(cfg);
      std::optional<VectorIndex> index;
      if (cfg.rag.selection == SelectionStrategy::cosine_topk) index = VectorIndex::load(cfg.index);
      std::optional<ScoreService> rs_service;
      std::optional<ServiceRelevanceScorer> rs_scorer;
      RagEndpoints ep{backends.embedder.get(), nullptr, backends.vlm.get(), backends.llm.get(),
                      backends.mllm.get()};
      if (cfg.rag.selection == SelectionStrategy::rs_rescoring) {
        if (!backends.rs) throw ValidationError("no [rs] endpoint configured");
        rs_service.emplace(*backends.rs, ScoreOptions{cfg.rag.retries, cfg.rag.max_in_flight});
        rs_scorer.emplace(*rs_service, corpus);
        ep.relevance = &*rs_scorer;
      }
      std::vector<json> traces;
      std::optional<ErrorKind> failure;
      std::size_t failed = 0;
      for (const auto& rec : read_jsonl(queries_path)) {
        auto trace = run_query(require_string(rec, "query_id"), require_string(rec, "query"), corpus,
                               index ? &*index : nullptr, cfg.rag, ep);
        if (!trace.ok()) {
          ++failed;
          if (!failure) failure = trace.error->kind;
        }
        traces.push_back(to_json(trace));
      }
      write_jsonl(traces_out, traces);
      out << json{{"queries", traces.size()}, {"ok", traces.size() - failed}, {"failed", failed}}.dump()
          << "\n";
      if (failure) throw Error(*failure, std::to_string(failed) + " queries failed; see " + traces_out);
    };
  });

  // score
  auto* score = app.add_subcommand("score", "Compute RS and CS for every trace");
  std::string traces_path, evals_out, lexicon_flag;
  score->add_option("--traces", traces_path, "Trace file from `run`")->required();
  score->add_option("--out", evals_out, "Evaluation file to write")->required();
  score->add_option("--lexicon", lexicon_flag, "Marker lexicon (overrides config)");
  score->callback([&] {
    action = [&] {
      auto cfg = load_config();
      auto corpus = ingest_corpus(cfg.manifest, cfg.corpus_root).corpus;
      auto backends = BackendSet::from_config(cfg);
      if (!backends.rs || !backends.cs) throw ValidationError("[rs] and [cs] endpoints are required");
      auto lexicon = load_lexicon(lexicon_flag, &cfg);
      ScoreService rs(*backends.rs, {cfg.rag.retries, cfg.rag.max_in_flight});
      ScoreService cs(*backends.cs, {cfg.rag.retries, cfg.rag.max_in_flight});
      EvaluationBackends be{&rs, &cs, &lexicon, backends.rewriter.get()};
      std::vector<json> evals;
      std::size_t skipped = 0;
      for (const auto& rec : read_jsonl(traces_path)) {
        auto trace = trace_from_json(rec.value);
        if (!trace.ok()) {
          ++skipped;
          continue;
        }
        evals.push_back(to_json(evaluate_trace(trace, corpus, be)));
      }
      write_jsonl(evals_out, evals);
      out << json{{"evaluated", evals.size()}, {"skipped_failed_traces", skipped}}.dump() << "\n";
    };
  });

  // spans
  auto* spans_cmd = app.add_subcommand("spans", "Partition and categorize a response");
  std::string response_text;
  bool use_rewriter = false;
  spans_cmd->add_option("--response", response_text, "Response text")->required();
  spans_cmd->add_option("--lexicon", lexicon_flag, "Marker lexicon file");
  spans_cmd->add_flag("--rewrite", use_rewriter, "Use the configured [rewriter] endpoint");
  spans_cmd->callback([&] {
    action = [&] {
      std::optional<HarnessConfig> cfg;
      if (use_rewriter || (!config_path.empty() && lexicon_flag.empty())) cfg = load_config();
      auto lexicon = load_lexicon(lexicon_flag, cfg ? &*cfg : nullptr);
      BackendSet backends;
      if (use_rewriter) {
        backends = BackendSet::from_config(*cfg);
        if (!backends.rewriter) throw ValidationError("no [rewriter] endpoint configured");
      }
      auto set = process_response(response_text, lexicon, backends.rewriter.get());
      json spans = json::array();
      for (const auto& s : set.spans) spans.push_back(to_json(s));
      out << json{{"partition", to_string(set.fidelity)}, {"spans", spans}, {"warnings", set.warnings}}
                 .dump(2)
          << "\n";
    };
  });

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Sweep labeler thresholds and pick eta*");
  std::vector<std::string> score_files;
  double step = 0.01;
  std::string model_name = "model", metric_out;
  calibrate->add_option("--scores", score_files, "Positive then negative score files")
      ->required()
      ->expected(2);
  calibrate->add_option("--step", step, "Threshold grid step");
  calibrate->add_option("--model", model_name, "Model name for the report");
  calibrate->add_option("--out", metric_out, "Write the curve and operating point here");
  calibrate->callback([&] {
    action = [&] {
      auto pos = read_scores(score_files.at(0));
      auto neg = read_scores(score_files.at(1));
      auto curve = sweep_thresholds(pos, neg, step);
      auto best = optimize_threshold(curve);
      if (!metric_out.empty()) {
        json pts = json::array();
        for (const auto& p : curve) pts.push_back(to_json(p));
        write_text_file(metric_out, json{{"kind", "calibration"},
                                         {"model", model_name},
                                         {"operating_point", to_json(best)},
                                         {"curve", pts}}
                                        .dump(2) +
                                        "\n");
      }
      out << fmt::format("eta*={:.4f} true0={:.4f} true1={:.4f} accuracy={:.4f}\n", best.threshold,
                         best.true0, best.true1, best.accuracy);
    };
  });

  // align
  auto* align = app.add_subcommand("align", "Pairwise alignment of scores with human ratings");
  std::string ratings_path, scores_path, method_name = "scorer";
  align->add_option("--ratings", ratings_path, "Human ratings file")->required();
  align->add_option("--scores", scores_path, "Lines of {question_id, piece_id, score}")->required();
  align->add_option("--method", method_name, "Scoring method name for the report");
  align->add_option("--out", metric_out, "Write the metric document here");
  align->callback([&] {
    action = [&] {
      auto result = alignment_reward(read_ratings(ratings_path), read_score_table(scores_path));
      if (!metric_out.empty())
        write_text_file(metric_out,
                        json{{"kind", "alignment"}, {"method", method_name}, {"result", to_json(result)}}
                                .dump(2) +
                            "\n");
      out << fmt::format(
          "weighted_match={:.4f} pairs_considered={} pairs_disregarded={} raw_reward={} "
          "max_reward={} question_mean={:.4f}\n",
          result.weighted_match, result.pairs_considered, result.pairs_disregarded, result.raw_reward,
          result.max_reward, result.question_mean);
    };
  });

  // overlap
  auto* overlap = app.add_subcommand("overlap", "Agreement of CS labels with human span verdicts");
  std::string verdicts_path, evaluations_path;
  double cs_threshold_flag = -1.0;
  overlap->add_option("--verdicts", verdicts_path, "Human span verdicts")->required();
  overlap->add_option("--evaluations", evaluations_path, "Evaluation file from `score`")->required();
  overlap->add_option("--threshold", cs_threshold_flag, "CS labeler threshold (default 0.7)");
  overlap->add_option("--out", metric_out, "Write the metric document here");
  overlap->callback([&] {
    action = [&] {
      double eta = cs_threshold_flag >= 0 ? cs_threshold_flag : 0.7;
      LabelerConfig{eta, "correct"}.validate();
      std::vector<HarnessSpanOutput> outputs;
      for (const auto& ev : read_records(evaluations_path))
        for (const auto& s : ev.at("spans")) {
          HarnessSpanOutput o;
          o.question_id = ev.at("query_id").get<std::string>();
          o.span_index = s.at("index").get<std::size_t>();
          o.category = s.at("category") == "subjective" ? Category::subjective : Category::objective;
          if (o.category == Category::objective) o.labeled_correct = s.at("cs").at("score").get<double>() >= eta;
          outputs.push_back(o);
        }
      auto verdicts = read_verdicts(verdicts_path);
      double fraction = cs_human_overlap(verdicts, outputs);
      if (!metric_out.empty())
        write_text_file(metric_out, json{{"kind", "overlap"}, {"fraction", fraction}, {"verdicts", verdicts.size()}}
                                            .dump(2) +
                                        "\n");
      out << fmt::format("overlap={:.4f} verdicts={}\n", fraction, verdicts.size());
    };
  });

  // profile
  auto* profile = app.add_subcommand("profile", "Average RS per retrieval rank");
  std::string selection_name = "selection";
  profile->add_option("--evaluations", evaluations_path, "Evaluation file from `score`")->required();
  profile->add_option("--selection", selection_name, "Selection method name for the report");
  profile->add_option("--out", metric_out, "Write the metric document here");
  profile->callback([&] {
    action = [&] {
      std::vector<std::vector<double>> rows;
      for (const auto& ev : read_records(evaluations_path)) {
        std::vector<double> row;
        for (const auto& r : ev.at("retrieval")) row.push_back(r.at("rs").at("score").get<double>());
        rows.push_back(std::move(row));
      }
      auto avg = rank_profile(rows);
      if (!metric_out.empty())
        write_text_file(metric_out,
                        json{{"kind", "rank_profile"}, {"selection", selection_name}, {"average_rs", avg}}
                                .dump(2) +
                            "\n");
      for (std::size_t r = 0; r < avg.size(); ++r) out << fmt::format("{}\t{:.6f}\n", r + 1, avg[r]);
    };
  });

  // compare
  auto* compare = app.add_subcommand("compare", "Average CS over objective spans per configuration");
  std::vector<std::string> run_specs;
  compare->add_option("--run", run_specs, "NAME=evaluations.jsonl (repeatable)")->required();
  compare->add_option("--out", metric_out, "Write the metric document here");
  compare->callback([&] {
    action = [&] {
      std::map<std::string, std::vector<ScoredSpan>> runs;
      for (const auto& spec : run_specs) {
        auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) throw ValidationError("--run expects NAME=FILE, got " + spec);
        auto& spans = runs[spec.substr(0, eq)];
        auto more = scored_spans(read_records(spec.substr(eq + 1)));
        spans.insert(spans.end(), more.begin(), more.end());
      }
      auto averages = config_comparison(runs);
      if (!metric_out.empty())
        write_text_file(metric_out, json{{"kind", "comparison"}, {"averages", averages}}.dump(2) + "\n");
      for (const auto& [name, avg] : averages) out << fmt::format("{}\t{:.6f}\n", name, avg);
    };
  });

  // report
  auto* report = app.add_subcommand("report", "Assemble metric documents into a report");
  std::vector<std::string> inputs;
  std::string report_out, text_out;
  report->add_option("--inputs", inputs, "Metric documents written by other subcommands")->required();
  report->add_option("--out", report_out, "Report JSON (stdout when omitted)");
  report->add_option("--text", text_out, "Rendered text tables");
  report->callback([&] {
    action = [&] {
      ReportInputs in;
      for (const auto& p : inputs) {
        try {
          merge_metric(in, json::parse(read_text_file(p)));
        } catch (const json::exception& e) {
          throw ValidationError(p + ": " + e.what());
        }
      }
      auto rep = emit_report(in);
      write_output(report_out.empty() ? std::nullopt : std::optional<fs::path>(report_out),
                   rep.document.dump(2) + "\n", out);
      if (!text_out.empty()) write_text_file(text_out, rep.text);
    };
  });

  // tasks
  auto* tasks = app.add_subcommand("tasks", "Enqueue annotation tasks from traces or evaluations");
  tasks->add_option("--traces", traces_path, "Trace file: one relevance task per retrieved piece");
  tasks->add_option("--evaluations", evaluations_path, "Evaluation file: one verdict task per span");
  tasks->callback([&] {
    action = [&] {
      auto cfg = load_config();
      if (traces_path.empty() && evaluations_path.empty())
        throw ValidationError("pass --traces and/or --evaluations");
      FeedbackStore store(cfg.data_dir);
      std::size_t relevance = 0, verdicts = 0;
      std::map<std::string, RagTrace> by_query;
      if (!traces_path.empty()) {
        auto corpus = ingest_corpus(cfg.manifest, cfg.corpus_root).corpus;
        for (const auto& rec : read_jsonl(traces_path)) {
          auto t = trace_from_json(rec.value);
          if (!t.ok()) continue;
          for (const auto& r : t.retrieved) {
            store.add_task(TaskKind::relevance, {{"question_id", t.query_id},
                                                 {"query", t.query},
                                                 {"piece_id", r.piece_id},
                                                 {"image_ref", corpus.at(r.piece_id).content_ref}});
            ++relevance;
          }
          by_query[t.query_id] = std::move(t);
        }
      }
      if (!evaluations_path.empty()) {
        for (const auto& ev : read_records(evaluations_path)) {
          auto qid = ev.at("query_id").get<std::string>();
          std::vector<std::string> refs;
          if (auto it = by_query.find(qid); it != by_query.end())
            for (const auto& r : it->second.retrieved) refs.push_back(r.piece_id);
          for (const auto& s : ev.at("spans")) {
            store.add_task(TaskKind::span_verdict, {{"question_id", qid},
                                                    {"span_index", s.at("index")},
                                                    {"span_text", s.at("text")},
                                                    {"context_refs", refs}});
            ++verdicts;
          }
        }
      }
      out << json{{"relevance_tasks", relevance}, {"span_verdict_tasks", verdicts}}.dump() << "\n";
    };
  });

  // export
  auto* export_cmd = app.add_subcommand("export", "Export the feedback store");
  std::string bundle_out, ratings_out, verdicts_out;
  export_cmd->add_option("--out", bundle_out, "Bundle file (stdout when omitted)");
  export_cmd->add_option("--ratings", ratings_out, "Also write current ratings as line records");
  export_cmd->add_option("--verdicts", verdicts_out, "Also write current verdicts as line records");
  export_cmd->callback([&] {
    action = [&] {
      auto cfg = load_config();
      FeedbackStore store(cfg.data_dir);
      write_output(bundle_out.empty() ? std::nullopt : std::optional<fs::path>(bundle_out),
                   store.export_bundle().dump(2) + "\n", out);
      if (!ratings_out.empty()) {
        std::vector<json> lines;
        for (const auto& r : store.ratings())
          lines.push_back({{"question_id", r.question_id},
                           {"piece_id", r.piece_id},
                           {"rating", r.rating},
                           {"annotator_id", r.annotator_id},
                           {"timestamp", r.timestamp}});
        write_jsonl(ratings_out, lines);
      }
      if (!verdicts_out.empty()) {
        std::vector<json> lines;
        for (const auto& v : store.verdicts())
          lines.push_back({{"question_id", v.question_id},
                           {"span_index", v.span_index},
                           {"verdict", to_string(v.verdict)},
                           {"annotator_id", v.annotator_id},
                           {"timestamp", v.timestamp}});
        write_jsonl(verdicts_out, lines);
      }
    };
  });

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the annotation API and UI");
  std::string listen_flag, report_path;
  serve->add_option("--listen", listen_flag, "host:port (overrides config)");
  serve->add_option("--report", report_path, "Report document served at /report");
  serve->callback([&] {
    action = [&] {
      auto cfg = load_config();
      auto listen = listen_flag.empty() ? cfg.listen : listen_flag;
      auto colon = listen.rfind(':');
      if (colon == std::string::npos) throw ValidationError("listen address must be host:port");
      FeedbackStore store(cfg.data_dir);
      AnnotationService service(store, {cfg.static_dir, report_path});
      auto host = listen.substr(0, colon);
      int port = std::stoi(listen.substr(colon + 1));
      err << "serving on " << host << ":" << port << "\n";
      if (!service.listen(host, port)) throw Error(ErrorKind::internal, "cannot listen on " + listen);
    };
  });

  auto fail = [&](ErrorKind kind, const std::string& message) {
    err << json{{"error", to_string(kind)}, {"message", message}}.dump() << "\n";
    return exit_code(kind);
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : exit_code(ErrorKind::validation);
  }
  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    return fail(e.kind(), e.what());
  } catch (const json::exception& e) {
    return fail(ErrorKind::validation, e.what());
  } catch (const std::exception& e) {
    return fail(ErrorKind::internal, e.what());
  }
}

}  // namespace ragcheck::cli
