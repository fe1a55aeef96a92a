#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ragcheck/error.hpp"
#include "ragcheck/jsonl.hpp"
#include "ragcheck/metrics.hpp"

namespace ragcheck {

// ---------------------------------------------------------------------------
// Triplet dataset

/// (image, positive statement, negative statement) training/evaluation record.
struct TripletSample {
  std::string id;
  std::string image_ref;
  std::string positive_statement;
  std::string negative_statement;
  std::string source;
};

struct TripletLoad {
  std::vector<TripletSample> samples;
  std::vector<std::string> warnings;
};

/// Lines: {"id"?, "image", "positive", "negative", "source"?}. Without an
/// id, the line number is used. Every invalid line is reported.
inline TripletLoad load_triplets(const std::filesystem::path& file,
                                 const std::filesystem::path& image_root) {
  TripletLoad out;
  std::vector<std::string> problems;
  std::set<std::string> ids;
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open " + file.string());
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto where = "line " + std::to_string(n) + ": ";
    try {
      NumberedRecord rec{n, json::parse(line)};
      TripletSample s;
      s.id = rec.value.contains("id") ? require_string(rec, "id") : std::to_string(n);
      s.image_ref = require_string(rec, "image");
      s.positive_statement = require_string(rec, "positive");
      s.negative_statement = require_string(rec, "negative");
      s.source = rec.value.value("source", "");
      if (s.positive_statement.empty() || s.negative_statement.empty())
        throw ValidationError(where + "empty statement");
      if (s.positive_statement == s.negative_statement)
        throw ValidationError(where + "positive and negative statements are identical");
      if (!std::filesystem::is_regular_file(image_root / s.image_ref))
        throw ValidationError(where + "unresolvable image " + s.image_ref);
      if (!ids.insert(s.id).second) throw ValidationError(where + "duplicate id " + s.id);
      out.samples.push_back(std::move(s));
    } catch (const json::parse_error&) {
      problems.push_back(where + "malformed record");
    } catch (const ValidationError& e) {
      problems.push_back(e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = file.string() + ": ";
    for (std::size_t i = 0; i < problems.size(); ++i) msg += (i ? "; " : "") + problems[i];
    throw ValidationError(msg);
  }
  if (out.samples.empty()) out.warnings.push_back("triplet file is empty");
  return out;
}

inline constexpr std::array<const char*, 3> kSplitNames = {"train", "validation", "test"};

struct DatasetSplit {
  std::array<double, 3> ratios{};
  std::uint64_t seed = 0;
  std::map<std::string, std::string> assignment;  // sample id -> split name
  std::array<std::vector<std::string>, 3> members;
};

/// Seeded Fisher-Yates shuffle, then contiguous train/validation/test blocks.
/// Train and validation sizes are floor(n * ratio); test takes the rest.
inline DatasetSplit split_dataset(const std::vector<std::string>& sample_ids,
                                  std::array<double, 3> ratios, std::uint64_t seed) {
  double total = ratios[0] + ratios[1] + ratios[2];
  for (double r : ratios)
    if (r < 0.0) throw ValidationError("split ratios must be non-negative");
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");
  std::set<std::string> unique(sample_ids.begin(), sample_ids.end());
  if (unique.size() != sample_ids.size()) throw ValidationError("duplicate sample ids in split");

  std::vector<std::string> order = sample_ids;
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    // unbiased draw from [0, i)
    std::uint64_t bound = i;
    std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % bound;
    std::uint64_t x;
    do x = rng(); while (x >= limit);
    std::swap(order[i - 1], order[x % bound]);
  }
  auto n = static_cast<double>(order.size());
  auto train = static_cast<std::size_t>(std::floor(n * ratios[0] + 1e-9));
  auto validation = static_cast<std::size_t>(std::floor(n * ratios[1] + 1e-9));
  validation = std::min(validation, order.size() - train);

  DatasetSplit split;
  split.ratios = ratios;
  split.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::size_t which = i < train ? 0 : i < train + validation ? 1 : 2;
    split.members[which].push_back(order[i]);
    split.assignment[order[i]] = kSplitNames[which];
  }
  return split;
}

// ---------------------------------------------------------------------------
// Annotation store

enum class TaskKind { relevance, span_verdict };

inline const char* to_string(TaskKind k) {
  return k == TaskKind::relevance ? "relevance" : "span_verdict";
}

inline TaskKind parse_task_kind(const std::string& s) {
  if (s == "relevance") return TaskKind::relevance;
  if (s == "span_verdict") return TaskKind::span_verdict;
  throw ValidationError("unknown task kind '" + s + "'");
}

enum class TaskStatus { open, closed };

/// Relevance payload: {question_id, query, piece_id, image_ref}.
/// Span-verdict payload: {question_id, span_index, span_text, context_refs}.
struct AnnotationTask {
  std::uint64_t id = 0;
  TaskKind kind = TaskKind::relevance;
  json payload;
  TaskStatus status = TaskStatus::open;
};

inline json to_json(const AnnotationTask& t) {
  return {{"id", t.id},
          {"kind", to_string(t.kind)},
          {"payload", t.payload},
          {"status", t.status == TaskStatus::open ? "open" : "closed"}};
}

class TaskNotFound : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// The task exists but cannot accept this submission (closed or held by
/// another annotator).
class TaskConflict : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct KindProgress {
  std::size_t open = 0;      // open tasks with no submission yet
  std::size_t complete = 0;  // tasks with at least one submission
  std::size_t closed = 0;
};

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Append-only store of annotation tasks, ratings and verdicts under one data
/// directory. All state is rebuilt from the files on open; a resubmission by
/// the same annotator for the same task supersedes the earlier record.
///
/// Files: tasks.jsonl (task creations and closures), submissions.jsonl,
/// audit.jsonl. Methods are serialized by an internal mutex.
class FeedbackStore {
 public:
  explicit FeedbackStore(std::filesystem::path dir,
                         std::chrono::seconds lease = std::chrono::minutes(10))
      : dir_(std::move(dir)), lease_(lease) {
    std::filesystem::create_directories(dir_);
    replay();
  }

  const std::filesystem::path& directory() const { return dir_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  std::uint64_t add_task(TaskKind kind, json payload) {
    std::lock_guard lock(mu_);
    validate_payload(kind, payload);
    AnnotationTask t{next_task_id_, kind, std::move(payload), TaskStatus::open};
    append_jsonl(dir_ / "tasks.jsonl", {{"event", "create"}, {"task", to_json(t)}});
    tasks_.emplace(t.id, t);
    ++next_task_id_;
    return t.id;
  }

  void close_task(std::uint64_t id) {
    std::lock_guard lock(mu_);
    auto& t = find(id);
    if (t.status == TaskStatus::closed) return;
    append_jsonl(dir_ / "tasks.jsonl", {{"event", "close"}, {"id", id}});
    t.status = TaskStatus::closed;
  }

  std::optional<AnnotationTask> task(std::uint64_t id) const {
    std::lock_guard lock(mu_);
    auto it = tasks_.find(id);
    if (it == tasks_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<AnnotationTask> tasks() const {
    std::lock_guard lock(mu_);
    std::vector<AnnotationTask> out;
    for (const auto& [id, t] : tasks_) out.push_back(t);
    return out;
  }

  /// Lowest-id open task of this kind that the annotator has not completed
  /// and that is not leased to someone else. The task is leased to the caller.
  std::optional<AnnotationTask> next_task(const std::string& annotator, TaskKind kind) {
    std::lock_guard lock(mu_);
    auto now = std::chrono::steady_clock::now();
    for (auto& [id, t] : tasks_) {
      if (t.kind != kind || t.status != TaskStatus::open) continue;
      if (latest_.count({annotator, id})) continue;
      auto lease = leases_.find(id);
      if (lease != leases_.end() && lease->second.first != annotator && lease->second.second > now)
        continue;
      leases_[id] = {annotator, now + lease_};
      return t;
    }
    return std::nullopt;
  }

  /// Stores a rating for a relevance task; returns the record's sequence number.
  /// question_id and piece_id default to the task's payload and must match it.
  std::uint64_t submit_rating(std::uint64_t task_id, HumanRating rating) {
    std::lock_guard lock(mu_);
    if (rating.rating < 0 || rating.rating > 4)
      throw ValidationError("rating " + std::to_string(rating.rating) + " outside 0..4");
    auto& t = open_task_for(task_id, TaskKind::relevance, rating.annotator_id);
    fill_or_check(rating.question_id, t.payload, "question_id");
    fill_or_check(rating.piece_id, t.payload, "piece_id");
    if (rating.timestamp.empty()) rating.timestamp = utc_timestamp();
    json rec{{"type", "rating"},
             {"task_id", task_id},
             {"question_id", rating.question_id},
             {"piece_id", rating.piece_id},
             {"rating", rating.rating},
             {"annotator_id", rating.annotator_id},
             {"timestamp", rating.timestamp}};
    return append_submission(std::move(rec));
  }

  std::uint64_t submit_verdict(std::uint64_t task_id, SpanVerdict verdict) {
    std::lock_guard lock(mu_);
    auto& t = open_task_for(task_id, TaskKind::span_verdict, verdict.annotator_id);
    fill_or_check(verdict.question_id, t.payload, "question_id");
    auto expected_index = t.payload.at("span_index").get<std::size_t>();
    if (verdict.span_index != expected_index)
      throw ValidationError("span_index " + std::to_string(verdict.span_index) +
                            " does not match task payload " + std::to_string(expected_index));
    if (verdict.timestamp.empty()) verdict.timestamp = utc_timestamp();
    json rec{{"type", "verdict"},
             {"task_id", task_id},
             {"question_id", verdict.question_id},
             {"span_index", verdict.span_index},
             {"verdict", to_string(verdict.verdict)},
             {"annotator_id", verdict.annotator_id},
             {"timestamp", verdict.timestamp}};
    return append_submission(std::move(rec));
  }

  /// Current (latest-wins) ratings, ordered by task id then annotator.
  std::vector<HumanRating> ratings() const {
    std::lock_guard lock(mu_);
    std::vector<HumanRating> out;
    for (const auto& rec : current_records("rating"))
      out.push_back({rec.at("question_id"), rec.at("piece_id"), rec.at("rating").get<int>(),
                     rec.at("annotator_id"), rec.at("timestamp")});
    return out;
  }

  std::vector<SpanVerdict> verdicts() const {
    std::lock_guard lock(mu_);
    std::vector<SpanVerdict> out;
    for (const auto& rec : current_records("verdict"))
      out.push_back({rec.at("question_id"), rec.at("span_index").get<std::size_t>(),
                     parse_verdict(rec.at("verdict")), rec.at("annotator_id"),
                     rec.at("timestamp")});
    return out;
  }

  std::vector<json> audit_log() const {
    std::lock_guard lock(mu_);
    return audit_;
  }

  std::map<std::string, KindProgress> progress() const {
    std::lock_guard lock(mu_);
    std::map<std::string, KindProgress> out{{"relevance", {}}, {"span_verdict", {}}};
    std::set<std::uint64_t> done;
    for (const auto& [key, seq] : latest_) done.insert(key.second);
    for (const auto& [id, t] : tasks_) {
      auto& p = out[to_string(t.kind)];
      if (done.count(id))
        ++p.complete;
      else if (t.status == TaskStatus::closed)
        ++p.closed;
      else
        ++p.open;
    }
    return out;
  }

  /// Everything needed to rebuild the store: tasks, every submission
  /// (superseded ones included) and the audit log.
  json export_bundle() const {
    std::lock_guard lock(mu_);
    json tasks = json::array();
    for (const auto& [id, t] : tasks_) tasks.push_back(to_json(t));
    json subs = json::array();
    for (const auto& s : submissions_) subs.push_back(s);
    return {{"format", "ragcheck-feedback-bundle"},
            {"version", 1},
            {"tasks", tasks},
            {"submissions", subs},
            {"audit", audit_}};
  }

  /// Loads a bundle into an empty store.
  void import_bundle(const json& bundle) {
    std::lock_guard lock(mu_);
    if (!tasks_.empty() || !submissions_.empty())
      throw ValidationError("import_bundle needs an empty store");
    if (bundle.value("format", "") != "ragcheck-feedback-bundle")
      throw ValidationError("not a feedback bundle");
    for (const auto& tj : bundle.at("tasks")) {
      auto t = task_from_json(tj);
      append_jsonl(dir_ / "tasks.jsonl", {{"event", "create"}, {"task", to_json(t)}});
      next_task_id_ = std::max(next_task_id_, t.id + 1);
      tasks_.emplace(t.id, std::move(t));
    }
    for (const auto& s : bundle.at("submissions")) {
      append_jsonl(dir_ / "submissions.jsonl", s);
      apply_submission(s);
    }
    for (const auto& a : bundle.at("audit")) {
      append_jsonl(dir_ / "audit.jsonl", a);
      audit_.push_back(a);
    }
  }

 private:
  using Key = std::pair<std::string, std::uint64_t>;  // (annotator, task)

  static AnnotationTask task_from_json(const json& j) {
    return {j.at("id").get<std::uint64_t>(), parse_task_kind(j.at("kind")), j.at("payload"),
            j.value("status", "open") == "closed" ? TaskStatus::closed : TaskStatus::open};
  }

  static void validate_payload(TaskKind kind, const json& p) {
    if (!p.is_object() || !p.contains("question_id") || !p["question_id"].is_string())
      throw ValidationError("task payload needs a string question_id");
    if (kind == TaskKind::relevance && (!p.contains("piece_id") || !p["piece_id"].is_string()))
      throw ValidationError("relevance task payload needs a string piece_id");
    if (kind == TaskKind::span_verdict &&
        (!p.contains("span_index") || !p["span_index"].is_number_integer() ||
         p["span_index"].get<std::int64_t>() < 0))
      throw ValidationError("span_verdict task payload needs a non-negative span_index");
  }

  static void fill_or_check(std::string& field, const json& payload, const char* name) {
    auto expected = payload.at(name).get<std::string>();
    if (field.empty())
      field = expected;
    else if (field != expected)
      throw ValidationError(std::string(name) + " '" + field + "' does not match task payload '" +
                            expected + "'");
  }

  AnnotationTask& find(std::uint64_t id) {
    auto it = tasks_.find(id);
    if (it == tasks_.end()) throw TaskNotFound("unknown task " + std::to_string(id));
    return it->second;
  }

  AnnotationTask& open_task_for(std::uint64_t id, TaskKind kind, const std::string& annotator) {
    if (annotator.empty()) throw ValidationError("annotator_id is required");
    auto& t = find(id);
    if (t.kind != kind)
      throw ValidationError("task " + std::to_string(id) + " is a " + to_string(t.kind) + " task");
    if (t.status == TaskStatus::closed)
      throw TaskConflict("task " + std::to_string(id) + " is closed");
    auto lease = leases_.find(id);
    if (lease != leases_.end() && lease->second.first != annotator &&
        lease->second.second > std::chrono::steady_clock::now())
      throw TaskConflict("task " + std::to_string(id) + " is assigned to another annotator");
    return t;
  }

  std::uint64_t append_submission(json rec) {
    rec["seq"] = next_seq_;
    append_jsonl(dir_ / "submissions.jsonl", rec);
    auto previous = apply_submission(rec);
    json audit{{"event", previous ? "supersede" : "submit"},
               {"seq", rec["seq"]},
               {"task_id", rec["task_id"]},
               {"annotator_id", rec["annotator_id"]}};
    if (previous) audit["superseded_seq"] = *previous;
    append_jsonl(dir_ / "audit.jsonl", audit);
    audit_.push_back(audit);
    leases_.erase(rec["task_id"].get<std::uint64_t>());
    return rec["seq"].get<std::uint64_t>();
  }

  /// Indexes one submission; returns the sequence number it supersedes.
  std::optional<std::uint64_t> apply_submission(const json& rec) {
    auto seq = rec.at("seq").get<std::uint64_t>();
    Key key{rec.at("annotator_id").get<std::string>(), rec.at("task_id").get<std::uint64_t>()};
    std::optional<std::uint64_t> previous;
    if (auto it = latest_.find(key); it != latest_.end()) previous = it->second;
    latest_[key] = seq;
    by_seq_[seq] = submissions_.size();
    submissions_.push_back(rec);
    next_seq_ = std::max(next_seq_, seq + 1);
    return previous;
  }

  std::vector<json> current_records(const std::string& type) const {
    std::vector<std::pair<std::pair<std::uint64_t, std::string>, json>> rows;
    for (const auto& [key, seq] : latest_) {
      const auto& rec = submissions_[by_seq_.at(seq)];
      if (rec.at("type") == type) rows.push_back({{key.second, key.first}, rec});
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<json> out;
    for (auto& r : rows) out.push_back(std::move(r.second));
    return out;
  }

  /// Rebuilds the in-memory index. A torn final line (interrupted append) is
  /// skipped with a warning; corruption elsewhere is an error.
  void replay() {
    auto read_tolerant = [&](const std::string& name) {
      std::vector<json> out;
      auto path = dir_ / name;
      if (!std::filesystem::exists(path)) return out;
      std::ifstream in(path);
      std::vector<std::string> lines;
      for (std::string l; std::getline(in, l);)
        if (l.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(l);
      for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
          out.push_back(json::parse(lines[i]));
        } catch (const json::parse_error&) {
          if (i + 1 != lines.size())
            throw ValidationError(path.string() + ": corrupt record " + std::to_string(i + 1));
          warnings_.push_back(path.string() + ": skipped torn final record");
        }
      }
      return out;
    };
    for (const auto& ev : read_tolerant("tasks.jsonl")) {
      if (ev.at("event") == "create") {
        auto t = task_from_json(ev.at("task"));
        next_task_id_ = std::max(next_task_id_, t.id + 1);
        tasks_[t.id] = std::move(t);
      } else if (ev.at("event") == "close") {
        find(ev.at("id").get<std::uint64_t>()).status = TaskStatus::closed;
      }
    }
    for (const auto& s : read_tolerant("submissions.jsonl")) apply_submission(s);
    audit_ = read_tolerant("audit.jsonl");
  }

  std::filesystem::path dir_;
  std::chrono::seconds lease_;
  mutable std::mutex mu_;
  std::map<std::uint64_t, AnnotationTask> tasks_;
  std::uint64_t next_task_id_ = 1;
  std::uint64_t next_seq_ = 1;
  std::vector<json> submissions_;
  std::map<std::uint64_t, std::size_t> by_seq_;
  std::map<Key, std::uint64_t> latest_;
  std::map<std::uint64_t, std::pair<std::string, std::chrono::steady_clock::time_point>> leases_;
  std::vector<json> audit_;
  std::vector<std::string> warnings_;
};

}  // namespace ragcheck
