#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ragcheck/error.hpp"
#include "ragcheck/pipeline.hpp"
#include "ragcheck/spans.hpp"

namespace ragcheck {

// ---------------------------------------------------------------------------
// Labelers and threshold calibration

struct LabelerConfig {
  double threshold = 0.7;
  std::string positive_label = "relevant";

  void validate() const {
    if (!(threshold >= 0.0 && threshold <= 1.0))
      throw ValidationError("labeler threshold must lie in [0,1]");
  }
};

namespace detail {
inline void check_unit_interval(std::span<const double> scores, const char* what) {
  for (double s : scores)
    if (!(s >= 0.0 && s <= 1.0))
      throw ValidationError(std::string(what) + ": score " + std::to_string(s) + " outside [0,1]");
}
}  // namespace detail

/// Hard decision per score: positive iff score >= threshold.
inline std::vector<bool> apply_labeler(std::span<const double> scores, const LabelerConfig& cfg) {
  cfg.validate();
  detail::check_unit_interval(scores, "apply_labeler");
  std::vector<bool> labels;
  labels.reserve(scores.size());
  for (double s : scores) labels.push_back(s >= cfg.threshold);
  return labels;
}

/// true0: detection rate on positive samples; true1: on negative samples.
struct ConfusionStats {
  double threshold = 0.0;
  double true0 = 0.0;
  double true1 = 0.0;
  double accuracy = 0.0;
  std::size_t positives_detected = 0;  // positives labeled positive
  std::size_t positives = 0;
  std::size_t negatives_detected = 0;  // negatives labeled negative
  std::size_t negatives = 0;
};

inline ConfusionStats confusion_stats(std::span<const double> pos_scores,
                                      std::span<const double> neg_scores, double threshold) {
  if (pos_scores.empty() || neg_scores.empty())
    throw ValidationError("confusion_stats: both classes need at least one score");
  LabelerConfig{threshold}.validate();
  detail::check_unit_interval(pos_scores, "confusion_stats");
  detail::check_unit_interval(neg_scores, "confusion_stats");
  ConfusionStats s;
  s.threshold = threshold;
  s.positives = pos_scores.size();
  s.negatives = neg_scores.size();
  for (double x : pos_scores) s.positives_detected += x >= threshold ? 1 : 0;
  for (double x : neg_scores) s.negatives_detected += x < threshold ? 1 : 0;
  s.true0 = static_cast<double>(s.positives_detected) / static_cast<double>(s.positives);
  s.true1 = static_cast<double>(s.negatives_detected) / static_cast<double>(s.negatives);
  s.accuracy = static_cast<double>(s.positives_detected + s.negatives_detected) /
               static_cast<double>(s.positives + s.negatives);
  return s;
}

/// Grid {0, step, 2*step, ..., 1}. Grid values are rounded to 12 decimals so
/// that e.g. 3*0.1 lands on 0.3 exactly.
inline std::vector<double> threshold_grid(double step) {
  if (!(step > 0.0 && step <= 0.5)) throw ValidationError("threshold step must lie in (0, 0.5]");
  auto n = static_cast<std::size_t>(std::floor(1.0 / step + 1e-9));
  std::vector<double> grid;
  for (std::size_t i = 0; i <= n; ++i)
    grid.push_back(std::min(1.0, std::round(static_cast<double>(i) * step * 1e12) / 1e12));
  if (grid.back() < 1.0) grid.push_back(1.0);
  return grid;
}

inline std::vector<ConfusionStats> sweep_thresholds(std::span<const double> pos_scores,
                                                    std::span<const double> neg_scores,
                                                    double step) {
  std::vector<ConfusionStats> curve;
  for (double eta : threshold_grid(step)) curve.push_back(confusion_stats(pos_scores, neg_scores, eta));
  return curve;
}

/// Equal-detection operating point: minimizes |true0 - true1|, then
/// maximizes accuracy, then prefers the smallest threshold.
inline ConfusionStats optimize_threshold(std::span<const ConfusionStats> curve) {
  if (curve.empty()) throw ValidationError("optimize_threshold: empty curve");
  constexpr double kTol = 1e-12;
  const ConfusionStats* best = &curve.front();
  for (const auto& p : curve) {
    double gap = std::abs(p.true0 - p.true1);
    double best_gap = std::abs(best->true0 - best->true1);
    if (gap < best_gap - kTol) {
      best = &p;
    } else if (gap <= best_gap + kTol) {
      if (p.accuracy > best->accuracy + kTol ||
          (p.accuracy >= best->accuracy - kTol && p.threshold < best->threshold))
        best = &p;
    }
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Human alignment

/// 0 = unsure, 1 = no relevance, 2 = mild, 3 = high, 4 = complete.
struct HumanRating {
  std::string question_id;
  std::string piece_id;
  int rating = 0;
  std::string annotator_id;
  std::string timestamp;
};

enum class Verdict { correct, incorrect, subjective };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::correct: return "correct";
    case Verdict::incorrect: return "incorrect";
    case Verdict::subjective: return "subjective";
  }
  return "subjective";
}

inline Verdict parse_verdict(const std::string& s) {
  if (s == "correct") return Verdict::correct;
  if (s == "incorrect") return Verdict::incorrect;
  if (s == "subjective") return Verdict::subjective;
  throw ValidationError("unknown verdict '" + s + "'");
}

struct SpanVerdict {
  std::string question_id;
  std::size_t span_index = 0;
  Verdict verdict = Verdict::correct;
  std::string annotator_id;
  std::string timestamp;
};

struct AlignmentResult {
  double weighted_match = 0.0;  // raw / max; headline number
  bool comparable = false;      // false when no pair had differing nonzero ratings
  std::size_t pairs_considered = 0;
  std::size_t pairs_disregarded = 0;
  double raw_reward = 0.0;
  double max_reward = 0.0;
  double considered_mean = 0.0;  // raw / pairs_considered
  double question_mean = 0.0;    // mean of per-question raw/max over comparable questions
  std::size_t questions = 0;
};

/// (question_id, piece_id) -> score
using ScoreTable = std::map<std::pair<std::string, std::string>, double>;

/// Pairwise reward between human ratings and scores. Within each
/// (question, annotator) group every unordered pair of rated pieces is
/// visited; pairs with an unsure (0) rating or equal ratings are
/// disregarded. For r1 < r2 the pair adds r2 - r1 to the maximum reward,
/// and to the raw reward only when the r2 piece has the strictly higher score.
inline AlignmentResult alignment_reward(const std::vector<HumanRating>& ratings,
                                        const ScoreTable& scores) {
  // group -> piece -> rating, ordered for a fixed summation order
  std::map<std::pair<std::string, std::string>, std::map<std::string, int>> groups;
  for (const auto& r : ratings) {
    if (r.rating < 0 || r.rating > 4)
      throw ValidationError("rating " + std::to_string(r.rating) + " outside 0..4");
    auto& g = groups[{r.question_id, r.annotator_id}];
    if (!g.emplace(r.piece_id, r.rating).second)
      throw ValidationError("duplicate rating for question '" + r.question_id + "', piece '" +
                            r.piece_id + "', annotator '" + r.annotator_id + "'");
    if (!scores.count({r.question_id, r.piece_id}))
      throw ValidationError("missing score for question '" + r.question_id + "', piece '" +
                            r.piece_id + "'");
  }
  AlignmentResult res;
  double question_sum = 0.0;
  std::size_t comparable_questions = 0;
  for (const auto& [key, pieces] : groups) {
    ++res.questions;
    double raw_q = 0.0, max_q = 0.0;
    for (auto a = pieces.begin(); a != pieces.end(); ++a) {
      for (auto b = std::next(a); b != pieces.end(); ++b) {
        if (a->second == 0 || b->second == 0 || a->second == b->second) {
          ++res.pairs_disregarded;
          continue;
        }
        ++res.pairs_considered;
        auto [low, high] = a->second < b->second ? std::pair(a, b) : std::pair(b, a);
        double reward = high->second - low->second;
        max_q += reward;
        double s_low = scores.at({key.first, low->first});
        double s_high = scores.at({key.first, high->first});
        if (s_high > s_low) raw_q += reward;
      }
    }
    res.raw_reward += raw_q;
    res.max_reward += max_q;
    if (max_q > 0) {
      question_sum += raw_q / max_q;
      ++comparable_questions;
    }
  }
  res.comparable = res.max_reward > 0;
  if (res.comparable) res.weighted_match = res.raw_reward / res.max_reward;
  if (res.pairs_considered > 0)
    res.considered_mean = res.raw_reward / static_cast<double>(res.pairs_considered);
  if (comparable_questions > 0)
    res.question_mean = question_sum / static_cast<double>(comparable_questions);
  return res;
}

// ---------------------------------------------------------------------------
// CS vs human verdicts

/// The harness's call on one span: subjective spans are not scored; an
/// objective span is correct iff its CS passes the labeler.
struct HarnessSpanOutput {
  std::string question_id;
  std::size_t span_index = 0;
  Category category = Category::objective;
  bool labeled_correct = false;

  Verdict as_verdict() const {
    if (category == Category::subjective) return Verdict::subjective;
    return labeled_correct ? Verdict::correct : Verdict::incorrect;
  }
};

/// Fraction of human verdicts that agree with the harness output for the same span.
inline double cs_human_overlap(const std::vector<SpanVerdict>& verdicts,
                               const std::vector<HarnessSpanOutput>& outputs) {
  if (verdicts.empty() || outputs.empty()) throw ValidationError("cs_human_overlap: no spans");
  std::map<std::pair<std::string, std::size_t>, Verdict> harness;
  for (const auto& o : outputs)
    if (!harness.emplace(std::pair(o.question_id, o.span_index), o.as_verdict()).second)
      throw ValidationError("cs_human_overlap: duplicate harness span " + o.question_id + "#" +
                            std::to_string(o.span_index));
  std::set<std::pair<std::string, std::size_t>> judged;
  std::size_t agree = 0;
  for (const auto& v : verdicts) {
    auto it = harness.find({v.question_id, v.span_index});
    if (it == harness.end())
      throw ValidationError("cs_human_overlap: span set mismatch at " + v.question_id + "#" +
                            std::to_string(v.span_index));
    judged.insert(it->first);
    agree += it->second == v.verdict ? 1 : 0;
  }
  if (judged.size() != harness.size())
    throw ValidationError("cs_human_overlap: span set mismatch (" +
                          std::to_string(harness.size() - judged.size()) + " spans unjudged)");
  return static_cast<double>(agree) / static_cast<double>(verdicts.size());
}

// ---------------------------------------------------------------------------
// Selection and configuration profiles

/// Mean RS per rank position across queries.
inline std::vector<double> rank_profile(const std::vector<std::vector<double>>& rs_by_query) {
  if (rs_by_query.empty()) throw ValidationError("rank_profile: no queries");
  auto k = rs_by_query.front().size();
  std::vector<double> sum(k, 0.0);
  for (const auto& row : rs_by_query) {
    if (row.size() != k)
      throw ValidationError("rank_profile: heterogeneous k (" + std::to_string(row.size()) +
                            " vs " + std::to_string(k) + ")");
    for (std::size_t r = 0; r < k; ++r) sum[r] += row[r];
  }
  for (double& s : sum) s /= static_cast<double>(rs_by_query.size());
  return sum;
}

/// Rank profile over traces, looking up the RS of each retrieved piece.
inline std::vector<double> rank_profile(
    const std::vector<RagTrace>& traces,
    const std::function<double(const RagTrace&, const RetrievalResult&)>& rs_of) {
  std::vector<std::vector<double>> rows;
  for (const auto& t : traces) {
    std::vector<double> row;
    for (const auto& r : t.retrieved) row.push_back(rs_of(t, r));
    rows.push_back(std::move(row));
  }
  return rank_profile(rows);
}

struct ScoredSpan {
  Category category = Category::objective;
  double cs = 0.0;
};

/// Mean CS over objective spans, per configuration. Values are summed in
/// sorted order so the result does not depend on span order.
inline std::map<std::string, double> config_comparison(
    const std::map<std::string, std::vector<ScoredSpan>>& runs) {
  std::map<std::string, double> out;
  for (const auto& [config, spans] : runs) {
    std::vector<double> cs;
    for (const auto& s : spans)
      if (s.category == Category::objective) cs.push_back(s.cs);
    if (cs.empty())
      throw ValidationError("config_comparison: configuration '" + config +
                            "' has no objective spans");
    std::sort(cs.begin(), cs.end());
    double sum = 0.0;
    for (double x : cs) sum += x;
    out[config] = sum / static_cast<double>(cs.size());
  }
  return out;
}

}  // namespace ragcheck
