#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ragcheck/metrics.hpp"

namespace ragcheck {

/// One scoring model's labeler evaluation: its operating point (a Table-1
/// style row) and, optionally, the threshold sweep it was chosen from.
struct ModelCalibration {
  std::string model;
  ConfusionStats operating_point;
  std::vector<ConfusionStats> curve;
};

struct AlignmentEntry {
  std::string method;
  AlignmentResult result;
};

struct RankProfileEntry {
  std::string selection;
  std::vector<double> average_rs;  // index 0 = rank 1
};

struct OverlapEntry {
  double fraction = 0.0;
  std::size_t verdicts = 0;
};

struct ReportInputs {
  std::vector<ModelCalibration> scoring_models;
  std::vector<AlignmentEntry> alignment;
  std::optional<OverlapEntry> cs_overlap;
  std::vector<RankProfileEntry> rank_profiles;
  std::map<std::string, double> config_comparison;
};

struct Report {
  json document;
  std::string text;
};

// JSON forms of metric results; the CLI writes these and `report` reads them back.

inline json to_json(const ConfusionStats& s) {
  return {{"threshold", s.threshold},
          {"true0", s.true0},
          {"true1", s.true1},
          {"accuracy", s.accuracy},
          {"counts",
           {{"positives", s.positives},
            {"positives_detected", s.positives_detected},
            {"negatives", s.negatives},
            {"negatives_detected", s.negatives_detected}}}};
}

inline ConfusionStats confusion_from_json(const json& j) {
  ConfusionStats s;
  s.threshold = j.at("threshold").get<double>();
  s.true0 = j.at("true0").get<double>();
  s.true1 = j.at("true1").get<double>();
  s.accuracy = j.at("accuracy").get<double>();
  const auto& c = j.at("counts");
  s.positives = c.at("positives").get<std::size_t>();
  s.positives_detected = c.at("positives_detected").get<std::size_t>();
  s.negatives = c.at("negatives").get<std::size_t>();
  s.negatives_detected = c.at("negatives_detected").get<std::size_t>();
  return s;
}

inline json to_json(const AlignmentResult& a) {
  return {{"weighted_match", a.weighted_match},     {"comparable", a.comparable},
          {"pairs_considered", a.pairs_considered}, {"pairs_disregarded", a.pairs_disregarded},
          {"raw_reward", a.raw_reward},             {"max_reward", a.max_reward},
          {"considered_mean", a.considered_mean},   {"question_mean", a.question_mean},
          {"questions", a.questions}};
}

inline AlignmentResult alignment_from_json(const json& j) {
  AlignmentResult a;
  a.weighted_match = j.at("weighted_match").get<double>();
  a.comparable = j.at("comparable").get<bool>();
  a.pairs_considered = j.at("pairs_considered").get<std::size_t>();
  a.pairs_disregarded = j.at("pairs_disregarded").get<std::size_t>();
  a.raw_reward = j.at("raw_reward").get<double>();
  a.max_reward = j.at("max_reward").get<double>();
  a.considered_mean = j.at("considered_mean").get<double>();
  a.question_mean = j.at("question_mean").get<double>();
  a.questions = j.at("questions").get<std::size_t>();
  return a;
}

/// Merges one metric result document (as written by the CLI) into the inputs.
inline void merge_metric(ReportInputs& in, const json& j) {
  auto kind = j.at("kind").get<std::string>();
  if (kind == "calibration") {
    ModelCalibration m;
    m.model = j.at("model").get<std::string>();
    m.operating_point = confusion_from_json(j.at("operating_point"));
    for (const auto& p : j.value("curve", json::array())) m.curve.push_back(confusion_from_json(p));
    in.scoring_models.push_back(std::move(m));
  } else if (kind == "alignment") {
    in.alignment.push_back({j.at("method").get<std::string>(), alignment_from_json(j.at("result"))});
  } else if (kind == "overlap") {
    in.cs_overlap = OverlapEntry{j.at("fraction").get<double>(), j.at("verdicts").get<std::size_t>()};
  } else if (kind == "rank_profile") {
    in.rank_profiles.push_back(
        {j.at("selection").get<std::string>(), j.at("average_rs").get<std::vector<double>>()});
  } else if (kind == "comparison") {
    for (const auto& [k, v] : j.at("averages").items()) in.config_comparison[k] = v.get<double>();
  } else {
    throw ValidationError("unknown metric kind '" + kind + "'");
  }
}

namespace detail {

inline json report_header() {
  return {
      {"tool", "ragcheck"},
      {"format_version", 1},
      {"conventions",
       {{"labeler", "a score >= threshold is labeled positive (relevant/correct)"},
        {"alignment_pairs",
         "pairs with an unsure (0) rating or equal ratings are disregarded per pair"},
        {"alignment_ties", "exactly tied scores count as a non-match"},
        {"optimal_threshold",
         "minimizes |true0 - true1|, then maximizes accuracy, then takes the smallest threshold"}}},
      {"metric_definitions",
       {{"true0", "fraction of positive samples labeled positive"},
        {"true1", "fraction of negative samples labeled negative"},
        {"accuracy", "fraction of all samples labeled correctly"},
        {"weighted_match",
         "sum of rewards (r2 - r1) over matched pairs divided by the sum over all considered pairs"},
        {"considered_mean", "sum of rewards divided by the number of considered pairs"},
        {"question_mean", "per-question weighted match averaged over questions"},
        {"cs_human_overlap",
         "fraction of span verdicts (correct/incorrect/subjective) equal to the harness output"},
        {"average_rs", "mean relevancy score of the piece at each retrieval rank"},
        {"average_cs", "mean correctness score over objective spans"}}}};
}

inline std::string rule(std::size_t width) { return std::string(width, '-') + "\n"; }

}  // namespace detail

/// Builds the structured report and its text rendering. Sections appear only
/// for metrics that were computed.
inline Report emit_report(const ReportInputs& in) {
  json sections = json::object();
  std::string text = "RAG evaluation report\n";

  if (!in.scoring_models.empty()) {
    json rows = json::array();
    text += "\nScoring models\n" + detail::rule(52);
    text += fmt::format("{:<16}{:>9}{:>9}{:>9}{:>9}\n", "Model", "Accuracy", "true0", "true1",
                        "eta");
    for (const auto& m : in.scoring_models) {
      const auto& p = m.operating_point;
      rows.push_back({{"model", m.model},
                      {"accuracy", p.accuracy},
                      {"true0", p.true0},
                      {"true1", p.true1},
                      {"threshold", p.threshold}});
      text += fmt::format("{:<16}{:>9.3f}{:>9.3f}{:>9.3f}{:>9.3f}\n", m.model, p.accuracy, p.true0,
                          p.true1, p.threshold);
    }
    sections["scoring_models"] = rows;
  }

  if (!in.alignment.empty() || in.cs_overlap) {
    json section = json::object();
    text += "\nHuman alignment\n" + detail::rule(52);
    if (!in.alignment.empty()) {
      json rows = json::array();
      text += fmt::format("{:<28}{:>8}{:>8}{:>8}\n", "Relevance scoring method", "Value", "pairs",
                          "skipped");
      for (const auto& a : in.alignment) {
        json row = to_json(a.result);
        row["method"] = a.method;
        row["value"] = a.result.weighted_match;
        rows.push_back(row);
        text += fmt::format("{:<28}{:>8.3f}{:>8}{:>8}\n", a.method, a.result.weighted_match,
                            a.result.pairs_considered, a.result.pairs_disregarded);
      }
      section["relevance"] = rows;
    }
    if (in.cs_overlap) {
      section["cs_human_overlap"] = {{"fraction", in.cs_overlap->fraction},
                                     {"verdicts", in.cs_overlap->verdicts}};
      text += fmt::format("CS vs human verdicts: {:.3f} over {} verdicts\n", in.cs_overlap->fraction,
                          in.cs_overlap->verdicts);
    }
    sections["human_alignment"] = section;
  }

  bool any_curve = false;
  for (const auto& m : in.scoring_models) any_curve = any_curve || !m.curve.empty();
  if (any_curve) {
    json series = json::array();
    text += "\nThreshold trade-off\n" + detail::rule(52);
    for (const auto& m : in.scoring_models) {
      if (m.curve.empty()) continue;
      json points = json::array();
      text += m.model + "\n";
      text += fmt::format("{:>8}{:>9}{:>9}{:>9}\n", "eta", "true0", "true1", "accuracy");
      for (const auto& p : m.curve) {
        points.push_back(
            {{"threshold", p.threshold}, {"true0", p.true0}, {"true1", p.true1}, {"accuracy", p.accuracy}});
        text += fmt::format("{:>8.3f}{:>9.3f}{:>9.3f}{:>9.3f}\n", p.threshold, p.true0, p.true1,
                            p.accuracy);
      }
      series.push_back({{"model", m.model}, {"points", points}});
    }
    sections["threshold_tradeoff"] = series;
  }

  if (!in.rank_profiles.empty()) {
    json series = json::array();
    text += "\nAverage relevancy by rank\n" + detail::rule(52);
    for (const auto& r : in.rank_profiles) {
      series.push_back({{"selection", r.selection}, {"average_rs", r.average_rs}});
      text += fmt::format("{:<20}", r.selection);
      for (double v : r.average_rs) text += fmt::format("{:>8.3f}", v);
      text += "\n";
    }
    sections["rank_profile"] = series;
  }

  if (!in.config_comparison.empty()) {
    json rows = json::array();
    text += "\nAverage CS by configuration\n" + detail::rule(52);
    for (const auto& [config, avg] : in.config_comparison) {
      rows.push_back({{"configuration", config}, {"average_cs", avg}});
      text += fmt::format("{:<40}{:>8.3f}\n", config, avg);
    }
    sections["configuration_comparison"] = rows;
  }

  if (sections.empty()) throw ValidationError("emit_report: no metrics to report");
  return {json{{"header", detail::report_header()}, {"sections", sections}}, text};
}

}  // namespace ragcheck
