#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "ragcheck/jsonl.hpp"
#include "ragcheck/metrics.hpp"
#include "ragcheck/report.hpp"

namespace ragcheck::testing {

/// Fixed inputs covering every report section. The golden files in
/// tests/golden/ are the emitted output for these inputs.
inline ReportInputs golden_report_inputs() {
  ReportInputs in;
  const std::vector<double> rs_pos{0.95, 0.9, 0.82, 0.7, 0.64, 0.4};
  const std::vector<double> rs_neg{0.05, 0.2, 0.35, 0.5, 0.72};
  const std::vector<double> cs_pos{0.99, 0.88, 0.8, 0.76, 0.3};
  const std::vector<double> cs_neg{0.1, 0.15, 0.6, 0.81};
  for (auto [name, pos, neg] : {std::tuple{"rs-fixture", &rs_pos, &rs_neg},
                                std::tuple{"cs-fixture", &cs_pos, &cs_neg}}) {
    auto curve = sweep_thresholds(*pos, *neg, 0.1);
    in.scoring_models.push_back({name, optimize_threshold(curve), curve});
  }
  std::vector<HumanRating> ratings{{"q1", "A", 1, "ann", ""}, {"q1", "B", 3, "ann", ""},
                                   {"q1", "C", 0, "ann", ""}, {"q2", "D", 4, "ann", ""},
                                   {"q2", "E", 2, "ann", ""}, {"q2", "F", 1, "ann", ""}};
  ScoreTable rs{{{"q1", "A"}, 0.2}, {{"q1", "B"}, 0.9}, {{"q1", "C"}, 0.5},
                {{"q2", "D"}, 0.7}, {{"q2", "E"}, 0.8}, {{"q2", "F"}, 0.1}};
  ScoreTable cosine{{{"q1", "A"}, 0.6}, {{"q1", "B"}, 0.4}, {{"q1", "C"}, 0.5},
                    {{"q2", "D"}, 0.9}, {{"q2", "E"}, 0.3}, {{"q2", "F"}, 0.3}};
  in.alignment.push_back({"rs-fixture", alignment_reward(ratings, rs)});
  in.alignment.push_back({"cosine", alignment_reward(ratings, cosine)});
  in.cs_overlap = OverlapEntry{0.75, 4};
  in.rank_profiles.push_back({"cosine_topk", {0.9384, 0.8808, 0.1508}});
  in.rank_profiles.push_back({"rs_rescoring", {0.9384, 0.8808, 0.8176}});
  in.config_comparison = {{"cosine_topk/per_piece_vlm_then_llm", 0.86},
                          {"rs_rescoring/direct_mllm", 0.79}};
  return in;
}

inline std::filesystem::path golden_dir() {
  return std::filesystem::path(RAGCHECK_SOURCE_DIR) / "tests" / "golden";
}

/// Canonical serialization used for the JSON golden.
inline std::string golden_json_text(const Report& r) { return r.document.dump(2) + "\n"; }

/// With RAGCHECK_UPDATE_GOLDEN set, rewrites the golden files from `r`.
inline void maybe_update_goldens(const Report& r) {
  if (std::getenv("RAGCHECK_UPDATE_GOLDEN") == nullptr) return;
  std::filesystem::create_directories(golden_dir());
  write_text_file(golden_dir() / "report.json", golden_json_text(r));
  write_text_file(golden_dir() / "report.txt", r.text);
}

}  // namespace ragcheck::testing
