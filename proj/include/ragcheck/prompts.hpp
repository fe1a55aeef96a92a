#pragma once

#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "ragcheck/error.hpp"
#include "ragcheck/image_refs.hpp"

namespace ragcheck {

// Prompt assets. The repository keeps byte-identical copies under assets/prompts/.
namespace prompts {

inline constexpr std::string_view kVersion = "v1";

inline constexpr std::string_view kRelevance =
    "Evaluate the relevancy of the given statement with the image <image>. Evaluate by either "
    "'relevant' or 'irrelevant'. The statement is: {statement}.";

inline constexpr std::string_view kCorrectnessFullSet =
    "I am giving you {k} images. Evaluate this statement with these images and answer by either "
    "'correct' or 'incorrect': {statement}";

inline constexpr std::string_view kCorrectnessScoped =
    "I am giving you a statement. Evaluate this statement and answer by either 'correct' or "
    "'incorrect': {statement}";

inline constexpr std::string_view kDescribeImage = "Describe the image";

inline constexpr std::string_view kPartition =
    "Split the following response into atomic statements. Each statement must be a full sentence "
    "that is self-sufficient: it can be understood without reading any other sentence of the "
    "response. Replace personal pronouns (such as 'she', 'he', 'it', 'they'), demonstrative "
    "pronouns (such as 'this', 'that') and possessive pronouns (such as 'his', 'its') with the "
    "entity they refer to in the original text. Keep image references such as <image1> unchanged. "
    "Do not add, drop or reinterpret information. Output exactly one statement per line, with no "
    "numbering, bullets or extra commentary.\n"
    "Response:\n"
    "{response}";

inline constexpr std::string_view kContextAnswer =
    "You are given text descriptions of {n} retrieved items.\n"
    "{contexts}\n"
    "Answer the question using only the information in these descriptions.\n"
    "Question: {query}";

inline constexpr std::string_view kDirectAnswer =
    "I am giving you {n} images. Answer the question using only these images.\n"
    "Question: {query}";

}  // namespace prompts

/// Replaces every `{name}` placeholder in `tmpl` with `value`.
inline std::string fill_placeholder(std::string_view tmpl, std::string_view name,
                                    std::string_view value) {
  std::string key = "{" + std::string(name) + "}";
  std::string out;
  std::size_t pos = 0;
  for (auto hit = tmpl.find(key); hit != std::string_view::npos; hit = tmpl.find(key, pos)) {
    out.append(tmpl.substr(pos, hit - pos));
    out.append(value);
    pos = hit + key.size();
  }
  out.append(tmpl.substr(pos));
  return out;
}

inline bool contains_image_token(std::string_view text) {
  static const std::regex token(R"(<image\d*>)");
  return std::regex_search(text.begin(), text.end(), token);
}

inline std::string render_rs_prompt(std::string_view statement) {
  if (statement.empty()) throw ValidationError("relevance prompt: empty statement");
  if (contains_image_token(statement))
    throw ValidationError("relevance prompt: statement contains a reserved <image> token");
  return fill_placeholder(prompts::kRelevance, "statement", statement);
}

struct CsPrompt {
  std::string text;
  bool reference_scoped = false;
  std::vector<std::size_t> refs;  // 1-based indices into the retrieved set, when scoped
};

/// Full-set template over `k` images, or the reference-scoped template when
/// the statement names specific images via `<imageN>`.
inline CsPrompt render_cs_prompt(std::size_t k, std::string_view statement) {
  if (k < 1) throw ValidationError("correctness prompt: k must be >= 1");
  if (statement.empty()) throw ValidationError("correctness prompt: empty statement");
  auto scan = extract_image_refs(statement);
  if (!scan.refs.empty())
    return {fill_placeholder(prompts::kCorrectnessScoped, "statement", statement), true,
            std::move(scan.refs)};
  auto text = fill_placeholder(prompts::kCorrectnessFullSet, "k", std::to_string(k));
  return {fill_placeholder(text, "statement", statement), false, {}};
}

inline std::string render_partition_prompt(std::string_view response) {
  return fill_placeholder(prompts::kPartition, "response", response);
}

}  // namespace ragcheck
