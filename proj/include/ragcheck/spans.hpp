#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ragcheck/backends.hpp"
#include "ragcheck/error.hpp"
#include "ragcheck/image_refs.hpp"
#include "ragcheck/jsonl.hpp"
#include "ragcheck/prompts.hpp"

namespace ragcheck {

enum class Category { subjective, objective };

inline const char* to_string(Category c) {
  return c == Category::subjective ? "subjective" : "objective";
}

namespace detail {

inline bool is_word_byte(unsigned char c) {
  return std::isalnum(c) || c == '\'' || c >= 0x80;
}

/// Lowercased word tokens; punctuation separates words.
inline std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  // Quotes used as punctuation ('relevant') should not glue to the word.
  for (auto& t : tokens) {
    while (!t.empty() && t.front() == '\'') t.erase(t.begin());
    while (!t.empty() && t.back() == '\'') t.pop_back();
  }
  std::erase_if(tokens, [](const std::string& t) { return t.empty(); });
  return tokens;
}

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

/// Subjectivity markers in eight classes. Terms are stored lowercase and
/// deduplicated per class; a term may be a multi-word phrase.
class MarkerLexicon {
 public:
  static constexpr std::array<std::string_view, 8> kClasses = {
      "modal_verbs",         "opinion_indicators",       "hedging_phrases",
      "uncertain_quantifiers", "frequency_degree_adverbs", "judgmental_adjectives",
      "conjectures",         "comparisons_preferences"};

  struct Match {
    std::string marker_class;
    std::string term;
  };

  /// Parses the sectioned text format: `[class]` headers, one term per line,
  /// `#` comments. Every class must be present and nonempty.
  static MarkerLexicon parse(std::string_view text) {
    MarkerLexicon lex;
    std::istringstream in{std::string(text)};
    std::string line;
    std::optional<std::size_t> section;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      auto t = detail::trim(line);
      if (t.empty() || t[0] == '#') continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw ValidationError("lexicon line " + std::to_string(n) + ": malformed header");
        auto name = t.substr(1, t.size() - 2);
        auto it = std::find(kClasses.begin(), kClasses.end(), name);
        if (it == kClasses.end())
          throw ValidationError("lexicon line " + std::to_string(n) + ": unknown section '" + name +
                                "'");
        section = static_cast<std::size_t>(it - kClasses.begin());
        continue;
      }
      if (!section)
        throw ValidationError("lexicon line " + std::to_string(n) + ": term outside a section");
      lex.add(kClasses[*section], t);
    }
    lex.validate();
    return lex;
  }

  static MarkerLexicon load(const std::filesystem::path& path) {
    return parse(read_text_file(path));
  }

  /// Adds a term to a class. Case and spacing are normalized; duplicates are dropped.
  void add(std::string_view marker_class, std::string_view term) {
    auto it = std::find(kClasses.begin(), kClasses.end(), marker_class);
    if (it == kClasses.end())
      throw ValidationError("unknown marker class '" + std::string(marker_class) + "'");
    auto tokens = detail::word_tokens(term);
    if (tokens.empty()) throw ValidationError("empty lexicon term in " + std::string(marker_class));
    auto& list = terms_[static_cast<std::size_t>(it - kClasses.begin())];
    if (std::find(list.begin(), list.end(), tokens) == list.end()) list.push_back(std::move(tokens));
  }

  void validate() const {
    for (std::size_t i = 0; i < kClasses.size(); ++i)
      if (terms_[i].empty())
        throw ValidationError("lexicon section '" + std::string(kClasses[i]) + "' is empty");
  }

  std::vector<std::string> terms(std::string_view marker_class) const {
    auto it = std::find(kClasses.begin(), kClasses.end(), marker_class);
    if (it == kClasses.end()) return {};
    std::vector<std::string> out;
    for (const auto& toks : terms_[static_cast<std::size_t>(it - kClasses.begin())]) {
      std::string s;
      for (const auto& t : toks) s += (s.empty() ? "" : " ") + t;
      out.push_back(std::move(s));
    }
    return out;
  }

  /// First marker found, scanning classes in a fixed order. Whole-word,
  /// case-insensitive phrase match.
  std::optional<Match> find_marker(std::string_view text) const {
    auto words = detail::word_tokens(text);
    for (std::size_t c = 0; c < kClasses.size(); ++c) {
      for (const auto& term : terms_[c]) {
        if (term.size() > words.size()) continue;
        auto hit = std::search(words.begin(), words.end(), term.begin(), term.end());
        if (hit != words.end()) {
          std::string s;
          for (const auto& t : term) s += (s.empty() ? "" : " ") + t;
          return Match{std::string(kClasses[c]), s};
        }
      }
    }
    return std::nullopt;
  }

 private:
  std::array<std::vector<std::vector<std::string>>, 8> terms_;
};

/// Subjective iff any lexicon marker occurs in the text.
inline Category categorize_span(std::string_view text, const MarkerLexicon& lexicon) {
  if (detail::trim(text).empty()) throw ValidationError("categorize_span: empty text");
  return lexicon.find_marker(text) ? Category::subjective : Category::objective;
}

// ---------------------------------------------------------------------------
// Partitioning

enum class PartitionFidelity { rewriter, rule_fallback };

inline const char* to_string(PartitionFidelity f) {
  return f == PartitionFidelity::rewriter ? "rewriter" : "rule_fallback";
}

struct SourceRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

struct Sentence {
  std::string text;
  SourceRange range;
};

namespace detail {

inline bool is_abbreviation(std::string_view word) {
  static constexpr std::array<std::string_view, 22> kStop = {
      "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "e.g",
      "i.e", "fig", "no", "approx", "inc", "ltd", "co", "u.s", "a.m", "p.m", "cf"};
  std::string lower;
  for (char c : word) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  while (!lower.empty() && !std::isalnum(static_cast<unsigned char>(lower.front())))
    lower.erase(lower.begin());
  return std::find(kStop.begin(), kStop.end(), lower) != kStop.end();
}

}  // namespace detail

/// Splits on `.`, `!`, `?` followed by whitespace or end of text, ignoring
/// terminators inside double quotes and after common abbreviations.
/// Text after the last terminator forms a final sentence.
inline std::vector<Sentence> split_sentences(std::string_view text) {
  std::vector<Sentence> out;
  auto emit = [&](std::size_t b, std::size_t e) {
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b < e) out.push_back({std::string(text.substr(b, e - b)), {b, e}});
  };
  bool in_quote = false;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '"') {
      in_quote = !in_quote;
      ++i;
      continue;
    }
    if (in_quote || (c != '.' && c != '!' && c != '?')) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && (text[j] == '.' || text[j] == '!' || text[j] == '?')) ++j;
    while (j < text.size() && (text[j] == '"' || text[j] == ')' || text[j] == '\'')) ++j;
    bool at_boundary = j == text.size() || std::isspace(static_cast<unsigned char>(text[j]));
    if (at_boundary && c == '.' && j == i + 1) {
      std::size_t w = i;
      while (w > start && !std::isspace(static_cast<unsigned char>(text[w - 1]))) --w;
      if (detail::is_abbreviation(text.substr(w, i - w))) at_boundary = false;
    }
    if (at_boundary) {
      emit(start, j);
      start = j;
    }
    i = j;
  }
  emit(start, text.size());
  return out;
}

struct PartitionResult {
  std::vector<std::string> statements;
  PartitionFidelity fidelity = PartitionFidelity::rule_fallback;
};

namespace detail {

/// Validates the rewriter's one-statement-per-line output.
inline std::vector<std::string> parse_rewriter_lines(const std::string& output) {
  std::vector<std::string> lines;
  std::istringstream in(output);
  std::string raw;
  while (std::getline(in, raw)) {
    auto line = trim(raw);
    if (line.empty()) continue;
    if (line.rfind("```", 0) == 0)
      throw MalformedReplyError("rewriter output is fenced, expected plain lines");
    if (line.rfind("- ", 0) == 0 || line.rfind("* ", 0) == 0) {
      line = trim(line.substr(2));
    } else {
      std::size_t d = 0;
      while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
      if (d > 0 && d + 1 < line.size() && (line[d] == '.' || line[d] == ')') && line[d + 1] == ' ')
        line = trim(line.substr(d + 2));
    }
    if (std::none_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isalnum(c); }))
      throw MalformedReplyError("rewriter output line has no content: '" + line + "'");
    lines.push_back(std::move(line));
  }
  if (lines.empty()) throw MalformedReplyError("rewriter returned empty output");
  return lines;
}

}  // namespace detail

/// Splits a response into atomic statements. With a rewriter endpoint the
/// statements come back pronoun-resolved, one per line; without one the rule
/// splitter is used and pronouns stay as written.
inline PartitionResult partition_response(std::string_view response, GenerationBackend* rewriter) {
  if (detail::trim(response).empty()) throw ValidationError("partition_response: empty response");
  if (rewriter != nullptr) {
    auto output = rewriter->generate(render_partition_prompt(response), {});
    return {detail::parse_rewriter_lines(output), PartitionFidelity::rewriter};
  }
  PartitionResult result;
  for (auto& s : split_sentences(response)) result.statements.push_back(std::move(s.text));
  return result;
}

struct Span {
  std::size_t index = 0;
  std::string text;
  SourceRange source_range;
  Category category = Category::objective;
  std::vector<std::size_t> image_refs;
};

struct SpanSet {
  std::vector<Span> spans;
  PartitionFidelity fidelity = PartitionFidelity::rule_fallback;
  std::vector<std::string> warnings;
};

/// partition -> categorize -> extract references. Source ranges come from a
/// left-to-right search for each statement in the response; a rewritten
/// statement that does not occur verbatim takes the range of the sentence
/// at the current position.
inline SpanSet process_response(std::string_view response, const MarkerLexicon& lexicon,
                                GenerationBackend* rewriter) {
  auto partition = partition_response(response, rewriter);
  auto sentences = split_sentences(response);
  SpanSet set;
  set.fidelity = partition.fidelity;
  std::size_t cursor = 0;
  for (auto& statement : partition.statements) {
    Span span;
    span.index = set.spans.size();
    auto hit = response.find(statement, cursor);
    if (hit != std::string_view::npos) {
      span.source_range = {hit, hit + statement.size()};
      cursor = span.source_range.end;
    } else {
      auto it = std::find_if(sentences.begin(), sentences.end(),
                             [&](const Sentence& s) { return s.range.end > cursor; });
      if (it == sentences.end()) it = std::prev(sentences.end());
      span.source_range = it->range;
      cursor = std::max(cursor, it->range.end);
    }
    span.category = categorize_span(statement, lexicon);
    auto scan = extract_image_refs(statement);
    span.image_refs = std::move(scan.refs);
    for (auto& w : scan.warnings)
      set.warnings.push_back("span " + std::to_string(span.index) + ": " + w);
    span.text = std::move(statement);
    set.spans.push_back(std::move(span));
  }
  return set;
}

inline json to_json(const Span& s) {
  return {{"index", s.index},
          {"text", s.text},
          {"source_range", {s.source_range.begin, s.source_range.end}},
          {"category", to_string(s.category)},
          {"image_refs", s.image_refs}};
}

inline Span span_from_json(const json& j) {
  Span s;
  s.index = j.at("index").get<std::size_t>();
  s.text = j.at("text").get<std::string>();
  auto r = j.at("source_range");
  s.source_range = {r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>()};
  auto c = j.at("category").get<std::string>();
  if (c != "subjective" && c != "objective") throw ValidationError("unknown span category '" + c + "'");
  s.category = c == "subjective" ? Category::subjective : Category::objective;
  s.image_refs = j.at("image_refs").get<std::vector<std::size_t>>();
  return s;
}

}  // namespace ragcheck
