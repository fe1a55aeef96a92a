#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "ragcheck/lexicon.hpp"
#include "ragcheck/spans.hpp"
#include "support.hpp"

using namespace ragcheck;
using ragcheck::testing::fixtures;
using ragcheck::testing::source_dir;

namespace {

const char* kDesk =
    "In the image, the desk is red and shiny. It is made of wood that is decorated with nice "
    "inlays.";

FixtureGenerator desk_rewriter() {
  FixtureGenerator g("rewriter");
  g.add({render_partition_prompt(kDesk), std::nullopt, std::nullopt,
         "In the image, the desk is red and shiny.\n"
         "The desk is made of wood that is decorated with nice inlays.\n"});
  return g;
}

std::vector<std::string> texts(const std::vector<Span>& spans) {
  std::vector<std::string> out;
  for (const auto& s : spans) out.push_back(s.text);
  return out;
}

std::string normalize_ws(const std::string& s) {
  std::istringstream in(s);
  std::string w, out;
  while (in >> w) out += (out.empty() ? "" : " ") + w;
  return out;
}

}  // namespace

TEST(Lexicon, DefaultMatchesAssetFile) {
  auto file = MarkerLexicon::load(source_dir() / "assets" / "lexicon" / "markers_v1.txt");
  auto builtin = default_lexicon();
  for (auto cls : MarkerLexicon::kClasses) {
    EXPECT_EQ(file.terms(cls), builtin.terms(cls)) << cls;
    EXPECT_FALSE(builtin.terms(cls).empty()) << cls;
  }
}

TEST(Lexicon, SeedTermsPresent) {
  auto lex = default_lexicon();
  auto has = [&](std::string_view cls, const std::string& term) {
    auto t = lex.terms(cls);
    return std::find(t.begin(), t.end(), term) != t.end();
  };
  EXPECT_TRUE(has("modal_verbs", "could"));
  EXPECT_TRUE(has("modal_verbs", "might"));
  EXPECT_TRUE(has("opinion_indicators", "believe"));
  EXPECT_TRUE(has("opinion_indicators", "feel"));
  EXPECT_TRUE(has("hedging_phrases", "it seems"));
  EXPECT_TRUE(has("uncertain_quantifiers", "some"));
  EXPECT_TRUE(has("uncertain_quantifiers", "many"));
  EXPECT_TRUE(has("frequency_degree_adverbs", "often"));
  EXPECT_TRUE(has("frequency_degree_adverbs", "usually"));
  EXPECT_TRUE(has("judgmental_adjectives", "important"));
  EXPECT_TRUE(has("judgmental_adjectives", "useful"));
  EXPECT_TRUE(has("conjectures", "it is possible that"));
  EXPECT_TRUE(has("comparisons_preferences", "better"));
  EXPECT_TRUE(has("comparisons_preferences", "prefer"));
}

TEST(Lexicon, ParseRules) {
  EXPECT_THROW(MarkerLexicon::parse("could\n"), ValidationError);
  EXPECT_THROW(MarkerLexicon::parse("[unknown]\nx\n"), ValidationError);
  EXPECT_THROW(MarkerLexicon::parse("[modal_verbs]\ncould\n"), ValidationError);  // other sections empty
  std::string text;
  for (auto cls : MarkerLexicon::kClasses) text += "[" + std::string(cls) + "]\n  Term  \nterm\n";
  auto lex = MarkerLexicon::parse(text);
  EXPECT_EQ(lex.terms("modal_verbs"), (std::vector<std::string>{"term"}));
}

TEST(Categorize, SpecExamples) {
  auto lex = default_lexicon();
  EXPECT_EQ(categorize_span("The pizza might be fresh.", lex), Category::subjective);
  EXPECT_EQ(lex.find_marker("The pizza might be fresh.")->marker_class, "modal_verbs");
  EXPECT_EQ(categorize_span("It is possible that the match is outdoors.", lex), Category::subjective);
  EXPECT_EQ(categorize_span("Two men are sitting at the table.", lex), Category::objective);
  EXPECT_THROW(categorize_span("   ", lex), ValidationError);
}

TEST(Categorize, WholeWordCaseInsensitive) {
  auto lex = default_lexicon();
  EXPECT_EQ(categorize_span("The MAYOR opened the library.", lex), Category::objective);
  EXPECT_EQ(categorize_span("Something is on the table.", lex), Category::objective);
  EXPECT_EQ(categorize_span("SOME apples are red.", lex), Category::subjective);
  EXPECT_EQ(categorize_span("It seems, at first, odd.", lex), Category::subjective);
  EXPECT_EQ(categorize_span("It, seems odd.", lex), Category::subjective);  // punctuation separates only
  EXPECT_EQ(categorize_span("The 'useful' label is printed.", lex), Category::subjective);
}

TEST(Categorize, HandLabeledFixture) {
  auto lex = default_lexicon();
  std::map<std::string, int> per_class;
  int objective = 0;
  for (const auto& rec : read_jsonl(fixtures() / "spans" / "lexicon_sentences.jsonl")) {
    auto text = rec.value["text"].get<std::string>();
    auto label = rec.value["label"].get<std::string>();
    EXPECT_EQ(to_string(categorize_span(text, lex)), label) << text;
    if (label == "objective") {
      ++objective;
    } else {
      auto m = lex.find_marker(text);
      ASSERT_TRUE(m) << text;
      EXPECT_EQ(m->marker_class, rec.value["marker_class"].get<std::string>()) << text;
      ++per_class[m->marker_class];
    }
  }
  EXPECT_GE(objective, 10);
  for (auto cls : MarkerLexicon::kClasses) EXPECT_GE(per_class[std::string(cls)], 2) << cls;
}

TEST(Categorize, OrderIndependentAndMonotone) {
  auto base = default_lexicon();
  std::vector<std::string> sentences;
  for (const auto& rec : read_jsonl(fixtures() / "spans" / "lexicon_sentences.jsonl"))
    sentences.push_back(rec.value["text"].get<std::string>());

  // shuffled term order within every class gives identical categories
  std::mt19937 rng(9);
  MarkerLexicon shuffled;
  for (auto cls : MarkerLexicon::kClasses) {
    auto terms = base.terms(cls);
    std::shuffle(terms.begin(), terms.end(), rng);
    for (const auto& t : terms) shuffled.add(cls, t);
  }
  for (const auto& s : sentences) EXPECT_EQ(categorize_span(s, base), categorize_span(s, shuffled));

  // adding terms only moves spans objective -> subjective
  auto grown = base;
  for (std::string term : {"table", "red", "the boat"}) {
    grown.add("judgmental_adjectives", term);
    for (const auto& s : sentences) {
      if (categorize_span(s, base) == Category::subjective) {
        EXPECT_EQ(categorize_span(s, grown), Category::subjective) << s;
      }
    }
  }
  EXPECT_EQ(categorize_span("The desk is red and shiny.", grown), Category::subjective);
}

TEST(ImageRefs, SpecExamples) {
  EXPECT_EQ(extract_image_refs("A boy with a cowboy hat is riding a white horse in <image1>").refs,
            (std::vector<std::size_t>{1}));
  EXPECT_TRUE(extract_image_refs("no references here").refs.empty());
  EXPECT_EQ(extract_image_refs("<image2> shows a dog and <image4> shows a cat and <image2> again").refs,
            (std::vector<std::size_t>{2, 4}));
}

TEST(ImageRefs, MalformedTokensWarn) {
  auto scan = extract_image_refs("see <image> and <image0> and <imagex> and <image12>");
  EXPECT_EQ(scan.refs, (std::vector<std::size_t>{12}));
  EXPECT_EQ(scan.warnings.size(), 3u);
  EXPECT_TRUE(extract_image_refs("<image99999999999999999999999>").refs.empty());
}

TEST(Partition, DeskExampleWithRewriter) {
  auto rewriter = desk_rewriter();
  auto p = partition_response(kDesk, &rewriter);
  EXPECT_EQ(p.fidelity, PartitionFidelity::rewriter);
  EXPECT_EQ(p.statements, (std::vector<std::string>{
                              "In the image, the desk is red and shiny.",
                              "The desk is made of wood that is decorated with nice inlays."}));
}

TEST(Partition, RuleFallback) {
  EXPECT_EQ(partition_response("There is a pizza.", nullptr).statements,
            (std::vector<std::string>{"There is a pizza."}));
  auto p = partition_response("A cat sits. It sleeps.", nullptr);
  EXPECT_EQ(p.fidelity, PartitionFidelity::rule_fallback);
  EXPECT_EQ(p.statements, (std::vector<std::string>{"A cat sits.", "It sleeps."}));
  EXPECT_THROW(partition_response("  ", nullptr), ValidationError);
}

TEST(Partition, SplitterRespectsQuotesAndAbbreviations) {
  auto s = split_sentences("Dr. Smith said \"Stop. Now!\" and left. Is it e.g. blue? Yes!! no end");
  std::vector<std::string> got;
  for (const auto& x : s) got.push_back(x.text);
  EXPECT_EQ(got, (std::vector<std::string>{"Dr. Smith said \"Stop. Now!\" and left.",
                                           "Is it e.g. blue?", "Yes!!", "no end"}));
  EXPECT_EQ(split_sentences("Price is 3.5 dollars. Done.").size(), 2u);
}

TEST(Partition, FallbackIsLosslessOnSentences) {
  for (std::string text : {"A cat sits.   It sleeps!\nDoes it dream? Perhaps.",
                           "One.Two. Three", "\"Quoted. Still one.\" Next one."}) {
    auto p = partition_response(text, nullptr);
    std::string joined;
    for (const auto& s : p.statements) joined += (joined.empty() ? "" : " ") + s;
    EXPECT_EQ(normalize_ws(joined), normalize_ws(text));
  }
}

TEST(Partition, RewriterOutputValidation) {
  FixtureGenerator g;
  g.add({std::nullopt, std::nullopt, std::nullopt, "1. First statement.\n- Second one.\n\n* Third."});
  EXPECT_EQ(partition_response("x", &g).statements,
            (std::vector<std::string>{"First statement.", "Second one.", "Third."}));
  for (std::string bad : {"", "  \n\n", "```\nA.\n```", "A.\n---\n"}) {
    FixtureGenerator b;
    b.add({std::nullopt, std::nullopt, std::nullopt, bad});
    EXPECT_THROW(partition_response("x", &b), MalformedReplyError) << bad;
  }
}

TEST(Process, DeskSpansAndRanges) {
  auto rewriter = desk_rewriter();
  auto set = process_response(kDesk, default_lexicon(), &rewriter);
  ASSERT_EQ(set.spans.size(), 2u);
  EXPECT_EQ(set.spans[0].source_range.begin, 0u);
  EXPECT_EQ(set.spans[0].source_range.end, 40u);
  // the rewritten second statement is not verbatim; it takes its sentence's range
  std::string desk = kDesk;
  EXPECT_EQ(desk.substr(set.spans[1].source_range.begin,
                        set.spans[1].source_range.end - set.spans[1].source_range.begin),
            "It is made of wood that is decorated with nice inlays.");
  EXPECT_EQ(set.spans[0].category, Category::objective);
  EXPECT_EQ(set.spans[1].category, Category::objective);
}

TEST(Process, ThreeStatementScenario) {
  auto set = process_response(
      "There is a pizza on the table. The pizza might be fresh. <image2> shows a salad.",
      default_lexicon(), nullptr);
  ASSERT_EQ(set.spans.size(), 3u);
  EXPECT_EQ(set.fidelity, PartitionFidelity::rule_fallback);
  EXPECT_EQ(set.spans[0].category, Category::objective);
  EXPECT_EQ(set.spans[1].category, Category::subjective);
  EXPECT_EQ(set.spans[2].category, Category::objective);
  EXPECT_EQ(set.spans[2].image_refs, (std::vector<std::size_t>{2}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(set.spans[i].index, i);
}

TEST(Process, SecondSentenceHedged) {
  auto set = process_response("A man holds a kite. It seems windy.", default_lexicon(), nullptr);
  ASSERT_EQ(set.spans.size(), 2u);
  EXPECT_EQ(set.spans[0].category, Category::objective);
  EXPECT_EQ(set.spans[1].category, Category::subjective);
  EXPECT_TRUE(set.spans[0].image_refs.empty());
}

TEST(Process, SpanJsonRoundTrip) {
  auto set = process_response("The dog in <image3> runs. Many birds fly.", default_lexicon(), nullptr);
  for (const auto& s : set.spans) {
    auto back = span_from_json(to_json(s));
    EXPECT_EQ(back.text, s.text);
    EXPECT_EQ(back.category, s.category);
    EXPECT_EQ(back.image_refs, s.image_refs);
    EXPECT_EQ(back.source_range.end, s.source_range.end);
  }
  EXPECT_EQ(texts(set.spans), (std::vector<std::string>{"The dog in <image3> runs.", "Many birds fly."}));
}
