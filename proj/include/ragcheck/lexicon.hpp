#pragma once

#include <string_view>

#include "ragcheck/spans.hpp"

namespace ragcheck {

/// Built-in copy of assets/lexicon/markers_v1.txt, used when no lexicon file
/// is configured.
inline constexpr std::string_view kDefaultLexiconV1 = R"LEX(
# Subjectivity marker lexicon, version 1.
# One term per line under each section. Matching is whole-word and
# case-insensitive; multi-word terms match as contiguous phrases.
# No stemming: list inflected forms explicitly.

[modal_verbs]
could
might
may
would
should
must
ought to

[opinion_indicators]
believe
believes
feel
feels
think
thinks
in my opinion
personally
i guess
i suppose

[hedging_phrases]
it seems
seems
seem
appears to
apparently
likely
unlikely
perhaps
probably
possibly
presumably

[uncertain_quantifiers]
some
many
several
few
most
various
numerous
a lot of

[frequency_degree_adverbs]
often
usually
sometimes
generally
typically
rarely
frequently
commonly
always
very
quite
rather
fairly
extremely
somewhat

[judgmental_adjectives]
important
useful
beautiful
delicious
good
bad
great
excellent
terrible
interesting
attractive
ugly
lovely
pleasant
popular
healthy
unhealthy

[conjectures]
it is possible that
it is likely that
it could be that
maybe
suggests that
one might assume

[comparisons_preferences]
better
best
worse
worst
prefer
prefers
preferred
preference
favorite
superior
inferior
rather than
)LEX";

inline const MarkerLexicon& default_lexicon() {
  static const MarkerLexicon lexicon = MarkerLexicon::parse(kDefaultLexiconV1.substr(1));
  return lexicon;
}

}  // namespace ragcheck
