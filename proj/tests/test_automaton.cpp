#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "patlm/automaton.hpp"
#include "patlm/encoded.hpp"
#include "patlm/error.hpp"
#include "support.hpp"

namespace patlm {
namespace {

using testing::ids;

StateId state_of(const PatternAutomaton& aut, const Pattern& s) {
  for (StateId i = 0; i < aut.num_states(); ++i) {
    if (aut.state_string(i) == s) return i;
  }
  return -1;
}

TEST(BuildAutomaton, AbBc) {
  const PatternAutomaton aut({ids("ab"), ids("bc")}, 3);
  EXPECT_EQ(aut.num_states(), 5);
  std::set<Pattern> states;
  for (StateId i = 0; i < aut.num_states(); ++i) states.insert(aut.state_string(i));
  EXPECT_EQ(states, (std::set<Pattern>{{}, ids("a"), ids("ab"), ids("b"), ids("bc")}));
  EXPECT_TRUE(aut.state_string(0).empty());
  EXPECT_EQ(aut.state_string(aut.next(state_of(aut, ids("ab")), 2)), ids("bc"));
}

TEST(BuildAutomaton, FallsBackToShorterState) {
  const PatternAutomaton aut({ids("ab")}, 2);
  EXPECT_EQ(aut.state_string(aut.next(state_of(aut, ids("ab")), 0)), ids("a"));
  EXPECT_EQ(aut.next(state_of(aut, ids("ab")), 1), 0);
}

TEST(BuildAutomaton, Errors) {
  EXPECT_THROW(PatternAutomaton({Pattern{}}, 2), ConfigError);
  EXPECT_THROW(PatternAutomaton({ids("ab"), ids("ab")}, 2), ConfigError);
  EXPECT_THROW(PatternAutomaton({ids("ac")}, 2), InputError);
  Alphabet a;
  a.intern(U'x');
  EXPECT_THROW(build_automaton({Pattern{5}}, a), InputError);
}

TEST(BuildAutomaton, EmptyPatternSetHasOnlyEpsilon) {
  const PatternAutomaton aut({}, 3);
  EXPECT_EQ(aut.num_states(), 1);
  const auto enc = aut.encode_sentence(ids("abcab"));
  EXPECT_EQ(enc, std::vector<StateId>(5, 0));
}

TEST(BuildAutomaton, TransitionsMatchNaiveOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 150; ++trial) {
    const int alphabet = 1 + static_cast<int>(rng() % 10);
    const auto patterns = testing::random_patterns(rng, alphabet, 1 + static_cast<int>(rng() % 50), 6);
    const PatternAutomaton aut(patterns, alphabet);
    const auto states = testing::naive_states(patterns);
    ASSERT_EQ(aut.num_states(), static_cast<int>(states.size()));
    for (StateId s = 0; s < aut.num_states(); ++s) {
      for (SymbolId a = 0; a < alphabet; ++a) {
        ASSERT_EQ(aut.state_string(aut.next(s, a)), testing::naive_delta(states, aut.state_string(s), a));
      }
    }
  }
}

TEST(BuildAutomaton, SuffixLinksAndPatternSuffixes) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const int alphabet = 2 + static_cast<int>(rng() % 4);
    const auto patterns = testing::random_patterns(rng, alphabet, 1 + static_cast<int>(rng() % 30), 5);
    const PatternAutomaton aut(patterns, alphabet);
    for (StateId s = 0; s < aut.num_states(); ++s) {
      const auto& str = aut.state_string(s);
      // The link is the longest proper suffix that is a state.
      if (s != 0) {
        const auto& link = aut.state_string(aut.suffix_link(s));
        EXPECT_LT(link.size(), str.size());
        EXPECT_TRUE(std::equal(link.begin(), link.end(), str.end() - static_cast<std::ptrdiff_t>(link.size())));
        for (size_t len = link.size() + 1; len < str.size(); ++len) {
          EXPECT_EQ(state_of(aut, Pattern(str.end() - static_cast<std::ptrdiff_t>(len), str.end())), -1);
        }
      }
      int steps = 0;
      for (StateId t = s; t != 0 && steps <= aut.num_states(); t = aut.suffix_link(t)) ++steps;
      EXPECT_LE(steps, static_cast<int>(str.size()));
      std::set<std::int32_t> expected;
      for (size_t k = 0; k < patterns.size(); ++k) {
        const auto& p = patterns[k];
        if (p.size() <= str.size() &&
            std::equal(p.begin(), p.end(), str.end() - static_cast<std::ptrdiff_t>(p.size()))) {
          expected.insert(static_cast<std::int32_t>(k));
        }
      }
      const auto got = aut.pattern_suffixes(s);
      EXPECT_EQ(std::set<std::int32_t>(got.begin(), got.end()), expected);
    }
  }
}

TEST(BuildAutomaton, StateWeightsSumPatternSuffixes) {
  PatternAutomaton aut({ids("b"), ids("ab"), ids("aab")}, 2);
  aut.set_pattern_weights(std::vector<double>{1.0, 10.0, 100.0});
  EXPECT_DOUBLE_EQ(aut.state_weight(state_of(aut, ids("aab"))), 111.0);
  EXPECT_DOUBLE_EQ(aut.state_weight(state_of(aut, ids("ab"))), 11.0);
  EXPECT_DOUBLE_EQ(aut.state_weight(state_of(aut, ids("a"))), 0.0);
  EXPECT_DOUBLE_EQ(aut.state_weight(0), 0.0);
}

TEST(EncodeSentence, Cab) {
  const PatternAutomaton aut({ids("ab")}, 3);
  const auto enc = aut.encode_sentence(ids("cab"));
  ASSERT_EQ(enc.size(), 3u);
  EXPECT_EQ(aut.state_string(enc[0]), Pattern{});
  EXPECT_EQ(aut.state_string(enc[1]), ids("a"));
  EXPECT_EQ(aut.state_string(enc[2]), ids("ab"));
}

TEST(EncodeSentence, EmptySentence) {
  const PatternAutomaton aut({ids("ab")}, 2);
  EXPECT_TRUE(aut.encode_sentence({}).empty());
}

TEST(EncodeSentence, RejectsUnknownSymbol) {
  const PatternAutomaton aut({ids("ab")}, 2);
  EXPECT_THROW(aut.encode_sentence(std::vector<SymbolId>{0, 7}), InputError);
}

TEST(EncodeSentence, MatchesNaiveOracleOnRandomStrings) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int alphabet = 1 + static_cast<int>(rng() % 10);
    const auto patterns = testing::random_patterns(rng, alphabet, 1 + static_cast<int>(rng() % 50), 5);
    const PatternAutomaton aut(patterns, alphabet);
    const auto s = testing::random_string(rng, alphabet, static_cast<int>(rng() % 201));
    const auto enc = aut.encode_sentence(s);
    ASSERT_EQ(enc.size(), s.size());
    const auto naive = testing::naive_encode(patterns, s);
    for (size_t i = 0; i < s.size(); ++i) ASSERT_EQ(aut.state_string(enc[i]), naive[i]);
    EXPECT_EQ(aut.encode_sentence(s), enc);
  }
}

TEST(EncodeWords, SlicesSentenceStream) {
  Alphabet a;
  const auto corpus = load_corpus_from_string("a ab\nba b a", SourceProfile::kRaw, a);
  const auto vocab = build_word_vocab(corpus, a);
  const auto ab = Pattern{a.id_of(U'a'), a.id_of(U'b')};
  const auto space_b = Pattern{a.id_of(U' '), a.id_of(U'b')};
  const auto aut = build_automaton({ab, space_b}, a);
  const auto enc = encode_words(aut, corpus, a, vocab);
  ASSERT_EQ(enc.size(), 5u);
  // One-character word at sentence start: the state after reading it.
  ASSERT_EQ(enc.subwords_of(0).size(), 1u);
  EXPECT_EQ(aut.state_string(enc.subwords_of(0)[0]), Pattern{a.id_of(U'a')});
  for (size_t t = 0; t < enc.size(); ++t) {
    EXPECT_EQ(enc.subwords_of(t).size(), static_cast<size_t>(enc.vocab[static_cast<size_t>(enc.words[t])].size()));
  }
  // "b" after a space reaches state " b"; "b" at the start of "ba" does not.
  EXPECT_EQ(aut.state_string(enc.subwords_of(3)[0]), space_b);
  EXPECT_EQ(aut.state_string(enc.subwords_of(2)[0]), Pattern{});
  EXPECT_EQ(enc.subword_vocab, aut.num_states() + 1);
}

TEST(EncodeWords, ContextFlowsAcrossWordBoundaries) {
  Alphabet a;
  const auto corpus = load_corpus_from_string("x b\ny b", SourceProfile::kRaw, a);
  const auto vocab = build_word_vocab(corpus, a);
  const auto aut = build_automaton({Pattern{a.id_of(U'x'), a.id_of(U' '), a.id_of(U'b')}}, a);
  const auto enc = encode_words(aut, corpus, a, vocab);
  ASSERT_EQ(enc.words[1], enc.words[3]);
  EXPECT_NE(enc.subwords_of(1)[0], enc.subwords_of(3)[0]);
}

TEST(EncodeWords, LengthPreservedOnRandomCorpora) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 20; ++trial) {
    std::string text;
    for (int w = 0; w < 60; ++w) {
      text += std::string(1 + rng() % 7, static_cast<char>('a' + rng() % 3));
      text += (w % 7 == 6) ? '\n' : ' ';
    }
    Alphabet a;
    const auto corpus = load_corpus_from_string(text, SourceProfile::kPtb, a);
    const auto vocab = build_word_vocab(corpus, a);
    const auto patterns = testing::random_patterns(rng, a.size(), 20, 4);
    const auto aut = build_automaton(patterns, a);
    const auto chars = encode_chars(corpus, a, vocab);
    const auto states = encode_words(aut, corpus, a, vocab, 2);
    ASSERT_EQ(chars.size(), states.size());
    EXPECT_EQ(chars.words, states.words);
    EXPECT_EQ(chars.offsets, states.offsets);
  }
}

TEST(AutomatonFile, RoundTrip) {
  Alphabet a;
  load_corpus_from_string("ab\\ c\td", SourceProfile::kRaw, a);
  std::vector<Pattern> patterns{{a.id_of(U'a'), a.id_of(U'b')}, {a.id_of(U'\\'), a.id_of(U' ')}, {a.id_of(U'\t')}};
  const auto aut = build_automaton(patterns, a);
  const auto path = (std::filesystem::temp_directory_path() / "patlm_automaton_roundtrip.txt").string();
  write_automaton(path, aut, a);
  Alphabet b;
  const auto back = read_automaton(path, b);
  EXPECT_EQ(b.symbols(), a.symbols());
  EXPECT_EQ(back.num_states(), aut.num_states());
  EXPECT_EQ(back.delta_table(), aut.delta_table());
  EXPECT_EQ(back.suffix_links(), aut.suffix_links());
  EXPECT_EQ(back.patterns(), aut.patterns());
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace patlm
