#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "patlm/error.hpp"
#include "patlm/mining.hpp"
#include "support.hpp"

namespace patlm {
namespace {

using testing::corpus_of_ids;
using testing::ids;

std::map<std::vector<SymbolId>, std::int64_t> as_map(const CandidateSet& set) {
  std::map<std::vector<SymbolId>, std::int64_t> m;
  for (const auto& c : set.patterns) m[c.symbols] = c.count;
  return m;
}

// Occurrence start positions of p, per sentence.
std::vector<std::pair<size_t, size_t>> occurrences(const CharCorpus& c, const std::vector<SymbolId>& p) {
  std::vector<std::pair<size_t, size_t>> out;
  for (size_t s = 0; s < c.sentences.size(); ++s) {
    const auto& x = c.sentences[s];
    for (size_t i = 0; i + p.size() <= x.size(); ++i) {
      if (std::equal(p.begin(), p.end(), x.begin() + static_cast<std::ptrdiff_t>(i))) out.emplace_back(s, i);
    }
  }
  return out;
}

// True when every occurrence of a lies inside some occurrence of b.
bool covered_by(const CharCorpus& c, const std::vector<SymbolId>& a, const std::vector<SymbolId>& b) {
  if (b.size() <= a.size()) return false;
  const auto bo = occurrences(c, b);
  for (const auto& [s, i] : occurrences(c, a)) {
    bool inside = false;
    for (const auto& [t, j] : bo) {
      if (t == s && j <= i && i + a.size() <= j + b.size()) {
        inside = true;
        break;
      }
    }
    if (!inside) return false;
  }
  return true;
}

std::set<std::vector<SymbolId>> naive_reduce(const CharCorpus& c, const std::set<std::vector<SymbolId>>& cands) {
  std::set<std::vector<SymbolId>> out;
  for (const auto& a : cands) {
    bool removable = false;
    for (const auto& b : cands) removable = removable || covered_by(c, a, b);
    if (!removable) out.insert(a);
  }
  return out;
}

CharCorpus random_corpus(std::mt19937_64& rng, int alphabet, int sentences, int max_len) {
  std::vector<std::vector<SymbolId>> s;
  for (int i = 0; i < sentences; ++i) {
    s.push_back(testing::random_string(rng, alphabet, 1 + static_cast<int>(rng() % max_len)));
  }
  return corpus_of_ids(s);
}

TEST(CountFrequent, Abab) {
  const auto c = corpus_of_ids({ids("abab")});
  const auto set = count_frequent_substrings(c, 1, 4);
  const std::map<std::vector<SymbolId>, std::int64_t> expected{{ids("a"), 2}, {ids("b"), 2}, {ids("ab"), 2}};
  EXPECT_EQ(as_map(set), expected);
}

TEST(CountFrequent, NoRepeats) {
  EXPECT_TRUE(count_frequent_substrings(corpus_of_ids({ids("abc")}), 1, 12).empty());
}

TEST(CountFrequent, OverlapsCounted) {
  const auto m = as_map(count_frequent_substrings(corpus_of_ids({ids("aaaa")}), 1, 4));
  EXPECT_EQ(m.at(ids("a")), 4);
  EXPECT_EQ(m.at(ids("aa")), 3);
  EXPECT_EQ(m.at(ids("aaa")), 2);
  EXPECT_EQ(m.count(ids("aaaa")), 0u);
}

TEST(CountFrequent, NeverCrossesSentenceEnds) {
  const auto m = as_map(count_frequent_substrings(corpus_of_ids({ids("ab"), ids("ab"), ids("ba")}), 1, 3));
  EXPECT_EQ(m.count(ids("ba")), 0u);  // "ab|ab" would contain it twice if sentences were glued
}

TEST(CountFrequent, MatchesNaiveOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const int alphabet = 2 + static_cast<int>(rng() % 5);
    const auto c = random_corpus(rng, alphabet, 1 + static_cast<int>(rng() % 30), 40);
    const std::int64_t f = 1 + static_cast<std::int64_t>(rng() % 6);
    const int l_max = 1 + static_cast<int>(rng() % 12);
    EXPECT_EQ(as_map(count_frequent_substrings(c, f, l_max)), testing::naive_frequent(c, f, l_max));
  }
}

TEST(CountFrequent, LargeCorpusMatchesNaiveOracle) {
  std::mt19937_64 rng(6);
  const auto c = random_corpus(rng, 4, 250, 80);  // ~10^4 symbols
  ASSERT_LE(c.symbol_count(), 10000u);
  EXPECT_EQ(as_map(count_frequent_substrings(c, 3, 12)), testing::naive_frequent(c, 3, 12));
}

TEST(CountFrequent, ResultIsSortedAndUnique) {
  std::mt19937_64 rng(8);
  const auto c = random_corpus(rng, 3, 20, 30);
  const auto set = count_frequent_substrings(c, 2, 6);
  for (size_t i = 1; i < set.size(); ++i) EXPECT_LT(set.patterns[i - 1].symbols, set.patterns[i].symbols);
  for (const auto& p : set.patterns) {
    EXPECT_GT(p.count, 2);
    EXPECT_GE(p.symbols.size(), 1u);
    EXPECT_LE(p.symbols.size(), 6u);
  }
}

TEST(CountFrequent, MonotoneInThreshold) {
  std::mt19937_64 rng(9);
  const auto c = random_corpus(rng, 3, 30, 30);
  for (std::int64_t f = 1; f < 20; ++f) {
    const auto lo = as_map(count_frequent_substrings(c, f, 8));
    for (const auto& [p, n] : as_map(count_frequent_substrings(c, f + 1, 8))) {
      EXPECT_EQ(lo.count(p), 1u);
    }
  }
}

TEST(Reduce, AbabKeepsOnlyAb) {
  const auto c = corpus_of_ids({ids("abab")});
  const auto reduced = reduce_candidates(count_frequent_substrings(c, 1, 4), c);
  ASSERT_EQ(reduced.size(), 1u);
  EXPECT_EQ(reduced.patterns[0].symbols, ids("ab"));
}

TEST(Reduce, UnrelatedPatternsUnchanged) {
  // "abcd abcd" with ' ' encoded as 'e'.
  const auto c = corpus_of_ids({ids("abcdeabcd")});
  CandidateSet set;
  set.patterns = {{ids("ab"), 2}, {ids("cd"), 2}};
  EXPECT_EQ(as_map(reduce_candidates(set, c)), as_map(set));
}

TEST(Reduce, KeepsPatternWithAnOccurrenceOutside) {
  // "ab ac": "a" also occurs in "ac", outside every "ab".
  const auto c = corpus_of_ids({ids("abeac")});
  CandidateSet set;
  set.patterns = {{ids("a"), 2}, {ids("ab"), 1}};
  const auto m = as_map(reduce_candidates(set, c));
  EXPECT_EQ(m.count(ids("a")), 1u);
}

TEST(Reduce, MatchesContainmentOracle) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 40; ++trial) {
    const auto c = random_corpus(rng, 2 + static_cast<int>(rng() % 3), 1 + static_cast<int>(rng() % 12), 25);
    const std::int64_t f = 1 + static_cast<std::int64_t>(rng() % 3);
    const auto cands = count_frequent_substrings(c, f, 6);
    std::set<std::vector<SymbolId>> cand_set;
    for (const auto& p : cands.patterns) cand_set.insert(p.symbols);
    std::set<std::vector<SymbolId>> got;
    for (const auto& p : reduce_candidates(cands, c).patterns) got.insert(p.symbols);
    EXPECT_EQ(got, naive_reduce(c, cand_set));
    std::set<std::vector<SymbolId>> mined;
    for (const auto& p : mine_patterns(c, f, 6).patterns) mined.insert(p.symbols);
    EXPECT_EQ(mined, got);
  }
}

TEST(MinePatterns, Abab) {
  const auto set = mine_patterns(corpus_of_ids({ids("abab")}), 1, 12);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.patterns[0].symbols, ids("ab"));
  EXPECT_EQ(set.patterns[0].count, 2);
}

TEST(MinePatterns, ThresholdAboveCorpusSizeGivesNothing) {
  std::mt19937_64 rng(12);
  const auto c = random_corpus(rng, 3, 10, 20);
  EXPECT_TRUE(mine_patterns(c, static_cast<std::int64_t>(c.symbol_count()), 12).empty());
}

TEST(MinePatterns, RejectsZeroThreshold) { EXPECT_THROW(mine_patterns(corpus_of_ids({ids("ab")}), 0, 4), ConfigError); }

// Raising f can only remove patterns or expose a pattern whose covering
// superpattern fell below the threshold.
TEST(MinePatterns, HigherThresholdIsCoveredByLowerThreshold) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = random_corpus(rng, 3, 15, 30);
    const auto lo = mine_patterns(c, 2, 8);
    const auto hi = mine_patterns(c, 4, 8);
    std::set<std::vector<SymbolId>> lo_set;
    for (const auto& p : lo.patterns) lo_set.insert(p.symbols);
    for (const auto& p : hi.patterns) {
      if (lo_set.count(p.symbols)) continue;
      bool covered = false;
      for (const auto& q : lo_set) covered = covered || covered_by(c, p.symbols, q);
      EXPECT_TRUE(covered);
    }
  }
}

TEST(MinePatterns, ReductionIsNotMonotoneInThreshold) {
  // "aa aa aa": at f=4 only "a" survives; at f=2 "aa" covers every "a".
  const auto c = corpus_of_ids({ids("aaeaaeaa")});
  const auto hi = as_map(mine_patterns(c, 4, 4));
  const auto lo = as_map(mine_patterns(c, 2, 4));
  EXPECT_EQ(hi.count(ids("a")), 1u);
  EXPECT_EQ(lo.count(ids("a")), 0u);
  EXPECT_EQ(lo.count(ids("aa")), 1u);
}

TEST(PatternsFile, RoundTrip) {
  Alphabet a;
  const auto c = load_corpus_from_string("ab ab\\t ab\tab", SourceProfile::kRaw, a);
  const auto set = mine_patterns(c, 1, 5);
  const auto path = (std::filesystem::temp_directory_path() / "patlm_patterns_roundtrip.txt").string();
  write_patterns(path, set, a);
  const auto back = read_patterns(path, a);
  EXPECT_EQ(as_map(back), as_map(set));
  EXPECT_EQ(back.threshold, 1);
  EXPECT_EQ(back.max_length, 5);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace patlm
