#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "patlm/corpus.hpp"

namespace patlm {

struct Candidate {
  std::vector<SymbolId> symbols;
  std::int64_t count = 0;  // all occurrence positions, overlaps included
};

// Candidate pattern set: every substring (of length <= max_length) that
// occurs in more than `threshold` places. Sorted lexicographically by
// symbol id, no duplicates.
struct CandidateSet {
  std::vector<Candidate> patterns;
  std::int64_t threshold = 0;
  int max_length = 0;

  size_t size() const { return patterns.size(); }
  bool empty() const { return patterns.empty(); }
};

inline constexpr int kDefaultMaxPatternLength = 12;

// Suffix array over all sentences of a corpus. Substrings never cross a
// sentence end; they may cross word boundaries.
class SubstringIndex {
 public:
  SubstringIndex(const CharCorpus& corpus, int max_length);

  // Positions (offsets into the concatenated text) where `pattern` starts.
  std::span<const std::int32_t> occurrences(std::span<const SymbolId> pattern) const;
  std::int64_t count(std::span<const SymbolId> pattern) const {
    return static_cast<std::int64_t>(occurrences(pattern).size());
  }

  // Calls fn(pattern, occurrence_span) for each distinct substring with
  // length <= max_length and count > threshold.
  template <typename Fn>
  void for_each_frequent(std::int64_t threshold, Fn&& fn) const;

  int max_length() const { return max_length_; }
  size_t text_size() const { return text_.size(); }

 private:
  // Symbol ids shifted by +2: 0 is the terminal sentinel, 1 a sentence end.
  std::vector<std::int32_t> text_;
  std::vector<std::int32_t> remaining_;  // symbols left in the sentence at each position
  std::vector<std::int32_t> suffixes_;   // sorted by their first 2^k >= max_length symbols
  std::vector<std::int32_t> lcp_;        // lcp_[i] between suffixes_[i-1] and suffixes_[i], capped
  int max_length_;
};

CandidateSet count_frequent_substrings(const CharCorpus& corpus, std::int64_t threshold,
                                       int max_length = kDefaultMaxPatternLength);

// Drops every candidate whose occurrences all sit inside occurrences of one
// longer candidate containing it.
CandidateSet reduce_candidates(const CandidateSet& candidates, const CharCorpus& corpus);

CandidateSet mine_patterns(const CharCorpus& corpus, std::int64_t threshold,
                           int max_length = kDefaultMaxPatternLength);

// Patterns file: a header line "#patlm-patterns v1 f=<f> L_max=<L>" followed
// by one "<escaped pattern>\t<count>" record per line.
void write_patterns(const std::string& path, const CandidateSet& set, const Alphabet& alphabet);
CandidateSet read_patterns(const std::string& path, const Alphabet& alphabet);

template <typename Fn>
void SubstringIndex::for_each_frequent(std::int64_t threshold, Fn&& fn) const {
  std::vector<SymbolId> pattern;
  const auto n = static_cast<std::int64_t>(suffixes_.size());
  for (int len = 1; len <= max_length_; ++len) {
    std::int64_t start = -1;
    auto flush = [&](std::int64_t end) {
      if (start >= 0 && end - start > threshold) {
        const std::int32_t pos = suffixes_[static_cast<size_t>(start)];
        pattern.clear();
        for (int k = 0; k < len; ++k) pattern.push_back(text_[static_cast<size_t>(pos + k)] - 2);
        fn(std::span<const SymbolId>(pattern),
           std::span<const std::int32_t>(suffixes_.data() + start, static_cast<size_t>(end - start)));
      }
      start = -1;
    };
    for (std::int64_t i = 0; i < n; ++i) {
      const std::int32_t pos = suffixes_[static_cast<size_t>(i)];
      if (remaining_[static_cast<size_t>(pos)] < len) {
        flush(i);
        continue;
      }
      if (start >= 0 && lcp_[static_cast<size_t>(i)] >= len) continue;
      flush(i);
      start = i;
    }
    flush(n);
  }
}

}  // namespace patlm
