#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "patlm/corpus.hpp"

namespace patlm {

using StateId = std::int32_t;
using Pattern = std::vector<SymbolId>;

// Prefix automaton over a pattern set. States are all pattern prefixes plus
// the empty word (state 0); delta(s, a) is the longest state that is a suffix
// of s followed by a. Immutable after construction except for state weights.
class PatternAutomaton {
 public:
  PatternAutomaton() = default;
  // Throws ConfigError on empty or duplicate patterns and InputError on
  // symbols outside [0, alphabet_size).
  PatternAutomaton(std::vector<Pattern> patterns, int alphabet_size);

  int num_states() const { return static_cast<int>(states_.size()); }
  int alphabet_size() const { return alphabet_size_; }
  int num_patterns() const { return static_cast<int>(patterns_.size()); }

  StateId next(StateId state, SymbolId symbol) const {
    return delta_[static_cast<size_t>(state) * static_cast<size_t>(alphabet_size_) +
                  static_cast<size_t>(symbol)];
  }
  std::span<const StateId> row(StateId state) const {
    return {delta_.data() + static_cast<size_t>(state) * static_cast<size_t>(alphabet_size_),
            static_cast<size_t>(alphabet_size_)};
  }
  StateId suffix_link(StateId state) const { return links_[static_cast<size_t>(state)]; }
  const Pattern& state_string(StateId state) const { return states_[static_cast<size_t>(state)]; }
  const Pattern& pattern(int index) const { return patterns_[static_cast<size_t>(index)]; }
  const std::vector<Pattern>& patterns() const { return patterns_; }

  // Indices of patterns that are suffixes of the state's string.
  std::span<const std::int32_t> pattern_suffixes(StateId state) const {
    const auto b = suffix_offsets_[static_cast<size_t>(state)];
    const auto e = suffix_offsets_[static_cast<size_t>(state) + 1];
    return {suffix_patterns_.data() + b, static_cast<size_t>(e - b)};
  }

  // omega(s) = sum of pattern weights over pattern_suffixes(s).
  void set_pattern_weights(std::span<const double> weights);
  double state_weight(StateId state) const { return state_weight_[static_cast<size_t>(state)]; }
  const std::vector<double>& state_weights() const { return state_weight_; }

  // s_i = delta(s_{i-1}, b_i), s_0 = empty word; returns s_1..s_K.
  std::vector<StateId> encode_sentence(std::span<const SymbolId> sentence) const;

  const std::vector<StateId>& delta_table() const { return delta_; }
  const std::vector<StateId>& suffix_links() const { return links_; }

 private:
  std::vector<Pattern> patterns_;
  std::vector<Pattern> states_;
  std::vector<StateId> delta_;
  std::vector<StateId> links_;
  std::vector<std::int32_t> suffix_offsets_;
  std::vector<std::int32_t> suffix_patterns_;
  std::vector<double> state_weight_;
  int alphabet_size_ = 0;
};

PatternAutomaton build_automaton(const std::vector<Pattern>& patterns, const Alphabet& alphabet);

// Structured text with [alphabet], [patterns], [states], [delta] and
// [suffix_links] sections. Reading rebuilds from the patterns and rejects a
// file whose tables disagree with the rebuild.
void write_automaton(const std::string& path, const PatternAutomaton& automaton,
                     const Alphabet& alphabet);
PatternAutomaton read_automaton(const std::string& path, Alphabet& alphabet);

}  // namespace patlm
