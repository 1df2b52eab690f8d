#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "patlm/automaton.hpp"
#include "patlm/corpus.hpp"

namespace patlm {

enum class SubwordUnits { kChars, kPatterns };

std::string_view units_name(SubwordUnits units);
SubwordUnits parse_units(std::string_view name);

// Word-token stream for the language model. Each token carries its word id
// and its subword sequence (characters or automaton states). The last
// subword id is reserved for the end-of-sentence word.
struct EncodedCorpus {
  SubwordUnits units = SubwordUnits::kChars;
  std::int32_t subword_vocab = 0;
  std::vector<std::string> vocab;      // word strings by id
  std::vector<std::int32_t> words;     // word id per token
  std::vector<std::int32_t> offsets{0};  // tokens + 1 entries into `subwords`
  std::vector<std::int32_t> subwords;

  size_t size() const { return words.size(); }
  std::int32_t word_vocab() const { return static_cast<std::int32_t>(vocab.size()); }
  std::int32_t eos_subword() const { return subword_vocab - 1; }
  std::span<const std::int32_t> subwords_of(size_t token) const {
    return {subwords.data() + offsets[token], static_cast<size_t>(offsets[token + 1] - offsets[token])};
  }
  void push(std::int32_t word, std::span<const std::int32_t> units_of_word);
  // Longest subword sequence in the stream.
  int max_subwords() const;
  bool is_eos(size_t token) const {
    return offsets[token + 1] - offsets[token] == 1 && subwords[static_cast<size_t>(offsets[token])] == eos_subword();
  }
};

// Nearest-rank percentile of subword counts over word tokens, skipping
// end-of-sentence tokens. For either unit type this equals the character
// length percentile of the source corpus.
int subword_length_percentile(const EncodedCorpus& corpus, double p);

EncodedCorpus encode_chars(const CharCorpus& corpus, const Alphabet& alphabet, const WordVocab& vocab);

// Each word span (i, j) becomes the slice s_i..s_j of the sentence's state
// stream; the automaton is not reset at word boundaries.
EncodedCorpus encode_words(const PatternAutomaton& automaton, const CharCorpus& corpus,
                           const Alphabet& alphabet, const WordVocab& vocab, int threads = 1);

void write_encoded(const std::string& path, const EncodedCorpus& corpus);
EncodedCorpus read_encoded(const std::string& path);

}  // namespace patlm
