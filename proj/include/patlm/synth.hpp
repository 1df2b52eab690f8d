#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace patlm {

// Desk-scale morphology corpus. Content words are root + suffix; the suffix
// selects the group of the following function word, which can in turn bias
// the suffix of the next content word (suffix_agreement). Suffixes come in anagram families
// ("en"/"ne", "ens"/"nes"/"sen") so bag-of-characters models cannot tell
// family members apart while order-aware subword units can.
struct SynthConfig {
  std::uint64_t seed = 1;
  std::int64_t tokens = 50000;  // words, excluding end-of-sentence markers
  int roots = 30;
  int function_words = 20;
  double zipf = 1.0;              // exponent of the rank-frequency law
  double agreement = 0.9;         // P(function-word group follows the suffix)
  double suffix_agreement = 0.0;  // P(suffix follows the preceding function-word group)
  int min_content = 3;            // content words per sentence
  int max_content = 8;
  double valid_fraction = 0.1;
  double test_fraction = 0.1;

  void validate() const;
};

struct SynthLexicon {
  std::vector<std::string> roots;
  std::vector<std::string> suffixes;
  std::vector<int> suffix_group;  // function-word group a suffix selects
  std::vector<std::string> function_words;
  std::vector<int> function_group;
  int groups = 0;
};

struct SynthCorpus {
  SynthLexicon lexicon;
  std::vector<std::string> train;  // one sentence per line, words separated by spaces
  std::vector<std::string> valid;
  std::vector<std::string> test;
};

SynthCorpus generate_synth(const SynthConfig& config);

// Writes train.txt, valid.txt and test.txt into `dir` (created if needed).
void write_synth(const std::string& dir, const SynthCorpus& corpus);

}  // namespace patlm
