#include "patlm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "patlm/error.hpp"

namespace patlm {

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("bad_synth_config", what); };
  if (tokens < 100) fail("tokens must be at least 100");
  if (roots < 1 || roots > 200) fail("roots must lie in [1, 200]");
  if (function_words < 3 || function_words > 60) fail("function_words must lie in [3, 60]");
  if (!(zipf >= 0.0)) fail("zipf must be non-negative");
  if (!(agreement >= 0.0 && agreement <= 1.0)) fail("agreement must lie in [0, 1]");
  if (!(suffix_agreement >= 0.0 && suffix_agreement <= 1.0)) fail("suffix_agreement must lie in [0, 1]");
  if (min_content < 1 || max_content < min_content) fail("bad sentence length range");
  if (!(valid_fraction > 0 && test_fraction >= 0 && valid_fraction + test_fraction < 1)) {
    fail("valid and test fractions must leave room for training data");
  }
}

namespace {

// Distinct consonant-vowel strings; the letter sets are disjoint from the
// suffix letters, so a word splits unambiguously into root and suffix.
std::vector<std::string> make_words(std::mt19937_64& rng, int count, const std::string& consonants,
                                    const std::string& vowels, int min_len, int max_len,
                                    std::set<std::string>& taken) {
  std::uniform_int_distribution<int> len_dist(min_len, max_len);
  std::uniform_int_distribution<size_t> c_dist(0, consonants.size() - 1);
  std::uniform_int_distribution<size_t> v_dist(0, vowels.size() - 1);
  std::vector<std::string> out;
  while (static_cast<int>(out.size()) < count) {
    const int len = len_dist(rng);
    std::string w;
    for (int i = 0; i < len; ++i) w += i % 2 == 0 ? consonants[c_dist(rng)] : vowels[v_dist(rng)];
    if (taken.insert(w).second) out.push_back(w);
  }
  return out;
}

std::discrete_distribution<int> zipf_dist(size_t n, double s) {
  std::vector<double> w(n);
  for (size_t r = 0; r < n; ++r) w[r] = 1.0 / std::pow(static_cast<double>(r + 1), s);
  return {w.begin(), w.end()};
}

}  // namespace

SynthCorpus generate_synth(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  SynthCorpus corpus;
  auto& lex = corpus.lexicon;
  lex.groups = 3;
  lex.suffixes = {"en", "ne", "ens", "nes", "sen", "ss"};
  lex.suffix_group = {0, 1, 2, 0, 1, 2};
  std::set<std::string> taken;
  lex.roots = make_words(rng, config.roots, "bdfgklmprtvz", "aiou", 3, 7, taken);
  lex.function_words = make_words(rng, config.function_words, "hwyjcx", "aiou", 2, 3, taken);
  for (int i = 0; i < config.function_words; ++i) lex.function_group.push_back(i % lex.groups);

  std::vector<std::vector<int>> group_members(static_cast<size_t>(lex.groups));
  for (int i = 0; i < config.function_words; ++i) {
    group_members[static_cast<size_t>(lex.function_group[static_cast<size_t>(i)])].push_back(i);
  }
  // A function-word group g prefers the suffixes whose own group is g + 1.
  std::vector<std::vector<int>> preferred_suffixes(static_cast<size_t>(lex.groups));
  for (size_t s = 0; s < lex.suffixes.size(); ++s) {
    const int g = (lex.suffix_group[s] + lex.groups - 1) % lex.groups;
    preferred_suffixes[static_cast<size_t>(g)].push_back(static_cast<int>(s));
  }

  auto root_dist = zipf_dist(lex.roots.size(), config.zipf);
  std::vector<std::discrete_distribution<int>> member_dist;
  for (const auto& members : group_members) member_dist.push_back(zipf_dist(members.size(), config.zipf));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> content_count(config.min_content, config.max_content);
  auto pick = [&](const std::vector<int>& v) {
    return v[std::uniform_int_distribution<size_t>(0, v.size() - 1)(rng)];
  };
  std::vector<int> all_suffixes(lex.suffixes.size());
  for (size_t s = 0; s < all_suffixes.size(); ++s) all_suffixes[s] = static_cast<int>(s);

  std::vector<std::string> sentences;
  std::int64_t produced = 0;
  while (produced < config.tokens) {
    const int contents = content_count(rng);
    std::string line;
    int group = -1;
    for (int k = 0; k < contents; ++k) {
      const bool follow = group >= 0 && coin(rng) < config.suffix_agreement;
      const int suffix = follow ? pick(preferred_suffixes[static_cast<size_t>(group)]) : pick(all_suffixes);
      if (!line.empty()) line += ' ';
      line += lex.roots[static_cast<size_t>(root_dist(rng))] + lex.suffixes[static_cast<size_t>(suffix)];
      ++produced;
      if (k + 1 == contents) break;
      group = coin(rng) < config.agreement ? lex.suffix_group[static_cast<size_t>(suffix)]
                                           : std::uniform_int_distribution<int>(0, lex.groups - 1)(rng);
      const auto& members = group_members[static_cast<size_t>(group)];
      line += ' ' + lex.function_words[static_cast<size_t>(members[static_cast<size_t>(
                        member_dist[static_cast<size_t>(group)](rng))])];
      ++produced;
    }
    sentences.push_back(std::move(line));
  }

  const auto n = sentences.size();
  const auto n_valid = static_cast<size_t>(std::llround(static_cast<double>(n) * config.valid_fraction));
  const auto n_test = static_cast<size_t>(std::llround(static_cast<double>(n) * config.test_fraction));
  const auto n_train = n - n_valid - n_test;
  corpus.train.assign(sentences.begin(), sentences.begin() + static_cast<std::ptrdiff_t>(n_train));
  corpus.valid.assign(sentences.begin() + static_cast<std::ptrdiff_t>(n_train),
                      sentences.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  corpus.test.assign(sentences.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), sentences.end());
  return corpus;
}

void write_synth(const std::string& dir, const SynthCorpus& corpus) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("output_unwritable", "cannot create '" + dir + "': " + ec.message());
  auto dump = [&](const char* name, const std::vector<std::string>& lines) {
    const auto path = (std::filesystem::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("output_unwritable", "cannot write '" + path + "'");
    for (const auto& l : lines) out << l << '\n';
  };
  dump("train.txt", corpus.train);
  dump("valid.txt", corpus.valid);
  dump("test.txt", corpus.test);
}

}  // namespace patlm
