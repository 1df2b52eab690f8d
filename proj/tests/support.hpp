#pragma once

// Shared helpers for the unit tests and the acceptance runner: small corpus
// builders and brute-force oracles that deliberately avoid the library's
// own algorithms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "patlm/automaton.hpp"
#include "patlm/corpus.hpp"
#include "patlm/crf.hpp"
#include "patlm/encoded.hpp"
#include "patlm/neural_lm.hpp"

namespace patlm::testing {

// Corpus over symbol ids given directly; every sentence is one word.
inline CharCorpus corpus_of_ids(const std::vector<std::vector<SymbolId>>& sentences) {
  CharCorpus c;
  for (const auto& s : sentences) {
    c.sentences.push_back(s);
    c.word_spans.push_back({WordSpan{0, static_cast<std::int32_t>(s.size())}});
  }
  return c;
}

// Lowercase letters map to ids 'a' -> 0, 'b' -> 1, ...
inline std::vector<SymbolId> ids(const std::string& s) {
  std::vector<SymbolId> out;
  for (char ch : s) out.push_back(ch - 'a');
  return out;
}

inline std::vector<SymbolId> random_string(std::mt19937_64& rng, int alphabet, int length) {
  std::uniform_int_distribution<int> d(0, alphabet - 1);
  std::vector<SymbolId> s(static_cast<size_t>(length));
  for (auto& x : s) x = d(rng);
  return s;
}

// Distinct non-empty random patterns.
inline std::vector<Pattern> random_patterns(std::mt19937_64& rng, int alphabet, int count, int max_len) {
  std::vector<Pattern> out;
  std::uniform_int_distribution<int> len(1, max_len);
  int guard = 0;
  while (static_cast<int>(out.size()) < count && guard++ < 10000) {
    auto p = random_string(rng, alphabet, len(rng));
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  return out;
}

inline std::int64_t naive_count(const Pattern& p, const std::vector<SymbolId>& s) {
  std::int64_t n = 0;
  for (size_t i = 0; i + p.size() <= s.size(); ++i) {
    if (std::equal(p.begin(), p.end(), s.begin() + static_cast<std::ptrdiff_t>(i))) ++n;
  }
  return n;
}

// Enumerates A^K explicitly.
struct BruteCrf {
  double log_z = 0.0;
  std::vector<double> expected;
};

inline BruteCrf brute_crf(const std::vector<Pattern>& patterns, const std::vector<double>& weights,
                          int alphabet, int length) {
  BruteCrf out;
  out.expected.assign(patterns.size(), 0.0);
  std::vector<SymbolId> y(static_cast<size_t>(length), 0);
  std::vector<double> energies;
  std::vector<std::vector<std::int64_t>> counts;
  while (true) {
    double e = 0.0;
    std::vector<std::int64_t> c(patterns.size());
    for (size_t k = 0; k < patterns.size(); ++k) {
      c[k] = naive_count(patterns[k], y);
      e += weights[k] * static_cast<double>(c[k]);
    }
    energies.push_back(e);
    counts.push_back(std::move(c));
    int pos = length - 1;
    while (pos >= 0 && y[static_cast<size_t>(pos)] == alphabet - 1) y[static_cast<size_t>(pos--)] = 0;
    if (pos < 0) break;
    ++y[static_cast<size_t>(pos)];
  }
  const double emin = *std::min_element(energies.begin(), energies.end());
  double z = 0.0;
  for (double e : energies) z += std::exp(-(e - emin));
  out.log_z = std::log(z) - emin;
  for (size_t i = 0; i < energies.size(); ++i) {
    const double p = std::exp(-energies[i] - out.log_z);
    for (size_t k = 0; k < patterns.size(); ++k) out.expected[k] += p * static_cast<double>(counts[i][k]);
  }
  return out;
}

// delta(s, a) by definition: the longest state that is a suffix of s + a.
inline Pattern naive_delta(const std::vector<Pattern>& states, const Pattern& s, SymbolId a) {
  Pattern sa = s;
  sa.push_back(a);
  Pattern best;
  for (const auto& st : states) {
    if (st.size() > sa.size() || st.size() <= best.size()) continue;
    if (std::equal(st.begin(), st.end(), sa.end() - static_cast<std::ptrdiff_t>(st.size()))) best = st;
  }
  return best;
}

inline std::vector<Pattern> naive_states(const std::vector<Pattern>& patterns) {
  std::vector<Pattern> states{Pattern{}};
  for (const auto& p : patterns) {
    for (size_t len = 1; len <= p.size(); ++len) {
      Pattern pre(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(len));
      if (std::find(states.begin(), states.end(), pre) == states.end()) states.push_back(pre);
    }
  }
  return states;
}

// Encodes a string with the naive transition rule, returning state strings.
inline std::vector<Pattern> naive_encode(const std::vector<Pattern>& patterns, const std::vector<SymbolId>& s) {
  const auto states = naive_states(patterns);
  std::vector<Pattern> out;
  Pattern cur;
  for (SymbolId a : s) {
    cur = naive_delta(states, cur, a);
    out.push_back(cur);
  }
  return out;
}

// Frequent substrings by enumerating every (start, length) pair.
inline std::map<std::vector<SymbolId>, std::int64_t> naive_frequent(const CharCorpus& corpus, std::int64_t f,
                                                                    int max_len) {
  std::map<std::vector<SymbolId>, std::int64_t> counts;
  for (const auto& s : corpus.sentences) {
    for (size_t i = 0; i < s.size(); ++i) {
      for (size_t len = 1; len <= static_cast<size_t>(max_len) && i + len <= s.size(); ++len) {
        ++counts[std::vector<SymbolId>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                       s.begin() + static_cast<std::ptrdiff_t>(i + len))];
      }
    }
  }
  for (auto it = counts.begin(); it != counts.end();) {
    it = it->second > f ? std::next(it) : counts.erase(it);
  }
  return counts;
}

// Character-encoded train and held-out streams sharing one vocabulary.
struct CharStreams {
  Alphabet alphabet;
  EncodedCorpus train;
  EncodedCorpus valid;
};

inline CharStreams char_streams(const std::string& train_text, const std::string& valid_text) {
  CharStreams out;
  const auto train = load_corpus_from_string(train_text, SourceProfile::kPtb, out.alphabet);
  out.alphabet.intern(Alphabet::kUnkWord);
  out.alphabet.freeze();
  const auto valid = load_corpus_from_string(valid_text, SourceProfile::kPtb, out.alphabet);
  const auto vocab = build_word_vocab(train, out.alphabet);
  out.train = encode_chars(train, out.alphabet, vocab);
  out.valid = encode_chars(valid, out.alphabet, vocab);
  return out;
}

// Random sentences over a small lexicon.
inline std::string random_text(std::uint64_t seed, int words, int lexicon = 12) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> lex;
  for (int i = 0; i < lexicon; ++i) {
    std::string w;
    const int len = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < len; ++k) w += static_cast<char>('a' + rng() % 5);
    lex.push_back(w);
  }
  std::string text;
  for (int i = 0; i < words; ++i) {
    text += lex[rng() % lex.size()];
    text += (i % 8 == 7) ? '\n' : ' ';
  }
  return text;
}

// A tiny language model over a random token stream, for gradient checks.
struct MicroModel {
  LMConfig config;
  EncodedCorpus corpus;
  Window window;
};

inline MicroModel micro_model(Composition composition, std::uint64_t seed, int steps = 2, int batch = 2) {
  std::mt19937_64 rng(seed);
  MicroModel m;
  auto& c = m.config;
  c.composition = composition;
  c.subword_vocab = 6;
  c.word_vocab = 7;
  c.d_lm = 4;
  c.d_hw = 4;
  c.pad_length = 3;
  c.highway_layers = 2;
  c.lstm_layers = 2;
  switch (composition) {
    case Composition::kSum:
      c.d_x = 4;
      break;
    case Composition::kConcat:
      c.d_x = 2;
      break;
    case Composition::kCnn:
      c.d_x = 2;
      c.cnn_widths = {1, 2, 3};
      c.cnn_depths = {2, 1, 1};
      break;
  }
  c.validate();

  m.corpus.units = SubwordUnits::kChars;
  m.corpus.subword_vocab = c.subword_vocab;
  for (int w = 0; w < c.word_vocab; ++w) m.corpus.vocab.push_back("w" + std::to_string(w));
  std::uniform_int_distribution<int> word(0, c.word_vocab - 1);
  std::uniform_int_distribution<int> unit(0, c.subword_vocab - 2);
  std::uniform_int_distribution<int> len(1, 5);  // some longer than pad_length, some shorter than widths
  const int tokens = steps * batch + 1;
  for (int t = 0; t < tokens; ++t) {
    std::vector<std::int32_t> units(static_cast<size_t>(len(rng)));
    for (auto& u : units) u = unit(rng);
    m.corpus.push(word(rng), units);
  }
  m.window.batch = batch;
  m.window.steps = steps;
  for (int t = 0; t < steps; ++t) {
    for (int b = 0; b < batch; ++b) {
      const auto pos = static_cast<std::int64_t>(b * steps + t);
      m.window.tokens.push_back(pos);
      m.window.targets.push_back(m.corpus.words[static_cast<size_t>(pos + 1)]);
    }
  }
  return m;
}

inline LMParams<double> random_params(const LMConfig& config, std::uint64_t seed, double range = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-range, range);
  auto p = LMParams<double>::zeros(config);
  for (auto& [name, m] : p.named()) {
    (void)name;
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = d(rng);
  }
  return p;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;
  double worst_numeric = 0.0;
  double worst_analytic = 0.0;
  std::int64_t checked = 0;
};

// Five-point central differences on every parameter of the micro model
// (dropout off, zero initial state). Many gradients of the micro model are
// around 1e-7, so the two-point rule's rounding error (about 1e-9 at h=1e-6)
// would swamp a relative comparison; the higher-order stencil tolerates a
// step large enough to keep rounding near 1e-12.
inline GradCheck check_micro_gradients(const MicroModel& m, const LMParams<double>& params, double h = 1e-3) {
  auto loss = [&](const LMParams<double>& p) {
    SubwordLM<double> model(m.config, p);
    auto state = RecurrentState<double>::zeros(m.config, m.window.batch);
    return model.run_window(m.corpus, m.window, state, nullptr, nullptr);
  };
  auto grads = LMParams<double>::zeros(m.config);
  {
    SubwordLM<double> model(m.config, params);
    auto state = RecurrentState<double>::zeros(m.config, m.window.batch);
    model.run_window(m.corpus, m.window, state, nullptr, &grads);
  }
  GradCheck out;
  auto probe = params;
  auto named_probe = probe.named();
  const auto named_grad = grads.named();
  for (size_t k = 0; k < named_probe.size(); ++k) {
    auto* tensor = named_probe[k].second;
    const auto* g = named_grad[k].second;
    for (Eigen::Index i = 0; i < tensor->size(); ++i) {
      const double orig = tensor->data()[i];
      auto at = [&](double offset) {
        tensor->data()[i] = orig + offset;
        return loss(probe);
      };
      const double numeric = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
      tensor->data()[i] = orig;
      const double analytic = g->data()[i];
      const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = named_probe[k].first + "[" + std::to_string(i) + "]";
        out.worst_numeric = numeric;
        out.worst_analytic = analytic;
      }
    }
  }
  return out;
}

}  // namespace patlm::testing
