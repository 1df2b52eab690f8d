#include "patlm/encoded.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "patlm/error.hpp"
#include "patlm/parallel.hpp"
#include "patlm/utf8.hpp"

namespace patlm {

std::string_view units_name(SubwordUnits units) {
  return units == SubwordUnits::kChars ? "chars" : "patterns";
}

SubwordUnits parse_units(std::string_view name) {
  if (name == "chars") return SubwordUnits::kChars;
  if (name == "patterns") return SubwordUnits::kPatterns;
  throw ConfigError("bad_units", "units must be 'chars' or 'patterns', got '" + std::string(name) + "'");
}

void EncodedCorpus::push(std::int32_t word, std::span<const std::int32_t> units_of_word) {
  words.push_back(word);
  subwords.insert(subwords.end(), units_of_word.begin(), units_of_word.end());
  offsets.push_back(static_cast<std::int32_t>(subwords.size()));
}

int EncodedCorpus::max_subwords() const {
  int m = 0;
  for (size_t i = 0; i + 1 < offsets.size(); ++i) m = std::max(m, offsets[i + 1] - offsets[i]);
  return m;
}

int subword_length_percentile(const EncodedCorpus& corpus, double p) {
  if (!(p > 0.0 && p <= 100.0)) throw ConfigError("bad_percentile", "percentile must lie in (0, 100]");
  std::vector<int> lengths;
  for (size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus.is_eos(i)) lengths.push_back(corpus.offsets[i + 1] - corpus.offsets[i]);
  }
  if (lengths.empty()) throw InputError("empty_corpus", "no word tokens");
  std::sort(lengths.begin(), lengths.end());
  const auto n = static_cast<long double>(lengths.size());
  auto rank = static_cast<size_t>(std::ceil(static_cast<long double>(p) * n / 100.0L - 1e-12L));
  rank = std::clamp<size_t>(rank, 1, lengths.size());
  return lengths[rank - 1];
}

namespace {

EncodedCorpus make_stream(const CharCorpus& corpus, const Alphabet& alphabet, const WordVocab& vocab,
                          SubwordUnits units, std::int32_t subword_vocab,
                          const std::vector<std::vector<std::int32_t>>& unit_streams) {
  EncodedCorpus out;
  out.units = units;
  out.subword_vocab = subword_vocab;
  out.vocab = vocab.words();
  const std::int32_t eos_word = vocab.lookup(std::string(WordVocab::kEos));
  const std::int32_t eos_unit = subword_vocab - 1;
  const bool eos = appends_eos(corpus.profile);
  for (size_t s = 0; s < corpus.sentences.size(); ++s) {
    const auto& sentence = corpus.sentences[s];
    const auto& stream = unit_streams[s];
    for (const auto& span : corpus.word_spans[s]) {
      const auto word = vocab.lookup(alphabet.render(std::span(sentence).subspan(
          static_cast<size_t>(span.begin), static_cast<size_t>(span.size()))));
      out.push(word, std::span(stream).subspan(static_cast<size_t>(span.begin), static_cast<size_t>(span.size())));
    }
    if (eos) out.push(eos_word, std::span(&eos_unit, 1));
  }
  return out;
}

}  // namespace

EncodedCorpus encode_chars(const CharCorpus& corpus, const Alphabet& alphabet, const WordVocab& vocab) {
  std::vector<std::vector<std::int32_t>> streams(corpus.sentences.begin(), corpus.sentences.end());
  return make_stream(corpus, alphabet, vocab, SubwordUnits::kChars, alphabet.size() + 1, streams);
}

EncodedCorpus encode_words(const PatternAutomaton& automaton, const CharCorpus& corpus,
                           const Alphabet& alphabet, const WordVocab& vocab, int threads) {
  for (const auto& sentence : corpus.sentences) {
    for (SymbolId a : sentence) {
      if (a < 0 || a >= automaton.alphabet_size()) {
        throw InputError("unknown_symbol", "corpus symbol outside the automaton alphabet");
      }
    }
  }
  std::vector<std::vector<std::int32_t>> streams(corpus.sentences.size());
  parallel_chunks(corpus.sentences.size(), threads, [&](size_t begin, size_t end, size_t) {
    for (size_t i = begin; i < end; ++i) streams[i] = automaton.encode_sentence(corpus.sentences[i]);
  });
  return make_stream(corpus, alphabet, vocab, SubwordUnits::kPatterns, automaton.num_states() + 1,
                     streams);
}

void write_encoded(const std::string& path, const EncodedCorpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("output_unwritable", "cannot write '" + path + "'");
  out << "#patlm-encoded v1\n";
  out << "units=" << units_name(corpus.units) << '\n';
  out << "subword_vocab=" << corpus.subword_vocab << '\n';
  out << "word_vocab=" << corpus.word_vocab() << '\n';
  out << "tokens=" << corpus.size() << '\n';
  out << "[vocab]\n";
  for (const auto& w : corpus.vocab) out << escape_codepoints(utf8::decode(w)) << '\n';
  out << "[tokens]\n";
  for (size_t i = 0; i < corpus.size(); ++i) {
    out << corpus.words[i];
    for (auto u : corpus.subwords_of(i)) out << ' ' << u;
    out << '\n';
  }
}

EncodedCorpus read_encoded(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("input_missing", "cannot read '" + path + "'");
  std::string line;
  auto bad = [&](const std::string& what) { return InputError("bad_format", path + ": " + what); };
  if (!std::getline(in, line) || line != "#patlm-encoded v1") throw bad("missing header");
  auto field = [&](std::string_view key) {
    if (!std::getline(in, line) || line.rfind(std::string(key) + "=", 0) != 0) {
      throw bad("expected " + std::string(key));
    }
    return line.substr(key.size() + 1);
  };
  EncodedCorpus corpus;
  corpus.units = parse_units(field("units"));
  corpus.subword_vocab = std::stoi(field("subword_vocab"));
  const auto vocab_size = std::stoul(field("word_vocab"));
  const auto tokens = std::stoul(field("tokens"));
  if (!std::getline(in, line) || line != "[vocab]") throw bad("expected [vocab]");
  for (size_t i = 0; i < vocab_size; ++i) {
    if (!std::getline(in, line)) throw bad("truncated vocab");
    corpus.vocab.push_back(utf8::encode(unescape_symbols(line)));
  }
  if (!std::getline(in, line) || line != "[tokens]") throw bad("expected [tokens]");
  std::vector<std::int32_t> units;
  for (size_t i = 0; i < tokens; ++i) {
    if (!std::getline(in, line)) throw bad("truncated tokens");
    std::istringstream is(line);
    std::int32_t word = 0;
    is >> word;
    units.clear();
    std::int32_t u = 0;
    while (is >> u) {
      if (u < 0 || u >= corpus.subword_vocab) throw bad("subword id out of range");
      units.push_back(u);
    }
    if (word < 0 || word >= static_cast<std::int32_t>(vocab_size)) throw bad("word id out of range");
    corpus.push(word, units);
  }
  return corpus;
}

}  // namespace patlm
