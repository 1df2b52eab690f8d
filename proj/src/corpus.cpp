#include "patlm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "patlm/error.hpp"
#include "patlm/utf8.hpp"

namespace patlm {

SymbolId Alphabet::intern(char32_t symbol) {
  if (auto it = ids_.find(symbol); it != ids_.end()) return it->second;
  if (frozen_) {
    throw InputError("unknown_symbol", "alphabet is frozen; cannot add U+" + std::to_string(symbol));
  }
  const auto id = static_cast<SymbolId>(symbols_.size());
  symbols_.push_back(symbol);
  ids_.emplace(symbol, id);
  return id;
}

std::optional<SymbolId> Alphabet::find(char32_t symbol) const {
  if (auto it = ids_.find(symbol); it != ids_.end()) return it->second;
  return std::nullopt;
}

SymbolId Alphabet::id_of(char32_t symbol) const {
  if (auto id = find(symbol)) return *id;
  throw InputError("unknown_symbol", "symbol " + std::to_string(symbol) + " not in alphabet");
}

std::string Alphabet::render(SymbolId id) const {
  const char32_t s = symbol(id);
  if (s == kUnkWord) return std::string(WordVocab::kUnk);
  std::string out;
  utf8::append(out, s);
  return out;
}

std::string Alphabet::render(std::span<const SymbolId> ids) const {
  std::string out;
  for (SymbolId id : ids) out += render(id);
  return out;
}

SourceProfile parse_profile(std::string_view name) {
  if (name == "ptb") return SourceProfile::kPtb;
  if (name == "wikitext2") return SourceProfile::kWikitext2;
  if (name == "raw") return SourceProfile::kRaw;
  throw ConfigError("bad_profile", "unknown corpus profile '" + std::string(name) + "'");
}

std::string_view profile_name(SourceProfile profile) {
  switch (profile) {
    case SourceProfile::kPtb:
      return "ptb";
    case SourceProfile::kWikitext2:
      return "wikitext2";
    case SourceProfile::kRaw:
      return "raw";
  }
  return "raw";
}

bool appends_eos(SourceProfile profile) { return profile == SourceProfile::kPtb; }

size_t CharCorpus::symbol_count() const {
  size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

size_t CharCorpus::word_count() const {
  size_t n = 0;
  for (const auto& s : word_spans) n += s.size();
  return n;
}

namespace {

void replace_pass(std::string& s, std::string_view from, std::string_view to) {
  std::string out;
  out.reserve(s.size());
  size_t pos = 0;
  while (true) {
    const size_t hit = s.find(from, pos);
    if (hit == std::string::npos) break;
    out.append(s, pos, hit - pos);
    out.append(to);
    pos = hit + from.size();
  }
  out.append(s, pos, std::string::npos);
  s = std::move(out);
}

// Replaces until no occurrence is left, so a replacement that creates a new
// occurrence together with its neighbours is rewritten as well.
void replace_all(std::string& s, std::string_view from, std::string_view to) {
  while (s.find(from) != std::string::npos) replace_pass(s, from, to);
}

bool is_space(char32_t c) { return c == U' ' || c == U'\t'; }

SymbolId symbol_for(char32_t c, Alphabet& alphabet, size_t line_no, size_t col) {
  if (!alphabet.frozen()) return alphabet.intern(c);
  if (auto id = alphabet.find(c)) return *id;
  if (auto unk = alphabet.find(Alphabet::kUnkWord)) return *unk;
  throw InputError("unknown_symbol", "line " + std::to_string(line_no) + ", column " +
                                         std::to_string(col) +
                                         ": character not in frozen alphabet");
}

void parse_line(CharCorpus& corpus, std::string_view raw, Alphabet& alphabet, size_t line_no) {
  std::string line(raw);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (corpus.profile == SourceProfile::kWikitext2) line = wikitext_normalize(line);

  std::u32string cps;
  try {
    cps = utf8::decode(line);
  } catch (const InputError& e) {
    throw InputError("invalid_utf8", "line " + std::to_string(line_no) + ": " + e.what());
  }

  std::vector<SymbolId> sentence;
  std::vector<WordSpan> spans;
  size_t i = 0;
  while (i < cps.size()) {
    if (is_space(cps[i])) {
      sentence.push_back(symbol_for(cps[i], alphabet, line_no, i));
      ++i;
      continue;
    }
    size_t j = i;
    while (j < cps.size() && !is_space(cps[j])) ++j;
    const auto begin = static_cast<std::int32_t>(sentence.size());
    const std::u32string_view token(cps.data() + i, j - i);
    if (corpus.profile == SourceProfile::kPtb && token == U"<unk>") {
      sentence.push_back(alphabet.frozen() ? alphabet.id_of(Alphabet::kUnkWord)
                                           : alphabet.intern(Alphabet::kUnkWord));
    } else {
      for (size_t k = i; k < j; ++k) sentence.push_back(symbol_for(cps[k], alphabet, line_no, k));
    }
    spans.push_back({begin, static_cast<std::int32_t>(sentence.size())});
    i = j;
  }
  corpus.sentences.push_back(std::move(sentence));
  corpus.word_spans.push_back(std::move(spans));
}

}  // namespace

std::string wikitext_normalize(std::string_view line) {
  std::string s(line);
  replace_all(s, "= = =", "===");
  replace_all(s, "= =", "==");
  return s;
}

void append_line(CharCorpus& corpus, std::string_view line, Alphabet& alphabet) {
  parse_line(corpus, line, alphabet, corpus.sentences.size() + 1);
}

CharCorpus load_corpus_from_string(std::string_view text, SourceProfile profile,
                                   Alphabet& alphabet) {
  CharCorpus corpus;
  corpus.profile = profile;
  size_t pos = 0;
  size_t line_no = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    parse_line(corpus, text.substr(pos, nl - pos), alphabet, ++line_no);
    pos = nl + 1;
  }
  return corpus;
}

CharCorpus load_corpus(const std::string& path, SourceProfile profile, Alphabet& alphabet) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("input_missing", "cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return load_corpus_from_string(buf.str(), profile, alphabet);
  } catch (const InputError& e) {
    throw InputError(e.reason(), path + ": " + e.what());
  }
}

int word_length_percentile(const CharCorpus& corpus, double p) {
  if (!(p > 0.0 && p <= 100.0)) throw ConfigError("bad_percentile", "p must be in (0, 100]");
  std::vector<int> lengths;
  for (const auto& spans : corpus.word_spans) {
    for (const auto& span : spans) lengths.push_back(span.size());
  }
  if (lengths.empty()) throw InputError("empty_corpus", "no word tokens to take a percentile of");
  std::sort(lengths.begin(), lengths.end());
  const auto n = static_cast<long double>(lengths.size());
  auto rank = static_cast<size_t>(std::ceil(static_cast<long double>(p) * n / 100.0L - 1e-12L));
  rank = std::clamp<size_t>(rank, 1, lengths.size());
  return lengths[rank - 1];
}

WordVocab::WordVocab() { add(std::string(kUnk)); }

std::int32_t WordVocab::add(const std::string& word) {
  if (auto it = ids_.find(word); it != ids_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(words_.size());
  words_.push_back(word);
  ids_.emplace(word, id);
  return id;
}

std::int32_t WordVocab::lookup(const std::string& word) const {
  if (auto it = ids_.find(word); it != ids_.end()) return it->second;
  return unk_id();
}

WordVocab build_word_vocab(const CharCorpus& corpus, const Alphabet& alphabet) {
  WordVocab vocab;
  if (corpus.empty()) return vocab;
  if (appends_eos(corpus.profile)) vocab.add(std::string(WordVocab::kEos));
  for (size_t s = 0; s < corpus.sentences.size(); ++s) {
    const auto& sentence = corpus.sentences[s];
    for (const auto& span : corpus.word_spans[s]) {
      vocab.add(alphabet.render(std::span(sentence).subspan(span.begin, span.size())));
    }
  }
  return vocab;
}

std::string escape_codepoints(std::u32string_view cps) {
  std::string out;
  for (char32_t c : cps) {
    switch (c) {
      case U'\\':
        out += "\\\\";
        break;
      case U'\t':
        out += "\\t";
        break;
      case U'\n':
        out += "\\n";
        break;
      case U'\r':
        out += "\\r";
        break;
      case U' ':
        out += "\\s";
        break;
      case Alphabet::kUnkWord:
        out += "\\U";
        break;
      default:
        utf8::append(out, c);
    }
  }
  return out;
}

std::string escape_symbols(std::span<const SymbolId> ids, const Alphabet& alphabet) {
  std::u32string cps;
  cps.reserve(ids.size());
  for (SymbolId id : ids) cps.push_back(alphabet.symbol(id));
  return escape_codepoints(cps);
}

std::u32string unescape_symbols(std::string_view text) {
  const std::u32string raw = utf8::decode(text);
  std::u32string out;
  for (size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != U'\\') {
      out.push_back(raw[i]);
      continue;
    }
    if (i + 1 >= raw.size()) throw InputError("bad_escape", "dangling backslash");
    switch (raw[++i]) {
      case U'\\':
        out.push_back(U'\\');
        break;
      case U't':
        out.push_back(U'\t');
        break;
      case U'n':
        out.push_back(U'\n');
        break;
      case U'r':
        out.push_back(U'\r');
        break;
      case U's':
        out.push_back(U' ');
        break;
      case U'U':
        out.push_back(Alphabet::kUnkWord);
        break;
      default:
        throw InputError("bad_escape", "unknown escape sequence");
    }
  }
  return out;
}

}  // namespace patlm
