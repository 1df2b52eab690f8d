#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace patlm {

using SymbolId = std::int32_t;

// Dense character alphabet. Symbols are Unicode scalar values plus reserved
// values above U+10FFFF, so reserved symbols can never collide with text.
class Alphabet {
 public:
  // The PTB "<unk>" token, stored as one symbol.
  static constexpr char32_t kUnkWord = 0x110000;

  SymbolId intern(char32_t symbol);
  std::optional<SymbolId> find(char32_t symbol) const;
  // Throws InputError("unknown_symbol") when absent.
  SymbolId id_of(char32_t symbol) const;
  char32_t symbol(SymbolId id) const { return symbols_.at(static_cast<size_t>(id)); }
  int size() const { return static_cast<int>(symbols_.size()); }
  bool empty() const { return symbols_.empty(); }

  // A frozen alphabet rejects new symbols; load_corpus then maps unseen
  // characters onto kUnkWord (if present) instead of interning them.
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  // UTF-8 rendering; kUnkWord renders as "<unk>".
  std::string render(SymbolId id) const;
  std::string render(std::span<const SymbolId> ids) const;

  const std::vector<char32_t>& symbols() const { return symbols_; }

 private:
  std::vector<char32_t> symbols_;
  std::unordered_map<char32_t, SymbolId> ids_;
  bool frozen_ = false;
};

enum class SourceProfile { kPtb, kWikitext2, kRaw };

SourceProfile parse_profile(std::string_view name);
std::string_view profile_name(SourceProfile profile);

struct WordSpan {
  std::int32_t begin = 0;  // half-open [begin, end)
  std::int32_t end = 0;
  std::int32_t size() const { return end - begin; }
  bool operator==(const WordSpan&) const = default;
};

struct CharCorpus {
  std::vector<std::vector<SymbolId>> sentences;
  std::vector<std::vector<WordSpan>> word_spans;
  SourceProfile profile = SourceProfile::kRaw;

  size_t symbol_count() const;
  size_t word_count() const;
  bool empty() const { return sentences.empty(); }
};

// "= = =" -> "===", then "= =" -> "==", each rule repeated until no occurrence
// remains (which makes the function idempotent). Applied line-wide.
std::string wikitext_normalize(std::string_view line);

// Parses one already-read line (without its newline) into `corpus`.
void append_line(CharCorpus& corpus, std::string_view line, Alphabet& alphabet);

CharCorpus load_corpus(const std::string& path, SourceProfile profile, Alphabet& alphabet);
CharCorpus load_corpus_from_string(std::string_view text, SourceProfile profile,
                                   Alphabet& alphabet);

// Nearest-rank percentile of word-token lengths (in symbols).
int word_length_percentile(const CharCorpus& corpus, double p);

class WordVocab {
 public:
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr std::string_view kEos = "<eos>";

  WordVocab();

  std::int32_t add(const std::string& word);
  // Total lookup: unknown words map to unk_id().
  std::int32_t lookup(const std::string& word) const;
  bool contains(const std::string& word) const { return ids_.count(word) != 0; }
  const std::string& word(std::int32_t id) const { return words_.at(static_cast<size_t>(id)); }
  std::int32_t unk_id() const { return 0; }
  std::int32_t size() const { return static_cast<std::int32_t>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

// PTB-profile corpora also receive "<eos>", which terminates each line at the
// word level.
WordVocab build_word_vocab(const CharCorpus& corpus, const Alphabet& alphabet);

// True when the profile appends one end-of-sentence word per line.
bool appends_eos(SourceProfile profile);

// Escaped single-line text for symbol sequences in pattern/automaton files.
// Escapes: "\\" backslash, "\t" tab, "\n" newline, "\r" CR, "\s" space,
// "\U" the unk-word symbol.
std::string escape_symbols(std::span<const SymbolId> ids, const Alphabet& alphabet);
std::u32string unescape_symbols(std::string_view text);
std::string escape_codepoints(std::u32string_view cps);

}  // namespace patlm
