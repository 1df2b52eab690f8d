#include "patlm/automaton.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "patlm/error.hpp"

namespace patlm {

PatternAutomaton::PatternAutomaton(std::vector<Pattern> patterns, int alphabet_size)
    : patterns_(std::move(patterns)), alphabet_size_(alphabet_size) {
  if (alphabet_size < 0) throw ConfigError("bad_alphabet", "negative alphabet size");
  {
    std::set<Pattern> seen;
    for (const auto& p : patterns_) {
      if (p.empty()) throw ConfigError("empty_pattern", "patterns must be non-empty");
      for (SymbolId s : p) {
        if (s < 0 || s >= alphabet_size) {
          throw InputError("unknown_symbol", "pattern symbol " + std::to_string(s) +
                                                 " outside alphabet of size " +
                                                 std::to_string(alphabet_size));
        }
      }
      if (!seen.insert(p).second) throw ConfigError("duplicate_pattern", "pattern listed twice");
    }
  }

  // Trie over all patterns; goto[s][a] = -1 when absent.
  std::vector<std::map<SymbolId, StateId>> trie(1);
  std::vector<Pattern> trie_strings(1);
  std::vector<std::int32_t> trie_pattern(1, -1);
  for (size_t pi = 0; pi < patterns_.size(); ++pi) {
    StateId s = 0;
    for (SymbolId a : patterns_[pi]) {
      auto it = trie[static_cast<size_t>(s)].find(a);
      if (it == trie[static_cast<size_t>(s)].end()) {
        const auto t = static_cast<StateId>(trie.size());
        trie[static_cast<size_t>(s)].emplace(a, t);
        trie.emplace_back();
        Pattern str = trie_strings[static_cast<size_t>(s)];
        str.push_back(a);
        trie_strings.push_back(std::move(str));
        trie_pattern.push_back(-1);
        s = t;
      } else {
        s = it->second;
      }
    }
    trie_pattern[static_cast<size_t>(s)] = static_cast<std::int32_t>(pi);
  }

  // Breadth-first renumbering: empty word first, then by length, children in
  // symbol order.
  std::vector<StateId> bfs_id(trie.size(), -1);
  std::vector<StateId> order;
  order.reserve(trie.size());
  {
    std::deque<StateId> queue{0};
    while (!queue.empty()) {
      const StateId s = queue.front();
      queue.pop_front();
      bfs_id[static_cast<size_t>(s)] = static_cast<StateId>(order.size());
      order.push_back(s);
      for (const auto& [a, t] : trie[static_cast<size_t>(s)]) queue.push_back(t);
    }
  }
  const size_t n = order.size();
  const auto width = static_cast<size_t>(alphabet_size_);
  states_.resize(n);
  std::vector<std::int32_t> own_pattern(n, -1);
  for (size_t i = 0; i < n; ++i) {
    states_[i] = trie_strings[static_cast<size_t>(order[i])];
    own_pattern[i] = trie_pattern[static_cast<size_t>(order[i])];
  }

  delta_.assign(n * width, 0);
  links_.assign(n, 0);
  for (size_t i = 0; i < n; ++i) {
    const auto& children = trie[static_cast<size_t>(order[i])];
    for (size_t a = 0; a < width; ++a) {
      auto it = children.find(static_cast<SymbolId>(a));
      if (it != children.end()) {
        const StateId child = bfs_id[static_cast<size_t>(it->second)];
        // The child's link is delta(link(parent), a); parents precede children.
        links_[static_cast<size_t>(child)] =
            i == 0 ? 0 : delta_[static_cast<size_t>(links_[i]) * width + a];
        delta_[i * width + a] = child;
      } else {
        delta_[i * width + a] = i == 0 ? 0 : delta_[static_cast<size_t>(links_[i]) * width + a];
      }
    }
  }

  suffix_offsets_.assign(n + 1, 0);
  std::vector<std::vector<std::int32_t>> lists(n);
  for (size_t i = 1; i < n; ++i) {
    if (own_pattern[i] >= 0) lists[i].push_back(own_pattern[i]);
    const auto& inherited = lists[static_cast<size_t>(links_[i])];
    lists[i].insert(lists[i].end(), inherited.begin(), inherited.end());
  }
  for (size_t i = 0; i < n; ++i) {
    suffix_offsets_[i + 1] = suffix_offsets_[i] + static_cast<std::int32_t>(lists[i].size());
    suffix_patterns_.insert(suffix_patterns_.end(), lists[i].begin(), lists[i].end());
  }
  state_weight_.assign(n, 0.0);
}

void PatternAutomaton::set_pattern_weights(std::span<const double> weights) {
  if (weights.size() != patterns_.size()) {
    throw ConfigError("weight_size", "one weight per pattern expected");
  }
  for (size_t s = 0; s < states_.size(); ++s) {
    double w = 0.0;
    for (std::int32_t p : pattern_suffixes(static_cast<StateId>(s))) w += weights[static_cast<size_t>(p)];
    state_weight_[s] = w;
  }
}

std::vector<StateId> PatternAutomaton::encode_sentence(std::span<const SymbolId> sentence) const {
  std::vector<StateId> out;
  out.reserve(sentence.size());
  StateId s = 0;
  for (SymbolId a : sentence) {
    if (a < 0 || a >= alphabet_size_) {
      throw InputError("unknown_symbol", "symbol id " + std::to_string(a) + " outside alphabet");
    }
    s = next(s, a);
    out.push_back(s);
  }
  return out;
}

PatternAutomaton build_automaton(const std::vector<Pattern>& patterns, const Alphabet& alphabet) {
  return PatternAutomaton(patterns, alphabet.size());
}

namespace {

constexpr std::string_view kHeader = "#patlm-automaton v1";

void expect_line(std::istream& in, std::string_view want, const std::string& path) {
  std::string line;
  if (!std::getline(in, line) || line != want) {
    throw InputError("bad_format", path + ": expected '" + std::string(want) + "'");
  }
}

size_t read_count(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("bad_format", path + ": truncated");
  return std::stoul(line);
}

std::vector<StateId> read_ints(const std::string& line) {
  std::vector<StateId> out;
  std::istringstream is(line);
  StateId v;
  while (is >> v) out.push_back(v);
  return out;
}

}  // namespace

void write_automaton(const std::string& path, const PatternAutomaton& automaton,
                     const Alphabet& alphabet) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("output_unwritable", "cannot write '" + path + "'");
  out << kHeader << '\n';
  out << "[alphabet]\n" << alphabet.size() << '\n';
  for (char32_t c : alphabet.symbols()) out << escape_codepoints(std::u32string(1, c)) << '\n';
  out << "[patterns]\n" << automaton.num_patterns() << '\n';
  for (const auto& p : automaton.patterns()) out << escape_symbols(p, alphabet) << '\n';
  out << "[states]\n" << automaton.num_states() << '\n';
  for (StateId s = 0; s < automaton.num_states(); ++s) {
    out << escape_symbols(automaton.state_string(s), alphabet) << '\n';
  }
  out << "[delta]\n" << automaton.num_states() << ' ' << automaton.alphabet_size() << '\n';
  for (StateId s = 0; s < automaton.num_states(); ++s) {
    const auto row = automaton.row(s);
    for (size_t a = 0; a < row.size(); ++a) out << (a ? " " : "") << row[a];
    out << '\n';
  }
  out << "[suffix_links]\n";
  for (StateId s = 0; s < automaton.num_states(); ++s) {
    out << (s ? " " : "") << automaton.suffix_link(s);
  }
  out << '\n';
}

PatternAutomaton read_automaton(const std::string& path, Alphabet& alphabet) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("input_missing", "cannot read '" + path + "'");
  expect_line(in, kHeader, path);
  std::string line;

  expect_line(in, "[alphabet]", path);
  const size_t a_count = read_count(in, path);
  Alphabet loaded;
  for (size_t i = 0; i < a_count; ++i) {
    if (!std::getline(in, line)) throw InputError("bad_format", path + ": truncated alphabet");
    const auto cps = unescape_symbols(line);
    if (cps.size() != 1) throw InputError("bad_format", path + ": alphabet entry must be one symbol");
    loaded.intern(cps[0]);
  }
  if (loaded.size() != static_cast<int>(a_count)) {
    throw InputError("bad_format", path + ": duplicate alphabet entries");
  }

  auto read_strings = [&](std::string_view section) {
    expect_line(in, section, path);
    const size_t count = read_count(in, path);
    std::vector<Pattern> out(count);
    for (size_t i = 0; i < count; ++i) {
      if (!std::getline(in, line)) throw InputError("bad_format", path + ": truncated section");
      for (char32_t c : unescape_symbols(line)) out[i].push_back(loaded.id_of(c));
    }
    return out;
  };
  std::vector<Pattern> patterns = read_strings("[patterns]");
  const std::vector<Pattern> states = read_strings("[states]");

  expect_line(in, "[delta]", path);
  if (!std::getline(in, line)) throw InputError("bad_format", path + ": truncated delta");
  const auto dims = read_ints(line);
  if (dims.size() != 2) throw InputError("bad_format", path + ": bad delta dimensions");
  std::vector<StateId> delta;
  for (StateId r = 0; r < dims[0]; ++r) {
    if (!std::getline(in, line)) throw InputError("bad_format", path + ": truncated delta");
    const auto row = read_ints(line);
    if (static_cast<StateId>(row.size()) != dims[1]) {
      throw InputError("bad_format", path + ": delta row width mismatch");
    }
    delta.insert(delta.end(), row.begin(), row.end());
  }
  expect_line(in, "[suffix_links]", path);
  std::getline(in, line);
  const auto links = read_ints(line);

  PatternAutomaton automaton(std::move(patterns), loaded.size());
  bool same = automaton.num_states() == static_cast<int>(states.size()) &&
              automaton.delta_table() == delta && automaton.suffix_links() == links;
  for (StateId s = 0; same && s < automaton.num_states(); ++s) {
    same = automaton.state_string(s) == states[static_cast<size_t>(s)];
  }
  if (!same) throw InputError("automaton_mismatch", path + ": tables disagree with the patterns");
  loaded.freeze();
  alphabet = std::move(loaded);
  return automaton;
}

}  // namespace patlm
