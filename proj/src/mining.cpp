#include "patlm/mining.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "patlm/error.hpp"

namespace patlm {

SubstringIndex::SubstringIndex(const CharCorpus& corpus, int max_length)
    : max_length_(max_length) {
  if (max_length < 1) throw ConfigError("bad_max_length", "L_max must be >= 1");
  std::int32_t alphabet_bound = 2;
  for (const auto& sentence : corpus.sentences) {
    for (SymbolId s : sentence) {
      text_.push_back(s + 2);
      alphabet_bound = std::max(alphabet_bound, s + 3);
    }
    text_.push_back(1);
  }
  text_.push_back(0);
  const auto n = static_cast<std::int32_t>(text_.size());

  remaining_.assign(text_.size(), 0);
  for (std::int32_t i = n - 2; i >= 0; --i) {
    remaining_[i] = text_[i] >= 2 ? remaining_[i + 1] + 1 : 0;
  }

  // Prefix doubling over cyclic shifts, stopped once classes cover max_length
  // symbols; the unique sentinel makes cyclic order agree with suffix order.
  std::vector<std::int32_t> order(n), cls(n), tmp_order(n), tmp_cls(n);
  {
    std::vector<std::int32_t> cnt(static_cast<size_t>(alphabet_bound) + 1, 0);
    for (auto v : text_) ++cnt[v];
    for (size_t i = 1; i < cnt.size(); ++i) cnt[i] += cnt[i - 1];
    for (std::int32_t i = n - 1; i >= 0; --i) order[--cnt[text_[i]]] = i;
    cls[order[0]] = 0;
    std::int32_t classes = 1;
    for (std::int32_t i = 1; i < n; ++i) {
      if (text_[order[i]] != text_[order[i - 1]]) ++classes;
      cls[order[i]] = classes - 1;
    }
    std::int64_t span = 1;
    while (span < max_length && classes < n) {
      const auto h = static_cast<std::int32_t>(span);
      for (std::int32_t i = 0; i < n; ++i) {
        tmp_order[i] = order[i] - h;
        if (tmp_order[i] < 0) tmp_order[i] += n;
      }
      std::vector<std::int32_t> ccnt(static_cast<size_t>(classes), 0);
      for (std::int32_t i = 0; i < n; ++i) ++ccnt[cls[tmp_order[i]]];
      for (std::int32_t i = 1; i < classes; ++i) ccnt[i] += ccnt[i - 1];
      for (std::int32_t i = n - 1; i >= 0; --i) order[--ccnt[cls[tmp_order[i]]]] = tmp_order[i];
      tmp_cls[order[0]] = 0;
      classes = 1;
      for (std::int32_t i = 1; i < n; ++i) {
        const std::int32_t a = order[i], b = order[i - 1];
        const std::int32_t a2 = (a + h) % n, b2 = (b + h) % n;
        if (cls[a] != cls[b] || cls[a2] != cls[b2]) ++classes;
        tmp_cls[a] = classes - 1;
      }
      cls.swap(tmp_cls);
      span *= 2;
    }
  }

  suffixes_.reserve(static_cast<size_t>(n));
  for (std::int32_t pos : order) {
    if (text_[pos] >= 2) suffixes_.push_back(pos);
  }
  lcp_.assign(suffixes_.size(), 0);
  for (size_t i = 1; i < suffixes_.size(); ++i) {
    const std::int32_t a = suffixes_[i - 1], b = suffixes_[i];
    const std::int32_t limit = std::min({remaining_[a], remaining_[b], max_length_});
    std::int32_t k = 0;
    while (k < limit && text_[a + k] == text_[b + k]) ++k;
    lcp_[i] = k;
  }
}

std::span<const std::int32_t> SubstringIndex::occurrences(std::span<const SymbolId> pattern) const {
  if (pattern.empty() || static_cast<int>(pattern.size()) > max_length_) {
    throw ConfigError("bad_pattern_length", "pattern length outside [1, L_max]");
  }
  // Three-way compare of the suffix at pos against the pattern prefix.
  auto compare = [&](std::int32_t pos) {
    for (size_t k = 0; k < pattern.size(); ++k) {
      const std::int32_t a = text_[pos + k];
      const std::int32_t b = pattern[k] + 2;
      if (a != b) return a < b ? -1 : 1;
    }
    return 0;
  };
  auto lo = std::partition_point(suffixes_.begin(), suffixes_.end(),
                                 [&](std::int32_t pos) { return compare(pos) < 0; });
  auto hi = std::partition_point(lo, suffixes_.end(),
                                 [&](std::int32_t pos) { return compare(pos) == 0; });
  return {suffixes_.data() + (lo - suffixes_.begin()), static_cast<size_t>(hi - lo)};
}

namespace {

void sort_patterns(std::vector<Candidate>& patterns) {
  std::sort(patterns.begin(), patterns.end(),
            [](const Candidate& a, const Candidate& b) { return a.symbols < b.symbols; });
}

CandidateSet collect(const SubstringIndex& index, std::int64_t threshold) {
  CandidateSet set;
  set.threshold = threshold;
  set.max_length = index.max_length();
  index.for_each_frequent(threshold, [&](std::span<const SymbolId> pattern,
                                         std::span<const std::int32_t> occ) {
    set.patterns.push_back({{pattern.begin(), pattern.end()}, static_cast<std::int64_t>(occ.size())});
  });
  sort_patterns(set.patterns);
  return set;
}

CandidateSet reduce_with(const CandidateSet& candidates, const SubstringIndex& index) {
  std::map<std::vector<SymbolId>, size_t> lookup;
  for (size_t i = 0; i < candidates.patterns.size(); ++i) {
    lookup.emplace(candidates.patterns[i].symbols, i);
  }
  std::vector<char> removable(candidates.patterns.size(), 0);
  std::map<size_t, std::vector<std::int32_t>> offsets;  // sub-candidate -> offsets in beta
  std::vector<std::int32_t> covered;

  for (const auto& beta : candidates.patterns) {
    const auto& b = beta.symbols;
    offsets.clear();
    for (size_t len = 1; len < b.size(); ++len) {
      for (size_t k = 0; k + len <= b.size(); ++k) {
        std::vector<SymbolId> sub(b.begin() + static_cast<std::ptrdiff_t>(k),
                                  b.begin() + static_cast<std::ptrdiff_t>(k + len));
        if (auto it = lookup.find(sub); it != lookup.end()) {
          offsets[it->second].push_back(static_cast<std::int32_t>(k));
        }
      }
    }
    if (offsets.empty()) continue;
    std::span<const std::int32_t> beta_occ;
    bool have_occ = false;
    for (const auto& [alpha_idx, offs] : offsets) {
      if (removable[alpha_idx]) continue;
      const std::int64_t alpha_count = candidates.patterns[alpha_idx].count;
      if (beta.count * static_cast<std::int64_t>(offs.size()) < alpha_count) continue;
      if (offs.size() == 1) {
        // Distinct beta occurrences give distinct alpha occurrences.
        if (beta.count == alpha_count) removable[alpha_idx] = 1;
        continue;
      }
      if (!have_occ) {
        beta_occ = index.occurrences(b);
        have_occ = true;
      }
      covered.clear();
      for (std::int32_t p : beta_occ) {
        for (std::int32_t k : offs) covered.push_back(p + k);
      }
      std::sort(covered.begin(), covered.end());
      const auto distinct = std::unique(covered.begin(), covered.end()) - covered.begin();
      if (distinct == alpha_count) removable[alpha_idx] = 1;
    }
  }

  CandidateSet out;
  out.threshold = candidates.threshold;
  out.max_length = candidates.max_length;
  for (size_t i = 0; i < candidates.patterns.size(); ++i) {
    if (!removable[i]) out.patterns.push_back(candidates.patterns[i]);
  }
  return out;
}

int longest(const CandidateSet& set) {
  int len = std::max(set.max_length, 1);
  for (const auto& c : set.patterns) len = std::max(len, static_cast<int>(c.symbols.size()));
  return len;
}

}  // namespace

CandidateSet count_frequent_substrings(const CharCorpus& corpus, std::int64_t threshold,
                                       int max_length) {
  if (threshold < 1) throw ConfigError("bad_threshold", "f must be >= 1");
  return collect(SubstringIndex(corpus, max_length), threshold);
}

CandidateSet reduce_candidates(const CandidateSet& candidates, const CharCorpus& corpus) {
  if (candidates.empty()) return candidates;
  return reduce_with(candidates, SubstringIndex(corpus, longest(candidates)));
}

CandidateSet mine_patterns(const CharCorpus& corpus, std::int64_t threshold, int max_length) {
  if (threshold < 1) throw ConfigError("bad_threshold", "f must be >= 1");
  const SubstringIndex index(corpus, max_length);
  return reduce_with(collect(index, threshold), index);
}

void write_patterns(const std::string& path, const CandidateSet& set, const Alphabet& alphabet) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("output_unwritable", "cannot write '" + path + "'");
  out << "#patlm-patterns v1 f=" << set.threshold << " L_max=" << set.max_length << '\n';
  for (const auto& c : set.patterns) {
    out << escape_symbols(c.symbols, alphabet) << '\t' << c.count << '\n';
  }
}

CandidateSet read_patterns(const std::string& path, const Alphabet& alphabet) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("input_missing", "cannot read '" + path + "'");
  std::string line;
  CandidateSet set;
  if (!std::getline(in, line) || line.rfind("#patlm-patterns v1", 0) != 0) {
    throw InputError("bad_format", path + ": missing patterns header");
  }
  {
    std::istringstream header(line.substr(std::string("#patlm-patterns v1").size()));
    std::string field;
    while (header >> field) {
      if (field.rfind("f=", 0) == 0) set.threshold = std::stoll(field.substr(2));
      if (field.rfind("L_max=", 0) == 0) set.max_length = std::stoi(field.substr(6));
    }
  }
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw InputError("bad_format", path + ":" + std::to_string(line_no) + ": missing count");
    }
    Candidate c;
    for (char32_t cp : unescape_symbols(std::string_view(line).substr(0, tab))) {
      c.symbols.push_back(alphabet.id_of(cp));
    }
    c.count = std::stoll(line.substr(tab + 1));
    set.patterns.push_back(std::move(c));
  }
  return set;
}

}  // namespace patlm
