#include "patlm/crf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "patlm/error.hpp"
#include "patlm/parallel.hpp"

namespace patlm {

std::vector<bool> PatternTable::selected() const {
  std::vector<bool> out(weights.size());
  for (size_t i = 0; i < weights.size(); ++i) out[i] = weights[i] != 0.0;
  return out;
}

size_t PatternTable::num_selected() const {
  return static_cast<size_t>(std::count_if(weights.begin(), weights.end(), [](double w) { return w != 0.0; }));
}

std::int64_t count_occurrences(std::span<const SymbolId> pattern, std::span<const SymbolId> sentence) {
  if (pattern.empty()) throw ConfigError("empty_pattern", "pattern must be non-empty");
  if (pattern.size() > sentence.size()) return 0;
  std::int64_t n = 0;
  for (size_t i = 0; i + pattern.size() <= sentence.size(); ++i) {
    if (std::equal(pattern.begin(), pattern.end(), sentence.begin() + static_cast<std::ptrdiff_t>(i))) ++n;
  }
  return n;
}

double energy(std::span<const SymbolId> sentence, const PatternTable& table) {
  double e = 0.0;
  for (size_t i = 0; i < table.patterns.size(); ++i) {
    if (table.weights[i] == 0.0) continue;
    e += table.weights[i] * static_cast<double>(count_occurrences(table.patterns[i], sentence));
  }
  return e;
}

PatternCrf::PatternCrf(std::vector<Pattern> patterns, int alphabet_size)
    : automaton_(std::move(patterns), alphabet_size),
      weights_(static_cast<size_t>(automaton_.num_patterns()), 0.0),
      psi_(static_cast<size_t>(automaton_.num_states()), 1.0) {
  if (alphabet_size < 1) throw ConfigError("bad_alphabet", "CRF needs a non-empty alphabet");
}

void PatternCrf::set_weights(std::span<const double> weights) {
  automaton_.set_pattern_weights(weights);
  weights_.assign(weights.begin(), weights.end());
  for (StateId s = 0; s < automaton_.num_states(); ++s) {
    psi_[static_cast<size_t>(s)] = std::exp(-automaton_.state_weight(s));
  }
}

void PatternCrf::forward(int length, std::vector<double>& alphas,
                         std::vector<double>& log_scales) const {
  const auto n = static_cast<size_t>(automaton_.num_states());
  const auto width = static_cast<size_t>(automaton_.alphabet_size());
  const auto& delta = automaton_.delta_table();
  alphas.assign(static_cast<size_t>(length) * n, 0.0);
  log_scales.assign(static_cast<size_t>(length), 0.0);
  std::vector<double> start(n, 0.0);
  start[0] = 1.0;
  const double* prev = start.data();
  for (int t = 0; t < length; ++t) {
    double* cur = alphas.data() + static_cast<size_t>(t) * n;
    for (size_t s = 0; s < n; ++s) {
      const double a = prev[s];
      if (a == 0.0) continue;
      const StateId* row = delta.data() + s * width;
      for (size_t c = 0; c < width; ++c) cur[row[c]] += a;
    }
    double total = 0.0;
    for (size_t s = 0; s < n; ++s) {
      cur[s] *= psi_[s];
      total += cur[s];
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw NumericError("non_finite", "forward pass degenerated at step " + std::to_string(t + 1));
    }
    const double inv = 1.0 / total;
    for (size_t s = 0; s < n; ++s) cur[s] *= inv;
    log_scales[static_cast<size_t>(t)] = std::log(total);
    prev = cur;
  }
}

double PatternCrf::log_partition(int length) const {
  if (length < 0) throw ConfigError("bad_length", "K must be >= 0");
  std::vector<double> alphas, scales;
  forward(length, alphas, scales);
  double log_z = 0.0;
  for (double v : scales) log_z += v;
  return log_z;
}

std::vector<double> PatternCrf::expected_counts(int length) const {
  if (length < 0) throw ConfigError("bad_length", "K must be >= 0");
  const auto n = static_cast<size_t>(automaton_.num_states());
  const auto width = static_cast<size_t>(automaton_.alphabet_size());
  const auto& delta = automaton_.delta_table();
  std::vector<double> alphas, scales;
  forward(length, alphas, scales);

  // beta_t rescaled so that alpha_t . beta_t = 1 for every t.
  std::vector<double> beta(n, 1.0), prev_beta(n), weighted(n), marginal(n, 0.0);
  for (int t = length; t >= 1; --t) {
    const double* alpha = alphas.data() + static_cast<size_t>(t - 1) * n;
    for (size_t s = 0; s < n; ++s) marginal[s] += alpha[s] * beta[s];
    if (t == 1) break;
    const double inv = std::exp(-scales[static_cast<size_t>(t - 1)]);
    for (size_t s = 0; s < n; ++s) weighted[s] = psi_[s] * beta[s];
    for (size_t s = 0; s < n; ++s) {
      const StateId* row = delta.data() + s * width;
      double acc = 0.0;
      for (size_t c = 0; c < width; ++c) acc += weighted[static_cast<size_t>(row[c])];
      prev_beta[s] = acc * inv;
    }
    beta.swap(prev_beta);
  }
  std::vector<double> counts(static_cast<size_t>(automaton_.num_patterns()), 0.0);
  for (size_t s = 0; s < n; ++s) {
    for (std::int32_t p : automaton_.pattern_suffixes(static_cast<StateId>(s))) {
      counts[static_cast<size_t>(p)] += marginal[s];
    }
  }
  return counts;
}

LengthTable PatternCrf::length_table(std::span<const int> lengths) const {
  LengthTable table;
  table.lengths.assign(lengths.begin(), lengths.end());
  for (int k : lengths) {
    table.log_partition.push_back(log_partition(k));
    table.expected_counts.push_back(expected_counts(k));
  }
  return table;
}

CrfObjective PatternCrf::nll_and_grad(const CharCorpus& corpus, int threads) const {
  const auto n = static_cast<size_t>(automaton_.num_states());
  const auto width = static_cast<size_t>(automaton_.alphabet_size());
  const auto& delta = automaton_.delta_table();
  const auto num_patterns = static_cast<size_t>(automaton_.num_patterns());
  CrfObjective out;
  out.gradient.assign(num_patterns, 0.0);
  if (corpus.sentences.empty()) return out;

  // Empirical side: state visit counts per worker, merged afterwards.
  const size_t num_sentences = corpus.sentences.size();
  for (const auto& sentence : corpus.sentences) {
    for (SymbolId a : sentence) {
      if (a < 0 || static_cast<size_t>(a) >= width) {
        throw InputError("unknown_symbol", "sentence symbol outside the CRF alphabet");
      }
    }
  }
  const int workers = worker_count(num_sentences, threads);
  std::vector<std::vector<double>> visits(static_cast<size_t>(workers), std::vector<double>(n, 0.0));
  parallel_chunks(num_sentences, workers, [&](size_t begin, size_t end, size_t w) {
    auto& v = visits[w];
    for (size_t i = begin; i < end; ++i) {
      StateId s = 0;
      for (SymbolId a : corpus.sentences[i]) {
        s = delta[static_cast<size_t>(s) * width + static_cast<size_t>(a)];
        v[static_cast<size_t>(s)] += 1.0;
      }
    }
  });
  std::vector<double> visit_total(n, 0.0);
  for (const auto& v : visits) {
    for (size_t s = 0; s < n; ++s) visit_total[s] += v[s];
  }

  std::vector<double> length_count;
  for (const auto& sentence : corpus.sentences) {
    if (sentence.size() >= length_count.size()) length_count.resize(sentence.size() + 1, 0.0);
    length_count[sentence.size()] += 1.0;
  }
  const int max_len = static_cast<int>(length_count.size()) - 1;

  std::vector<double> alphas, scales;
  forward(max_len, alphas, scales);
  double value = 0.0;
  for (size_t s = 0; s < n; ++s) value += visit_total[s] * automaton_.state_weight(static_cast<StateId>(s));
  double log_z = 0.0;
  for (int k = 1; k <= max_len; ++k) {
    log_z += scales[static_cast<size_t>(k - 1)];
    value += length_count[static_cast<size_t>(k)] * log_z;
  }

  // G_t(s) = sum_{K >= t} n_K / Z_K * b_{K-t}(s), kept rescaled by Z_t.
  std::vector<double> g(n, 0.0), next_g(n, 0.0), weighted(n), marginal(n, 0.0);
  for (int t = max_len; t >= 1; --t) {
    if (t == max_len) {
      std::fill(g.begin(), g.end(), length_count[static_cast<size_t>(t)]);
    } else {
      const double inv = std::exp(-scales[static_cast<size_t>(t)]);
      for (size_t s = 0; s < n; ++s) weighted[s] = psi_[s] * next_g[s];
      for (size_t s = 0; s < n; ++s) {
        const StateId* row = delta.data() + s * width;
        double acc = 0.0;
        for (size_t c = 0; c < width; ++c) acc += weighted[static_cast<size_t>(row[c])];
        g[s] = length_count[static_cast<size_t>(t)] + acc * inv;
      }
    }
    const double* alpha = alphas.data() + static_cast<size_t>(t - 1) * n;
    for (size_t s = 0; s < n; ++s) marginal[s] += alpha[s] * g[s];
    next_g.swap(g);
  }

  for (size_t s = 0; s < n; ++s) {
    const double diff = visit_total[s] - marginal[s];
    if (diff == 0.0) continue;
    for (std::int32_t p : automaton_.pattern_suffixes(static_cast<StateId>(s))) {
      out.gradient[static_cast<size_t>(p)] += diff;
    }
  }
  out.value = value;
  return out;
}

CrfTrainResult train_crf(const CharCorpus& corpus, std::vector<Pattern> patterns, int alphabet_size,
                         double reg_c, OwlqnConfig config, int threads) {
  PatternCrf crf(patterns, alphabet_size);
  config.l1 = reg_c;
  auto smooth = [&](std::span<const double> x, std::span<double> grad) {
    crf.set_weights(x);
    auto obj = crf.nll_and_grad(corpus, threads);
    std::copy(obj.gradient.begin(), obj.gradient.end(), grad.begin());
    return obj.value;
  };
  CrfTrainResult result;
  result.optimizer = minimize_owlqn(smooth, std::vector<double>(patterns.size(), 0.0), config);
  result.table.patterns = std::move(patterns);
  result.table.weights = result.optimizer.x;
  result.table.reg_c = reg_c;
  return result;
}

std::vector<Pattern> select_patterns(const PatternTable& table) {
  std::vector<Pattern> out;
  for (size_t i = 0; i < table.patterns.size(); ++i) {
    if (table.weights[i] != 0.0) out.push_back(table.patterns[i]);
  }
  return out;
}

void write_table(const std::string& path, const PatternTable& table, const Alphabet& alphabet) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("output_unwritable", "cannot write '" + path + "'");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", table.reg_c);
  out << "#patlm-crf v1 C=" << buf << '\n';
  for (size_t i = 0; i < table.patterns.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", table.weights[i]);
    out << escape_symbols(table.patterns[i], alphabet) << '\t' << buf << '\t'
        << (table.weights[i] != 0.0 ? 1 : 0) << '\n';
  }
}

PatternTable read_table(const std::string& path, const Alphabet& alphabet) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("input_missing", "cannot read '" + path + "'");
  std::string line;
  const std::string header = "#patlm-crf v1 C=";
  if (!std::getline(in, line) || line.rfind(header, 0) != 0) {
    throw InputError("bad_format", path + ": missing CRF table header");
  }
  PatternTable table;
  table.reg_c = std::stod(line.substr(header.size()));
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t t2 = line.rfind('\t');
    const size_t t1 = t2 == std::string::npos || t2 == 0 ? std::string::npos : line.rfind('\t', t2 - 1);
    if (t1 == std::string::npos) {
      throw InputError("bad_format", path + ":" + std::to_string(line_no) + ": expected 3 fields");
    }
    Pattern p;
    for (char32_t c : unescape_symbols(std::string_view(line).substr(0, t1))) p.push_back(alphabet.id_of(c));
    const double w = std::stod(line.substr(t1 + 1, t2 - t1 - 1));
    const int flag = std::stoi(line.substr(t2 + 1));
    if ((w != 0.0) != (flag != 0)) {
      throw InputError("bad_format", path + ":" + std::to_string(line_no) + ": selected flag disagrees with weight");
    }
    table.patterns.push_back(std::move(p));
    table.weights.push_back(w);
  }
  return table;
}

}  // namespace patlm
