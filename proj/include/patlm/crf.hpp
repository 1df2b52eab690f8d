#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "patlm/automaton.hpp"
#include "patlm/corpus.hpp"
#include "patlm/owlqn.hpp"

namespace patlm {

// Candidate patterns with their CRF weights c^alpha. A pattern is selected
// iff its weight is nonzero; the optimizer produces exact zeros.
struct PatternTable {
  std::vector<Pattern> patterns;
  std::vector<double> weights;
  double reg_c = 0.0;

  std::vector<bool> selected() const;
  size_t num_selected() const;
};

// log Z_K and E_K[count] for a set of sentence lengths K.
struct LengthTable {
  std::vector<int> lengths;
  std::vector<double> log_partition;
  std::vector<std::vector<double>> expected_counts;  // [length index][pattern]
};

struct CrfObjective {
  double value = 0.0;            // sum_i E(alpha_i) + log Z_{K_i}
  std::vector<double> gradient;  // sum_i count(alpha_i) - E_{K_i}[count]
};

// Number of (possibly overlapping) occurrence positions.
std::int64_t count_occurrences(std::span<const SymbolId> pattern, std::span<const SymbolId> sentence);

// E = sum_pi c^pi * count(pi, sentence), by direct scanning.
double energy(std::span<const SymbolId> sentence, const PatternTable& table);

// Unconditional pattern-based CRF over A^K:
//   Pr(y) = exp(-E(y)) / Z_K.
// Dynamic programs run over the prefix automaton of the pattern set with
// per-step rescaling.
class PatternCrf {
 public:
  PatternCrf(std::vector<Pattern> patterns, int alphabet_size);

  void set_weights(std::span<const double> weights);
  const std::vector<double>& weights() const { return weights_; }
  const PatternAutomaton& automaton() const { return automaton_; }
  int num_patterns() const { return automaton_.num_patterns(); }
  int alphabet_size() const { return automaton_.alphabet_size(); }

  double log_partition(int length) const;
  // Forward-backward for a single length.
  std::vector<double> expected_counts(int length) const;
  LengthTable length_table(std::span<const int> lengths) const;

  // Smooth part of the training objective over all sentences. Sentences are
  // grouped by length: one forward pass yields every log Z_K and one
  // backward pass accumulates the expected counts of all lengths at once.
  CrfObjective nll_and_grad(const CharCorpus& corpus, int threads = 1) const;

 private:
  // Rescaled forward vectors alpha_1..alpha_K (row t-1 holds time t) and the
  // per-step log scales; log Z_t = sum of the first t scales.
  void forward(int length, std::vector<double>& alphas, std::vector<double>& log_scales) const;

  PatternAutomaton automaton_;
  std::vector<double> weights_;
  std::vector<double> psi_;  // exp(-omega(s))
};

struct CrfTrainResult {
  PatternTable table;
  OwlqnResult optimizer;
};

// Minimizes sum_i -log Pr(alpha_i) + C * sum |c^alpha| from zero weights.
CrfTrainResult train_crf(const CharCorpus& corpus, std::vector<Pattern> patterns, int alphabet_size,
                         double reg_c, OwlqnConfig config, int threads = 1);

// Patterns whose weight is exactly nonzero, in table order.
std::vector<Pattern> select_patterns(const PatternTable& table);

// "#patlm-crf v1 C=<C>" header, then "<escaped pattern>\t<weight>\t<0|1>".
void write_table(const std::string& path, const PatternTable& table, const Alphabet& alphabet);
PatternTable read_table(const std::string& path, const Alphabet& alphabet);

}  // namespace patlm
