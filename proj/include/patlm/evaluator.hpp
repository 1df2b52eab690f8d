#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "patlm/neural_lm.hpp"

namespace patlm {

struct EvalResult {
  double ppl = 0.0;
  double nll = 0.0;         // summed negative log-likelihood in nats
  std::int64_t tokens = 0;  // predicted positions
};

// Treats the corpus as one continuous stream: token i predicts token i + 1,
// the recurrent state is carried throughout, dropout is off. `window` is the
// number of positions per forward call and does not affect the result.
template <typename T>
EvalResult evaluate(const SubwordLM<T>& model, const EncodedCorpus& corpus, int window = 35);

template <typename T>
double perplexity(const SubwordLM<T>& model, const EncodedCorpus& corpus, int window = 35) {
  return evaluate(model, corpus, window).ppl;
}

struct GateLayerSummary {
  int layer = 0;
  std::int64_t samples = 0;
  double mean = 0.0;
  std::array<double, 9> deciles{};  // nearest-rank 10th..90th percentiles
};

struct GateStats {
  std::vector<std::vector<float>> values;  // per highway layer
  std::vector<GateLayerSummary> summary;

  // Mean over all layers' samples.
  double mean() const;
};

// Collects transform-gate activations of every highway layer during
// evaluation passes, up to `max_samples` values per layer (0 = all).
template <typename T>
GateStats gate_stats(const SubwordLM<T>& model, const EncodedCorpus& corpus, size_t max_samples,
                     int window = 35);

GateStats summarize_gates(std::vector<std::vector<float>> values);

// CSV with header "layer,value"; layers numbered from 1.
void write_gates_csv(const std::string& path, const GateStats& stats);

struct ParamBreakdown {
  std::vector<std::pair<std::string, std::int64_t>> modules;  // embedding, composition, highway, lstm, softmax
  std::int64_t total = 0;
};

ParamBreakdown param_count(const LMConfig& config);

// Structured text for eval-lm: ppl, nll, tokens and the parameter breakdown.
std::string eval_json(const EvalResult& result, const ParamBreakdown& params);

}  // namespace patlm
