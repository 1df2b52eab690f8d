#include "patlm/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "patlm/error.hpp"

namespace patlm {

namespace {

template <typename T>
void check_vocab(const SubwordLM<T>& model, const EncodedCorpus& corpus) {
  if (corpus.subword_vocab != model.config().subword_vocab ||
      corpus.word_vocab() != model.config().word_vocab) {
    throw InputError("vocab_mismatch", "corpus vocabularies (" + std::to_string(corpus.subword_vocab) + ", " +
                                           std::to_string(corpus.word_vocab()) +
                                           ") differ from the model's");
  }
  if (corpus.size() < 2) throw InputError("corpus_too_small", "evaluation needs at least two tokens");
}

// Streams the corpus through the model, one sequence, in windows.
template <typename T>
double stream(const SubwordLM<T>& model, const EncodedCorpus& corpus, int window, GateRecorder* gates) {
  if (window < 1) throw ConfigError("bad_window", "evaluation window must be positive");
  auto state = RecurrentState<T>::zeros(model.config(), 1);
  const auto positions = static_cast<std::int64_t>(corpus.size()) - 1;
  double nll = 0.0;
  Window w;
  w.batch = 1;
  for (std::int64_t start = 0; start < positions; start += window) {
    w.steps = static_cast<int>(std::min<std::int64_t>(window, positions - start));
    w.tokens.resize(static_cast<size_t>(w.steps));
    w.targets.resize(static_cast<size_t>(w.steps));
    for (int t = 0; t < w.steps; ++t) {
      w.tokens[static_cast<size_t>(t)] = start + t;
      w.targets[static_cast<size_t>(t)] = corpus.words[static_cast<size_t>(start + t + 1)];
    }
    nll += model.run_window(corpus, w, state, nullptr, nullptr, gates);
    if (gates && gates->full()) break;
  }
  return nll;
}

double nearest_rank(const std::vector<float>& sorted, double p) {
  const auto n = static_cast<double>(sorted.size());
  const auto rank = static_cast<size_t>(std::max(1.0, std::ceil(p / 100.0 * n)));
  return sorted[rank - 1];
}

}  // namespace

template <typename T>
EvalResult evaluate(const SubwordLM<T>& model, const EncodedCorpus& corpus, int window) {
  check_vocab(model, corpus);
  EvalResult r;
  r.nll = stream(model, corpus, window, nullptr);
  r.tokens = static_cast<std::int64_t>(corpus.size()) - 1;
  r.ppl = std::exp(r.nll / static_cast<double>(r.tokens));
  return r;
}

double GateStats::mean() const {
  double sum = 0.0;
  std::int64_t n = 0;
  for (const auto& layer : values) {
    for (float v : layer) sum += v;
    n += static_cast<std::int64_t>(layer.size());
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

GateStats summarize_gates(std::vector<std::vector<float>> values) {
  GateStats stats;
  stats.values = std::move(values);
  for (size_t l = 0; l < stats.values.size(); ++l) {
    const auto& v = stats.values[l];
    GateLayerSummary s;
    s.layer = static_cast<int>(l) + 1;
    s.samples = static_cast<std::int64_t>(v.size());
    if (!v.empty()) {
      double sum = 0.0;
      for (float x : v) sum += x;
      s.mean = sum / static_cast<double>(v.size());
      std::vector<float> sorted = v;
      std::sort(sorted.begin(), sorted.end());
      for (int d = 0; d < 9; ++d) s.deciles[static_cast<size_t>(d)] = nearest_rank(sorted, 10.0 * (d + 1));
    }
    stats.summary.push_back(s);
  }
  return stats;
}

template <typename T>
GateStats gate_stats(const SubwordLM<T>& model, const EncodedCorpus& corpus, size_t max_samples, int window) {
  check_vocab(model, corpus);
  GateRecorder recorder;
  recorder.max_samples = max_samples;
  recorder.values.resize(static_cast<size_t>(model.config().highway_layers));
  stream(model, corpus, window, &recorder);
  return summarize_gates(std::move(recorder.values));
}

void write_gates_csv(const std::string& path, const GateStats& stats) {
  std::ofstream out(path);
  if (!out) throw InputError("output_unwritable", "cannot write '" + path + "'");
  out << "layer,value\n";
  char buf[32];
  for (size_t l = 0; l < stats.values.size(); ++l) {
    for (float v : stats.values[l]) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
      out << l + 1 << ',' << buf << '\n';
    }
  }
}

ParamBreakdown param_count(const LMConfig& config) {
  const auto p = LMParams<float>::zeros(config);
  auto sum = [](const std::vector<Mat<float>>& list) {
    std::int64_t n = 0;
    for (const auto& m : list) n += m.size();
    return n;
  };
  ParamBreakdown b;
  b.modules = {
      {"embedding", p.embedding.size()},
      {"composition", p.projection.size() + sum(p.conv_w) + sum(p.conv_b)},
      {"highway", sum(p.hw_gate_w) + sum(p.hw_gate_b) + sum(p.hw_w) + sum(p.hw_b)},
      {"lstm", sum(p.lstm_w) + sum(p.lstm_u) + sum(p.lstm_b)},
      {"softmax", p.softmax_w.size() + p.softmax_b.size()},
  };
  for (const auto& [name, n] : b.modules) b.total += n;
  return b;
}

std::string eval_json(const EvalResult& result, const ParamBreakdown& params) {
  nlohmann::ordered_json j;
  j["ppl"] = result.ppl;
  j["nll"] = result.nll;
  j["tokens"] = result.tokens;
  nlohmann::ordered_json breakdown;
  for (const auto& [name, n] : params.modules) breakdown[name] = n;
  j["param_count"] = {{"total", params.total}, {"modules", breakdown}};
  return j.dump(2) + "\n";
}

template EvalResult evaluate<float>(const SubwordLM<float>&, const EncodedCorpus&, int);
template EvalResult evaluate<double>(const SubwordLM<double>&, const EncodedCorpus&, int);
template GateStats gate_stats<float>(const SubwordLM<float>&, const EncodedCorpus&, size_t, int);
template GateStats gate_stats<double>(const SubwordLM<double>&, const EncodedCorpus&, size_t, int);

}  // namespace patlm
