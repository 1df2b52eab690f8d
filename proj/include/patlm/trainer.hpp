#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "patlm/neural_lm.hpp"

namespace patlm {

struct TrainConfig {
  int bptt = 35;
  int batch = 20;
  double lr0 = 0.7;
  int epochs = 65;
  double init_range = 0.05;
  double forget_bias = 1.0;
  double highway_bias = -2.0;
  double grad_clip = 5.0;  // infinity disables clipping
  std::uint64_t seed = 1;
  bool dropout = true;           // use the LMConfig dropout rates
  double max_wall_seconds = 0.0;  // stop after the epoch that crosses this; 0 = no limit
  int eval_window = 35;

  void validate() const;
};

// U(-init_range, init_range) everywhere, then the LSTM forget-gate bias
// slice set to forget_bias and every highway transform bias to highway_bias.
LMParams<float> init_params(const LMConfig& lm, const TrainConfig& config, std::mt19937_64& rng);

// The token stream is cut into `batch` contiguous streams of
// stream_length = tokens / batch; each stream yields `windows` windows of
// `steps` positions. Targets are the next token of the corpus; the very last
// corpus position, which has no successor, is given the first token.
struct BatchPlan {
  int batch = 0;
  int steps = 0;
  int windows = 0;
  std::int64_t stream_length = 0;

  std::int64_t consumed() const { return static_cast<std::int64_t>(batch) * steps * windows; }
  Window window(const EncodedCorpus& corpus, int index) const;
};

BatchPlan make_batches(const EncodedCorpus& corpus, int batch, int steps);

// Scales `grads` so that its global L2 norm is at most max_norm; returns the
// norm before scaling.
double clip_gradients(LMParams<float>& grads, double max_norm);

// Halves the rate unless the validation perplexity strictly improved on the
// previous epoch.
double next_learning_rate(double lr, double previous_valid_ppl, double valid_ppl);

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double train_ppl = 0.0;
  double valid_ppl = 0.0;
  double wall_seconds = 0.0;  // cumulative since training started
  std::int64_t grad_clip_events = 0;
};

struct TrainResult {
  LMParams<float> best;
  double best_valid_ppl = 0.0;
  int best_epoch = 0;  // 0 = initial parameters
  std::vector<EpochMetrics> metrics;
  std::vector<double> window_losses;  // per-window mean NLL, in order
  bool diverged = false;
  std::string stop_reason;  // "epochs", "time_limit" or "non_finite_loss"
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

TrainResult train(const LMConfig& lm, LMParams<float> params, const EncodedCorpus& train_corpus,
                  const EncodedCorpus& valid_corpus, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// CSV with header epoch,lr,train_ppl,valid_ppl,wall_seconds,grad_clip_events.
void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics,
                       bool include_wall_time = true);

}  // namespace patlm
