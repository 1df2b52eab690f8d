#include "patlm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "patlm/error.hpp"
#include "patlm/evaluator.hpp"

namespace patlm {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("bad_train_config", what); };
  if (bptt < 1 || batch < 1 || epochs < 0) fail("bptt and batch must be positive, epochs non-negative");
  if (!(lr0 > 0.0)) fail("lr0 must be positive");
  if (!(init_range >= 0.0)) fail("init_range must be non-negative");
  if (!(grad_clip > 0.0)) fail("grad_clip must be positive");
  if (eval_window < 1) fail("eval_window must be positive");
}

LMParams<float> init_params(const LMConfig& lm, const TrainConfig& config, std::mt19937_64& rng) {
  auto params = LMParams<float>::zeros(lm);
  const double r = config.init_range;
  for (auto& [name, m] : params.named()) {
    float* data = m->data();
    for (Eigen::Index i = 0; i < m->size(); ++i) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      data[i] = static_cast<float>(-r + 2.0 * r * u);
    }
  }
  for (auto& b : params.lstm_b) b.middleRows(lm.d_lm, lm.d_lm).setConstant(static_cast<float>(config.forget_bias));
  for (auto& b : params.hw_gate_b) b.setConstant(static_cast<float>(config.highway_bias));
  return params;
}

Window BatchPlan::window(const EncodedCorpus& corpus, int index) const {
  Window w;
  w.batch = batch;
  w.steps = steps;
  w.tokens.resize(static_cast<size_t>(batch) * static_cast<size_t>(steps));
  w.targets.resize(w.tokens.size());
  const auto n = static_cast<std::int64_t>(corpus.size());
  for (int t = 0; t < steps; ++t) {
    for (int b = 0; b < batch; ++b) {
      const std::int64_t pos = b * stream_length + static_cast<std::int64_t>(index) * steps + t;
      const auto slot = static_cast<size_t>(t * batch + b);
      w.tokens[slot] = pos;
      w.targets[slot] = corpus.words[static_cast<size_t>((pos + 1) % n)];
    }
  }
  return w;
}

BatchPlan make_batches(const EncodedCorpus& corpus, int batch, int steps) {
  if (batch < 1 || steps < 1) throw ConfigError("bad_batching", "batch and steps must be positive");
  BatchPlan plan;
  plan.batch = batch;
  plan.steps = steps;
  plan.stream_length = static_cast<std::int64_t>(corpus.size()) / batch;
  plan.windows = static_cast<int>(plan.stream_length / steps);
  if (plan.windows < 1) {
    throw InputError("corpus_too_small", std::to_string(corpus.size()) + " tokens cannot fill one " +
                                             std::to_string(batch) + "x" + std::to_string(steps) + " window");
  }
  return plan;
}

double clip_gradients(LMParams<float>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, m] : grads.named()) sq += m->template cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && std::isfinite(norm)) {
    const auto scale = static_cast<float>(max_norm / norm);
    for (auto& [name, m] : grads.named()) *m *= scale;
  }
  return norm;
}

double next_learning_rate(double lr, double previous_valid_ppl, double valid_ppl) {
  return valid_ppl < previous_valid_ppl ? lr : lr / 2.0;
}

namespace {

bool any_dropout(const DropoutRates& r) {
  return r.embedding > 0 || r.gate_input > 0 || r.hidden > 0 || r.output > 0;
}

bool all_finite(const LMParams<float>& p) {
  for (const auto& [name, m] : p.named()) {
    if (!m->allFinite()) return false;
  }
  return true;
}

}  // namespace

TrainResult train(const LMConfig& lm, LMParams<float> params, const EncodedCorpus& train_corpus,
                  const EncodedCorpus& valid_corpus, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  lm.validate();
  const auto plan = make_batches(train_corpus, config.batch, config.bptt);
  const auto clock_start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  };

  SubwordLM<float> model(lm, std::move(params));
  TrainResult result;
  result.best = model.params();
  result.best_valid_ppl = perplexity(model, valid_corpus, config.eval_window);
  result.stop_reason = "epochs";
  if (!std::isfinite(result.best_valid_ppl)) throw NumericError("non_finite", "initial validation perplexity");

  std::mt19937_64 rng(config.seed);
  const bool dropout = config.dropout && any_dropout(lm.dropout);
  auto grads = LMParams<float>::zeros(lm);
  double lr = config.lr0;
  double previous_valid = std::numeric_limits<double>::infinity();
  const float inv_batch = 1.0f / static_cast<float>(config.batch);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    auto state = RecurrentState<float>::zeros(lm, config.batch);
    double epoch_nll = 0.0;
    std::int64_t clips = 0;
    for (int w = 0; w < plan.windows; ++w) {
      const auto window = plan.window(train_corpus, w);
      DropoutMasks<float> masks;
      if (dropout) masks = variational_dropout_masks<float>(lm, config.batch, lm.dropout, rng);
      grads.set_zero();
      const double loss = model.run_window(train_corpus, window, state, dropout ? &masks : nullptr, &grads);
      if (!std::isfinite(loss)) {
        result.diverged = true;
        break;
      }
      epoch_nll += loss;
      result.window_losses.push_back(loss / static_cast<double>(config.batch * config.bptt));
      for (auto& [name, m] : grads.named()) *m *= inv_batch;
      const double norm = clip_gradients(grads, config.grad_clip);
      if (!std::isfinite(norm)) {
        result.diverged = true;
        break;
      }
      if (norm > config.grad_clip) ++clips;
      auto target = model.params().named();
      auto source = grads.named();
      for (size_t i = 0; i < target.size(); ++i) *target[i].second -= static_cast<float>(lr) * *source[i].second;
    }
    if (!result.diverged && !all_finite(model.params())) result.diverged = true;
    if (result.diverged) {
      result.stop_reason = "non_finite_loss";
      break;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.train_ppl = std::exp(epoch_nll / static_cast<double>(plan.consumed()));
    m.valid_ppl = perplexity(model, valid_corpus, config.eval_window);
    m.grad_clip_events = clips;
    m.wall_seconds = elapsed();
    if (!std::isfinite(m.valid_ppl)) {
      result.diverged = true;
      result.stop_reason = "non_finite_loss";
      break;
    }
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
    if (m.valid_ppl < result.best_valid_ppl) {
      result.best_valid_ppl = m.valid_ppl;
      result.best_epoch = epoch;
      result.best = model.params();
    }
    if (epoch > 1) lr = next_learning_rate(lr, previous_valid, m.valid_ppl);
    previous_valid = m.valid_ppl;
    if (config.max_wall_seconds > 0 && m.wall_seconds >= config.max_wall_seconds && epoch < config.epochs) {
      result.stop_reason = "time_limit";
      break;
    }
  }
  return result;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics, bool include_wall_time) {
  std::ofstream out(path);
  if (!out) throw InputError("output_unwritable", "cannot write '" + path + "'");
  out << "epoch,lr,train_ppl,valid_ppl,wall_seconds,grad_clip_events\n";
  char buf[256];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.3f,%lld\n", m.epoch, m.lr, m.train_ppl, m.valid_ppl,
                  include_wall_time ? m.wall_seconds : 0.0, static_cast<long long>(m.grad_clip_events));
    out << buf;
  }
}

}  // namespace patlm
