#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "patlm/encoded.hpp"

namespace patlm {

enum class Composition { kConcat, kSum, kCnn };
enum class SizeClass { kSmall, kMedium };

std::string_view composition_name(Composition c);
Composition parse_composition(std::string_view name);
std::string_view size_class_name(SizeClass s);
SizeClass parse_size_class(std::string_view name);

struct DropoutRates {
  double embedding = 0.0;
  double gate_input = 0.0;
  double hidden = 0.0;
  double output = 0.0;

  static DropoutRates preset(Composition composition, SizeClass size);
};

struct LMConfig {
  Composition composition = Composition::kSum;
  int subword_vocab = 0;
  int word_vocab = 0;
  int d_x = 0;
  int d_hw = 0;
  int d_lm = 0;
  int pad_length = 0;  // n: Concat truncates or zero-pads to this many subwords
  std::vector<int> cnn_widths;
  std::vector<int> cnn_depths;
  int highway_layers = 2;
  int lstm_layers = 2;
  DropoutRates dropout;

  void validate() const;
  // Width of the composed word vector before any projection.
  int composed_dim() const;
  bool has_projection() const { return composed_dim() != d_hw; }
  int max_cnn_width() const;

  // Hyperparameters of the published setup for one model family.
  static LMConfig preset(Composition composition, SizeClass size, SubwordUnits units,
                        int subword_vocab, int word_vocab, int pad_length);

  std::map<std::string, std::string> to_map() const;
  static LMConfig from_map(const std::map<std::string, std::string>& kv);
};

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// All trainable tensors. Biases are stored as single-column matrices.
template <typename T>
struct LMParams {
  Mat<T> embedding;   // d_x x |X|, one column per subword
  Mat<T> projection;  // d_hw x composed_dim, empty when not needed
  std::vector<Mat<T>> conv_w;  // depth x (width * d_x)
  std::vector<Mat<T>> conv_b;
  std::vector<Mat<T>> hw_gate_w;
  std::vector<Mat<T>> hw_gate_b;  // transform-gate bias
  std::vector<Mat<T>> hw_w;
  std::vector<Mat<T>> hw_b;
  std::vector<Mat<T>> lstm_w;  // 4 d_lm x input, gate rows ordered i, f, o, g
  std::vector<Mat<T>> lstm_u;  // 4 d_lm x d_lm
  std::vector<Mat<T>> lstm_b;
  Mat<T> softmax_w;  // |W| x d_lm
  Mat<T> softmax_b;

  static LMParams zeros(const LMConfig& config);

  std::vector<std::pair<std::string, Mat<T>*>> named();
  std::vector<std::pair<std::string, const Mat<T>*>> named() const;
  std::int64_t size() const;
  void set_zero();
  template <typename U>
  LMParams<U> cast() const;
};

// Free-standing pieces of the network, used by the model and unit tests.
template <typename T>
Vec<T> compose_sum(const Mat<T>& subword_vectors);
template <typename T>
Vec<T> compose_concat(const Mat<T>& subword_vectors, int pad_length);
// Narrow convolution per filter bank, tanh, max over time; sequences shorter
// than the widest filter are zero-padded to that width.
template <typename T>
Vec<T> compose_cnn(const Mat<T>& subword_vectors, const std::vector<Mat<T>>& filters,
                   const std::vector<Mat<T>>& biases);

// y = t * relu(W x + b) + (1 - t) * x with t = sigmoid(W_t x + b_t).
template <typename T>
Vec<T> highway_forward(const Vec<T>& x, const Mat<T>& gate_w, const Mat<T>& gate_b,
                       const Mat<T>& w, const Mat<T>& b, Vec<T>* gate_out = nullptr);

template <typename T>
struct RecurrentState {
  std::vector<Mat<T>> h;  // per layer, d_lm x batch
  std::vector<Mat<T>> c;

  static RecurrentState zeros(const LMConfig& config, int batch);
};

// One word step through the LSTM stack (single sequence, no dropout).
template <typename T>
Vec<T> lstm_stack_step(const LMParams<T>& params, const LMConfig& config, const Vec<T>& input,
                       RecurrentState<T>& state);

template <typename T>
struct SoftmaxResult {
  double loss = 0.0;
  Vec<T> grad_h;
  Mat<T> grad_w;
  Vec<T> grad_b;
};

// loss = -log softmax(W h + b)[target]
template <typename T>
SoftmaxResult<T> softmax_nll(const Vec<T>& h, int target, const Mat<T>& w, const Vec<T>& b);

// Variational dropout: one mask per (sequence, site), reused at every time
// step of a window. Kept units are scaled by 1 / (1 - rate). Empty matrices
// mean "no dropout" at that site.
template <typename T>
struct DropoutMasks {
  Mat<T> embedding;                // composed_dim x batch
  std::vector<Mat<T>> gate_input;  // per LSTM layer, input_dim x batch
  std::vector<Mat<T>> hidden;      // per LSTM layer, d_lm x batch
  Mat<T> output;                   // d_lm x batch
};

template <typename T>
DropoutMasks<T> variational_dropout_masks(const LMConfig& config, int batch, const DropoutRates& rates,
                                          std::mt19937_64& rng);

// Token positions of one truncated-BPTT window: steps x batch, row-major by
// time, plus the target word of every position.
struct Window {
  int batch = 0;
  int steps = 0;
  std::vector<std::int64_t> tokens;
  std::vector<std::int32_t> targets;

  std::int64_t token(int t, int b) const { return tokens[static_cast<size_t>(t * batch + b)]; }
  std::int32_t target(int t, int b) const { return targets[static_cast<size_t>(t * batch + b)]; }
};

// Highway transform-gate activations gathered during forward passes.
struct GateRecorder {
  std::vector<std::vector<float>> values;  // per highway layer
  size_t max_samples = 0;                  // per layer; 0 = unlimited

  void record(int layer, const float* data, size_t n);
  bool full() const;
};

template <typename T>
class SubwordLM {
 public:
  SubwordLM() = default;
  SubwordLM(LMConfig config, LMParams<T> params);

  const LMConfig& config() const { return config_; }
  const LMParams<T>& params() const { return params_; }
  LMParams<T>& params() { return params_; }

  // Runs one window from `state` (updated to the window's final state) and
  // returns the summed negative log-likelihood of all targets. When `grads`
  // is given it receives the gradient of that sum (added, not overwritten).
  double run_window(const EncodedCorpus& corpus, const Window& window, RecurrentState<T>& state,
                    const DropoutMasks<T>* masks, LMParams<T>* grads,
                    GateRecorder* gates = nullptr) const;

 private:
  LMConfig config_;
  LMParams<T> params_;
};

}  // namespace patlm
