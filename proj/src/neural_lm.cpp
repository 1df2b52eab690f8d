#include "patlm/neural_lm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "patlm/error.hpp"

namespace patlm {

std::string_view composition_name(Composition c) {
  switch (c) {
    case Composition::kConcat:
      return "concat";
    case Composition::kSum:
      return "sum";
    case Composition::kCnn:
      return "cnn";
  }
  return "sum";
}

Composition parse_composition(std::string_view name) {
  if (name == "concat") return Composition::kConcat;
  if (name == "sum") return Composition::kSum;
  if (name == "cnn") return Composition::kCnn;
  throw ConfigError("bad_composition", "composition must be concat, sum or cnn; got '" +
                                           std::string(name) + "'");
}

std::string_view size_class_name(SizeClass s) { return s == SizeClass::kSmall ? "small" : "medium"; }

SizeClass parse_size_class(std::string_view name) {
  if (name == "small") return SizeClass::kSmall;
  if (name == "medium") return SizeClass::kMedium;
  throw ConfigError("bad_size_class", "size class must be small or medium");
}

DropoutRates DropoutRates::preset(Composition composition, SizeClass size) {
  if (size == SizeClass::kSmall) return {0.1, 0.2, 0.1, 0.2};
  if (composition == Composition::kCnn) return {0.2, 0.35, 0.2, 0.35};
  return {0.15, 0.3, 0.15, 0.3};
}

void LMConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("bad_lm_config", what); };
  if (subword_vocab < 1 || word_vocab < 1) fail("vocabulary sizes must be positive");
  if (d_x < 1 || d_hw < 1 || d_lm < 1) fail("d_X, d_HW and d_LM must be positive");
  if (highway_layers < 0 || lstm_layers < 1) fail("need >= 0 highway and >= 1 LSTM layers");
  if (composition == Composition::kConcat && pad_length < 1) fail("Concat needs n >= 1");
  if (composition == Composition::kCnn) {
    if (cnn_widths.empty() || cnn_widths.size() != cnn_depths.size()) {
      fail("CNN widths and depths must be non-empty and equally long");
    }
    for (size_t i = 0; i < cnn_widths.size(); ++i) {
      if (cnn_widths[i] < 1 || cnn_depths[i] < 1) fail("CNN widths and depths must be positive");
    }
  }
  for (double r : {dropout.embedding, dropout.gate_input, dropout.hidden, dropout.output}) {
    if (!(r >= 0.0 && r < 1.0)) fail("dropout rates must lie in [0, 1)");
  }
}

int LMConfig::composed_dim() const {
  switch (composition) {
    case Composition::kConcat:
      return pad_length * d_x;
    case Composition::kSum:
      return d_x;
    case Composition::kCnn:
      return std::accumulate(cnn_depths.begin(), cnn_depths.end(), 0);
  }
  return d_x;
}

int LMConfig::max_cnn_width() const {
  return cnn_widths.empty() ? 0 : *std::max_element(cnn_widths.begin(), cnn_widths.end());
}

LMConfig LMConfig::preset(Composition composition, SizeClass size, SubwordUnits units,
                         int subword_vocab, int word_vocab, int pad_length) {
  LMConfig c;
  c.composition = composition;
  c.subword_vocab = subword_vocab;
  c.word_vocab = word_vocab;
  c.d_lm = size == SizeClass::kSmall ? 300 : 650;
  c.dropout = DropoutRates::preset(composition, size);
  const bool patterns = units == SubwordUnits::kPatterns;
  switch (composition) {
    case Composition::kConcat:
      c.d_x = patterns ? 30 : 15;
      c.d_hw = c.d_lm;
      c.pad_length = pad_length;
      break;
    case Composition::kSum:
      c.d_x = c.d_hw = c.d_lm;
      break;
    case Composition::kCnn:
      if (patterns) {
        c.d_x = size == SizeClass::kSmall ? 50 : 100;
        if (size == SizeClass::kSmall) {
          c.cnn_widths = {1, 2, 3, 4, 5, 6};
          c.cnn_depths = {100, 50, 75, 100, 100, 100};
        } else {
          c.cnn_widths = {1, 2, 3, 4, 5, 6, 7};
          c.cnn_depths = {100, 100, 150, 200, 200, 200, 200};
        }
      } else {
        // Character CNN settings of the character-aware baseline.
        c.d_x = 15;
        if (size == SizeClass::kSmall) {
          c.cnn_widths = {1, 2, 3, 4, 5, 6};
          c.cnn_depths = {25, 50, 75, 100, 125, 150};
        } else {
          c.cnn_widths = {1, 2, 3, 4, 5, 6, 7};
          c.cnn_depths = {50, 100, 150, 200, 200, 200, 200};
        }
      }
      c.d_hw = c.composed_dim();
      break;
  }
  return c;
}

namespace {

std::string join(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::map<std::string, std::string> LMConfig::to_map() const {
  return {
      {"composition", std::string(composition_name(composition))},
      {"subword_vocab", std::to_string(subword_vocab)},
      {"word_vocab", std::to_string(word_vocab)},
      {"d_X", std::to_string(d_x)},
      {"d_HW", std::to_string(d_hw)},
      {"d_LM", std::to_string(d_lm)},
      {"n", std::to_string(pad_length)},
      {"cnn_widths", join(cnn_widths)},
      {"cnn_depths", join(cnn_depths)},
      {"highway_layers", std::to_string(highway_layers)},
      {"lstm_layers", std::to_string(lstm_layers)},
      {"dropout_embedding", fmt_double(dropout.embedding)},
      {"dropout_gate_input", fmt_double(dropout.gate_input)},
      {"dropout_hidden", fmt_double(dropout.hidden)},
      {"dropout_output", fmt_double(dropout.output)},
  };
}

LMConfig LMConfig::from_map(const std::map<std::string, std::string>& kv) {
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("missing_key", "LM config lacks '" + key + "'");
    return it->second;
  };
  LMConfig c;
  c.composition = parse_composition(get("composition"));
  c.subword_vocab = std::stoi(get("subword_vocab"));
  c.word_vocab = std::stoi(get("word_vocab"));
  c.d_x = std::stoi(get("d_X"));
  c.d_hw = std::stoi(get("d_HW"));
  c.d_lm = std::stoi(get("d_LM"));
  c.pad_length = std::stoi(get("n"));
  c.cnn_widths = split_ints(get("cnn_widths"));
  c.cnn_depths = split_ints(get("cnn_depths"));
  c.highway_layers = std::stoi(get("highway_layers"));
  c.lstm_layers = std::stoi(get("lstm_layers"));
  c.dropout.embedding = std::stod(get("dropout_embedding"));
  c.dropout.gate_input = std::stod(get("dropout_gate_input"));
  c.dropout.hidden = std::stod(get("dropout_hidden"));
  c.dropout.output = std::stod(get("dropout_output"));
  c.validate();
  return c;
}

template <typename T>
LMParams<T> LMParams<T>::zeros(const LMConfig& config) {
  config.validate();
  LMParams p;
  p.embedding = Mat<T>::Zero(config.d_x, config.subword_vocab);
  if (config.has_projection()) p.projection = Mat<T>::Zero(config.d_hw, config.composed_dim());
  if (config.composition == Composition::kCnn) {
    for (size_t i = 0; i < config.cnn_widths.size(); ++i) {
      p.conv_w.push_back(Mat<T>::Zero(config.cnn_depths[i], config.cnn_widths[i] * config.d_x));
      p.conv_b.push_back(Mat<T>::Zero(config.cnn_depths[i], 1));
    }
  }
  for (int l = 0; l < config.highway_layers; ++l) {
    p.hw_gate_w.push_back(Mat<T>::Zero(config.d_hw, config.d_hw));
    p.hw_gate_b.push_back(Mat<T>::Zero(config.d_hw, 1));
    p.hw_w.push_back(Mat<T>::Zero(config.d_hw, config.d_hw));
    p.hw_b.push_back(Mat<T>::Zero(config.d_hw, 1));
  }
  for (int l = 0; l < config.lstm_layers; ++l) {
    const int in = l == 0 ? config.d_hw : config.d_lm;
    p.lstm_w.push_back(Mat<T>::Zero(4 * config.d_lm, in));
    p.lstm_u.push_back(Mat<T>::Zero(4 * config.d_lm, config.d_lm));
    p.lstm_b.push_back(Mat<T>::Zero(4 * config.d_lm, 1));
  }
  p.softmax_w = Mat<T>::Zero(config.word_vocab, config.d_lm);
  p.softmax_b = Mat<T>::Zero(config.word_vocab, 1);
  return p;
}

template <typename T>
std::vector<std::pair<std::string, Mat<T>*>> LMParams<T>::named() {
  std::vector<std::pair<std::string, Mat<T>*>> out;
  out.emplace_back("embedding", &embedding);
  if (projection.size() > 0) out.emplace_back("projection", &projection);
  auto add_list = [&](const char* name, std::vector<Mat<T>>& list) {
    for (size_t i = 0; i < list.size(); ++i) out.emplace_back(std::string(name) + "." + std::to_string(i), &list[i]);
  };
  add_list("conv_w", conv_w);
  add_list("conv_b", conv_b);
  for (size_t l = 0; l < hw_w.size(); ++l) {
    const std::string s = "." + std::to_string(l);
    out.emplace_back("hw_gate_w" + s, &hw_gate_w[l]);
    out.emplace_back("hw_gate_b" + s, &hw_gate_b[l]);
    out.emplace_back("hw_w" + s, &hw_w[l]);
    out.emplace_back("hw_b" + s, &hw_b[l]);
  }
  for (size_t l = 0; l < lstm_w.size(); ++l) {
    const std::string s = "." + std::to_string(l);
    out.emplace_back("lstm_w" + s, &lstm_w[l]);
    out.emplace_back("lstm_u" + s, &lstm_u[l]);
    out.emplace_back("lstm_b" + s, &lstm_b[l]);
  }
  out.emplace_back("softmax_w", &softmax_w);
  out.emplace_back("softmax_b", &softmax_b);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Mat<T>*>> LMParams<T>::named() const {
  auto mutable_list = const_cast<LMParams*>(this)->named();
  std::vector<std::pair<std::string, const Mat<T>*>> out;
  out.reserve(mutable_list.size());
  for (auto& [name, ptr] : mutable_list) out.emplace_back(name, ptr);
  return out;
}

template <typename T>
std::int64_t LMParams<T>::size() const {
  std::int64_t n = 0;
  for (const auto& [name, m] : named()) n += m->size();
  return n;
}

template <typename T>
void LMParams<T>::set_zero() {
  for (auto& [name, m] : named()) m->setZero();
}

template <typename T>
template <typename U>
LMParams<U> LMParams<T>::cast() const {
  LMParams<U> out;
  auto conv = [](const Mat<T>& m) -> Mat<U> { return m.template cast<U>(); };
  auto conv_list = [&](const std::vector<Mat<T>>& v) {
    std::vector<Mat<U>> o;
    for (const auto& m : v) o.push_back(conv(m));
    return o;
  };
  out.embedding = conv(embedding);
  out.projection = conv(projection);
  out.conv_w = conv_list(conv_w);
  out.conv_b = conv_list(conv_b);
  out.hw_gate_w = conv_list(hw_gate_w);
  out.hw_gate_b = conv_list(hw_gate_b);
  out.hw_w = conv_list(hw_w);
  out.hw_b = conv_list(hw_b);
  out.lstm_w = conv_list(lstm_w);
  out.lstm_u = conv_list(lstm_u);
  out.lstm_b = conv_list(lstm_b);
  out.softmax_w = conv(softmax_w);
  out.softmax_b = conv(softmax_b);
  return out;
}

namespace {

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using T = typename Derived::Scalar;
  return (T(1) + (-x).exp()).inverse();
}

// Zero-padded copy with at least `min_cols` columns.
template <typename T>
Mat<T> pad_columns(const Mat<T>& m, int min_cols) {
  if (m.cols() >= min_cols) return m;
  Mat<T> out = Mat<T>::Zero(m.rows(), min_cols);
  out.leftCols(m.cols()) = m;
  return out;
}

template <typename T>
using Windows = Eigen::Map<const Mat<T>, 0, Eigen::OuterStride<>>;

// Column j holds the flattened width-w window starting at column j.
template <typename T>
Windows<T> windows_of(const Mat<T>& padded, int width) {
  const auto d = padded.rows();
  return Windows<T>(padded.data(), d * width, padded.cols() - width + 1, Eigen::OuterStride<>(d));
}

template <typename T>
struct CnnWord {
  Mat<T> padded;                       // d_x x max(L, max width)
  std::vector<std::vector<int>> best;  // per bank, argmax column per filter
  Vec<T> out;                          // post-tanh max values, concatenated
};

template <typename T>
CnnWord<T> cnn_forward(const Mat<T>& vectors, const std::vector<Mat<T>>& filters,
                       const std::vector<Mat<T>>& biases) {
  const auto d = vectors.rows();
  int max_width = 0;
  int total = 0;
  for (const auto& f : filters) {
    max_width = std::max<int>(max_width, static_cast<int>(f.cols() / d));
    total += static_cast<int>(f.rows());
  }
  CnnWord<T> word;
  word.padded = pad_columns<T>(vectors, max_width);
  word.out.resize(total);
  word.best.resize(filters.size());
  int offset = 0;
  for (size_t k = 0; k < filters.size(); ++k) {
    const int width = static_cast<int>(filters[k].cols() / d);
    const Mat<T> feature = (filters[k] * windows_of<T>(word.padded, width)).colwise() + biases[k].col(0);
    auto& best = word.best[k];
    best.resize(static_cast<size_t>(feature.rows()));
    for (Eigen::Index r = 0; r < feature.rows(); ++r) {
      Eigen::Index j = 0;
      const T m = feature.row(r).maxCoeff(&j);
      best[static_cast<size_t>(r)] = static_cast<int>(j);
      word.out(offset + r) = std::tanh(m);
    }
    offset += static_cast<int>(feature.rows());
  }
  return word;
}

template <typename T>
struct LstmCache {
  Mat<T> in, h_prev, c_prev;  // masked input and recurrent state
  Mat<T> i, f, o, g, c, tanh_c;
};

template <typename T>
Mat<T> lstm_forward(const Mat<T>& w, const Mat<T>& u, const Mat<T>& b, LstmCache<T>& k) {
  const auto d = u.cols();
  Mat<T> a = w * k.in + u * k.h_prev;
  a.colwise() += b.col(0);
  k.i = sigmoid(a.topRows(d).array()).matrix();
  k.f = sigmoid(a.middleRows(d, d).array()).matrix();
  k.o = sigmoid(a.middleRows(2 * d, d).array()).matrix();
  k.g = a.bottomRows(d).array().tanh().matrix();
  k.c = (k.f.array() * k.c_prev.array() + k.i.array() * k.g.array()).matrix();
  k.tanh_c = k.c.array().tanh().matrix();
  return (k.o.array() * k.tanh_c.array()).matrix();
}

template <typename T>
struct HighwayCache {
  Mat<T> x, gate, z;
};

template <typename T>
Mat<T> highway_layer(const Mat<T>& gw, const Mat<T>& gb, const Mat<T>& w, const Mat<T>& b,
                     HighwayCache<T>& k) {
  Mat<T> gp = gw * k.x;
  gp.colwise() += gb.col(0);
  Mat<T> zp = w * k.x;
  zp.colwise() += b.col(0);
  k.gate = sigmoid(gp.array()).matrix();
  k.z = zp.array().max(T(0)).matrix();
  return (k.gate.array() * k.z.array() + (T(1) - k.gate.array()) * k.x.array()).matrix();
}

template <typename T>
void apply_mask(Mat<T>& m, const Mat<T>* mask) {
  if (mask && mask->size() > 0) m.array() *= mask->array();
}

}  // namespace

template <typename T>
Vec<T> compose_sum(const Mat<T>& subword_vectors) {
  if (subword_vectors.cols() == 0) throw ConfigError("empty_word", "no subwords to compose");
  return subword_vectors.rowwise().sum();
}

template <typename T>
Vec<T> compose_concat(const Mat<T>& subword_vectors, int pad_length) {
  if (subword_vectors.cols() == 0) throw ConfigError("empty_word", "no subwords to compose");
  const auto d = subword_vectors.rows();
  Vec<T> out = Vec<T>::Zero(d * pad_length);
  const auto keep = std::min<Eigen::Index>(subword_vectors.cols(), pad_length);
  for (Eigen::Index k = 0; k < keep; ++k) out.segment(k * d, d) = subword_vectors.col(k);
  return out;
}

template <typename T>
Vec<T> compose_cnn(const Mat<T>& subword_vectors, const std::vector<Mat<T>>& filters,
                   const std::vector<Mat<T>>& biases) {
  if (subword_vectors.cols() == 0) throw ConfigError("empty_word", "no subwords to compose");
  return cnn_forward<T>(subword_vectors, filters, biases).out;
}

template <typename T>
Vec<T> highway_forward(const Vec<T>& x, const Mat<T>& gate_w, const Mat<T>& gate_b, const Mat<T>& w,
                       const Mat<T>& b, Vec<T>* gate_out) {
  HighwayCache<T> k;
  k.x = x;
  Mat<T> y = highway_layer<T>(gate_w, gate_b, w, b, k);
  if (gate_out) *gate_out = k.gate.col(0);
  return y.col(0);
}

template <typename T>
RecurrentState<T> RecurrentState<T>::zeros(const LMConfig& config, int batch) {
  RecurrentState s;
  for (int l = 0; l < config.lstm_layers; ++l) {
    s.h.push_back(Mat<T>::Zero(config.d_lm, batch));
    s.c.push_back(Mat<T>::Zero(config.d_lm, batch));
  }
  return s;
}

template <typename T>
Vec<T> lstm_stack_step(const LMParams<T>& params, const LMConfig& config, const Vec<T>& input,
                       RecurrentState<T>& state) {
  Mat<T> x = input;
  for (int l = 0; l < config.lstm_layers; ++l) {
    LstmCache<T> k;
    k.in = x;
    k.h_prev = state.h[static_cast<size_t>(l)];
    k.c_prev = state.c[static_cast<size_t>(l)];
    x = lstm_forward<T>(params.lstm_w[static_cast<size_t>(l)], params.lstm_u[static_cast<size_t>(l)],
                        params.lstm_b[static_cast<size_t>(l)], k);
    state.h[static_cast<size_t>(l)] = x;
    state.c[static_cast<size_t>(l)] = k.c;
  }
  return x.col(0);
}

template <typename T>
SoftmaxResult<T> softmax_nll(const Vec<T>& h, int target, const Mat<T>& w, const Vec<T>& b) {
  if (target < 0 || target >= w.rows()) {
    throw ConfigError("target_out_of_range", "target " + std::to_string(target) + " outside vocabulary");
  }
  const Vec<T> logits = w * h + b;
  const T m = logits.maxCoeff();
  Vec<T> p = (logits.array() - m).exp().matrix();
  const T z = p.sum();
  p /= z;
  SoftmaxResult<T> r;
  r.loss = -(static_cast<double>(logits(target) - m) - std::log(static_cast<double>(z)));
  Vec<T> dlogits = p;
  dlogits(target) -= T(1);
  r.grad_b = dlogits;
  r.grad_w = dlogits * h.transpose();
  r.grad_h = w.transpose() * dlogits;
  return r;
}

template <typename T>
DropoutMasks<T> variational_dropout_masks(const LMConfig& config, int batch, const DropoutRates& rates,
                                          std::mt19937_64& rng) {
  auto sample = [&](double rate, Eigen::Index rows) -> Mat<T> {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("bad_dropout", "dropout rate must lie in [0, 1)");
    if (rate == 0.0) return Mat<T>::Ones(rows, batch);
    const T keep = static_cast<T>(1.0 / (1.0 - rate));
    Mat<T> m(rows, batch);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        // 53 random bits -> uniform [0, 1).
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        m(i, j) = u < rate ? T(0) : keep;
      }
    }
    return m;
  };
  DropoutMasks<T> masks;
  masks.embedding = sample(rates.embedding, config.composed_dim());
  for (int l = 0; l < config.lstm_layers; ++l) {
    masks.gate_input.push_back(sample(rates.gate_input, l == 0 ? config.d_hw : config.d_lm));
    masks.hidden.push_back(sample(rates.hidden, config.d_lm));
  }
  masks.output = sample(rates.output, config.d_lm);
  return masks;
}

void GateRecorder::record(int layer, const float* data, size_t n) {
  if (values.size() <= static_cast<size_t>(layer)) values.resize(static_cast<size_t>(layer) + 1);
  auto& v = values[static_cast<size_t>(layer)];
  const size_t room = max_samples == 0 ? n : (v.size() >= max_samples ? 0 : std::min(n, max_samples - v.size()));
  v.insert(v.end(), data, data + room);
}

bool GateRecorder::full() const {
  if (max_samples == 0 || values.empty()) return false;
  return std::all_of(values.begin(), values.end(), [&](const auto& v) { return v.size() >= max_samples; });
}

template <typename T>
SubwordLM<T>::SubwordLM(LMConfig config, LMParams<T> params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
}

template <typename T>
double SubwordLM<T>::run_window(const EncodedCorpus& corpus, const Window& window,
                                RecurrentState<T>& state, const DropoutMasks<T>* masks,
                                LMParams<T>* grads, GateRecorder* gates) const {
  const LMConfig& cfg = config_;
  const LMParams<T>& p = params_;
  const int batch = window.batch;
  const int steps = window.steps;
  const int d_x = cfg.d_x;
  const int hw_layers = cfg.highway_layers;
  const int lstm_layers = cfg.lstm_layers;
  const bool cnn = cfg.composition == Composition::kCnn;
  if (corpus.subword_vocab != cfg.subword_vocab || corpus.word_vocab() != cfg.word_vocab) {
    throw InputError("vocab_mismatch", "encoded corpus vocabularies do not match the model");
  }

  // Per-time caches for the backward pass.
  std::vector<Mat<T>> composed(static_cast<size_t>(steps));  // masked composed vectors
  std::vector<std::vector<CnnWord<T>>> cnn_words(cnn ? static_cast<size_t>(steps) : 0);
  std::vector<std::vector<HighwayCache<T>>> hw(static_cast<size_t>(steps));
  std::vector<std::vector<LstmCache<T>>> lstm(static_cast<size_t>(steps));
  std::vector<Mat<T>> top(static_cast<size_t>(steps));    // masked top LSTM output
  std::vector<Mat<T>> probs(static_cast<size_t>(steps));  // softmax outputs

  double loss = 0.0;
  Mat<T> sub;
  for (int t = 0; t < steps; ++t) {
    Mat<T> x0(cfg.composed_dim(), batch);
    if (cnn) cnn_words[static_cast<size_t>(t)].resize(static_cast<size_t>(batch));
    for (int b = 0; b < batch; ++b) {
      const auto units = corpus.subwords_of(static_cast<size_t>(window.token(t, b)));
      if (units.empty()) throw InputError("empty_word", "token without subwords");
      switch (cfg.composition) {
        case Composition::kSum: {
          auto col = x0.col(b);
          col.setZero();
          for (auto u : units) col += p.embedding.col(u);
          break;
        }
        case Composition::kConcat: {
          auto col = x0.col(b);
          col.setZero();
          const auto keep = std::min<size_t>(units.size(), static_cast<size_t>(cfg.pad_length));
          for (size_t k = 0; k < keep; ++k) col.segment(static_cast<Eigen::Index>(k) * d_x, d_x) = p.embedding.col(units[k]);
          break;
        }
        case Composition::kCnn: {
          sub.resize(d_x, static_cast<Eigen::Index>(units.size()));
          for (size_t k = 0; k < units.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = p.embedding.col(units[k]);
          auto& word = cnn_words[static_cast<size_t>(t)][static_cast<size_t>(b)];
          word = cnn_forward<T>(sub, p.conv_w, p.conv_b);
          x0.col(b) = word.out;
          break;
        }
      }
    }
    apply_mask(x0, masks ? &masks->embedding : nullptr);
    Mat<T> x = cfg.has_projection() ? Mat<T>(p.projection * x0) : x0;
    composed[static_cast<size_t>(t)] = std::move(x0);

    auto& hwc = hw[static_cast<size_t>(t)];
    hwc.resize(static_cast<size_t>(hw_layers));
    for (int l = 0; l < hw_layers; ++l) {
      auto& k = hwc[static_cast<size_t>(l)];
      k.x = std::move(x);
      x = highway_layer<T>(p.hw_gate_w[static_cast<size_t>(l)], p.hw_gate_b[static_cast<size_t>(l)],
                           p.hw_w[static_cast<size_t>(l)], p.hw_b[static_cast<size_t>(l)], k);
      if (gates) {
        const Mat<float> g = k.gate.template cast<float>();
        gates->record(l, g.data(), static_cast<size_t>(g.size()));
      }
    }

    auto& lc = lstm[static_cast<size_t>(t)];
    lc.resize(static_cast<size_t>(lstm_layers));
    for (int l = 0; l < lstm_layers; ++l) {
      auto& k = lc[static_cast<size_t>(l)];
      const auto li = static_cast<size_t>(l);
      k.in = std::move(x);
      apply_mask(k.in, masks && !masks->gate_input.empty() ? &masks->gate_input[li] : nullptr);
      k.h_prev = state.h[li];
      apply_mask(k.h_prev, masks && !masks->hidden.empty() ? &masks->hidden[li] : nullptr);
      k.c_prev = state.c[li];
      x = lstm_forward<T>(p.lstm_w[li], p.lstm_u[li], p.lstm_b[li], k);
      state.h[li] = x;
      state.c[li] = k.c;
    }
    apply_mask(x, masks ? &masks->output : nullptr);

    Mat<T> logits = p.softmax_w * x;
    logits.colwise() += p.softmax_b.col(0);
    for (int b = 0; b < batch; ++b) {
      auto col = logits.col(b);
      const T m = col.maxCoeff();
      col = (col.array() - m).exp().matrix();
      const T z = col.sum();
      const int target = window.target(t, b);
      if (target < 0 || target >= cfg.word_vocab) {
        throw InputError("target_out_of_range", "target word id outside the model vocabulary");
      }
      loss -= std::log(static_cast<double>(col(target))) - std::log(static_cast<double>(z));
      col /= z;
    }
    probs[static_cast<size_t>(t)] = std::move(logits);
    top[static_cast<size_t>(t)] = std::move(x);
  }
  if (!grads) return loss;

  // Backward through time; the carried-in state is treated as a constant.
  LMParams<T>& g = *grads;
  std::vector<Mat<T>> dh_next(static_cast<size_t>(lstm_layers), Mat<T>::Zero(cfg.d_lm, batch));
  std::vector<Mat<T>> dc_next(static_cast<size_t>(lstm_layers), Mat<T>::Zero(cfg.d_lm, batch));
  Mat<T> d_embedding_cols;
  for (int t = steps - 1; t >= 0; --t) {
    const auto ti = static_cast<size_t>(t);
    Mat<T>& dlogits = probs[ti];
    for (int b = 0; b < batch; ++b) dlogits(window.target(t, b), b) -= T(1);
    g.softmax_w.noalias() += dlogits * top[ti].transpose();
    g.softmax_b.col(0) += dlogits.rowwise().sum();
    Mat<T> dx = p.softmax_w.transpose() * dlogits;
    apply_mask(dx, masks ? &masks->output : nullptr);

    for (int l = lstm_layers - 1; l >= 0; --l) {
      const auto li = static_cast<size_t>(l);
      auto& k = lstm[ti][li];
      const Mat<T> dh = dx + dh_next[li];
      const auto d = cfg.d_lm;
      Mat<T> da(4 * d, batch);
      const auto dc = (dc_next[li].array() +
                       dh.array() * k.o.array() * (T(1) - k.tanh_c.array().square()))
                          .eval();
      da.topRows(d) = (dc * k.g.array() * k.i.array() * (T(1) - k.i.array())).matrix();
      da.middleRows(d, d) = (dc * k.c_prev.array() * k.f.array() * (T(1) - k.f.array())).matrix();
      da.middleRows(2 * d, d) = (dh.array() * k.tanh_c.array() * k.o.array() * (T(1) - k.o.array())).matrix();
      da.bottomRows(d) = (dc * k.i.array() * (T(1) - k.g.array().square())).matrix();
      dc_next[li] = (dc * k.f.array()).matrix();
      g.lstm_w[li].noalias() += da * k.in.transpose();
      g.lstm_u[li].noalias() += da * k.h_prev.transpose();
      g.lstm_b[li].col(0) += da.rowwise().sum();
      dh_next[li] = p.lstm_u[li].transpose() * da;
      apply_mask(dh_next[li], masks && !masks->hidden.empty() ? &masks->hidden[li] : nullptr);
      dx = p.lstm_w[li].transpose() * da;
      apply_mask(dx, masks && !masks->gate_input.empty() ? &masks->gate_input[li] : nullptr);
    }

    for (int l = hw_layers - 1; l >= 0; --l) {
      const auto li = static_cast<size_t>(l);
      auto& k = hw[ti][li];
      const Mat<T> dgate_pre =
          (dx.array() * (k.z.array() - k.x.array()) * k.gate.array() * (T(1) - k.gate.array())).matrix();
      const Mat<T> dz_pre =
          (dx.array() * k.gate.array() * (k.z.array() > T(0)).template cast<T>()).matrix();
      g.hw_gate_w[li].noalias() += dgate_pre * k.x.transpose();
      g.hw_gate_b[li].col(0) += dgate_pre.rowwise().sum();
      g.hw_w[li].noalias() += dz_pre * k.x.transpose();
      g.hw_b[li].col(0) += dz_pre.rowwise().sum();
      Mat<T> dprev = (dx.array() * (T(1) - k.gate.array())).matrix();
      dprev.noalias() += p.hw_gate_w[li].transpose() * dgate_pre;
      dprev.noalias() += p.hw_w[li].transpose() * dz_pre;
      dx = std::move(dprev);
    }

    Mat<T> dx0;
    if (cfg.has_projection()) {
      g.projection.noalias() += dx * composed[ti].transpose();
      dx0 = p.projection.transpose() * dx;
    } else {
      dx0 = std::move(dx);
    }
    apply_mask(dx0, masks ? &masks->embedding : nullptr);

    for (int b = 0; b < batch; ++b) {
      const auto units = corpus.subwords_of(static_cast<size_t>(window.token(t, b)));
      switch (cfg.composition) {
        case Composition::kSum:
          for (auto u : units) g.embedding.col(u) += dx0.col(b);
          break;
        case Composition::kConcat: {
          const auto keep = std::min<size_t>(units.size(), static_cast<size_t>(cfg.pad_length));
          for (size_t k = 0; k < keep; ++k) {
            g.embedding.col(units[k]) += dx0.col(b).segment(static_cast<Eigen::Index>(k) * d_x, d_x);
          }
          break;
        }
        case Composition::kCnn: {
          const auto& word = cnn_words[ti][static_cast<size_t>(b)];
          Mat<T> dpadded = Mat<T>::Zero(word.padded.rows(), word.padded.cols());
          int offset = 0;
          for (size_t bank = 0; bank < p.conv_w.size(); ++bank) {
            const auto& f = p.conv_w[bank];
            const int width = static_cast<int>(f.cols() / d_x);
            for (Eigen::Index r = 0; r < f.rows(); ++r) {
              const T y = word.out(offset + r);
              const T dy = dx0(offset + r, b) * (T(1) - y * y);
              if (dy == T(0)) continue;
              const int j = word.best[bank][static_cast<size_t>(r)];
              const Eigen::Map<const Vec<T>> window_vec(word.padded.data() + j * d_x, width * d_x);
              g.conv_w[bank].row(r) += dy * window_vec.transpose();
              g.conv_b[bank](r, 0) += dy;
              Eigen::Map<Vec<T>> dwindow(dpadded.data() + j * d_x, width * d_x);
              dwindow += dy * f.row(r).transpose();
            }
            offset += static_cast<int>(f.rows());
          }
          for (size_t k = 0; k < units.size(); ++k) g.embedding.col(units[k]) += dpadded.col(static_cast<Eigen::Index>(k));
          break;
        }
      }
    }
  }
  return loss;
}

#define PATLM_INSTANTIATE(T)                                                                     \
  template struct LMParams<T>;                                                                   \
  template struct RecurrentState<T>;                                                             \
  template class SubwordLM<T>;                                                                   \
  template Vec<T> compose_sum<T>(const Mat<T>&);                                                 \
  template Vec<T> compose_concat<T>(const Mat<T>&, int);                                         \
  template Vec<T> compose_cnn<T>(const Mat<T>&, const std::vector<Mat<T>>&,                      \
                                 const std::vector<Mat<T>>&);                                    \
  template Vec<T> highway_forward<T>(const Vec<T>&, const Mat<T>&, const Mat<T>&, const Mat<T>&, \
                                     const Mat<T>&, Vec<T>*);                                    \
  template Vec<T> lstm_stack_step<T>(const LMParams<T>&, const LMConfig&, const Vec<T>&,         \
                                     RecurrentState<T>&);                                        \
  template SoftmaxResult<T> softmax_nll<T>(const Vec<T>&, int, const Mat<T>&, const Vec<T>&);    \
  template DropoutMasks<T> variational_dropout_masks<T>(const LMConfig&, int,                    \
                                                        const DropoutRates&, std::mt19937_64&);

PATLM_INSTANTIATE(float)
PATLM_INSTANTIATE(double)

template LMParams<double> LMParams<float>::cast<double>() const;
template LMParams<float> LMParams<double>::cast<float>() const;
template LMParams<float> LMParams<float>::cast<float>() const;
template LMParams<double> LMParams<double>::cast<double>() const;

}  // namespace patlm
