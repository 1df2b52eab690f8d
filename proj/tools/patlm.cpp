// patlm: pipeline driver. Every stage reads one config file (plus --set
// overrides), writes its artifacts and a provenance manifest next to them.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "patlm/automaton.hpp"
#include "patlm/checkpoint.hpp"
#include "patlm/config.hpp"
#include "patlm/corpus.hpp"
#include "patlm/crf.hpp"
#include "patlm/encoded.hpp"
#include "patlm/error.hpp"
#include "patlm/evaluator.hpp"
#include "patlm/manifest.hpp"
#include "patlm/mining.hpp"
#include "patlm/neural_lm.hpp"
#include "patlm/synth.hpp"
#include "patlm/trainer.hpp"

namespace fs = std::filesystem;
using namespace patlm;

namespace {

struct Context {
  Config config;
  std::string config_hash;
  std::uint64_t seed = 1;
  int threads = 1;
};

Manifest new_manifest(const Context& ctx, const std::string& stage) {
  Manifest m;
  m.stage = stage;
  m.config_hash = ctx.config_hash;
  m.seed = ctx.seed;
  return m;
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw InputError("output_unwritable", "cannot create '" + parent.string() + "'");
}

void finish(Manifest& m, const std::string& primary_output) {
  write_manifest(manifest_path(primary_output), m);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

SourceProfile profile_of(const Context& ctx, const std::string& section) {
  return parse_profile(ctx.config.get_string(section, "profile", "ptb"));
}

std::string vocab_fingerprint(const EncodedCorpus& corpus) {
  std::string joined;
  for (const auto& w : corpus.vocab) joined += w + '\n';
  return sha256_hex(joined);
}

// ---- stages ----

int run_synth(const Context& ctx) {
  const std::string s = "synth";
  SynthConfig sc;
  sc.seed = static_cast<std::uint64_t>(ctx.config.get_int(s, "seed", static_cast<std::int64_t>(ctx.seed)));
  sc.tokens = ctx.config.get_int(s, "tokens", sc.tokens);
  sc.roots = static_cast<int>(ctx.config.get_int(s, "roots", sc.roots));
  sc.function_words = static_cast<int>(ctx.config.get_int(s, "function_words", sc.function_words));
  sc.zipf = ctx.config.get_double(s, "zipf", sc.zipf);
  sc.agreement = ctx.config.get_double(s, "agreement", sc.agreement);
  sc.suffix_agreement = ctx.config.get_double(s, "suffix_agreement", sc.suffix_agreement);
  sc.min_content = static_cast<int>(ctx.config.get_int(s, "min_content", sc.min_content));
  sc.max_content = static_cast<int>(ctx.config.get_int(s, "max_content", sc.max_content));
  const auto dir = ctx.config.get_string(s, "out_dir");
  const auto corpus = generate_synth(sc);
  write_synth(dir, corpus);
  auto m = new_manifest(ctx, "synth");
  m.seed = sc.seed;
  for (const char* name : {"train.txt", "valid.txt", "test.txt"}) {
    const auto path = (fs::path(dir) / name).string();
    m.outputs.push_back(record_output(fs::path(name).stem().string(), path));
  }
  m.scalars["tokens"] = std::to_string(sc.tokens);
  for (const auto& out : m.outputs) write_manifest(manifest_path(out.path), m);
  std::cout << "synth: wrote " << corpus.train.size() << "/" << corpus.valid.size() << "/" << corpus.test.size()
            << " sentences to " << dir << "\n";
  return 0;
}

int run_mine(const Context& ctx) {
  const std::string s = "mine";
  const auto corpus_path = ctx.config.get_string(s, "corpus");
  const auto out = ctx.config.get_string(s, "out");
  const auto f = ctx.config.get_int(s, "f");
  const auto l_max = static_cast<int>(ctx.config.get_int(s, "L_max", kDefaultMaxPatternLength));
  if (f < 0) throw ConfigError("bad_value", "mine.f must be non-negative");
  auto m = new_manifest(ctx, s);
  m.inputs.push_back(verify_input("corpus", corpus_path));
  Alphabet alphabet;
  const auto corpus = load_corpus(corpus_path, profile_of(ctx, s), alphabet);
  const auto candidates = mine_patterns(corpus, f, l_max);
  ensure_parent(out);
  write_patterns(out, candidates, alphabet);
  m.outputs.push_back(record_output("patterns", out));
  m.scalars["A"] = std::to_string(alphabet.size());
  m.scalars["Pi_prime"] = std::to_string(candidates.size());
  m.scalars["f"] = std::to_string(f);
  m.scalars["L_max"] = std::to_string(l_max);
  m.scalars["n"] = std::to_string(word_length_percentile(corpus, 95.0));
  finish(m, out);
  std::cout << "mine: |A|=" << alphabet.size() << " |Pi'|=" << candidates.size() << "\n";
  return 0;
}

int run_train_crf(const Context& ctx) {
  const std::string s = "crf";
  const auto corpus_path = ctx.config.get_string(s, "corpus");
  const auto patterns_path = ctx.config.get_string(s, "patterns");
  const auto out = ctx.config.get_string(s, "out");
  const double c = ctx.config.get_double(s, "C");
  OwlqnConfig oc;
  oc.max_iter = static_cast<int>(ctx.config.get_int(s, "max_iter", oc.max_iter));
  oc.memory = static_cast<int>(ctx.config.get_int(s, "memory", oc.memory));
  oc.grad_tol = ctx.config.get_double(s, "grad_tol", oc.grad_tol);
  auto m = new_manifest(ctx, "train-crf");
  m.inputs.push_back(verify_input("corpus", corpus_path));
  m.inputs.push_back(verify_input("patterns", patterns_path));
  Alphabet alphabet;
  const auto corpus = load_corpus(corpus_path, profile_of(ctx, s), alphabet);
  alphabet.freeze();
  const auto candidates = read_patterns(patterns_path, alphabet);
  std::vector<Pattern> patterns;
  for (const auto& cand : candidates.patterns) patterns.push_back(cand.symbols);
  auto result = train_crf(corpus, std::move(patterns), alphabet.size(), c, oc, ctx.threads);
  ensure_parent(out);
  write_table(out, result.table, alphabet);
  m.outputs.push_back(record_output("crf_table", out));
  if (auto log = ctx.config.find(s, "log")) {
    std::ofstream lf(*log);
    if (!lf) throw InputError("output_unwritable", "cannot write '" + *log + "'");
    write_iteration_log(lf, result.optimizer.log);
    lf.close();
    m.outputs.push_back(record_output("iteration_log", *log));
  }
  m.scalars["A"] = std::to_string(alphabet.size());
  m.scalars["Pi_prime"] = std::to_string(candidates.size());
  m.scalars["Pi_0"] = std::to_string(result.table.num_selected());
  m.scalars["C"] = fmt(c);
  m.scalars["f"] = std::to_string(candidates.threshold);
  m.scalars["objective"] = fmt(result.optimizer.objective);
  m.scalars["converged"] = result.optimizer.converged ? "1" : "0";
  // Single-symbol patterns take part in the energy like longer ones.
  m.scalars["length1_patterns"] = "included";
  m.scalars["owlqn_memory"] = std::to_string(oc.memory);
  m.scalars["owlqn_grad_tol"] = fmt(oc.grad_tol);
  m.scalars["owlqn_max_iter"] = std::to_string(oc.max_iter);
  finish(m, out);
  std::cout << "train-crf: |Pi'|=" << candidates.size() << " |Pi_0|=" << result.table.num_selected()
            << " iterations=" << result.optimizer.iterations << "\n";
  return 0;
}

int run_build_automaton(const Context& ctx) {
  const std::string s = "automaton";
  const auto corpus_path = ctx.config.get_string(s, "corpus");
  const auto table_path = ctx.config.get_string(s, "table");
  const auto out = ctx.config.get_string(s, "out");
  auto m = new_manifest(ctx, "build-automaton");
  m.inputs.push_back(verify_input("corpus", corpus_path));
  m.inputs.push_back(verify_input("crf_table", table_path));
  Alphabet alphabet;
  load_corpus(corpus_path, profile_of(ctx, s), alphabet);
  alphabet.freeze();
  const auto table = read_table(table_path, alphabet);
  const auto automaton = build_automaton(select_patterns(table), alphabet);
  ensure_parent(out);
  write_automaton(out, automaton, alphabet);
  m.outputs.push_back(record_output("automaton", out));
  m.scalars["A"] = std::to_string(alphabet.size());
  m.scalars["Pi_0"] = std::to_string(automaton.num_patterns());
  m.scalars["S"] = std::to_string(automaton.num_states());
  m.scalars["C"] = fmt(table.reg_c);
  finish(m, out);
  std::cout << "build-automaton: |Pi_0|=" << automaton.num_patterns() << " |S|=" << automaton.num_states()
            << "\n";
  return 0;
}

int run_encode(const Context& ctx) {
  const std::string s = "encode";
  const auto units = parse_units(ctx.config.get_string(s, "units"));
  const auto out_dir = ctx.config.get_string(s, "out_dir");
  const auto profile = profile_of(ctx, s);
  auto m = new_manifest(ctx, s);

  Alphabet alphabet;
  PatternAutomaton automaton;
  const auto train_path = ctx.config.get_string(s, "train");
  m.inputs.push_back(verify_input("train", train_path));
  if (units == SubwordUnits::kPatterns) {
    const auto automaton_path = ctx.config.get_string(s, "automaton");
    m.inputs.push_back(verify_input("automaton", automaton_path));
    automaton = read_automaton(automaton_path, alphabet);
  }
  const auto train = load_corpus(train_path, profile, alphabet);
  alphabet.freeze();
  const auto vocab = build_word_vocab(train, alphabet);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw InputError("output_unwritable", "cannot create '" + out_dir + "'");
  auto encode = [&](const CharCorpus& corpus) {
    return units == SubwordUnits::kPatterns ? encode_words(automaton, corpus, alphabet, vocab, ctx.threads)
                                            : encode_chars(corpus, alphabet, vocab);
  };
  std::string primary;
  for (const char* split : {"train", "valid", "test"}) {
    std::optional<std::string> path = ctx.config.find(s, split);
    if (!path) continue;
    if (std::string(split) != "train") m.inputs.push_back(verify_input(split, *path));
    const auto corpus = std::string(split) == "train" ? train : load_corpus(*path, profile, alphabet);
    const auto encoded = encode(corpus);
    const auto out = (fs::path(out_dir) / (std::string(split) + ".enc")).string();
    write_encoded(out, encoded);
    m.outputs.push_back(record_output(split, out));
    if (primary.empty()) primary = out;
  }
  m.scalars["A"] = std::to_string(alphabet.size());
  m.scalars["units"] = std::string(units_name(units));
  m.scalars["n"] = std::to_string(word_length_percentile(train, 95.0));
  m.scalars["W"] = std::to_string(vocab.size());
  if (units == SubwordUnits::kPatterns) {
    m.scalars["S"] = std::to_string(automaton.num_states());
    m.scalars["Pi_0"] = std::to_string(automaton.num_patterns());
  }
  for (const auto& out : m.outputs) write_manifest(manifest_path(out.path), m);
  std::cout << "encode: units=" << units_name(units) << " |W|=" << vocab.size() << " -> " << out_dir << "\n";
  return 0;
}

LMConfig lm_config_from(const Context& ctx, const EncodedCorpus& train) {
  const std::string s = "lm";
  const auto composition = parse_composition(ctx.config.get_string(s, "composition"));
  const auto size = parse_size_class(ctx.config.get_string(s, "size", "small"));
  const int n = static_cast<int>(ctx.config.get_int(s, "n", subword_length_percentile(train, 95.0)));
  auto c = LMConfig::preset(composition, size, train.units, train.subword_vocab, train.word_vocab(), n);
  c.d_lm = static_cast<int>(ctx.config.get_int(s, "d_LM", c.d_lm));
  // Dimensions tied to d_LM follow it unless set explicitly.
  if (composition != Composition::kCnn) c.d_hw = c.d_lm;
  if (composition == Composition::kSum) c.d_x = c.d_lm;
  c.d_x = static_cast<int>(ctx.config.get_int(s, "d_X", c.d_x));
  c.d_hw = static_cast<int>(ctx.config.get_int(s, "d_HW", c.d_hw));
  if (ctx.config.has(s, "cnn_widths")) c.cnn_widths = ctx.config.get_int_list(s, "cnn_widths");
  if (ctx.config.has(s, "cnn_depths")) c.cnn_depths = ctx.config.get_int_list(s, "cnn_depths");
  if (composition == Composition::kCnn && !ctx.config.has(s, "d_HW")) c.d_hw = c.composed_dim();
  c.highway_layers = static_cast<int>(ctx.config.get_int(s, "highway_layers", c.highway_layers));
  c.lstm_layers = static_cast<int>(ctx.config.get_int(s, "lstm_layers", c.lstm_layers));
  c.dropout.embedding = ctx.config.get_double(s, "dropout_embedding", c.dropout.embedding);
  c.dropout.gate_input = ctx.config.get_double(s, "dropout_gate_input", c.dropout.gate_input);
  c.dropout.hidden = ctx.config.get_double(s, "dropout_hidden", c.dropout.hidden);
  c.dropout.output = ctx.config.get_double(s, "dropout_output", c.dropout.output);
  c.validate();
  return c;
}

TrainConfig train_config_from(const Context& ctx) {
  const std::string s = "train";
  TrainConfig t;
  t.bptt = static_cast<int>(ctx.config.get_int(s, "bptt", t.bptt));
  t.batch = static_cast<int>(ctx.config.get_int(s, "batch", t.batch));
  t.lr0 = ctx.config.get_double(s, "lr0", t.lr0);
  t.epochs = static_cast<int>(ctx.config.get_int(s, "epochs", t.epochs));
  t.init_range = ctx.config.get_double(s, "init_range", t.init_range);
  t.forget_bias = ctx.config.get_double(s, "forget_bias", t.forget_bias);
  t.highway_bias = ctx.config.get_double(s, "highway_bias", t.highway_bias);
  t.grad_clip = ctx.config.get_double(s, "grad_clip", t.grad_clip);
  t.dropout = ctx.config.get_bool(s, "dropout", t.dropout);
  t.max_wall_seconds = ctx.config.get_double(s, "max_wall_seconds", t.max_wall_seconds);
  t.seed = ctx.seed;
  t.validate();
  return t;
}

int run_train_lm(const Context& ctx) {
  const auto train_path = ctx.config.get_string("train", "train");
  const auto valid_path = ctx.config.get_string("train", "valid");
  const auto out = ctx.config.get_string("train", "out");
  auto m = new_manifest(ctx, "train-lm");
  m.inputs.push_back(verify_input("train", train_path));
  m.inputs.push_back(verify_input("valid", valid_path));
  const auto train_corpus = read_encoded(train_path);
  const auto valid_corpus = read_encoded(valid_path);
  if (train_corpus.vocab != valid_corpus.vocab || train_corpus.subword_vocab != valid_corpus.subword_vocab ||
      train_corpus.units != valid_corpus.units) {
    throw InputError("vocab_mismatch", "train and valid were not encoded with the same vocabularies");
  }
  const auto lm = lm_config_from(ctx, train_corpus);
  const auto tc = train_config_from(ctx);
  std::mt19937_64 rng(tc.seed);
  auto params = init_params(lm, tc, rng);
  const auto result = train(lm, std::move(params), train_corpus, valid_corpus, tc, [](const EpochMetrics& e) {
    std::cerr << "epoch " << e.epoch << " lr=" << e.lr << " train_ppl=" << e.train_ppl
              << " valid_ppl=" << e.valid_ppl << "\n";
  });

  Checkpoint ck;
  ck.config = lm;
  ck.params = result.best;
  ck.metadata["units"] = std::string(units_name(train_corpus.units));
  ck.metadata["vocab_sha256"] = vocab_fingerprint(train_corpus);
  ck.metadata["best_epoch"] = std::to_string(result.best_epoch);
  ck.metadata["best_valid_ppl"] = fmt(result.best_valid_ppl);
  ck.metadata["stop_reason"] = result.stop_reason;
  ensure_parent(out);
  write_checkpoint(out, ck);
  m.outputs.push_back(record_output("checkpoint", out));
  const auto metrics_path = ctx.config.get_string("train", "metrics", out + ".metrics.csv");
  write_metrics_csv(metrics_path, result.metrics);
  m.scalars["n"] = std::to_string(lm.pad_length);
  m.scalars["params"] = std::to_string(param_count(lm).total);
  m.scalars["best_valid_ppl"] = fmt(result.best_valid_ppl);
  m.scalars["best_epoch"] = std::to_string(result.best_epoch);
  m.scalars["stop_reason"] = result.stop_reason;
  finish(m, out);
  if (result.diverged) {
    throw NumericError("non_finite_loss", "training diverged; best finite checkpoint written to '" + out + "'");
  }
  std::cout << "train-lm: best valid ppl " << result.best_valid_ppl << " at epoch " << result.best_epoch << "\n";
  return 0;
}

SubwordLM<float> load_model(const Checkpoint& ck, const EncodedCorpus& corpus) {
  const auto fp = ck.metadata.find("vocab_sha256");
  if (fp != ck.metadata.end() && fp->second != vocab_fingerprint(corpus)) {
    throw InputError("vocab_mismatch", "corpus word vocabulary differs from the checkpoint's");
  }
  return SubwordLM<float>(ck.config, ck.params);
}

int run_eval_lm(const Context& ctx) {
  const std::string s = "eval";
  const auto ck_path = ctx.config.get_string(s, "checkpoint");
  const auto corpus_path = ctx.config.get_string(s, "corpus");
  const auto out = ctx.config.get_string(s, "out");
  auto m = new_manifest(ctx, "eval-lm");
  m.inputs.push_back(verify_input("checkpoint", ck_path));
  m.inputs.push_back(verify_input("corpus", corpus_path));
  const auto ck = read_checkpoint(ck_path);
  const auto corpus = read_encoded(corpus_path);
  const auto model = load_model(ck, corpus);
  const auto result = evaluate(model, corpus, static_cast<int>(ctx.config.get_int(s, "window", 35)));
  if (!std::isfinite(result.ppl)) throw NumericError("non_finite", "perplexity is not finite");
  ensure_parent(out);
  {
    std::ofstream f(out);
    if (!f) throw InputError("output_unwritable", "cannot write '" + out + "'");
    f << eval_json(result, param_count(ck.config));
  }
  m.outputs.push_back(record_output("eval", out));
  m.scalars["ppl"] = fmt(result.ppl);
  finish(m, out);
  std::cout << "eval-lm: ppl " << result.ppl << " over " << result.tokens << " tokens\n";
  return 0;
}

int run_diag_gates(const Context& ctx) {
  const std::string s = "gates";
  const auto ck_path = ctx.config.get_string(s, "checkpoint");
  const auto corpus_path = ctx.config.get_string(s, "corpus");
  const auto out = ctx.config.get_string(s, "out");
  const auto max_samples = ctx.config.get_int(s, "max_samples", 100000);
  if (max_samples < 0) throw ConfigError("bad_value", "gates.max_samples must be non-negative");
  auto m = new_manifest(ctx, "diag-gates");
  m.inputs.push_back(verify_input("checkpoint", ck_path));
  m.inputs.push_back(verify_input("corpus", corpus_path));
  const auto ck = read_checkpoint(ck_path);
  const auto corpus = read_encoded(corpus_path);
  const auto model = load_model(ck, corpus);
  if (ck.config.highway_layers < 1) throw ConfigError("no_highway", "model has no highway layers");
  const auto stats = gate_stats(model, corpus, static_cast<size_t>(max_samples));
  ensure_parent(out);
  write_gates_csv(out, stats);
  m.outputs.push_back(record_output("gates", out));
  for (const auto& layer : stats.summary) {
    m.scalars["gate_mean_layer" + std::to_string(layer.layer)] = fmt(layer.mean);
    m.scalars["gate_samples_layer" + std::to_string(layer.layer)] = std::to_string(layer.samples);
  }
  finish(m, out);
  std::cout << "diag-gates: mean gate " << stats.mean() << "\n";
  return 0;
}

void print_error(int code, const std::string& reason, const std::string& detail) {
  std::string flat = detail;
  for (char& ch : flat) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  std::cerr << "error: code=" << code << " reason=" << reason << " detail=" << flat << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pattern-based subword language modeling pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  struct Stage {
    const char* name;
    const char* help;
    int (*fn)(const Context&);
  };
  const Stage stages[] = {
      {"synth", "generate the desk-scale morphology corpus", run_synth},
      {"mine", "count and reduce frequent substrings", run_mine},
      {"train-crf", "fit the pattern CRF with L1 and select patterns", run_train_crf},
      {"build-automaton", "compile selected patterns into the encoding automaton", run_build_automaton},
      {"encode", "rewrite corpora as word tokens with subword sequences", run_encode},
      {"train-lm", "train the word-level language model", run_train_lm},
      {"eval-lm", "compute perplexity of a checkpoint", run_eval_lm},
      {"diag-gates", "dump highway transform-gate activations", run_diag_gates},
  };
  std::vector<std::pair<CLI::App*, const Stage*>> subs;
  for (const auto& stage : stages) {
    auto* sub = app.add_subcommand(stage.name, stage.help);
    sub->add_option("-c,--config", config_path, "config file")->required();
    sub->add_option("--set", overrides, "override, section.key=value");
    subs.emplace_back(sub, &stage);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error(2, "bad_arguments", e.what());
    return 2;
  }

  try {
    Context ctx;
    ctx.config = Config::load(config_path);
    for (const auto& o : overrides) ctx.config.apply_override(o);
    ctx.config_hash = sha256_hex(ctx.config.canonical());
    ctx.seed = static_cast<std::uint64_t>(ctx.config.get_int("", "seed", 1));
    ctx.threads = static_cast<int>(ctx.config.get_int("", "threads", 1));
    if (ctx.threads < 1) throw ConfigError("bad_value", "threads must be at least 1");
    for (const auto& [sub, stage] : subs) {
      if (sub->parsed()) return stage->fn(ctx);
    }
    return 2;
  } catch (const Error& e) {
    print_error(static_cast<int>(e.kind()), e.reason(), e.what());
    return static_cast<int>(e.kind());
  } catch (const std::invalid_argument& e) {
    print_error(2, "bad_value", e.what());
    return 2;
  } catch (const std::out_of_range& e) {
    print_error(2, "bad_value", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error(4, "internal", e.what());
    return 4;
  }
}
