#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "patlm/automaton.hpp"
#include "patlm/checkpoint.hpp"
#include "patlm/corpus.hpp"
#include "patlm/crf.hpp"
#include "patlm/encoded.hpp"
#include "patlm/error.hpp"
#include "patlm/evaluator.hpp"
#include "patlm/mining.hpp"
#include "patlm/owlqn.hpp"
#include "patlm/synth.hpp"
#include "patlm/utf8.hpp"

namespace py = pybind11;
using namespace patlm;

namespace {

// Alphabet holding exactly the characters of `symbols`, in order.
Alphabet alphabet_of(const std::string& symbols) {
  Alphabet a;
  for (char32_t cp : utf8::decode(symbols)) a.intern(cp);
  a.freeze();
  return a;
}

Pattern pattern_of(const std::string& text, const Alphabet& alphabet) {
  Pattern p;
  for (char32_t cp : utf8::decode(text)) {
    const auto id = alphabet.find(cp);
    if (!id) throw InputError("unknown_symbol", "'" + text + "' uses a character outside the alphabet");
    p.push_back(*id);
  }
  return p;
}

std::vector<Pattern> patterns_of(const std::vector<std::string>& texts, const Alphabet& alphabet) {
  std::vector<Pattern> out;
  for (const auto& t : texts) out.push_back(pattern_of(t, alphabet));
  return out;
}

std::string symbols_of(const Alphabet& alphabet) {
  std::string out;
  for (SymbolId id = 0; id < alphabet.size(); ++id) out += alphabet.render(id);
  return out;
}

std::vector<std::pair<std::string, std::int64_t>> mine(const std::string& text, std::int64_t f, int max_length,
                                                      const std::string& profile) {
  Alphabet alphabet;
  const auto corpus = load_corpus_from_string(text, parse_profile(profile), alphabet);
  std::vector<std::pair<std::string, std::int64_t>> out;
  for (const auto& c : mine_patterns(corpus, f, max_length).patterns) {
    out.emplace_back(alphabet.render(c.symbols), c.count);
  }
  return out;
}

std::vector<std::pair<std::string, double>> fit_crf(const std::string& text, const std::vector<std::string>& patterns,
                                                    double c, int max_iter, const std::string& profile) {
  Alphabet alphabet;
  const auto corpus = load_corpus_from_string(text, parse_profile(profile), alphabet);
  alphabet.freeze();
  OwlqnConfig oc;
  oc.max_iter = max_iter;
  const auto result = train_crf(corpus, patterns_of(patterns, alphabet), alphabet.size(), c, oc, 1);
  std::vector<std::pair<std::string, double>> out;
  for (size_t k = 0; k < result.table.patterns.size(); ++k) {
    out.emplace_back(alphabet.render(result.table.patterns[k]), result.table.weights[k]);
  }
  return out;
}

PatternCrf crf_over(const std::vector<std::string>& patterns, const std::vector<double>& weights,
                    const Alphabet& alphabet) {
  if (patterns.size() != weights.size()) throw ConfigError("bad_value", "patterns and weights differ in length");
  PatternCrf crf(patterns_of(patterns, alphabet), alphabet.size());
  crf.set_weights(weights);
  return crf;
}

class PyAutomaton {
 public:
  PyAutomaton(const std::vector<std::string>& patterns, const std::string& alphabet)
      : alphabet_(alphabet_of(alphabet)), automaton_(patterns_of(patterns, alphabet_), alphabet_.size()) {}

  std::vector<std::string> encode(const std::string& sentence) const {
    const auto ids = pattern_of(sentence, alphabet_);
    std::vector<std::string> out;
    for (StateId s : automaton_.encode_sentence(ids)) out.push_back(alphabet_.render(automaton_.state_string(s)));
    return out;
  }

  int num_states() const { return automaton_.num_states(); }
  int num_patterns() const { return automaton_.num_patterns(); }
  std::string alphabet() const { return symbols_of(alphabet_); }

 private:
  Alphabet alphabet_;
  PatternAutomaton automaton_;
};

py::dict owlqn(const std::function<std::pair<double, std::vector<double>>(const std::vector<double>&)>& fun,
               std::vector<double> x0, double l1, int max_iter, double grad_tol) {
  OwlqnConfig cfg;
  cfg.l1 = l1;
  cfg.max_iter = max_iter;
  cfg.grad_tol = grad_tol;
  const SmoothObjective smooth = [&](std::span<const double> x, std::span<double> g) {
    auto [value, grad] = fun(std::vector<double>(x.begin(), x.end()));
    if (grad.size() != g.size()) throw ConfigError("bad_value", "gradient has the wrong length");
    std::copy(grad.begin(), grad.end(), g.begin());
    return value;
  };
  const auto r = minimize_owlqn(smooth, std::move(x0), cfg);
  py::dict out;
  out["x"] = r.x;
  out["objective"] = r.objective;
  out["iterations"] = r.iterations;
  out["converged"] = r.converged;
  return out;
}

SubwordLM<float> model_for(const Checkpoint& ck) { return SubwordLM<float>(ck.config, ck.params); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pattern-based subword language modeling: mining, CRF selection, encoding and evaluation";

  static py::exception<Error> base(m, "PatlmError");
  static py::exception<ConfigError> config_error(m, "ConfigError", base.ptr());
  static py::exception<InputError> input_error(m, "InputError", base.ptr());
  static py::exception<NumericError> numeric_error(m, "NumericError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const InputError& e) {
      py::set_error(input_error, e.what());
    } catch (const NumericError& e) {
      py::set_error(numeric_error, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.def("wikitext_normalize", &wikitext_normalize, py::arg("line"));

  m.def(
      "synth",
      [](std::int64_t tokens, std::uint64_t seed, int roots) {
        SynthConfig sc;
        sc.tokens = tokens;
        sc.seed = seed;
        sc.roots = roots;
        const auto c = generate_synth(sc);
        py::dict out;
        out["train"] = c.train;
        out["valid"] = c.valid;
        out["test"] = c.test;
        return out;
      },
      py::arg("tokens") = 50000, py::arg("seed") = 1, py::arg("roots") = 30,
      "Generates the synthetic morphology corpus; returns sentences per split.");

  m.def("mine", &mine, py::arg("text"), py::arg("f"), py::arg("max_length") = kDefaultMaxPatternLength,
        py::arg("profile") = "raw", "Frequent substrings (count > f) after containment reduction, with counts.");

  m.def("train_crf", &fit_crf, py::arg("text"), py::arg("patterns"), py::arg("C"), py::arg("max_iter") = 500,
        py::arg("profile") = "raw", "Fits the L1-regularized pattern CRF; returns (pattern, weight) pairs.");

  m.def(
      "crf_log_partition",
      [](const std::vector<std::string>& patterns, const std::vector<double>& weights, const std::string& alphabet,
         int length) { return crf_over(patterns, weights, alphabet_of(alphabet)).log_partition(length); },
      py::arg("patterns"), py::arg("weights"), py::arg("alphabet"), py::arg("length"));

  m.def(
      "crf_expected_counts",
      [](const std::vector<std::string>& patterns, const std::vector<double>& weights, const std::string& alphabet,
         int length) { return crf_over(patterns, weights, alphabet_of(alphabet)).expected_counts(length); },
      py::arg("patterns"), py::arg("weights"), py::arg("alphabet"), py::arg("length"));

  py::class_<PyAutomaton>(m, "Automaton")
      .def(py::init<const std::vector<std::string>&, const std::string&>(), py::arg("patterns"),
           py::arg("alphabet"))
      .def("encode", &PyAutomaton::encode, py::arg("sentence"),
           "State string reached after each character of the sentence.")
      .def_property_readonly("num_states", &PyAutomaton::num_states)
      .def_property_readonly("num_patterns", &PyAutomaton::num_patterns)
      .def_property_readonly("alphabet", &PyAutomaton::alphabet);

  m.def("minimize_owlqn", &owlqn, py::arg("fun"), py::arg("x0"), py::arg("l1") = 0.0, py::arg("max_iter") = 500,
        py::arg("grad_tol") = 1e-5,
        "Minimizes fun(x) + l1 * |x|_1; fun returns (value, gradient) of the smooth part.");

  m.def(
      "evaluate",
      [](const std::string& checkpoint, const std::string& encoded, int window) {
        const auto ck = read_checkpoint(checkpoint);
        const auto r = evaluate(model_for(ck), read_encoded(encoded), window);
        py::dict out;
        out["ppl"] = r.ppl;
        out["nll"] = r.nll;
        out["tokens"] = r.tokens;
        return out;
      },
      py::arg("checkpoint"), py::arg("encoded"), py::arg("window") = 35);

  m.def(
      "gate_means",
      [](const std::string& checkpoint, const std::string& encoded, std::size_t max_samples) {
        const auto ck = read_checkpoint(checkpoint);
        std::vector<double> means;
        for (const auto& layer : gate_stats(model_for(ck), read_encoded(encoded), max_samples).summary) {
          means.push_back(layer.mean);
        }
        return means;
      },
      py::arg("checkpoint"), py::arg("encoded"), py::arg("max_samples") = 100000,
      "Mean highway transform gate per layer.");

  m.def(
      "param_count",
      [](const std::string& checkpoint) {
        const auto b = param_count(read_checkpoint(checkpoint).config);
        py::dict out;
        for (const auto& [name, n] : b.modules) out[py::str(name)] = n;
        out["total"] = b.total;
        return out;
      },
      py::arg("checkpoint"));
}
