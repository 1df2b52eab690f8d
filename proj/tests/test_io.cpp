#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "patlm/checkpoint.hpp"
#include "patlm/config.hpp"
#include "patlm/error.hpp"
#include "patlm/manifest.hpp"
#include "patlm/synth.hpp"
#include "patlm/trainer.hpp"

namespace fs = std::filesystem;

namespace patlm {
namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("patlm_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

void spit(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

template <typename Fn>
std::string reason_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.reason();
  }
  return "";
}

Checkpoint sample_checkpoint() {
  Checkpoint ck;
  ck.config.composition = Composition::kCnn;
  ck.config.subword_vocab = 9;
  ck.config.word_vocab = 11;
  ck.config.d_x = 3;
  ck.config.d_lm = 5;
  ck.config.pad_length = 4;
  ck.config.cnn_widths = {1, 2};
  ck.config.cnn_depths = {2, 3};
  ck.config.d_hw = 5;
  TrainConfig tc;
  std::mt19937_64 rng(3);
  ck.params = init_params(ck.config, tc, rng);
  ck.metadata["units"] = "patterns";
  ck.metadata["best_epoch"] = "4";
  return ck;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  const auto ck = sample_checkpoint();
  write_checkpoint(dir.file("m.ckpt"), ck);
  const auto back = read_checkpoint(dir.file("m.ckpt"));
  EXPECT_EQ(back.config.to_map(), ck.config.to_map());
  EXPECT_EQ(back.metadata, ck.metadata);
  const auto a = ck.params.named();
  const auto b = back.params.named();
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_EQ(*a[i].second, *b[i].second) << a[i].first;
  }
  write_checkpoint(dir.file("again.ckpt"), back);
  EXPECT_EQ(slurp(dir.file("m.ckpt")), slurp(dir.file("again.ckpt")));
}

TEST(Checkpoint, HeaderLayout) {
  TempDir dir;
  write_checkpoint(dir.file("m.ckpt"), sample_checkpoint());
  const auto bytes = slurp(dir.file("m.ckpt"));
  EXPECT_EQ(bytes.substr(0, 8), "PATLMCKP");
  EXPECT_EQ(bytes.substr(8, 8), std::string("\x01\0\0\0\x04\0\0\0", 8));
}

TEST(Checkpoint, CorruptionIsDetected) {
  TempDir dir;
  write_checkpoint(dir.file("m.ckpt"), sample_checkpoint());
  const auto bytes = slurp(dir.file("m.ckpt"));
  spit(dir.file("trunc.ckpt"), bytes.substr(0, bytes.size() - 7));
  EXPECT_EQ(reason_of([&] { read_checkpoint(dir.file("trunc.ckpt")); }), "bad_checkpoint");
  auto magic = bytes;
  magic[0] = 'X';
  spit(dir.file("magic.ckpt"), magic);
  EXPECT_EQ(reason_of([&] { read_checkpoint(dir.file("magic.ckpt")); }), "bad_checkpoint");
  auto version = bytes;
  version[8] = 9;
  spit(dir.file("version.ckpt"), version);
  EXPECT_EQ(reason_of([&] { read_checkpoint(dir.file("version.ckpt")); }), "bad_checkpoint");
  EXPECT_EQ(reason_of([&] { read_checkpoint(dir.file("missing.ckpt")); }), "input_missing");
}

TEST(Checkpoint, NonFiniteTensorRejected) {
  TempDir dir;
  auto ck = sample_checkpoint();
  ck.params.softmax_b(0, 0) = std::numeric_limits<float>::quiet_NaN();
  write_checkpoint(dir.file("nan.ckpt"), ck);
  EXPECT_THROW(read_checkpoint(dir.file("nan.ckpt")), NumericError);
}

TEST(Checkpoint, MultiLineMetadataRejected) {
  TempDir dir;
  auto ck = sample_checkpoint();
  ck.metadata["note"] = "two\nlines";
  EXPECT_THROW(write_checkpoint(dir.file("m.ckpt"), ck), ConfigError);
}

TEST(Config, SectionsGlobalsAndComments) {
  const auto c = Config::parse("seed = 7\n# comment\n[mine]\nf = 300   # inline\nname = x y\n[crf]\nC=1600\n");
  EXPECT_EQ(c.get_int("mine", "f"), 300);
  EXPECT_EQ(c.get_int("mine", "seed"), 7);
  EXPECT_EQ(c.get_int("crf", "seed"), 7);
  EXPECT_DOUBLE_EQ(c.get_double("crf", "C"), 1600.0);
  EXPECT_EQ(c.get_string("mine", "name"), "x y");
  EXPECT_FALSE(c.has("crf", "f"));
  EXPECT_EQ(c.get_int("crf", "f", 5), 5);
}

TEST(Config, Overrides) {
  auto c = Config::parse("[lm]\nd_LM = 300\n");
  c.apply_override("lm.d_LM=650");
  c.apply_override("seed=3");
  EXPECT_EQ(c.get_int("lm", "d_LM"), 650);
  EXPECT_EQ(c.get_int("lm", "seed"), 3);
  EXPECT_EQ(reason_of([&] { c.apply_override("nonsense"); }), "bad_override");
}

TEST(Config, Errors) {
  EXPECT_EQ(reason_of([] { Config::parse("[a]\nk = 1\nk = 2\n"); }), "config_syntax");
  EXPECT_EQ(reason_of([] { Config::parse("[a\n"); }), "config_syntax");
  EXPECT_EQ(reason_of([] { Config::parse("just words\n"); }), "config_syntax");
  const auto c = Config::parse("[a]\nn = 12x\nb = maybe\n");
  EXPECT_EQ(reason_of([&] { c.get_int("a", "n"); }), "bad_value");
  EXPECT_EQ(reason_of([&] { c.get_bool("a", "b", false); }), "bad_value");
  EXPECT_EQ(reason_of([&] { c.get_string("a", "absent"); }), "missing_key");
  EXPECT_EQ(reason_of([] { Config::load("/nonexistent/patlm.ini"); }), "input_missing");
}

TEST(Config, ListsBoolsAndCanonicalForm) {
  const auto c = Config::parse("flag = true\n[lm]\nwidths = 1, 2,3\n");
  EXPECT_EQ(c.get_int_list("lm", "widths"), (std::vector<int>{1, 2, 3}));
  EXPECT_TRUE(c.get_bool("lm", "flag", false));
  EXPECT_EQ(c.canonical(), "flag=true\nlm.widths=1, 2,3\n");
}

TEST(Manifest, FormatParseRoundTrip) {
  Manifest m;
  m.stage = "mine";
  m.config_hash = sha256_hex("x");
  m.seed = 42;
  m.inputs.push_back({"corpus", "data/train.txt", sha256_hex("a"), ""});
  m.outputs.push_back({"patterns", "work/p.txt", sha256_hex("b"), ""});
  m.scalars["f"] = "300";
  m.scalars["Pi_prime"] = "1234";
  const auto text = format_manifest(m);
  EXPECT_EQ(text.substr(0, text.find('\n')), "#patlm-manifest v1");
  const auto back = parse_manifest(text, "mem");
  EXPECT_EQ(back.stage, m.stage);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.scalars, m.scalars);
  ASSERT_EQ(back.inputs.size(), 1u);
  EXPECT_EQ(back.inputs[0].sha256, m.inputs[0].sha256);
  EXPECT_EQ(format_manifest(back), text);
  EXPECT_EQ(reason_of([] { parse_manifest("stage=x\n", "mem"); }), "bad_manifest");
}

TEST(Manifest, KnownDigest) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Manifest, VerifyInputDetectsChangedFile) {
  TempDir dir;
  const auto out = dir.file("p.txt");
  spit(out, "hello\n");
  Manifest m;
  m.stage = "mine";
  m.outputs.push_back(record_output("patterns", out));
  write_manifest(manifest_path(out), m);
  const auto rec = verify_input("patterns", out);
  EXPECT_EQ(rec.sha256, sha256_hex("hello\n"));
  EXPECT_FALSE(rec.manifest_sha256.empty());
  spit(out, "tampered\n");
  EXPECT_EQ(reason_of([&] { verify_input("patterns", out); }), "provenance_mismatch");
  EXPECT_EQ(reason_of([&] { verify_input("patterns", dir.file("none.txt")); }), "input_missing");
  // A file without a manifest is accepted as an external input.
  spit(dir.file("raw.txt"), "raw");
  EXPECT_TRUE(verify_input("corpus", dir.file("raw.txt")).manifest_sha256.empty());
}

TEST(Synth, DeterministicAndSized) {
  SynthConfig sc;
  sc.tokens = 5000;
  const auto a = generate_synth(sc);
  const auto b = generate_synth(sc);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.valid, b.valid);
  sc.seed = 2;
  EXPECT_NE(generate_synth(sc).train, a.train);
  std::int64_t words = 0;
  for (const auto* split : {&a.train, &a.valid, &a.test}) {
    for (const auto& line : *split) {
      ++words;
      for (char ch : line) words += ch == ' ';
    }
  }
  EXPECT_NEAR(static_cast<double>(words), 5000.0, 100.0);
}

TEST(Synth, InvalidConfig) {
  SynthConfig sc;
  sc.roots = 0;
  EXPECT_THROW(generate_synth(sc), ConfigError);
  sc = {};
  sc.agreement = 1.5;
  EXPECT_THROW(generate_synth(sc), ConfigError);
}

TEST(Synth, WritesThreeSplits) {
  TempDir dir;
  SynthConfig sc;
  sc.tokens = 2000;
  write_synth(dir.file("d"), generate_synth(sc));
  for (const char* f : {"train.txt", "valid.txt", "test.txt"}) {
    EXPECT_FALSE(slurp(dir.file(std::string("d/") + f)).empty()) << f;
  }
}

}  // namespace
}  // namespace patlm
