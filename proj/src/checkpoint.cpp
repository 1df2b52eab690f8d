#include "patlm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "patlm/error.hpp"

namespace patlm {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'A', 'T', 'L', 'M', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  void bytes(char* dst, size_t n) {
    if (!in_.read(dst, static_cast<std::streamsize>(n))) {
      throw InputError("bad_checkpoint", path_ + ": truncated file");
    }
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    bytes(reinterpret_cast<char*>(&v), 4);
    return v;
  }
  std::string string(size_t limit) {
    const auto n = u32();
    if (n > limit) throw InputError("bad_checkpoint", path_ + ": oversized string");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ostringstream header;
  for (const auto& [k, v] : checkpoint.config.to_map()) header << k << '=' << v << '\n';
  for (const auto& [k, v] : checkpoint.metadata) {
    if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos ||
        v.find('\n') != std::string::npos) {
      throw ConfigError("bad_metadata", "checkpoint metadata must be single-line key=value");
    }
    header << "meta." << k << '=' << v << '\n';
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("output_unwritable", "cannot write '" + path + "'");
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u32(out, sizeof(float));
  put_string(out, header.str());
  const auto tensors = checkpoint.params.named();
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put_string(out, name);
    put_u32(out, static_cast<std::uint32_t>(m->rows()));
    put_u32(out, static_cast<std::uint32_t>(m->cols()));
    out.write(reinterpret_cast<const char*>(m->data()), static_cast<std::streamsize>(m->size() * sizeof(float)));
  }
  if (!out) throw InputError("output_unwritable", "write failed for '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("input_missing", "cannot read '" + path + "'");
  Reader r(in, path);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw InputError("bad_checkpoint", path + ": bad magic");
  if (const auto v = r.u32(); v != kVersion) {
    throw InputError("bad_checkpoint", path + ": unsupported version " + std::to_string(v));
  }
  if (r.u32() != sizeof(float)) throw InputError("bad_checkpoint", path + ": unsupported scalar width");

  Checkpoint ck;
  std::map<std::string, std::string> config_kv;
  std::istringstream header(r.string(1u << 24));
  std::string line;
  while (std::getline(header, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError("bad_checkpoint", path + ": bad header line");
    auto key = line.substr(0, eq);
    auto value = line.substr(eq + 1);
    if (key.rfind("meta.", 0) == 0) {
      ck.metadata[key.substr(5)] = std::move(value);
    } else {
      config_kv[std::move(key)] = std::move(value);
    }
  }
  try {
    ck.config = LMConfig::from_map(config_kv);
  } catch (const ConfigError& e) {
    throw InputError("bad_checkpoint", path + ": " + e.what());
  }

  ck.params = LMParams<float>::zeros(ck.config);
  auto expected = ck.params.named();
  if (r.u32() != expected.size()) throw InputError("bad_checkpoint", path + ": tensor count mismatch");
  for (auto& [name, m] : expected) {
    const auto got = r.string(4096);
    const auto rows = r.u32();
    const auto cols = r.u32();
    if (got != name || rows != m->rows() || cols != m->cols()) {
      throw InputError("bad_checkpoint", path + ": unexpected tensor '" + got + "'");
    }
    r.bytes(reinterpret_cast<char*>(m->data()), static_cast<size_t>(m->size()) * sizeof(float));
    if (!m->allFinite()) throw NumericError("non_finite", path + ": tensor '" + name + "' is not finite");
  }
  return ck;
}

}  // namespace patlm
