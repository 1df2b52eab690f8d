#include "patlm/manifest.hpp"

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "patlm/error.hpp"

namespace patlm {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("SHA-256 initialisation failed");
    }
  }
  void update(const void* data, size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw std::runtime_error("SHA-256 update failed");
  }
  std::string hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), digest, &len) != 1) throw std::runtime_error("SHA-256 final failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += kHex[digest[i] >> 4];
      out += kHex[digest[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

std::string record_line(const FileRecord& r) {
  std::string line = r.path + "\t" + r.sha256;
  if (!r.manifest_sha256.empty()) line += "\t" + r.manifest_sha256;
  return line;
}

FileRecord parse_record(const std::string& role, const std::string& value, const std::string& source) {
  FileRecord r;
  r.role = role;
  std::stringstream ss(value);
  if (!std::getline(ss, r.path, '\t') || !std::getline(ss, r.sha256, '\t')) {
    throw InputError("bad_manifest", source + ": bad file record for '" + role + "'");
  }
  std::getline(ss, r.manifest_sha256, '\t');
  return r;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.hex();
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("input_missing", "cannot read '" + path + "'");
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) h.update(buf.data(), static_cast<size_t>(in.gcount()));
  }
  return h.hex();
}

std::string manifest_path(const std::string& output_path) { return output_path + ".manifest"; }

std::string format_manifest(const Manifest& m) {
  std::ostringstream out;
  out << "#patlm-manifest v1\n";
  out << "stage=" << m.stage << '\n';
  out << "config_hash=" << m.config_hash << '\n';
  out << "seed=" << m.seed << '\n';
  for (const auto& r : m.inputs) out << "input." << r.role << '=' << record_line(r) << '\n';
  for (const auto& r : m.outputs) out << "output." << r.role << '=' << record_line(r) << '\n';
  for (const auto& [k, v] : m.scalars) out << "scalar." << k << '=' << v << '\n';
  return out.str();
}

Manifest parse_manifest(std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "#patlm-manifest v1") {
    throw InputError("bad_manifest", source + ": missing header");
  }
  Manifest m;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError("bad_manifest", source + ": bad line");
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    if (key == "stage") {
      m.stage = value;
    } else if (key == "config_hash") {
      m.config_hash = value;
    } else if (key == "seed") {
      m.seed = std::stoull(value);
    } else if (key.rfind("input.", 0) == 0) {
      m.inputs.push_back(parse_record(key.substr(6), value, source));
    } else if (key.rfind("output.", 0) == 0) {
      m.outputs.push_back(parse_record(key.substr(7), value, source));
    } else if (key.rfind("scalar.", 0) == 0) {
      m.scalars[key.substr(7)] = value;
    } else {
      throw InputError("bad_manifest", source + ": unknown key '" + key + "'");
    }
  }
  return m;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("output_unwritable", "cannot write '" + path + "'");
  out << format_manifest(manifest);
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("input_missing", "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path);
}

FileRecord verify_input(const std::string& role, const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw InputError("input_missing", "'" + path + "' does not exist");
  FileRecord r;
  r.role = role;
  r.path = path;
  r.sha256 = sha256_file(path);
  const auto mpath = manifest_path(path);
  if (std::filesystem::is_regular_file(mpath)) {
    const auto m = read_manifest(mpath);
    bool found = false;
    for (const auto& out : m.outputs) {
      if (std::filesystem::path(out.path).filename() != std::filesystem::path(path).filename()) continue;
      found = true;
      if (out.sha256 != r.sha256) {
        throw InputError("provenance_mismatch", "'" + path + "' changed since its manifest was written");
      }
    }
    if (!found) throw InputError("provenance_mismatch", "'" + mpath + "' does not describe '" + path + "'");
    r.manifest_sha256 = sha256_file(mpath);
  }
  return r;
}

FileRecord record_output(const std::string& role, const std::string& path) {
  FileRecord r;
  r.role = role;
  r.path = path;
  r.sha256 = sha256_file(path);
  return r;
}

}  // namespace patlm
