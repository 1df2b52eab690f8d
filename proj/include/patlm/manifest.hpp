#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace patlm {

std::string sha256_hex(std::string_view data);
// Throws InputError("input_missing") when the file cannot be read.
std::string sha256_file(const std::string& path);

struct FileRecord {
  std::string role;  // e.g. "corpus", "patterns"
  std::string path;
  std::string sha256;
  std::string manifest_sha256;  // checksum of the input's own manifest, if it has one
};

// Provenance record written next to each stage output as "<output>.manifest".
struct Manifest {
  std::string stage;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<FileRecord> inputs;
  std::vector<FileRecord> outputs;
  std::map<std::string, std::string> scalars;  // A, Pi_prime, Pi_0, S, n, C, f, ...
};

std::string manifest_path(const std::string& output_path);

// Text form: "#patlm-manifest v1", then one "key=value" line per field.
std::string format_manifest(const Manifest& manifest);
Manifest parse_manifest(std::string_view text, const std::string& source);
void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

// Checks that `path` exists and, when a manifest sits next to it, that the
// manifest's output record matches the file's checksum. Returns the record
// describing the input. Throws InputError("input_missing") or
// InputError("provenance_mismatch").
FileRecord verify_input(const std::string& role, const std::string& path);

// Record for a freshly written output.
FileRecord record_output(const std::string& role, const std::string& path);

}  // namespace patlm
