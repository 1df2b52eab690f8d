#pragma once

#include <map>
#include <string>

#include "patlm/neural_lm.hpp"

namespace patlm {

// Trained model plus free-form metadata (vocabulary provenance, epoch, ...).
struct Checkpoint {
  LMConfig config;
  LMParams<float> params;
  std::map<std::string, std::string> metadata;
};

// Binary layout, all integers little-endian:
//   magic    8 bytes  "PATLMCKP"
//   version  u32      1
//   scalar   u32      bytes per stored value (4 = IEEE float32)
//   header   u32 length, then UTF-8 text of "key=value\n" lines; LMConfig keys
//            are plain, metadata keys carry a "meta." prefix
//   tensors  u32 count, then per tensor: u32 name length, name bytes,
//            u32 rows, u32 cols, rows*cols float32 values in column-major order
void write_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace patlm
