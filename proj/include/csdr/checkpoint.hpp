// Versioned binary checkpoint container: encoder config + tables, optional
// classifier head, optional neighbor store, pinned to a vocabulary hash.
// Byte layout is explicit little-endian, so files are portable and a fixed
// seed reproduces them byte for byte.
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "csdr/encoder.hpp"
#include "csdr/knn.hpp"

namespace csdr {

struct Checkpoint {
  std::uint32_t version = 1;
  std::uint64_t vocab_hash = 0;
  EncoderConfig config;
  EncoderParams params;
  std::optional<Mat> head;
  std::optional<NeighborStore> store;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// Throws std::runtime_error on bad magic, version mismatch, or truncation;
// no partial state escapes.
Checkpoint load_checkpoint(const std::string& path);

// As above, and additionally verifies the stored vocab hash against vocab.
Checkpoint load_checkpoint(const std::string& path, const Vocab& vocab);

}  // namespace csdr
