// Exact top-k cosine retrieval over pre-normalized corpus embeddings.
// Query cost is one matrix-vector product plus top-k selection; no
// approximation anywhere.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csdr/encoder.hpp"
#include "csdr/numeric.hpp"
#include "csdr/text.hpp"

namespace csdr {

struct Index {
  Mat embeddings;                     // rows unit-norm
  std::vector<std::uint64_t> doc_ids; // row i <-> doc_ids[i] <-> texts[i]
  std::vector<std::string> texts;
  std::vector<std::uint64_t> skipped; // input positions with no tokens
};

struct Hit {
  std::uint64_t doc_id = 0;
  double score = 0.0;
};

// Encode every text (no dropout), L2-normalize, store in input order.
// Texts that tokenize to nothing are skipped with a warning and recorded.
Index build_index(std::span<const std::string> texts, const EncoderParams& params,
                  const EncoderConfig& config, const Vocab& vocab);

// Core selection: exact top-min(k, n) by dot product over unit rows,
// descending; cosine ties break toward the lower row index.
std::vector<Hit> top_k_unit(const Mat& unit_rows,
                            std::span<const std::uint64_t> doc_ids,
                            std::span<const double> unit_query, std::size_t k);

std::vector<Hit> query_index(const std::string& text, const Index& index,
                             const EncoderParams& params,
                             const EncoderConfig& config, const Vocab& vocab,
                             std::size_t k);

void save_index(const Index& index, std::uint64_t vocab_hash,
                const std::string& path);
Index load_index(const std::string& path, std::uint64_t expected_vocab_hash);

}  // namespace csdr
