// KNN-fusion scoring: blend a linear classifier's softmax with a
// similarity-weighted k-nearest-neighbor vote over a labeled embedding store.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "csdr/encoder.hpp"
#include "csdr/numeric.hpp"
#include "csdr/text.hpp"

namespace csdr {

struct NeighborStore {
  Mat embeddings;           // m x d, raw (not normalized)
  std::vector<int> labels;  // one of {0,1} per row
  std::string provenance;

  bool operator==(const NeighborStore&) const = default;
};

struct FusionConfig {
  double w = 0.3;     // vote weight in [0, 1]
  std::size_t k = 5;  // neighbor count, >= 1

  void validate() const;
};

// Probability vector over {0,1} from the k highest-cosine neighbors.
// Vote weight per neighbor = max(cos, 0); cosine ties break toward the lower
// store index; an all-zero vote falls back to uniform [0.5, 0.5].
Vec knn_vote(std::span<const double> query, const NeighborStore& store,
             std::size_t k);

// S = (1-w) * softmax(classifier_logits) + w * knn_vote(query).
// Bit-exact equal to the softmax at w=0 and to the vote at w=1.
Vec fuse(const Vec& classifier_logits, std::span<const double> query,
         const NeighborStore& store, const FusionConfig& config);

// One row per training pair: the element-wise mean of the two sentence
// embeddings (encoded separately, no dropout), labeled with the pair label.
NeighborStore build_store(const EncoderParams& params, const EncoderConfig& config,
                          const Vocab& vocab, std::span<const PairExample> pairs);

}  // namespace csdr
