// Seeded synthetic data for end-to-end runs: K disjoint topic vocabularies,
// sentences of 5-12 tokens drawn from one topic, positive pairs within a
// topic and negative pairs across topics, balanced labels.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "csdr/text.hpp"

namespace csdr {

struct SyntheticSpec {
  std::size_t topics = 4;
  std::size_t vocab_size = 200;  // at least 10 tokens per topic
  std::size_t pairs = 2000;
  std::uint64_t seed = 42;
  std::size_t min_tokens = 5;
  std::size_t max_tokens = 12;

  void validate() const;
};

struct SyntheticData {
  std::vector<std::string> corpus;  // both sentences of every pair, in order
  std::vector<PairExample> pairs;
  std::vector<std::pair<int, int>> pair_topics;  // (topic_a, topic_b) per pair
};

SyntheticData gen_synthetic(const SyntheticSpec& spec);

// Writes corpus.txt, pairs.tsv and manifest.json under dir (created if
// missing). Byte-identical for identical spec.
void write_synthetic(const SyntheticData& data, const SyntheticSpec& spec,
                     const std::string& dir);

}  // namespace csdr
