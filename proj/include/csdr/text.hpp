// Tokenization, vocabulary construction, dataset ingestion and splitting.
//
// Tokenizer contract: NFKC-normalize and lowercase, emit each CJK codepoint
// as its own token, fold maximal runs of ASCII letters/digits into single
// tokens, and drop everything else as separators.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "csdr/rng.hpp"

namespace csdr {

// Reserved vocabulary slots. Raw text can never tokenize to these.
constexpr std::int32_t kPadId = 0;
constexpr std::int32_t kUnkId = 1;
constexpr std::int32_t kClsId = 2;

std::vector<std::string> tokenize(const std::string& text);

class Vocab {
 public:
  // Tokens must be unique and free of reserved names; ids are assigned
  // contiguously after the reserved slots, in the order given.
  explicit Vocab(std::vector<std::string> tokens);

  static Vocab from_file(const std::string& path);
  void save(const std::string& path) const;

  std::size_t size() const { return id_to_token_.size(); }
  std::int32_t id_of(const std::string& token) const;  // kUnkId if absent
  const std::string& token_of(std::int32_t id) const;

  // FNV-1a 64 over all token lines; pins checkpoints to their vocabulary.
  std::uint64_t hash() const;

  // ids -> space-joined tokens, reserved ids skipped.
  std::string decode(const std::vector<std::int32_t>& ids) const;

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::int32_t> token_to_id_;
};

struct PairExample {
  std::string text_a;
  std::string text_b;
  int label = 0;  // 1 similar, 0 dissimilar

  bool operator==(const PairExample&) const = default;
};

// Tokens with frequency >= min_freq, ordered by (frequency desc,
// first occurrence asc). Deterministic for a fixed corpus.
Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t min_freq = 1);

// [CLS] + token ids (UNK for out-of-vocabulary), truncated to max_len.
// No padding; output length varies.
std::vector<std::int32_t> encode_ids(const std::string& text, const Vocab& vocab,
                                     std::size_t max_len = 64);

// Deterministic shuffle by seed, then the first ceil(ratio*n) go to train.
std::pair<std::vector<PairExample>, std::vector<PairExample>> split_pairs(
    const std::vector<PairExample>& examples, double ratio, std::uint64_t seed);

// TSV `text_a<TAB>text_b<TAB>label` or JSONL {"text_a","text_b","label"},
// decided per line. Malformed lines are rejected with their line number.
std::vector<PairExample> load_pairs(const std::string& path);

// One sentence per line; blank lines skipped.
std::vector<std::string> load_sentences(const std::string& path);

}  // namespace csdr
