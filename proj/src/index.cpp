#include "csdr/index.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace csdr {

Index build_index(std::span<const std::string> texts, const EncoderParams& params,
                  const EncoderConfig& config, const Vocab& vocab) {
  if (texts.empty()) throw std::invalid_argument("build_index: no texts");

  std::vector<Vec> rows;
  Index index;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (tokenize(texts[i]).empty()) {
      std::cerr << "warning: doc " << i << " has no tokens, skipping\n";
      index.skipped.push_back(i);
      continue;
    }
    const auto ids = encode_ids(texts[i], vocab, config.max_len);
    Vec e = forward(ids, params, config).embedding;
    const double n = norm2(e);
    if (n == 0.0) {
      throw std::runtime_error("build_index: zero-norm embedding for doc " +
                               std::to_string(i));
    }
    for (double& x : e) x /= n;
    rows.push_back(std::move(e));
    index.doc_ids.push_back(i);
    index.texts.push_back(texts[i]);
  }
  if (rows.empty()) throw std::invalid_argument("build_index: every text was empty");

  index.embeddings = Mat(rows.size(), config.embed_dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), index.embeddings.row(i));
  }
  return index;
}

std::vector<Hit> top_k_unit(const Mat& unit_rows,
                            std::span<const std::uint64_t> doc_ids,
                            std::span<const double> unit_query, std::size_t k) {
  if (unit_rows.rows == 0) throw std::invalid_argument("top_k_unit: empty index");
  if (doc_ids.size() != unit_rows.rows) {
    throw std::invalid_argument("top_k_unit: doc id count mismatch");
  }
  if (k < 1) throw std::invalid_argument("top_k_unit: k must be >= 1");

  const std::size_t n = unit_rows.rows;
  Vec scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = std::clamp(dot(unit_rows.row_span(i), unit_query), -1.0, 1.0);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + take, order.end(),
                    [&scores](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });

  std::vector<Hit> hits;
  hits.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    hits.push_back({doc_ids[order[r]], scores[order[r]]});
  }
  return hits;
}

std::vector<Hit> query_index(const std::string& text, const Index& index,
                             const EncoderParams& params,
                             const EncoderConfig& config, const Vocab& vocab,
                             std::size_t k) {
  if (tokenize(text).empty()) {
    throw std::invalid_argument("query_index: query has no tokens");
  }
  const auto ids = encode_ids(text, vocab, config.max_len);
  Vec q = forward(ids, params, config).embedding;
  const double n = norm2(q);
  if (n == 0.0) throw std::runtime_error("query_index: zero-norm query embedding");
  for (double& x : q) x /= n;
  return top_k_unit(index.embeddings, index.doc_ids, q, k);
}

namespace {
constexpr char kMagic[8] = {'C', 'S', 'D', 'R', 'I', 'N', 'D', 'X'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}
void put_u64(std::ofstream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

std::uint32_t get_u32(std::istream& in) {
  char b[4];
  if (!in.read(b, 4)) throw std::runtime_error("index: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}
std::uint64_t get_u64(std::istream& in) {
  char b[8];
  if (!in.read(b, 8)) throw std::runtime_error("index: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}
}  // namespace

void save_index(const Index& index, std::uint64_t vocab_hash,
                const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("index: cannot write " + path);
  out.write(kMagic, 8);
  put_u32(out, kVersion);
  put_u64(out, vocab_hash);
  put_u64(out, index.embeddings.rows);
  put_u64(out, index.embeddings.cols);
  for (double v : index.embeddings.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
  for (std::uint64_t id : index.doc_ids) put_u64(out, id);
  for (const auto& t : index.texts) {
    put_u32(out, static_cast<std::uint32_t>(t.size()));
    out.write(t.data(), static_cast<std::streamsize>(t.size()));
  }
  put_u64(out, index.skipped.size());
  for (std::uint64_t s : index.skipped) put_u64(out, s);
  if (!out) throw std::runtime_error("index: write failed for " + path);
}

Index load_index(const std::string& path, std::uint64_t expected_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("index: cannot open " + path);
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMagic)) {
    throw std::runtime_error("index: bad magic in " + path);
  }
  const std::uint32_t version = get_u32(in);
  if (version != kVersion) {
    throw std::runtime_error("index: unsupported version in " + path);
  }
  const std::uint64_t hash = get_u64(in);
  if (hash != expected_vocab_hash) {
    std::ostringstream msg;
    msg << "index: vocab hash mismatch in " << path << " (file has 0x" << std::hex
        << hash << ", expected 0x" << expected_vocab_hash << ")";
    throw std::runtime_error(msg.str());
  }

  Index index;
  const std::uint64_t rows = get_u64(in);
  const std::uint64_t cols = get_u64(in);
  index.embeddings = Mat(rows, cols);
  for (double& v : index.embeddings.data) v = std::bit_cast<double>(get_u64(in));
  index.doc_ids.resize(rows);
  for (auto& id : index.doc_ids) id = get_u64(in);
  index.texts.resize(rows);
  for (auto& t : index.texts) {
    const std::uint32_t len = get_u32(in);
    t.resize(len);
    if (!in.read(t.data(), len)) throw std::runtime_error("index: truncated file");
  }
  const std::uint64_t n_skipped = get_u64(in);
  index.skipped.resize(n_skipped);
  for (auto& s : index.skipped) s = get_u64(in);
  return index;
}

}  // namespace csdr
