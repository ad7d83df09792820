#include "csdr/knn.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace csdr {

void FusionConfig::validate() const {
  if (!(w >= 0.0 && w <= 1.0)) {
    throw std::invalid_argument("FusionConfig: w must be in [0, 1]");
  }
  if (k < 1) throw std::invalid_argument("FusionConfig: k must be >= 1");
}

Vec knn_vote(std::span<const double> query, const NeighborStore& store,
             std::size_t k) {
  if (store.embeddings.rows == 0) {
    throw std::invalid_argument("knn_vote: empty store");
  }
  if (store.labels.size() != store.embeddings.rows) {
    throw std::invalid_argument("knn_vote: label count mismatch");
  }
  if (k < 1) throw std::invalid_argument("knn_vote: k must be >= 1");

  const std::size_t m = store.embeddings.rows;
  Vec sims(m);
  for (std::size_t i = 0; i < m; ++i) {
    sims[i] = cosine_similarity(query, store.embeddings.row_span(i));
  }

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t effective_k = std::min(k, m);
  std::partial_sort(order.begin(), order.begin() + effective_k, order.end(),
                    [&sims](std::size_t a, std::size_t b) {
                      if (sims[a] != sims[b]) return sims[a] > sims[b];
                      return a < b;
                    });

  double weight[2] = {0.0, 0.0};
  for (std::size_t r = 0; r < effective_k; ++r) {
    const std::size_t i = order[r];
    weight[store.labels[i] == 1 ? 1 : 0] += std::max(sims[i], 0.0);
  }
  const double total = weight[0] + weight[1];
  if (total == 0.0) return {0.5, 0.5};
  return {weight[0] / total, weight[1] / total};
}

Vec fuse(const Vec& classifier_logits, std::span<const double> query,
         const NeighborStore& store, const FusionConfig& config) {
  config.validate();
  if (classifier_logits.size() != 2) {
    throw std::invalid_argument("fuse: expected 2 classifier logits");
  }
  const Vec probs = stable_softmax(classifier_logits);
  const Vec vote = knn_vote(query, store, config.k);
  return {(1.0 - config.w) * probs[0] + config.w * vote[0],
          (1.0 - config.w) * probs[1] + config.w * vote[1]};
}

NeighborStore build_store(const EncoderParams& params, const EncoderConfig& config,
                          const Vocab& vocab, std::span<const PairExample> pairs) {
  if (pairs.empty()) throw std::invalid_argument("build_store: no training pairs");

  NeighborStore store;
  store.embeddings = Mat(pairs.size(), config.embed_dim);
  store.labels.reserve(pairs.size());
  store.provenance = "train-pairs/mean";

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto ids_a = encode_ids(pairs[i].text_a, vocab, config.max_len);
    const auto ids_b = encode_ids(pairs[i].text_b, vocab, config.max_len);
    const Vec ea = forward(ids_a, params, config).embedding;
    const Vec eb = forward(ids_b, params, config).embedding;
    double* row = store.embeddings.row(i);
    for (std::size_t c = 0; c < config.embed_dim; ++c) {
      row[c] = 0.5 * (ea[c] + eb[c]);
    }
    store.labels.push_back(pairs[i].label);
  }
  return store;
}

}  // namespace csdr
