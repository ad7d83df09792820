// Training objectives, each returning the loss value together with exact
// gradients w.r.t. the input embeddings (and head weights where applicable).
//
//  - infonce_loss:     in-batch contrastive loss over two dropout views
//  - cosent_loss:      ranking loss over the positive x negative cross-product
//  - cosine_pair_loss: per-pair cosine objective (the baseline CoSENT replaces)
//  - sbert_head_loss:  softmax classifier on concat(u, v, |u-v|)
#pragma once

#include <span>

#include "csdr/numeric.hpp"

namespace csdr {

struct SimCSEConfig {
  double temperature = 0.05;
};

struct CosentConfig {
  double lambda = 20.0;
};

// Loss with gradients for a batch of paired embedding matrices.
struct BatchLossGrads {
  double loss = 0.0;
  Mat grad_a;
  Mat grad_b;
};

// loss = (1/n) sum_i -log( e^{cos(a_i,b_i)/tau} / sum_j e^{cos(a_i,b_j)/tau} ).
// Rows j != i act as in-batch negatives. n = 1 gives exactly 0.
BatchLossGrads infonce_loss(const Mat& views_a, const Mat& views_b, double tau);

// CoSENT core on a vector of pair cosines. loss =
// log(1 + sum_{p in pos, q in neg} e^{lambda (c_q - c_p)}), evaluated in the
// log domain so large lambda cannot overflow. Either side empty -> loss 0.
struct CosentCosineGrads {
  double loss = 0.0;
  Vec grad_cos;
};
CosentCosineGrads cosent_from_cosines(std::span<const double> cosines,
                                      std::span<const int> labels, double lambda);

// CoSENT on embedding batches: cosines are cos(u_i, v_i) per row.
BatchLossGrads cosent_loss(const Mat& u, const Mat& v,
                           std::span<const int> labels, double lambda);

struct PairLossGrads {
  double loss = 0.0;
  Vec grad_u;
  Vec grad_v;
};

// label * (1 - cos(u,v)) + (1 - label) * (1 + cos(u,v)), label in {0,1}.
PairLossGrads cosine_pair_loss(std::span<const double> u,
                               std::span<const double> v, int label);

// Cross-entropy of a 2-way linear head over features concat(u, v, |u-v|).
// head_weights is 2 x 3d. Gradients flow to u, v and the head.
struct HeadLossGrads {
  double loss = 0.0;
  Vec grad_u;
  Vec grad_v;
  Mat grad_head;
  Vec logits;  // pre-softmax, reused by prediction paths
};
HeadLossGrads sbert_head_loss(std::span<const double> u, std::span<const double> v,
                              const Mat& head_weights, int label);

// Prediction-side helper: the head's logits for one pair.
Vec head_logits(std::span<const double> u, std::span<const double> v,
                const Mat& head_weights);

}  // namespace csdr
