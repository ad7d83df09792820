#include "csdr/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace csdr {
namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* who) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw std::invalid_argument(std::string(who) + ": shape mismatch");
  }
  if (a.rows == 0) {
    throw std::invalid_argument(std::string(who) + ": empty batch");
  }
}

}  // namespace

BatchLossGrads infonce_loss(const Mat& views_a, const Mat& views_b, double tau) {
  check_same_shape(views_a, views_b, "infonce_loss");
  if (tau <= 0.0) throw std::invalid_argument("infonce_loss: tau must be positive");

  const std::size_t n = views_a.rows;
  BatchLossGrads out;
  out.grad_a = Mat(n, views_a.cols);
  out.grad_b = Mat(n, views_b.cols);

  // Pairwise cosines and their gradients, cached per (i, j).
  Mat sim(n, n);
  std::vector<CosineGrad> grads(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      grads[i * n + j] = cosine_with_grad(views_a.row_span(i), views_b.row_span(j));
      sim.at(i, j) = grads[i * n + j].value;
    }
  }

  double total = 0.0;
  Vec logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) logits[j] = sim.at(i, j) / tau;
    const double lse = log_sum_exp(logits);
    total += lse - logits[i];

    // d(loss)/d(sim_ij) = (softmax_j - [j == i]) / (n * tau)
    for (std::size_t j = 0; j < n; ++j) {
      const double p = std::exp(logits[j] - lse);
      const double coeff =
          (p - (i == j ? 1.0 : 0.0)) / (static_cast<double>(n) * tau);
      const CosineGrad& cg = grads[i * n + j];
      double* ga = out.grad_a.row(i);
      double* gb = out.grad_b.row(j);
      for (std::size_t c = 0; c < views_a.cols; ++c) {
        ga[c] += coeff * cg.grad_a[c];
        gb[c] += coeff * cg.grad_b[c];
      }
    }
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

CosentCosineGrads cosent_from_cosines(std::span<const double> cosines,
                                      std::span<const int> labels, double lambda) {
  if (cosines.size() != labels.size()) {
    throw std::invalid_argument("cosent_from_cosines: length mismatch");
  }
  if (cosines.empty()) {
    throw std::invalid_argument("cosent_from_cosines: empty batch");
  }
  if (lambda <= 0.0) {
    throw std::invalid_argument("cosent_from_cosines: lambda must be positive");
  }

  CosentCosineGrads out;
  out.grad_cos.assign(cosines.size(), 0.0);

  Vec pos_terms, neg_terms;  // -lambda*c_p and +lambda*c_q respectively
  for (std::size_t i = 0; i < cosines.size(); ++i) {
    if (labels[i] == 1) {
      pos_terms.push_back(-lambda * cosines[i]);
    } else {
      neg_terms.push_back(lambda * cosines[i]);
    }
  }
  if (pos_terms.empty() || neg_terms.empty()) {
    out.loss = 0.0;  // empty cross-product
    return out;
  }

  // sum over the cross-product factorizes: A = sum_p e^{-l c_p},
  // B = sum_q e^{l c_q}; loss = log(1 + A*B) = softplus(logA + logB).
  const double log_a = log_sum_exp(pos_terms);
  const double log_b = log_sum_exp(neg_terms);
  out.loss = softplus(log_a + log_b);

  for (std::size_t i = 0; i < cosines.size(); ++i) {
    if (labels[i] == 1) {
      out.grad_cos[i] = -lambda * std::exp(-lambda * cosines[i] + log_b - out.loss);
    } else {
      out.grad_cos[i] = lambda * std::exp(lambda * cosines[i] + log_a - out.loss);
    }
  }
  return out;
}

BatchLossGrads cosent_loss(const Mat& u, const Mat& v,
                           std::span<const int> labels, double lambda) {
  check_same_shape(u, v, "cosent_loss");
  if (labels.size() != u.rows) {
    throw std::invalid_argument("cosent_loss: label count mismatch");
  }

  const std::size_t n = u.rows;
  std::vector<CosineGrad> grads(n);
  Vec cosines(n);
  for (std::size_t i = 0; i < n; ++i) {
    grads[i] = cosine_with_grad(u.row_span(i), v.row_span(i));
    cosines[i] = grads[i].value;
  }

  const auto core = cosent_from_cosines(cosines, labels, lambda);

  BatchLossGrads out;
  out.loss = core.loss;
  out.grad_a = Mat(n, u.cols);
  out.grad_b = Mat(n, v.cols);
  for (std::size_t i = 0; i < n; ++i) {
    double* gu = out.grad_a.row(i);
    double* gv = out.grad_b.row(i);
    for (std::size_t c = 0; c < u.cols; ++c) {
      gu[c] = core.grad_cos[i] * grads[i].grad_a[c];
      gv[c] = core.grad_cos[i] * grads[i].grad_b[c];
    }
  }
  return out;
}

PairLossGrads cosine_pair_loss(std::span<const double> u,
                               std::span<const double> v, int label) {
  if (label != 0 && label != 1) {
    throw std::invalid_argument("cosine_pair_loss: label must be 0 or 1");
  }
  const auto cg = cosine_with_grad(u, v);
  const double t = static_cast<double>(label);
  PairLossGrads out;
  out.loss = t * (1.0 - cg.value) + (1.0 - t) * (1.0 + cg.value);
  const double dcos = 1.0 - 2.0 * t;
  out.grad_u.resize(u.size());
  out.grad_v.resize(v.size());
  for (std::size_t c = 0; c < u.size(); ++c) {
    out.grad_u[c] = dcos * cg.grad_a[c];
    out.grad_v[c] = dcos * cg.grad_b[c];
  }
  return out;
}

Vec head_logits(std::span<const double> u, std::span<const double> v,
                const Mat& head_weights) {
  const std::size_t d = u.size();
  if (v.size() != d) throw std::invalid_argument("head_logits: dim mismatch");
  if (head_weights.rows != 2 || head_weights.cols != 3 * d) {
    throw std::invalid_argument("head_logits: head must be 2 x 3d");
  }
  Vec logits(2, 0.0);
  for (std::size_t r = 0; r < 2; ++r) {
    const double* w = head_weights.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      acc += w[c] * u[c] + w[d + c] * v[c] + w[2 * d + c] * std::fabs(u[c] - v[c]);
    }
    logits[r] = acc;
  }
  return logits;
}

HeadLossGrads sbert_head_loss(std::span<const double> u, std::span<const double> v,
                              const Mat& head_weights, int label) {
  if (label != 0 && label != 1) {
    throw std::invalid_argument("sbert_head_loss: label must be 0 or 1");
  }
  const std::size_t d = u.size();
  HeadLossGrads out;
  out.logits = head_logits(u, v, head_weights);
  const Vec probs = stable_softmax(out.logits);
  out.loss = -std::log(probs[static_cast<std::size_t>(label)]);

  // d(loss)/d(logit_r) = p_r - [r == label]
  Vec dlogit = {probs[0] - (label == 0 ? 1.0 : 0.0),
                probs[1] - (label == 1 ? 1.0 : 0.0)};

  out.grad_head = Mat(2, 3 * d);
  out.grad_u.assign(d, 0.0);
  out.grad_v.assign(d, 0.0);
  for (std::size_t r = 0; r < 2; ++r) {
    const double* w = head_weights.row(r);
    double* gw = out.grad_head.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = u[c] - v[c];
      const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      gw[c] = dlogit[r] * u[c];
      gw[d + c] = dlogit[r] * v[c];
      gw[2 * d + c] = dlogit[r] * std::fabs(diff);
      out.grad_u[c] += dlogit[r] * (w[c] + sgn * w[2 * d + c]);
      out.grad_v[c] += dlogit[r] * (w[d + c] - sgn * w[2 * d + c]);
    }
  }
  return out;
}

}  // namespace csdr
