#include "csdr/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace csdr {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_similarity: length mismatch");
  }
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) {
    throw std::invalid_argument("cosine_similarity: zero-norm input");
  }
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

CosineGrad cosine_with_grad(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_with_grad: length mismatch");
  }
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) {
    throw std::invalid_argument("cosine_with_grad: zero-norm input");
  }
  const double raw = dot(a, b) / (na * nb);

  CosineGrad out;
  out.value = std::clamp(raw, -1.0, 1.0);
  out.grad_a.resize(a.size());
  out.grad_b.resize(b.size());
  // d cos / d a = b/(|a||b|) - cos * a/|a|^2, symmetric for b.
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.grad_a[i] = b[i] / (na * nb) - raw * a[i] / (na * na);
    out.grad_b[i] = a[i] / (na * nb) - raw * b[i] / (nb * nb);
  }
  return out;
}

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) {
    throw std::invalid_argument("log_sum_exp: empty input");
  }
  const double m = *std::max_element(xs.begin(), xs.end());
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

Vec stable_softmax(std::span<const double> xs) {
  if (xs.empty()) {
    throw std::invalid_argument("stable_softmax: empty input");
  }
  const double m = *std::max_element(xs.begin(), xs.end());
  Vec out(xs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] = std::exp(xs[i] - m);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x,
                     double h) {
  if (h <= 0.0) {
    throw std::invalid_argument("finite_diff_grad: step must be positive");
  }
  Vec grad(x.size());
  Vec probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::runtime_error("finite_diff_grad: non-finite function value");
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double gradient_rel_error(std::span<const double> analytic,
                          std::span<const double> reference, double floor) {
  if (analytic.size() != reference.size()) {
    throw std::invalid_argument("gradient_rel_error: length mismatch");
  }
  double diff = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double d = analytic[i] - reference[i];
    diff += d * d;
  }
  const double denom = std::max({norm2(analytic), norm2(reference), floor});
  return std::sqrt(diff) / denom;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace csdr
