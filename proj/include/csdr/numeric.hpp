// Dense vector/matrix arithmetic and numerically stable primitives.
// Everything is 64-bit: the model is small enough that precision beats speed,
// and the gradient checks rely on it.
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace csdr {

using Vec = std::vector<double>;

// Row-major dense matrix.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  std::span<double> row_span(std::size_t i) { return {row(i), cols}; }
  std::span<const double> row_span(std::size_t i) const { return {row(i), cols}; }

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  void fill(double v) { data.assign(data.size(), v); }

  bool operator==(const Mat& other) const = default;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);

// Cosine similarity clamped to [-1, 1]. The clamp absorbs rounding so that
// downstream exponentials never see |cos| > 1.
// Throws std::invalid_argument on length mismatch or a zero-norm input.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Cosine value plus its gradient w.r.t. both inputs. The value is clamped
// like cosine_similarity; the gradient is that of the raw quotient.
struct CosineGrad {
  double value = 0.0;
  Vec grad_a;
  Vec grad_b;
};
CosineGrad cosine_with_grad(std::span<const double> a, std::span<const double> b);

// log(sum(exp(xs))) via max-shift; no intermediate overflow for |x| <= 700.
// Throws std::invalid_argument on empty input.
double log_sum_exp(std::span<const double> xs);

// softplus(x) = log(1 + e^x), overflow-safe for any finite x.
double softplus(double x);

// Softmax with max-shift. Entries positive, sum == 1 within 1e-12,
// invariant under adding a constant to all inputs.
Vec stable_softmax(std::span<const double> xs);

// Central-difference gradient oracle: (f(x+h e_i) - f(x-h e_i)) / 2h.
// Throws std::runtime_error if f evaluates to a non-finite value.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x,
                     double h = 1e-5);

// Relative error between an analytic gradient and a reference, at vector
// level: ||a - b|| / max(||a||, ||b||, floor).
double gradient_rel_error(std::span<const double> analytic,
                          std::span<const double> reference,
                          double floor = 1e-12);

bool all_finite(std::span<const double> v);

}  // namespace csdr
