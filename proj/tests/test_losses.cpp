#include <cmath>
#include <stdexcept>

#include "csdr/losses.hpp"
#include "csdr/rng.hpp"
#include "doctest.h"

using namespace csdr;

namespace {

Mat random_mat(std::size_t rows, std::size_t cols, Rng& rng) {
  Mat m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-1.5, 1.5);
  return m;
}

// Embedding in the plane with an exact, chosen cosine against [1, 0].
Vec planar(double cosine) { return {cosine, std::sqrt(1.0 - cosine * cosine)}; }

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("infonce with a single pair has no negatives and zero loss") {
  Mat a(1, 3), b(1, 3);
  a.data = {0.2, -0.4, 1.0};
  b.data = {1.0, 0.5, -0.3};
  const auto out = infonce_loss(a, b, 0.05);
  CHECK(out.loss == 0.0);
}

TEST_CASE("infonce matches the scalar evaluation on an orthogonal 2-batch") {
  // cos(a1,b1)=1, cos(a1,b2)=0, cos(a2,b2)=1, cos(a2,b1)=0
  Mat a(2, 2), b(2, 2);
  a.data = {1, 0, 0, 1};
  b.data = {1, 0, 0, 1};
  const auto out = infonce_loss(a, b, 1.0);
  CHECK(out.loss == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("infonce gradients match finite differences") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat a = random_mat(3, 4, rng);
    const Mat b = random_mat(3, 4, rng);
    const double tau = rng.uniform(0.05, 1.0);
    const auto out = infonce_loss(a, b, tau);

    auto loss_a = [&](const Vec& flat) {
      Mat probe = a;
      probe.data = flat;
      return infonce_loss(probe, b, tau).loss;
    };
    auto loss_b = [&](const Vec& flat) {
      Mat probe = b;
      probe.data = flat;
      return infonce_loss(a, probe, tau).loss;
    };
    CHECK(gradient_rel_error(out.grad_a.data, finite_diff_grad(loss_a, a.data)) < 1e-4);
    CHECK(gradient_rel_error(out.grad_b.data, finite_diff_grad(loss_b, b.data)) < 1e-4);
  }
}

TEST_CASE("infonce is non-negative and invariant to joint row permutation") {
  Rng rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + rng.below(4);
    const Mat a = random_mat(n, 5, rng);
    const Mat b = random_mat(n, 5, rng);
    const auto out = infonce_loss(a, b, 0.1);
    CHECK(out.loss >= 0.0);

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    Mat pa(n, 5), pb(n, 5);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(a.row(perm[i]), a.row(perm[i]) + 5, pa.row(i));
      std::copy(b.row(perm[i]), b.row(perm[i]) + 5, pb.row(i));
    }
    CHECK(infonce_loss(pa, pb, 0.1).loss == doctest::Approx(out.loss).epsilon(1e-12));
  }
}

TEST_CASE("infonce rejects bad input") {
  Mat a(2, 2), b(2, 2);
  a.data = {1, 0, 0, 0};  // zero-norm second row
  b.data = {1, 0, 0, 1};
  CHECK_THROWS_AS(infonce_loss(a, b, 0.05), std::invalid_argument);
  a.data = {1, 0, 0, 1};
  CHECK_THROWS_AS(infonce_loss(a, b, 0.0), std::invalid_argument);
  Mat c(1, 2);
  c.data = {1, 0};
  CHECK_THROWS_AS(infonce_loss(a, c, 0.05), std::invalid_argument);
}

TEST_CASE("cosent with an empty side of the cross-product is zero") {
  const Vec cosines = {0.9, 0.2, 0.5};
  const std::vector<int> all_pos = {1, 1, 1};
  const std::vector<int> all_neg = {0, 0, 0};
  CHECK(cosent_from_cosines(cosines, all_pos, 20.0).loss == 0.0);
  CHECK(cosent_from_cosines(cosines, all_neg, 20.0).loss == 0.0);
  for (double g : cosent_from_cosines(cosines, all_pos, 20.0).grad_cos) {
    CHECK(g == 0.0);
  }
}

TEST_CASE("cosent matches the scalar evaluation for one pos and one neg") {
  const Vec cosines = {0.8, 0.9};
  const std::vector<int> labels = {1, 0};
  const auto out = cosent_from_cosines(cosines, labels, 1.0);
  CHECK(out.loss == doctest::Approx(std::log1p(std::exp(0.1))).epsilon(1e-12));
}

TEST_CASE("cosent vanishes when positives dominate and lambda grows") {
  const Vec cosines = {0.8, 0.85, 0.6, 0.7};
  const std::vector<int> labels = {1, 1, 0, 0};
  const auto out = cosent_from_cosines(cosines, labels, 100.0);
  CHECK(out.loss > 0.0);
  CHECK(out.loss < 1e-3);
}

TEST_CASE("cosent ordering: positive cosines pull loss down, negatives push up") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4 + rng.below(5);
    Vec cosines(n);
    std::vector<int> labels(n);
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      // band chosen so a 0.01 bump on any term stays representable at
      // lambda=20 (worst relative effect e^-24, far above double epsilon)
      cosines[i] = rng.uniform(-0.6, 0.6);
      labels[i] = static_cast<int>(rng.below(2));
      (labels[i] == 1 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) continue;
    const double base = cosent_from_cosines(cosines, labels, 20.0).loss;
    CHECK(base >= 0.0);

    for (std::size_t i = 0; i < n; ++i) {
      Vec bumped = cosines;
      bumped[i] += 0.01;
      const double moved = cosent_from_cosines(bumped, labels, 20.0).loss;
      if (labels[i] == 1) {
        CHECK(moved < base);
      } else {
        CHECK(moved > base);
      }
    }
  }
}

TEST_CASE("cosent is invariant to reordering the batch") {
  Rng rng(24);
  const Vec cosines = {0.1, -0.5, 0.8, 0.3, 0.9};
  const std::vector<int> labels = {0, 1, 1, 0, 1};
  const double base = cosent_from_cosines(cosines, labels, 20.0).loss;
  std::vector<std::size_t> perm = {4, 2, 0, 3, 1};
  Vec pc(5);
  std::vector<int> pl(5);
  for (std::size_t i = 0; i < 5; ++i) {
    pc[i] = cosines[perm[i]];
    pl[i] = labels[perm[i]];
  }
  CHECK(cosent_from_cosines(pc, pl, 20.0).loss == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("cosent embedding gradients match finite differences") {
  Rng rng(25);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 3 + rng.below(3);
    const Mat u = random_mat(n, 4, rng);
    const Mat v = random_mat(n, 4, rng);
    std::vector<int> labels(n);
    labels[0] = 1;
    labels[1] = 0;
    for (std::size_t i = 2; i < n; ++i) labels[i] = static_cast<int>(rng.below(2));
    const double lambda = rng.uniform(1.0, 30.0);

    const auto out = cosent_loss(u, v, labels, lambda);
    auto loss_u = [&](const Vec& flat) {
      Mat probe = u;
      probe.data = flat;
      return cosent_loss(probe, v, labels, lambda).loss;
    };
    auto loss_v = [&](const Vec& flat) {
      Mat probe = v;
      probe.data = flat;
      return cosent_loss(u, probe, labels, lambda).loss;
    };
    CHECK(gradient_rel_error(out.grad_a.data, finite_diff_grad(loss_u, u.data)) < 1e-4);
    CHECK(gradient_rel_error(out.grad_b.data, finite_diff_grad(loss_v, v.data)) < 1e-4);
  }
}

TEST_CASE("cosine pair loss hits its closed-form values") {
  const Vec e1 = {1.0, 0.0};
  CHECK(cosine_pair_loss(e1, e1, 1).loss == 0.0);
  CHECK(cosine_pair_loss(e1, e1, 0).loss == 2.0);
  CHECK(cosine_pair_loss(e1, planar(0.5), 1).loss ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_pair_loss(e1, e1, 2), std::invalid_argument);
}

TEST_CASE("cosine pair loss gradients match finite differences") {
  Rng rng(26);
  for (int trial = 0; trial < 10; ++trial) {
    Vec u(4), v(4);
    for (auto& x : u) x = rng.uniform(-2, 2);
    for (auto& x : v) x = rng.uniform(-2, 2);
    const int label = static_cast<int>(rng.below(2));
    const auto out = cosine_pair_loss(u, v, label);
    const auto fd_u = finite_diff_grad(
        [&](const Vec& p) { return cosine_pair_loss(p, v, label).loss; }, u);
    const auto fd_v = finite_diff_grad(
        [&](const Vec& p) { return cosine_pair_loss(u, p, label).loss; }, v);
    CHECK(gradient_rel_error(out.grad_u, fd_u) < 1e-4);
    CHECK(gradient_rel_error(out.grad_v, fd_v) < 1e-4);
  }
}

TEST_CASE("zero head weights give the uniform-softmax loss") {
  const Vec u = {0.3, -0.7, 1.1};
  const Vec v = {0.2, 0.5, -0.4};
  const Mat head(2, 9);
  const auto out = sbert_head_loss(u, v, head, 1);
  CHECK(out.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("identical sentences zero out the |u-v| feature block") {
  const Vec u = {0.3, -0.7, 1.1};
  Rng rng(27);
  Mat head_a(2, 9), head_b(2, 9);
  for (double& w : head_a.data) w = rng.uniform(-1, 1);
  head_b = head_a;
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 6; c < 9; ++c) head_b.at(r, c) += 100.0;
  }
  CHECK(head_logits(u, u, head_a) == head_logits(u, u, head_b));
}

TEST_CASE("head loss gradients match finite differences") {
  Rng rng(28);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 3;
    Vec u(d), v(d);
    for (auto& x : u) x = rng.uniform(-2, 2);
    for (auto& x : v) x = rng.uniform(-2, 2);
    Mat head(2, 3 * d);
    for (double& w : head.data) w = rng.uniform(-1, 1);
    const int label = static_cast<int>(rng.below(2));

    const auto out = sbert_head_loss(u, v, head, label);
    const auto fd_u = finite_diff_grad(
        [&](const Vec& p) { return sbert_head_loss(p, v, head, label).loss; }, u);
    const auto fd_v = finite_diff_grad(
        [&](const Vec& p) { return sbert_head_loss(u, p, head, label).loss; }, v);
    const auto fd_w = finite_diff_grad(
        [&](const Vec& flat) {
          Mat probe = head;
          probe.data = flat;
          return sbert_head_loss(u, v, probe, label).loss;
        },
        head.data);
    CHECK(gradient_rel_error(out.grad_u, fd_u) < 1e-4);
    CHECK(gradient_rel_error(out.grad_v, fd_v) < 1e-4);
    CHECK(gradient_rel_error(out.grad_head.data, fd_w) < 1e-4);
  }
}

TEST_CASE("head loss validates shapes and labels") {
  const Vec u = {1.0, 0.0};
  const Mat wrong(2, 5);
  CHECK_THROWS_AS(sbert_head_loss(u, u, wrong, 1), std::invalid_argument);
  const Mat head(2, 6);
  CHECK_THROWS_AS(sbert_head_loss(u, u, head, 3), std::invalid_argument);
}

}  // TEST_SUITE
