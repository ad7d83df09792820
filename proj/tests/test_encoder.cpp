#include <cmath>
#include <stdexcept>

#include "csdr/encoder.hpp"
#include "csdr/text.hpp"
#include "doctest.h"

using namespace csdr;

namespace {

EncoderConfig bag_config(std::size_t dim, bool position, Pooling pooling,
                         double dropout = 0.0) {
  EncoderConfig cfg;
  cfg.embed_dim = dim;
  cfg.max_len = 16;
  cfg.dropout_p = dropout;
  cfg.pooling = pooling;
  cfg.use_position = position;
  return cfg;
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("init draws uniform tables and zeroes the PAD row") {
  const auto cfg = bag_config(64, true, Pooling::mean);
  Rng rng(42);
  const auto params = init_params(1000, cfg, rng);
  REQUIRE(params.token_table.rows == 1000);
  REQUIRE(params.position_table.rows == cfg.max_len);

  for (std::size_t c = 0; c < cfg.embed_dim; ++c) {
    CHECK(params.token_table.at(static_cast<std::size_t>(kPadId), c) == 0.0);
  }

  Rng rng2(42);
  const auto params2 = init_params(1000, cfg, rng2);
  CHECK(params.token_table == params2.token_table);
  CHECK(params.position_table == params2.position_table);

  // statistical check: sample mean of non-PAD entries within 3 standard errors
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 1; r < params.token_table.rows; ++r) {
    for (std::size_t c = 0; c < cfg.embed_dim; ++c) {
      sum += params.token_table.at(r, c);
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  const double sigma = 0.1 / std::sqrt(12.0);  // sd of U(-0.05, 0.05)
  CHECK(std::fabs(mean) < 3.0 * sigma / std::sqrt(static_cast<double>(n)));

  for (double v : params.token_table.data) {
    CHECK(v >= -0.05);
    CHECK(v < 0.05);
  }
}

TEST_CASE("single token, mean pooling, no extras: embedding is the token row") {
  const auto cfg = bag_config(4, false, Pooling::mean);
  Rng rng(1);
  const auto params = init_params(6, cfg, rng);
  const std::vector<std::int32_t> ids = {3};
  const auto out = forward(ids, params, cfg);
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(out.embedding[c] == params.token_table.at(3, c));
  }
}

TEST_CASE("zero dropout makes mask seeds irrelevant") {
  const auto cfg = bag_config(8, true, Pooling::mean, 0.0);
  Rng rng(2);
  const auto params = init_params(10, cfg, rng);
  const std::vector<std::int32_t> ids = {2, 4, 7};
  const auto mask1 = DropoutMask::make(111, ids.size(), cfg.embed_dim, 0.0);
  const auto mask2 = DropoutMask::make(999, ids.size(), cfg.embed_dim, 0.0);
  CHECK(forward(ids, params, cfg, &mask1).embedding ==
        forward(ids, params, cfg, &mask2).embedding);
}

TEST_CASE("two tokens under mean pooling average the rows") {
  const auto cfg = bag_config(4, false, Pooling::mean);
  Rng rng(3);
  const auto params = init_params(6, cfg, rng);
  const std::vector<std::int32_t> ids = {3, 5};
  const auto out = forward(ids, params, cfg);
  for (std::size_t c = 0; c < 4; ++c) {
    const double expect = (params.token_table.at(3, c) + params.token_table.at(5, c)) / 2.0;
    CHECK(out.embedding[c] == expect);
  }
}

TEST_CASE("cls pooling reads position zero only") {
  const auto cfg = bag_config(4, true, Pooling::cls);
  Rng rng(4);
  const auto params = init_params(8, cfg, rng);
  const std::vector<std::int32_t> ids = {2, 5, 6};
  const auto out = forward(ids, params, cfg);
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(out.embedding[c] ==
          params.token_table.at(2, c) + params.position_table.at(0, c));
  }
}

TEST_CASE("forward validates ids and shapes") {
  const auto cfg = bag_config(4, true, Pooling::mean);
  Rng rng(5);
  const auto params = init_params(6, cfg, rng);
  CHECK_THROWS_AS(forward(std::vector<std::int32_t>{}, params, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(forward(std::vector<std::int32_t>{6}, params, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(forward(std::vector<std::int32_t>{2, 9}, params, cfg),
                  std::invalid_argument);
  const std::vector<std::int32_t> too_long(cfg.max_len + 1, 3);
  CHECK_THROWS_AS(forward(too_long, params, cfg), std::invalid_argument);
  const auto bad_mask = DropoutMask::make(1, 5, cfg.embed_dim, 0.1);
  const std::vector<std::int32_t> ids = {2, 3};
  CHECK_THROWS_AS(forward(ids, params, cfg, &bad_mask), std::invalid_argument);
}

TEST_CASE("two views: p=0 collapses, fixed seeds reproduce, views correlate") {
  Rng init(6);
  const std::vector<std::int32_t> ids = {2, 3, 4, 5};

  const auto p0 = bag_config(8, true, Pooling::mean, 0.0);
  const auto params = init_params(10, p0, init);
  Rng view_rng(77);
  const auto [a0, b0] = forward_two_views(ids, params, p0, view_rng);
  CHECK(cosine_similarity(a0.embedding, b0.embedding) == 1.0);

  const auto p01 = bag_config(8, true, Pooling::mean, 0.1);
  Rng r1(123), r2(123);
  const auto [a1, b1] = forward_two_views(ids, params, p01, r1);
  const auto [a2, b2] = forward_two_views(ids, params, p01, r2);
  CHECK(a1.embedding == a2.embedding);
  CHECK(b1.embedding == b2.embedding);

  // non-degenerate dropout: views differ but stay positively aligned
  Rng sweep(31);
  int distinct = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto [va, vb] = forward_two_views(ids, params, p01, sweep);
    if (va.embedding != vb.embedding) ++distinct;
    CHECK(cosine_similarity(va.embedding, vb.embedding) > 0.0);
  }
  CHECK(distinct > 90);
}

TEST_CASE("backward distributes mean-pooled gradients") {
  const auto cfg = bag_config(3, false, Pooling::mean);
  Rng rng(7);
  const auto params = init_params(8, cfg, rng);
  const std::vector<std::int32_t> ids = {4, 6, 7};
  const auto out = forward(ids, params, cfg);

  ParamGrads grads(params);
  const Vec g = {0.3, -1.2, 2.4};
  backward(out.trace, g, grads);
  for (std::int32_t id : ids) {
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(grads.token_table.at(static_cast<std::size_t>(id), c) ==
            doctest::Approx(g[c] / 3.0).epsilon(1e-15));
    }
  }
  CHECK(grads.token_table.at(2, 0) == 0.0);  // untouched row
}

TEST_CASE("backward under cls pooling only reaches position zero") {
  const auto cfg = bag_config(3, true, Pooling::cls);
  Rng rng(8);
  const auto params = init_params(8, cfg, rng);
  const std::vector<std::int32_t> ids = {2, 5};
  const auto out = forward(ids, params, cfg);

  ParamGrads grads(params);
  const Vec g = {1.0, 2.0, 3.0};
  backward(out.trace, g, grads);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(grads.token_table.at(2, c) == g[c]);
    CHECK(grads.token_table.at(5, c) == 0.0);
    CHECK(grads.position_table.at(0, c) == g[c]);
    CHECK(grads.position_table.at(1, c) == 0.0);
  }
}

TEST_CASE("backward matches finite differences across configurations") {
  Rng rng(9);
  for (int trial = 0; trial < 24; ++trial) {
    EncoderConfig cfg;
    cfg.embed_dim = 2 + rng.below(5);
    cfg.max_len = 8;
    cfg.dropout_p = (trial % 3 == 0) ? 0.3 : 0.0;
    cfg.pooling = (trial % 2 == 0) ? Pooling::mean : Pooling::cls;
    cfg.use_position = trial % 4 < 2;

    const std::size_t vocab_size = 5 + rng.below(4);
    Rng init = rng.derive(trial);
    auto params = init_params(vocab_size, cfg, init);

    const std::size_t len = 1 + rng.below(5);
    std::vector<std::int32_t> ids(len);
    for (auto& id : ids) id = static_cast<std::int32_t>(rng.below(vocab_size));

    DropoutMask mask = DropoutMask::make(rng.next_u64(), len, cfg.embed_dim,
                                         cfg.dropout_p);
    Vec direction(cfg.embed_dim);
    for (auto& v : direction) v = rng.uniform(-1, 1);

    const auto out = forward(ids, params, cfg, &mask);
    ParamGrads analytic(params);
    backward(out.trace, direction, analytic);

    // loss(params) = direction . embedding; finite-difference each table
    auto token_loss = [&](const Vec& flat) {
      EncoderParams probe = params;
      probe.token_table.data = flat;
      return dot(direction, forward(ids, probe, cfg, &mask).embedding);
    };
    const Vec fd_token = finite_diff_grad(token_loss, params.token_table.data);
    CHECK(gradient_rel_error(analytic.token_table.data, fd_token, 1e-8) < 1e-4);

    if (cfg.use_position) {
      auto pos_loss = [&](const Vec& flat) {
        EncoderParams probe = params;
        probe.position_table.data = flat;
        return dot(direction, forward(ids, probe, cfg, &mask).embedding);
      };
      const Vec fd_pos = finite_diff_grad(pos_loss, params.position_table.data);
      CHECK(gradient_rel_error(analytic.position_table.data, fd_pos, 1e-8) < 1e-4);
    }
  }
}

TEST_CASE("dropout is unbiased: mask averages approach the p=0 output") {
  const auto cfg = bag_config(6, true, Pooling::mean, 0.25);
  Rng rng(10);
  const auto params = init_params(12, cfg, rng);
  const std::vector<std::int32_t> ids = {2, 4, 8};

  auto clean_cfg = cfg;
  clean_cfg.dropout_p = 0.0;
  const Vec clean = forward(ids, params, clean_cfg).embedding;

  const int n_masks = 10000;
  Vec mean(cfg.embed_dim, 0.0);
  Vec sq(cfg.embed_dim, 0.0);
  Rng mask_rng(55);
  for (int m = 0; m < n_masks; ++m) {
    const auto mask =
        DropoutMask::make(mask_rng.next_u64(), ids.size(), cfg.embed_dim, 0.25);
    const Vec e = forward(ids, params, cfg, &mask).embedding;
    for (std::size_t c = 0; c < e.size(); ++c) {
      mean[c] += e[c];
      sq[c] += e[c] * e[c];
    }
  }
  for (std::size_t c = 0; c < mean.size(); ++c) {
    mean[c] /= n_masks;
    const double var = sq[c] / n_masks - mean[c] * mean[c];
    const double se = std::sqrt(std::max(var, 0.0) / n_masks);
    CHECK(std::fabs(mean[c] - clean[c]) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("position embeddings make order matter; bags do not") {
  Rng rng(11);
  const std::vector<std::int32_t> ids = {2, 3, 4, 5};
  std::vector<std::int32_t> reversed(ids.rbegin(), ids.rend());

  const auto with_pos = bag_config(8, true, Pooling::mean);
  const auto params = init_params(10, with_pos, rng);
  CHECK(forward(ids, params, with_pos).embedding !=
        forward(reversed, params, with_pos).embedding);

  const auto bag = bag_config(8, false, Pooling::mean);
  const Vec fwd = forward(ids, params, bag).embedding;
  const Vec rev = forward(reversed, params, bag).embedding;
  for (std::size_t c = 0; c < fwd.size(); ++c) {
    CHECK(fwd[c] == doctest::Approx(rev[c]).epsilon(1e-12));
  }
}

TEST_CASE("encoding one side is independent of the other (weight sharing)") {
  const auto cfg = bag_config(8, true, Pooling::mean);
  Rng rng(12);
  const auto params = init_params(10, cfg, rng);
  const std::vector<std::int32_t> a = {2, 3}, b = {2, 9, 4};
  const Vec only_a = forward(a, params, cfg).embedding;
  (void)forward(b, params, cfg);
  const Vec a_after_b = forward(a, params, cfg).embedding;
  CHECK(only_a == a_after_b);
}

}  // TEST_SUITE
