#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "csdr/checkpoint.hpp"
#include "csdr/trainer.hpp"
#include "doctest.h"

using namespace csdr;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> clustered_corpus(std::size_t per_topic) {
  // three disjoint topic vocabularies, five tokens per sentence
  const std::vector<std::vector<std::string>> topics = {
      {"red", "crimson", "scarlet", "ruby", "maroon", "rose"},
      {"blue", "azure", "navy", "cobalt", "teal", "cyan"},
      {"leaf", "green", "olive", "jade", "mint", "moss"},
  };
  std::vector<std::string> corpus;
  Rng rng(7);
  for (std::size_t t = 0; t < topics.size(); ++t) {
    for (std::size_t i = 0; i < per_topic; ++i) {
      std::string s;
      for (int w = 0; w < 5; ++w) {
        if (w > 0) s += ' ';
        s += topics[t][rng.below(topics[t].size())];
      }
      corpus.push_back(s);
    }
  }
  return corpus;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("warmup length follows the dataset-length rule") {
  TrainConfig cfg;
  const auto schedule = LrSchedule::make(1000, 2000, cfg);
  CHECK(schedule.warmup_steps == 50);
  CHECK(lr_at(50, schedule) == 0.01);
  CHECK(lr_at(1999, schedule) == 2e-5);
  CHECK(lr_at(0, schedule) == 0.0);
}

TEST_CASE("schedule is piecewise linear with a single peak") {
  TrainConfig cfg;
  const auto schedule = LrSchedule::make(200, 100, cfg);  // warmup 10
  REQUIRE(schedule.warmup_steps == 10);
  double prev = lr_at(0, schedule);
  for (std::size_t s = 1; s <= 10; ++s) {
    const double lr = lr_at(s, schedule);
    CHECK(lr > prev);
    prev = lr;
  }
  CHECK(prev == cfg.lr_peak);
  for (std::size_t s = 11; s < 100; ++s) {
    const double lr = lr_at(s, schedule);
    CHECK(lr < prev);
    prev = lr;
  }
  CHECK(prev == cfg.lr_min);
  CHECK_THROWS_AS(lr_at(100, schedule), std::out_of_range);
}

TEST_CASE("warmup is clamped to the run length") {
  TrainConfig cfg;
  const auto schedule = LrSchedule::make(10000, 20, cfg);
  CHECK(schedule.warmup_steps == 20);
  CHECK(lr_at(19, schedule) == doctest::Approx(cfg.lr_peak * 19.0 / 20.0));
}

TEST_CASE("adam with zero gradients leaves fresh parameters untouched") {
  Mat param(3, 4);
  for (std::size_t i = 0; i < param.data.size(); ++i) {
    param.data[i] = 0.1 * static_cast<double>(i);
  }
  const Mat before = param;
  AdamSlot slot(param);
  const Mat zero(3, 4);
  for (std::size_t t = 1; t <= 5; ++t) slot.update(param, zero, 0.01, t);
  CHECK(param == before);
}

TEST_CASE("adam descends a simple quadratic") {
  Mat param(1, 1);
  param.data[0] = 5.0;
  AdamSlot slot(param);
  Mat grad(1, 1);
  for (std::size_t t = 1; t <= 2000; ++t) {
    grad.data[0] = 2.0 * param.data[0];
    slot.update(param, grad, 0.01, t);
  }
  CHECK(std::fabs(param.data[0]) < 1e-2);
}

TEST_CASE("checkpoints round-trip bitwise") {
  EncoderConfig enc;
  enc.embed_dim = 8;
  enc.max_len = 12;
  enc.pooling = Pooling::cls;
  Rng rng(91);
  Checkpoint ckpt;
  ckpt.vocab_hash = 0xDEADBEEFCAFEF00DULL;
  ckpt.config = enc;
  ckpt.params = init_params(20, enc, rng);
  Mat head(2, 24);
  for (double& w : head.data) w = rng.uniform(-1, 1);
  ckpt.head = head;
  NeighborStore store;
  store.embeddings = Mat(3, 8);
  for (double& v : store.embeddings.data) v = rng.uniform(-1, 1);
  store.labels = {1, 0, 1};
  store.provenance = "train-pairs/mean";
  ckpt.store = store;

  const auto path = fs::temp_directory_path() / "csdr_ckpt_test.bin";
  save_checkpoint(ckpt, path.string());
  const Checkpoint loaded = load_checkpoint(path.string());
  CHECK(loaded.vocab_hash == ckpt.vocab_hash);
  CHECK(loaded.params == ckpt.params);
  CHECK(loaded.config.embed_dim == enc.embed_dim);
  CHECK(loaded.config.pooling == Pooling::cls);
  REQUIRE(loaded.head.has_value());
  CHECK(*loaded.head == head);
  REQUIRE(loaded.store.has_value());
  CHECK(*loaded.store == store);
  fs::remove(path);
}

TEST_CASE("checkpoint loading verifies the vocabulary hash") {
  const Vocab vocab = build_vocab({"alpha beta"});
  EncoderConfig enc;
  enc.embed_dim = 4;
  Rng rng(92);
  Checkpoint ckpt;
  ckpt.vocab_hash = vocab.hash() + 1;  // wrong on purpose
  ckpt.config = enc;
  ckpt.params = init_params(vocab.size(), enc, rng);

  const auto path = fs::temp_directory_path() / "csdr_ckpt_hash.bin";
  save_checkpoint(ckpt, path.string());
  CHECK_THROWS_WITH_AS(load_checkpoint(path.string(), vocab),
                       doctest::Contains("hash"), std::runtime_error);
  fs::remove(path);
}

TEST_CASE("truncated and corrupt checkpoints are rejected cleanly") {
  EncoderConfig enc;
  enc.embed_dim = 4;
  Rng rng(93);
  Checkpoint ckpt;
  ckpt.config = enc;
  ckpt.params = init_params(10, enc, rng);
  const auto path = fs::temp_directory_path() / "csdr_ckpt_trunc.bin";
  save_checkpoint(ckpt, path.string());

  const std::string bytes = read_bytes(path);
  {
    // one byte short: the reader must fail cleanly at the end
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 1));
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(path.string()),
                       doctest::Contains("truncated"), std::runtime_error);

  {
    // half a file: still a structured error, never partial state
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint(path.string()), std::runtime_error);

  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "not a checkpoint at all";
  }
  CHECK_THROWS_AS(load_checkpoint(path.string()), std::runtime_error);
  fs::remove(path);
}

TEST_CASE("one pretraining epoch on a toy corpus stays finite") {
  std::vector<std::string> corpus;
  for (int i = 0; i < 32; ++i) corpus.push_back("tok" + std::to_string(i % 7));
  const Vocab vocab = build_vocab(corpus);

  EncoderConfig enc;
  enc.embed_dim = 8;
  enc.max_len = 8;
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 32;
  cfg.seed = 5;

  const auto result = pretrain_simcse(corpus, vocab, enc, cfg);
  REQUIRE(result.history.size() == 1);
  CHECK(std::isfinite(result.history[0].mean_loss));
  CHECK(all_finite(result.params.token_table.data));
  CHECK(all_finite(result.params.position_table.data));
}

TEST_CASE("zero-dropout pretraining is well-defined") {
  std::vector<std::string> corpus;
  for (int i = 0; i < 32; ++i) corpus.push_back("a" + std::to_string(i));
  const Vocab vocab = build_vocab(corpus);
  EncoderConfig enc;
  enc.embed_dim = 8;
  enc.max_len = 4;
  enc.dropout_p = 0.0;
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 6;
  const auto result = pretrain_simcse(corpus, vocab, enc, cfg);
  CHECK(std::isfinite(result.history[0].mean_loss));
}

TEST_CASE("pretraining needs at least one full batch") {
  const std::vector<std::string> corpus = {"a", "b"};
  const Vocab vocab = build_vocab(corpus);
  EncoderConfig enc;
  TrainConfig cfg;
  CHECK_THROWS_AS(pretrain_simcse(corpus, vocab, enc, cfg), std::invalid_argument);
}

TEST_CASE("contrastive pretraining drives the loss down on clustered text") {
  const auto corpus = clustered_corpus(32);  // 96 sentences over 3 topics
  const Vocab vocab = build_vocab(corpus);
  EncoderConfig enc;
  enc.embed_dim = 16;
  enc.max_len = 8;
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 12;
  const auto result = pretrain_simcse(corpus, vocab, enc, cfg);
  REQUIRE(result.history.size() == 30);
  CHECK(result.history.back().mean_loss < result.history.front().mean_loss);
  for (const auto& rec : result.history) CHECK(std::isfinite(rec.mean_loss));
}

TEST_CASE("an all-positive cosent batch contributes zero loss") {
  std::vector<PairExample> pairs;
  for (int i = 0; i < 8; ++i) {
    pairs.push_back({"x" + std::to_string(i), "y" + std::to_string(i), 1});
  }
  std::vector<std::string> corpus;
  for (const auto& p : pairs) {
    corpus.push_back(p.text_a);
    corpus.push_back(p.text_b);
  }
  const Vocab vocab = build_vocab(corpus);

  EncoderConfig enc;
  enc.embed_dim = 8;
  enc.max_len = 4;
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  cfg.objective = Objective::cosent;
  Rng rng(13);
  auto initial = init_params(vocab.size(), enc, rng);

  const auto result = finetune(std::move(initial), pairs, vocab, enc, cfg);
  CHECK(result.history[0].mean_loss == 0.0);
  CHECK(result.degenerate_batches == 1);
}

TEST_CASE("same seed and data give byte-identical checkpoints") {
  std::vector<PairExample> pairs;
  for (int i = 0; i < 24; ++i) {
    pairs.push_back({"p" + std::to_string(i % 5) + " q" + std::to_string(i % 3),
                     "r" + std::to_string(i % 4), i % 2});
  }
  std::vector<std::string> corpus;
  for (const auto& p : pairs) {
    corpus.push_back(p.text_a);
    corpus.push_back(p.text_b);
  }
  const Vocab vocab = build_vocab(corpus);

  EncoderConfig enc;
  enc.embed_dim = 8;
  enc.max_len = 8;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.seed = 21;
  cfg.objective = Objective::cosent;

  const auto run = [&](const fs::path& path) {
    Rng init_rng = Rng(cfg.seed).derive(1);
    auto initial = init_params(vocab.size(), enc, init_rng);
    auto result = finetune(std::move(initial), pairs, vocab, enc, cfg);
    Checkpoint ckpt;
    ckpt.vocab_hash = vocab.hash();
    ckpt.config = enc;
    ckpt.params = std::move(result.params);
    save_checkpoint(ckpt, path.string());
  };
  const auto p1 = fs::temp_directory_path() / "csdr_det_1.bin";
  const auto p2 = fs::temp_directory_path() / "csdr_det_2.bin";
  run(p1);
  run(p2);
  CHECK(read_bytes(p1) == read_bytes(p2));
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("finetune rejects the unsupervised objective") {
  std::vector<PairExample> pairs = {{"a", "b", 1}, {"c", "d", 0}};
  const Vocab vocab = build_vocab({"a b c d"});
  EncoderConfig enc;
  enc.embed_dim = 4;
  TrainConfig cfg;
  cfg.objective = Objective::simcse;
  Rng rng(3);
  auto params = init_params(vocab.size(), enc, rng);
  CHECK_THROWS_AS(finetune(std::move(params), pairs, vocab, enc, cfg),
                  std::invalid_argument);
}

TEST_CASE("sbert_head objective trains a head alongside the encoder") {
  std::vector<PairExample> pairs;
  for (int i = 0; i < 16; ++i) {
    pairs.push_back({"m" + std::to_string(i % 4), "n" + std::to_string(i % 4),
                     i % 2});
  }
  std::vector<std::string> corpus;
  for (const auto& p : pairs) {
    corpus.push_back(p.text_a);
    corpus.push_back(p.text_b);
  }
  const Vocab vocab = build_vocab(corpus);
  EncoderConfig enc;
  enc.embed_dim = 6;
  enc.max_len = 4;
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.objective = Objective::sbert_head;
  Rng rng(17);
  auto initial = init_params(vocab.size(), enc, rng);
  const auto result = finetune(std::move(initial), pairs, vocab, enc, cfg);
  REQUIRE(result.head.has_value());
  CHECK(result.head->rows == 2);
  CHECK(result.head->cols == 18);
  CHECK(all_finite(result.head->data));
}

TEST_CASE("fit_head learns a separable problem on a frozen encoder") {
  // two tokens with orthogonal crafted embeddings; label = same token
  const Vocab vocab = build_vocab({"aa bb"});
  EncoderConfig enc;
  enc.embed_dim = 4;
  enc.max_len = 4;
  enc.use_position = false;
  EncoderParams params;
  params.token_table = Mat(vocab.size(), 4);
  params.position_table = Mat(enc.max_len, 4);
  params.token_table.at(3, 0) = 1.0;  // "aa"
  params.token_table.at(4, 1) = 1.0;  // "bb"

  std::vector<PairExample> pairs;
  for (int i = 0; i < 16; ++i) {
    if (i % 2 == 0) {
      pairs.push_back({"aa", "aa", 1});
    } else {
      pairs.push_back({"aa", "bb", 0});
    }
  }
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 8;
  cfg.objective = Objective::sbert_head;
  const Mat head = fit_head(params, pairs, vocab, enc, cfg);

  const Vec same = forward(encode_ids("aa", vocab, 4), params, enc).embedding;
  const Vec other = forward(encode_ids("bb", vocab, 4), params, enc).embedding;
  const Vec logit_pos = head_logits(same, same, head);
  const Vec logit_neg = head_logits(same, other, head);
  CHECK(logit_pos[1] - logit_pos[0] > 0.0);
  CHECK(logit_neg[0] - logit_neg[1] > 0.0);
}

}  // TEST_SUITE
