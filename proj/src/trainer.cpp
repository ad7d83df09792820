#include "csdr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace csdr {
namespace {

// Substream salts off the master seed.
constexpr std::uint64_t kSaltInit = 1;
constexpr std::uint64_t kSaltShuffle = 2;
constexpr std::uint64_t kSaltDropout = 3;
constexpr std::uint64_t kSaltHead = 4;

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

Objective objective_from_string(const std::string& name) {
  if (name == "simcse") return Objective::simcse;
  if (name == "cosent") return Objective::cosent;
  if (name == "cosine_pair") return Objective::cosine_pair;
  if (name == "sbert_head") return Objective::sbert_head;
  throw std::invalid_argument("unknown objective: " + name);
}

std::string objective_to_string(Objective o) {
  switch (o) {
    case Objective::simcse: return "simcse";
    case Objective::cosent: return "cosent";
    case Objective::cosine_pair: return "cosine_pair";
    case Objective::sbert_head: return "sbert_head";
  }
  throw std::logic_error("objective_to_string: bad enum");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (lr_min > lr_peak) throw std::invalid_argument("TrainConfig: lr_min must be <= lr_peak");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw std::invalid_argument("TrainConfig: warmup_fraction must be in [0, 1)");
  }
  if (tau <= 0.0) throw std::invalid_argument("TrainConfig: tau must be positive");
  if (lambda <= 0.0) throw std::invalid_argument("TrainConfig: lambda must be positive");
}

LrSchedule LrSchedule::make(std::size_t num_examples, std::size_t total_steps,
                            const TrainConfig& config) {
  LrSchedule s;
  s.warmup_steps = static_cast<std::size_t>(
      std::ceil(config.warmup_fraction * static_cast<double>(num_examples)));
  s.warmup_steps = std::min(s.warmup_steps, total_steps);
  s.total_steps = total_steps;
  s.lr_peak = config.lr_peak;
  s.lr_min = config.lr_min;
  return s;
}

double lr_at(std::size_t step, const LrSchedule& schedule) {
  if (step >= schedule.total_steps) {
    throw std::out_of_range("lr_at: step out of range");
  }
  if (schedule.warmup_steps > 0 && step <= schedule.warmup_steps) {
    return schedule.lr_peak * static_cast<double>(step) /
           static_cast<double>(schedule.warmup_steps);
  }
  const std::size_t last = schedule.total_steps - 1;
  if (last <= schedule.warmup_steps) return schedule.lr_peak;
  if (step == last) return schedule.lr_min;  // endpoint exact, no rounding
  const double frac = static_cast<double>(step - schedule.warmup_steps) /
                      static_cast<double>(last - schedule.warmup_steps);
  return schedule.lr_peak + (schedule.lr_min - schedule.lr_peak) * frac;
}

void AdamSlot::update(Mat& param, const Mat& grad, double lr, std::size_t t,
                      double beta1, double beta2, double eps) {
  if (param.rows != grad.rows || param.cols != grad.cols ||
      param.rows != m.rows || param.cols != m.cols) {
    throw std::invalid_argument("AdamSlot: shape mismatch");
  }
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.data.size(); ++i) {
    const double g = grad.data[i];
    m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * g;
    v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * g * g;
    const double mhat = m.data[i] / bc1;
    const double vhat = v.data[i] / bc2;
    param.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

PretrainResult pretrain_simcse(const std::vector<std::string>& corpus,
                               const Vocab& vocab, const EncoderConfig& enc_config,
                               const TrainConfig& config) {
  enc_config.validate();
  config.validate();
  if (corpus.size() < config.batch_size) {
    throw std::invalid_argument("pretrain_simcse: corpus smaller than one batch");
  }
  if (std::adjacent_find(corpus.begin(), corpus.end(), std::not_equal_to<>()) ==
      corpus.end()) {
    std::cerr << "warning: pretrain corpus is degenerate (all sentences identical)\n";
  }

  const Rng master(config.seed);
  Rng init_rng = master.derive(kSaltInit);
  Rng shuffle_rng = master.derive(kSaltShuffle);
  Rng dropout_rng = master.derive(kSaltDropout);

  PretrainResult result;
  result.params = init_params(vocab.size(), enc_config, init_rng);

  const std::size_t n = corpus.size();
  const std::size_t steps_per_epoch = ceil_div(n, config.batch_size);
  const auto schedule =
      LrSchedule::make(n, config.epochs * steps_per_epoch, config);

  // Encode once; sentences do not change across epochs.
  std::vector<std::vector<std::int32_t>> encoded(n);
  for (std::size_t i = 0; i < n; ++i) {
    encoded[i] = encode_ids(corpus[i], vocab, enc_config.max_len);
  }

  AdamSlot token_slot(result.params.token_table);
  AdamSlot pos_slot(result.params.position_table);
  ParamGrads grads(result.params);
  std::size_t global_step = 0;
  std::size_t adam_t = 0;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t example_count = 0;
    double lr_last = 0.0;

    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, n - start);
      Mat views_a(b, enc_config.embed_dim);
      Mat views_b(b, enc_config.embed_dim);
      std::vector<ForwardTrace> traces_a(b), traces_b(b);

      for (std::size_t k = 0; k < b; ++k) {
        const auto& ids = encoded[order[start + k]];
        auto [ra, rb] = forward_two_views(ids, result.params, enc_config, dropout_rng);
        std::copy(ra.embedding.begin(), ra.embedding.end(), views_a.row(k));
        std::copy(rb.embedding.begin(), rb.embedding.end(), views_b.row(k));
        traces_a[k] = std::move(ra.trace);
        traces_b[k] = std::move(rb.trace);
      }

      const auto batch = infonce_loss(views_a, views_b, config.tau);
      grads.zero();
      for (std::size_t k = 0; k < b; ++k) {
        backward(traces_a[k], batch.grad_a.row_span(k), grads);
        backward(traces_b[k], batch.grad_b.row_span(k), grads);
      }

      const double lr = lr_at(global_step, schedule);
      ++adam_t;
      token_slot.update(result.params.token_table, grads.token_table, lr, adam_t);
      pos_slot.update(result.params.position_table, grads.position_table, lr, adam_t);

      loss_sum += batch.loss * static_cast<double>(b);
      example_count += b;
      lr_last = lr;
      ++global_step;
    }
    result.history.push_back(
        {epoch + 1, loss_sum / static_cast<double>(example_count), lr_last});
  }
  return result;
}

namespace {

struct EncodedPair {
  std::vector<std::int32_t> ids_a;
  std::vector<std::int32_t> ids_b;
  int label = 0;
};

std::vector<EncodedPair> encode_pairs(std::span<const PairExample> pairs,
                                      const Vocab& vocab, std::size_t max_len) {
  std::vector<EncodedPair> encoded(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    encoded[i].ids_a = encode_ids(pairs[i].text_a, vocab, max_len);
    encoded[i].ids_b = encode_ids(pairs[i].text_b, vocab, max_len);
    encoded[i].label = pairs[i].label;
  }
  return encoded;
}

}  // namespace

FinetuneResult finetune(EncoderParams initial, std::span<const PairExample> pairs,
                        const Vocab& vocab, const EncoderConfig& enc_config,
                        const TrainConfig& config) {
  enc_config.validate();
  config.validate();
  if (config.objective == Objective::simcse) {
    throw std::invalid_argument("finetune: objective must be a supervised one");
  }
  if (pairs.empty()) throw std::invalid_argument("finetune: no training pairs");

  const Rng master(config.seed);
  Rng shuffle_rng = master.derive(kSaltShuffle);

  FinetuneResult result;
  result.params = std::move(initial);
  if (result.params.token_table.rows != vocab.size()) {
    throw std::invalid_argument("finetune: params do not match vocab size");
  }

  const std::size_t d = enc_config.embed_dim;
  if (config.objective == Objective::sbert_head) {
    Rng head_rng = master.derive(kSaltHead);
    Mat head(2, 3 * d);
    for (double& w : head.data) w = head_rng.uniform(-0.05, 0.05);
    result.head = std::move(head);
  }

  const std::size_t n = pairs.size();
  const std::size_t steps_per_epoch = ceil_div(n, config.batch_size);
  const auto schedule =
      LrSchedule::make(n, config.epochs * steps_per_epoch, config);
  const auto encoded = encode_pairs(pairs, vocab, enc_config.max_len);

  AdamSlot token_slot(result.params.token_table);
  AdamSlot pos_slot(result.params.position_table);
  std::optional<AdamSlot> head_slot;
  if (result.head) head_slot.emplace(*result.head);

  ParamGrads grads(result.params);
  Mat head_grad = result.head ? Mat(2, 3 * d) : Mat();
  std::size_t global_step = 0;
  std::size_t adam_t = 0;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t example_count = 0;
    double lr_last = 0.0;

    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, n - start);
      Mat u(b, d), v(b, d);
      std::vector<ForwardTrace> traces_a(b), traces_b(b);
      std::vector<int> labels(b);
      for (std::size_t k = 0; k < b; ++k) {
        const auto& pair = encoded[order[start + k]];
        auto ra = forward(pair.ids_a, result.params, enc_config);
        auto rb = forward(pair.ids_b, result.params, enc_config);
        std::copy(ra.embedding.begin(), ra.embedding.end(), u.row(k));
        std::copy(rb.embedding.begin(), rb.embedding.end(), v.row(k));
        traces_a[k] = std::move(ra.trace);
        traces_b[k] = std::move(rb.trace);
        labels[k] = pair.label;
      }

      grads.zero();
      if (!head_grad.data.empty()) head_grad.fill(0.0);
      double batch_loss = 0.0;

      switch (config.objective) {
        case Objective::cosent: {
          const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
          const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
          if (!has_pos || !has_neg) {
            ++result.degenerate_batches;  // empty cross-product, zero loss
            break;
          }
          const auto out = cosent_loss(u, v, labels, config.lambda);
          batch_loss = out.loss;
          for (std::size_t k = 0; k < b; ++k) {
            backward(traces_a[k], out.grad_a.row_span(k), grads);
            backward(traces_b[k], out.grad_b.row_span(k), grads);
          }
          break;
        }
        case Objective::cosine_pair: {
          const double inv_b = 1.0 / static_cast<double>(b);
          Vec scaled(d);
          for (std::size_t k = 0; k < b; ++k) {
            const auto out = cosine_pair_loss(u.row_span(k), v.row_span(k), labels[k]);
            batch_loss += out.loss * inv_b;
            for (std::size_t c = 0; c < d; ++c) scaled[c] = out.grad_u[c] * inv_b;
            backward(traces_a[k], scaled, grads);
            for (std::size_t c = 0; c < d; ++c) scaled[c] = out.grad_v[c] * inv_b;
            backward(traces_b[k], scaled, grads);
          }
          break;
        }
        case Objective::sbert_head: {
          const double inv_b = 1.0 / static_cast<double>(b);
          Vec scaled(d);
          for (std::size_t k = 0; k < b; ++k) {
            const auto out =
                sbert_head_loss(u.row_span(k), v.row_span(k), *result.head, labels[k]);
            batch_loss += out.loss * inv_b;
            for (std::size_t i = 0; i < head_grad.data.size(); ++i) {
              head_grad.data[i] += out.grad_head.data[i] * inv_b;
            }
            for (std::size_t c = 0; c < d; ++c) scaled[c] = out.grad_u[c] * inv_b;
            backward(traces_a[k], scaled, grads);
            for (std::size_t c = 0; c < d; ++c) scaled[c] = out.grad_v[c] * inv_b;
            backward(traces_b[k], scaled, grads);
          }
          break;
        }
        case Objective::simcse:
          throw std::logic_error("finetune: unreachable objective");
      }

      const double lr = lr_at(global_step, schedule);
      ++adam_t;
      token_slot.update(result.params.token_table, grads.token_table, lr, adam_t);
      pos_slot.update(result.params.position_table, grads.position_table, lr, adam_t);
      if (head_slot) head_slot->update(*result.head, head_grad, lr, adam_t);

      loss_sum += batch_loss * static_cast<double>(b);
      example_count += b;
      lr_last = lr;
      ++global_step;
    }
    result.history.push_back(
        {epoch + 1, loss_sum / static_cast<double>(example_count), lr_last});
  }

  if (result.degenerate_batches > 0) {
    std::cerr << "note: " << result.degenerate_batches
              << " single-label batch(es) contributed zero loss\n";
  }
  return result;
}

Mat fit_head(const EncoderParams& params, std::span<const PairExample> pairs,
             const Vocab& vocab, const EncoderConfig& enc_config,
             const TrainConfig& config) {
  enc_config.validate();
  config.validate();
  if (pairs.empty()) throw std::invalid_argument("fit_head: no training pairs");

  const Rng master(config.seed);
  Rng head_rng = master.derive(kSaltHead);
  Rng shuffle_rng = master.derive(kSaltShuffle);

  const std::size_t d = enc_config.embed_dim;
  Mat head(2, 3 * d);
  for (double& w : head.data) w = head_rng.uniform(-0.05, 0.05);

  // Encoder is frozen: embed every pair once up front.
  const std::size_t n = pairs.size();
  Mat u(n, d), v(n, d);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ids_a = encode_ids(pairs[i].text_a, vocab, enc_config.max_len);
    const auto ids_b = encode_ids(pairs[i].text_b, vocab, enc_config.max_len);
    const Vec ea = forward(ids_a, params, enc_config).embedding;
    const Vec eb = forward(ids_b, params, enc_config).embedding;
    std::copy(ea.begin(), ea.end(), u.row(i));
    std::copy(eb.begin(), eb.end(), v.row(i));
    labels[i] = pairs[i].label;
  }

  const std::size_t steps_per_epoch = ceil_div(n, config.batch_size);
  const auto schedule =
      LrSchedule::make(n, config.epochs * steps_per_epoch, config);

  AdamSlot slot(head);
  Mat grad(2, 3 * d);
  std::size_t global_step = 0;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, n - start);
      grad.fill(0.0);
      const double inv_b = 1.0 / static_cast<double>(b);
      for (std::size_t k = 0; k < b; ++k) {
        const std::size_t i = order[start + k];
        const auto out = sbert_head_loss(u.row_span(i), v.row_span(i), head, labels[i]);
        for (std::size_t j = 0; j < grad.data.size(); ++j) {
          grad.data[j] += out.grad_head.data[j] * inv_b;
        }
      }
      slot.update(head, grad, lr_at(global_step, schedule), global_step + 1);
      ++global_step;
    }
  }
  return head;
}

}  // namespace csdr
