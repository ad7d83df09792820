// Two-phase training: unsupervised contrastive pre-training over a sentence
// corpus, then supervised fine-tuning on labeled pairs. Warmup/decay schedule,
// Adam, and a fully seeded loop: (data, config, seed) determines every byte
// of the result.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csdr/encoder.hpp"
#include "csdr/losses.hpp"
#include "csdr/numeric.hpp"
#include "csdr/text.hpp"

namespace csdr {

enum class Objective { simcse, cosent, cosine_pair, sbert_head };

Objective objective_from_string(const std::string& name);
std::string objective_to_string(Objective o);

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  double lr_peak = 0.01;
  double lr_min = 2e-5;
  double warmup_fraction = 0.05;
  std::uint64_t seed = 42;
  Objective objective = Objective::cosent;
  double tau = SimCSEConfig{}.temperature;
  double lambda = CosentConfig{}.lambda;

  void validate() const;
};

// Linear 0 -> lr_peak over warmup_steps, then linear lr_peak -> lr_min over
// the remaining steps. warmup_steps = ceil(warmup_fraction * num_examples).
struct LrSchedule {
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 0;
  double lr_peak = 0.01;
  double lr_min = 2e-5;

  static LrSchedule make(std::size_t num_examples, std::size_t total_steps,
                         const TrainConfig& config);
};

double lr_at(std::size_t step, const LrSchedule& schedule);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double lr_last = 0.0;
};

// Adam moments for one parameter tensor. Step counter is shared by the owner.
struct AdamSlot {
  Mat m;
  Mat v;

  explicit AdamSlot(const Mat& shape) : m(shape.rows, shape.cols), v(shape.rows, shape.cols) {}
  void update(Mat& param, const Mat& grad, double lr, std::size_t t,
              double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
};

struct PretrainResult {
  EncoderParams params;
  std::vector<EpochRecord> history;
};

// One contrastive step per batch: every sentence is encoded twice under
// independent dropout masks, rows j != i serve as in-batch negatives.
PretrainResult pretrain_simcse(const std::vector<std::string>& corpus,
                               const Vocab& vocab, const EncoderConfig& enc_config,
                               const TrainConfig& config);

struct FinetuneResult {
  EncoderParams params;
  std::optional<Mat> head;  // present when objective == sbert_head
  std::vector<EpochRecord> history;
  std::size_t degenerate_batches = 0;  // single-label batches under cosent
};

FinetuneResult finetune(EncoderParams initial, std::span<const PairExample> pairs,
                        const Vocab& vocab, const EncoderConfig& enc_config,
                        const TrainConfig& config);

// Logistic head trained on frozen encoder embeddings; gives the fusion stage
// a linear classifier when fine-tuning produced none.
Mat fit_head(const EncoderParams& params, std::span<const PairExample> pairs,
             const Vocab& vocab, const EncoderConfig& enc_config,
             const TrainConfig& config);

}  // namespace csdr
