// End-to-end run orchestration shared by the CLI, the ablation runner and
// the acceptance suite: split, optional contrastive pre-training, supervised
// fine-tuning, optional fusion pieces, evaluation on the held-out split.
#pragma once

#include <cstdint>
#include <vector>

#include "csdr/eval.hpp"
#include "csdr/trainer.hpp"

namespace csdr {

struct PipelineConfig {
  EncoderConfig encoder;
  TrainConfig train;                // objective used by fine-tuning
  std::size_t pretrain_epochs = 10;
  bool use_pretrain = true;
  bool use_knn = false;
  FusionConfig fusion;
  double split_ratio = 0.8;
  ThresholdPolicy threshold;
  std::uint64_t seed = 42;          // master seed: split, init, training
};

struct PipelineResult {
  ModelBundle bundle;
  std::vector<EpochRecord> pretrain_history;
  std::vector<EpochRecord> finetune_history;
  EvalReport report;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

PipelineResult run_pipeline(const std::vector<std::string>& corpus,
                            const std::vector<PairExample>& pairs,
                            const Vocab& vocab, const PipelineConfig& config);

// One ablation row = one fully seeded pipeline with the row's toggles.
std::vector<AblationRow> run_ablation(const std::vector<std::string>& corpus,
                                      const std::vector<PairExample>& pairs,
                                      const Vocab& vocab,
                                      const PipelineConfig& base,
                                      const std::vector<AblationRowSpec>& grid);

}  // namespace csdr
