#include "csdr/pipeline.hpp"

#include <stdexcept>

namespace csdr {
namespace {

constexpr std::uint64_t kSaltFreshInit = 1;  // matches the trainer's init salt

}  // namespace

PipelineResult run_pipeline(const std::vector<std::string>& corpus,
                            const std::vector<PairExample>& pairs,
                            const Vocab& vocab, const PipelineConfig& config) {
  config.encoder.validate();
  config.train.validate();
  config.fusion.validate();

  auto [train_pairs, test_pairs] =
      split_pairs(pairs, config.split_ratio, config.seed);

  PipelineResult result;
  result.n_train = train_pairs.size();
  result.n_test = test_pairs.size();

  EncoderParams initial;
  if (config.use_pretrain) {
    if (corpus.empty()) {
      throw std::invalid_argument("run_pipeline: pre-training needs a corpus");
    }
    TrainConfig pre = config.train;
    pre.objective = Objective::simcse;
    pre.epochs = config.pretrain_epochs;
    pre.seed = config.seed;
    auto pretrained = pretrain_simcse(corpus, vocab, config.encoder, pre);
    initial = std::move(pretrained.params);
    result.pretrain_history = std::move(pretrained.history);
  } else {
    Rng init_rng = Rng(config.seed).derive(kSaltFreshInit);
    initial = init_params(vocab.size(), config.encoder, init_rng);
  }

  TrainConfig fine = config.train;
  fine.seed = config.seed;
  auto tuned = finetune(std::move(initial), train_pairs, vocab, config.encoder, fine);

  result.bundle.config = config.encoder;
  result.bundle.params = std::move(tuned.params);
  result.bundle.fusion = config.fusion;
  result.finetune_history = std::move(tuned.history);

  if (config.use_knn) {
    if (tuned.head) {
      result.bundle.head = std::move(tuned.head);
    } else {
      // Fusion needs a linear classifier; fit one on the frozen encoder.
      TrainConfig head_cfg = fine;
      head_cfg.objective = Objective::sbert_head;
      result.bundle.head = fit_head(result.bundle.params, train_pairs, vocab,
                                    config.encoder, head_cfg);
    }
    result.bundle.store =
        build_store(result.bundle.params, config.encoder, vocab, train_pairs);
  } else if (tuned.head) {
    result.bundle.head = std::move(tuned.head);
  }

  result.report =
      evaluate_pairs(result.bundle, vocab, test_pairs, config.threshold);
  return result;
}

std::vector<AblationRow> run_ablation(const std::vector<std::string>& corpus,
                                      const std::vector<PairExample>& pairs,
                                      const Vocab& vocab,
                                      const PipelineConfig& base,
                                      const std::vector<AblationRowSpec>& grid) {
  if (grid.empty()) throw std::invalid_argument("run_ablation: empty grid");

  std::vector<AblationRow> rows;
  rows.reserve(grid.size());
  for (const auto& spec : grid) {
    AblationRow row;
    row.spec = spec;
    try {
      PipelineConfig cfg = base;
      cfg.train.objective = objective_from_string(spec.objective);
      cfg.use_pretrain = spec.pretrain;
      cfg.use_knn = spec.knn;
      row.report = run_pipeline(corpus, pairs, vocab, cfg).report;
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace csdr
