// Metric suite (precision/recall/F1/accuracy, tie-aware Spearman), binary
// decision thresholding, pair-set evaluation over a model bundle, and the
// six-configuration ablation runner.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csdr/encoder.hpp"
#include "csdr/knn.hpp"
#include "csdr/numeric.hpp"
#include "csdr/text.hpp"

#include "json.hpp"

namespace csdr {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
};

// Zero-denominator metrics are reported as 0 with the matching flag set,
// so ablation grids never abort on degenerate rows.
struct ConfusionMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  bool precision_flagged = false;
  bool recall_flagged = false;
  bool f1_flagged = false;
};

ConfusionMetrics confusion_metrics(const ConfusionCounts& counts);

// Average ranks (1-based), ties averaged.
Vec average_ranks(std::span<const double> xs);

// Tie-aware Spearman: Pearson correlation of average ranks. Coincides with
// the classic 1 - 6*sum(d^2)/(n(n^2-1)) form when no ties exist.
// Throws on constant input (undefined correlation).
double spearman(std::span<const double> xs, std::span<const double> ys);

// Scan thresholds at midpoints between adjacent distinct sorted scores
// (decision rule: score >= threshold). Returns the F1-maximizing threshold,
// ties resolved toward the lower threshold. Needs >= 1 positive and
// >= 1 negative label.
struct ThresholdSearch {
  double threshold = 0.5;
  double f1 = 0.0;
};
ThresholdSearch best_threshold(std::span<const double> scores,
                               std::span<const int> labels);

// Trained model surface used by evaluation and the CLI: encoder snapshot plus
// the optional fusion pieces.
struct ModelBundle {
  EncoderConfig config;
  EncoderParams params;
  std::optional<Mat> head;
  std::optional<NeighborStore> store;
  FusionConfig fusion;
};

struct ThresholdPolicy {
  bool search = false;   // run best_threshold over the evaluated scores
  double fixed = 0.5;
};

// Fused probability of class 1 when a store is present (requires a head),
// raw cosine similarity otherwise.
double pair_score(const ModelBundle& bundle, const Vocab& vocab,
                  const PairExample& pair);

struct EvalReport {
  std::size_t n = 0;
  double threshold = 0.5;
  bool threshold_searched = false;
  ConfusionCounts counts;
  ConfusionMetrics metrics;
  double spearman_score = 0.0;
  std::vector<double> scores;
  std::vector<int> labels;
};

EvalReport evaluate_pairs(const ModelBundle& bundle, const Vocab& vocab,
                          std::span<const PairExample> pairs,
                          const ThresholdPolicy& policy);

nlohmann::json report_to_json(const EvalReport& report);

// ---- ablation -------------------------------------------------------------

struct AblationRowSpec {
  std::string name;
  std::string objective;  // finetune objective
  bool pretrain = false;
  bool knn = false;
};

// The six-row grid: baseline head first, the full configuration last.
std::vector<AblationRowSpec> ablation_grid();

struct AblationRow {
  AblationRowSpec spec;
  bool ok = false;
  std::string error;
  EvalReport report;
};

std::string ablation_table_text(std::span<const AblationRow> rows);
nlohmann::json ablation_to_json(std::span<const AblationRow> rows);

}  // namespace csdr
