#include "csdr/eval.hpp"

#include "csdr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace csdr {

ConfusionMetrics confusion_metrics(const ConfusionCounts& counts) {
  if (counts.total() == 0) {
    throw std::invalid_argument("confusion_metrics: empty counts");
  }
  ConfusionMetrics m;
  const auto tp = static_cast<double>(counts.tp);
  const auto fp = static_cast<double>(counts.fp);
  const auto fn = static_cast<double>(counts.fn);
  const auto tn = static_cast<double>(counts.tn);

  if (counts.tp + counts.fp == 0) {
    m.precision_flagged = true;
  } else {
    m.precision = tp / (tp + fp);
  }
  if (counts.tp + counts.fn == 0) {
    m.recall_flagged = true;
  } else {
    m.recall = tp / (tp + fn);
  }
  if (m.precision + m.recall == 0.0) {
    m.f1_flagged = true;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  m.accuracy = (tp + tn) / (tp + tn + fp + fn);
  return m;
}

Vec average_ranks(std::span<const double> xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&xs](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });

  Vec ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    // positions i..j share the value; each gets the mean 1-based rank
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("spearman: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("spearman: need at least 2 points");

  const Vec rx = average_ranks(xs);
  const Vec ry = average_ranks(ys);
  const std::size_t n = xs.size();
  const double mean = (static_cast<double>(n) + 1.0) / 2.0;

  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw std::invalid_argument("spearman: constant input, correlation undefined");
  }
  return sxy / std::sqrt(sxx * syy);
}

ThresholdSearch best_threshold(std::span<const double> scores,
                               std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("best_threshold: length mismatch");
  }
  const std::size_t n_pos = static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), 1));
  if (n_pos == 0 || n_pos == labels.size()) {
    throw std::invalid_argument("best_threshold: need both labels present");
  }

  // Sort scores ascending, carrying labels; suffix sums give the confusion
  // counts for any candidate in one lookup.
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  std::vector<std::size_t> pos_suffix(n + 1, 0);
  for (std::size_t i = n; i-- > 0;) {
    pos_suffix[i] = pos_suffix[i + 1] + (labels[order[i]] == 1 ? 1 : 0);
  }

  // Candidate thresholds: midpoints between adjacent distinct scores, or the
  // single score value itself when all scores tie.
  struct Candidate {
    double threshold;
    std::size_t first_ge;  // first sorted position with score >= threshold
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double lo = scores[order[i]];
    const double hi = scores[order[i + 1]];
    if (lo != hi) candidates.push_back({0.5 * (lo + hi), i + 1});
  }
  if (candidates.empty()) candidates.push_back({scores[order[0]], 0});

  ThresholdSearch best{candidates.front().threshold, -1.0};
  for (const auto& cand : candidates) {
    ConfusionCounts counts;
    counts.tp = pos_suffix[cand.first_ge];
    counts.fp = (n - cand.first_ge) - counts.tp;
    counts.fn = n_pos - counts.tp;
    counts.tn = (labels.size() - n_pos) - counts.fp;
    const double f1 = confusion_metrics(counts).f1;
    if (f1 > best.f1) best = {cand.threshold, f1};  // ties keep the lower threshold
  }
  return best;
}

double pair_score(const ModelBundle& bundle, const Vocab& vocab,
                  const PairExample& pair) {
  const auto ids_a = encode_ids(pair.text_a, vocab, bundle.config.max_len);
  const auto ids_b = encode_ids(pair.text_b, vocab, bundle.config.max_len);
  const Vec u = forward(ids_a, bundle.params, bundle.config).embedding;
  const Vec v = forward(ids_b, bundle.params, bundle.config).embedding;

  if (bundle.store) {
    if (!bundle.head) {
      throw std::invalid_argument("pair_score: fusion needs a classifier head");
    }
    Vec query(u.size());
    for (std::size_t c = 0; c < u.size(); ++c) query[c] = 0.5 * (u[c] + v[c]);
    const Vec logits = head_logits(u, v, *bundle.head);
    const Vec fused = fuse(logits, query, *bundle.store, bundle.fusion);
    return fused[1];
  }
  return cosine_similarity(u, v);
}

EvalReport evaluate_pairs(const ModelBundle& bundle, const Vocab& vocab,
                          std::span<const PairExample> pairs,
                          const ThresholdPolicy& policy) {
  if (pairs.empty()) throw std::invalid_argument("evaluate_pairs: no pairs");

  EvalReport report;
  report.n = pairs.size();
  report.scores.reserve(pairs.size());
  report.labels.reserve(pairs.size());
  for (const auto& pair : pairs) {
    report.scores.push_back(pair_score(bundle, vocab, pair));
    report.labels.push_back(pair.label);
  }

  report.threshold_searched = policy.search;
  report.threshold = policy.search
                         ? best_threshold(report.scores, report.labels).threshold
                         : policy.fixed;

  for (std::size_t i = 0; i < report.scores.size(); ++i) {
    const bool predicted = report.scores[i] >= report.threshold;
    const bool actual = report.labels[i] == 1;
    if (predicted && actual) ++report.counts.tp;
    else if (predicted && !actual) ++report.counts.fp;
    else if (!predicted && actual) ++report.counts.fn;
    else ++report.counts.tn;
  }
  report.metrics = confusion_metrics(report.counts);

  Vec label_values(report.labels.begin(), report.labels.end());
  report.spearman_score = spearman(report.scores, label_values);
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  return nlohmann::json{
      {"n", report.n},
      {"threshold", report.threshold},
      {"threshold_searched", report.threshold_searched},
      {"counts",
       {{"tp", report.counts.tp},
        {"fp", report.counts.fp},
        {"fn", report.counts.fn},
        {"tn", report.counts.tn}}},
      {"precision", report.metrics.precision},
      {"recall", report.metrics.recall},
      {"f1", report.metrics.f1},
      {"accuracy", report.metrics.accuracy},
      {"spearman", report.spearman_score},
      {"flags",
       {{"precision", report.metrics.precision_flagged},
        {"recall", report.metrics.recall_flagged},
        {"f1", report.metrics.f1_flagged}}},
      {"scores", report.scores},
      {"labels", report.labels},
  };
}

std::vector<AblationRowSpec> ablation_grid() {
  return {
      {"head", "sbert_head", false, false},
      {"head+simcse", "sbert_head", true, false},
      {"cosent", "cosent", false, false},
      {"cosent+simcse", "cosent", true, false},
      {"cosent+knn", "cosent", false, true},
      {"cosent+simcse+knn", "cosent", true, true},
  };
}

std::string ablation_table_text(std::span<const AblationRow> rows) {
  std::size_t name_width = std::string("Approach").size();
  for (const auto& row : rows) name_width = std::max(name_width, row.spec.name.size());

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_width + 2)) << "Approach"
      << std::right << std::setw(12) << "F-score" << std::setw(12) << "Accuracy"
      << std::setw(12) << "Spearman" << '\n';

  auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << 100.0 * v << '%';
    return s.str();
  };
  for (const auto& row : rows) {
    out << std::left << std::setw(static_cast<int>(name_width + 2)) << row.spec.name;
    if (row.ok) {
      out << std::right << std::setw(12) << pct(row.report.metrics.f1)
          << std::setw(12) << pct(row.report.metrics.accuracy) << std::setw(12)
          << pct(row.report.spearman_score);
    } else {
      out << std::right << std::setw(12) << "ERROR" << std::setw(12) << "-"
          << std::setw(12) << "-";
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json ablation_to_json(std::span<const AblationRow> rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json entry{
        {"name", row.spec.name},
        {"objective", row.spec.objective},
        {"pretrain", row.spec.pretrain},
        {"knn", row.spec.knn},
        {"ok", row.ok},
    };
    if (row.ok) {
      entry["report"] = report_to_json(row.report);
    } else {
      entry["error"] = row.error;
    }
    arr.push_back(std::move(entry));
  }
  return arr;
}

}  // namespace csdr
