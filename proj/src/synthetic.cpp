#include "csdr/synthetic.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "csdr/rng.hpp"
#include "json.hpp"

namespace csdr {

void SyntheticSpec::validate() const {
  if (topics < 2) throw std::invalid_argument("gen-synthetic: need at least 2 topics");
  if (vocab_size < 10 * topics) {
    throw std::invalid_argument("gen-synthetic: need at least 10 tokens per topic");
  }
  if (pairs < 10) throw std::invalid_argument("gen-synthetic: need at least 10 pairs");
  if (min_tokens < 1 || max_tokens < min_tokens) {
    throw std::invalid_argument("gen-synthetic: bad token-count range");
  }
}

namespace {

std::vector<std::vector<std::string>> topic_vocabularies(const SyntheticSpec& spec) {
  // Tokens w0..w{V-1}, dealt into disjoint topic slices; the remainder of
  // V / K goes to the leading topics so every token is owned by one topic.
  std::vector<std::vector<std::string>> topics(spec.topics);
  const std::size_t base = spec.vocab_size / spec.topics;
  const std::size_t extra = spec.vocab_size % spec.topics;
  std::size_t next = 0;
  for (std::size_t t = 0; t < spec.topics; ++t) {
    const std::size_t count = base + (t < extra ? 1 : 0);
    for (std::size_t i = 0; i < count; ++i) {
      topics[t].push_back("w" + std::to_string(next++));
    }
  }
  return topics;
}

std::string sample_sentence(const std::vector<std::string>& topic_tokens,
                            const SyntheticSpec& spec, Rng& rng) {
  const std::size_t span = spec.max_tokens - spec.min_tokens + 1;
  const std::size_t len = spec.min_tokens + rng.below(span);
  std::string out;
  for (std::size_t i = 0; i < len; ++i) {
    if (i > 0) out += ' ';
    out += topic_tokens[rng.below(topic_tokens.size())];
  }
  return out;
}

}  // namespace

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto topics = topic_vocabularies(spec);
  Rng rng(spec.seed);

  const std::size_t n_pos = spec.pairs / 2;
  SyntheticData data;
  data.pairs.reserve(spec.pairs);
  data.pair_topics.reserve(spec.pairs);

  for (std::size_t i = 0; i < spec.pairs; ++i) {
    PairExample ex;
    int topic_a, topic_b;
    if (i < n_pos) {
      topic_a = topic_b = static_cast<int>(rng.below(spec.topics));
      ex.label = 1;
    } else {
      topic_a = static_cast<int>(rng.below(spec.topics));
      topic_b = static_cast<int>((topic_a + 1 + rng.below(spec.topics - 1)) %
                                 spec.topics);
      ex.label = 0;
    }
    ex.text_a = sample_sentence(topics[static_cast<std::size_t>(topic_a)], spec, rng);
    ex.text_b = sample_sentence(topics[static_cast<std::size_t>(topic_b)], spec, rng);
    data.pairs.push_back(std::move(ex));
    data.pair_topics.emplace_back(topic_a, topic_b);
  }

  // Mix labels so training batches see both classes.
  std::vector<std::size_t> order(spec.pairs);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  SyntheticData mixed;
  mixed.pairs.reserve(spec.pairs);
  mixed.pair_topics.reserve(spec.pairs);
  for (std::size_t i : order) {
    mixed.pairs.push_back(std::move(data.pairs[i]));
    mixed.pair_topics.push_back(data.pair_topics[i]);
  }

  mixed.corpus.reserve(2 * spec.pairs);
  for (const auto& pair : mixed.pairs) {
    mixed.corpus.push_back(pair.text_a);
    mixed.corpus.push_back(pair.text_b);
  }
  return mixed;
}

void write_synthetic(const SyntheticData& data, const SyntheticSpec& spec,
                     const std::string& dir) {
  std::filesystem::create_directories(dir);

  {
    std::ofstream out(dir + "/corpus.txt", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("gen-synthetic: cannot write corpus.txt");
    for (const auto& s : data.corpus) out << s << '\n';
  }
  {
    std::ofstream out(dir + "/pairs.tsv", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("gen-synthetic: cannot write pairs.tsv");
    for (const auto& p : data.pairs) {
      out << p.text_a << '\t' << p.text_b << '\t' << p.label << '\n';
    }
  }
  {
    nlohmann::json manifest{
        {"topics", spec.topics},
        {"vocab_size", spec.vocab_size},
        {"pairs", spec.pairs},
        {"seed", spec.seed},
        {"min_tokens", spec.min_tokens},
        {"max_tokens", spec.max_tokens},
    };
    nlohmann::json assignments = nlohmann::json::array();
    for (const auto& [a, b] : data.pair_topics) {
      assignments.push_back(nlohmann::json::array({a, b}));
    }
    manifest["pair_topics"] = std::move(assignments);
    std::ofstream out(dir + "/manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("gen-synthetic: cannot write manifest.json");
    out << manifest.dump(2) << '\n';
  }
}

}  // namespace csdr
