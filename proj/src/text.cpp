#include "csdr/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace csdr {
namespace {

const char* const kReservedNames[] = {"[PAD]", "[UNK]", "[CLS]"};

bool is_cjk(UChar32 cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) ||    // unified ideographs
         (cp >= 0x3400 && cp <= 0x4DBF) ||    // extension A
         (cp >= 0xF900 && cp <= 0xFAFF) ||    // compatibility ideographs
         (cp >= 0x20000 && cp <= 0x2FFFF) ||  // extensions B..F
         (cp >= 0x3040 && cp <= 0x30FF) ||    // kana
         (cp >= 0xAC00 && cp <= 0xD7AF);      // hangul syllables
}

bool is_run_char(UChar32 cp) {
  return (cp >= 'a' && cp <= 'z') || (cp >= '0' && cp <= '9');
}

void append_utf8(std::string& out, UChar32 cp) {
  icu::UnicodeString one(cp);
  one.toUTF8String(out);
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  UErrorCode ec = U_ZERO_ERROR;
  const icu::Normalizer2* nfkc = icu::Normalizer2::getNFKCInstance(ec);
  if (U_FAILURE(ec)) {
    throw std::runtime_error("tokenize: NFKC normalizer unavailable");
  }
  icu::UnicodeString us = icu::UnicodeString::fromUTF8(text);
  icu::UnicodeString norm = nfkc->normalize(us, ec);
  if (U_FAILURE(ec)) {
    throw std::runtime_error("tokenize: normalization failed");
  }

  std::vector<std::string> tokens;
  std::string run;
  auto flush_run = [&] {
    if (!run.empty()) {
      tokens.push_back(run);
      run.clear();
    }
  };

  for (std::int32_t i = 0; i < norm.length();) {
    UChar32 cp = norm.char32At(i);
    i = norm.moveIndex32(i, 1);
    cp = u_tolower(cp);
    if (is_cjk(cp)) {
      flush_run();
      std::string tok;
      append_utf8(tok, cp);
      tokens.push_back(std::move(tok));
    } else if (is_run_char(cp)) {
      append_utf8(run, cp);
    } else {
      flush_run();  // separator
    }
  }
  flush_run();
  return tokens;
}

Vocab::Vocab(std::vector<std::string> tokens) {
  id_to_token_.reserve(tokens.size() + 3);
  for (const char* name : kReservedNames) id_to_token_.emplace_back(name);
  for (auto& t : tokens) {
    if (t.empty()) throw std::invalid_argument("Vocab: empty token");
    for (const char* name : kReservedNames) {
      if (t == name) throw std::invalid_argument("Vocab: reserved token name: " + t);
    }
    id_to_token_.push_back(std::move(t));
  }
  token_to_id_.reserve(id_to_token_.size());
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    auto [it, inserted] = token_to_id_.emplace(id_to_token_[i], static_cast<std::int32_t>(i));
    (void)it;
    if (!inserted) throw std::invalid_argument("Vocab: duplicate token: " + id_to_token_[i]);
  }
}

Vocab Vocab::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("Vocab: cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.size() < 3 || lines[0] != kReservedNames[0] ||
      lines[1] != kReservedNames[1] || lines[2] != kReservedNames[2]) {
    throw std::runtime_error("Vocab: " + path + " missing reserved header lines");
  }
  return Vocab(std::vector<std::string>(lines.begin() + 3, lines.end()));
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("Vocab: cannot write " + path);
  for (const auto& t : id_to_token_) out << t << '\n';
  if (!out) throw std::runtime_error("Vocab: write failed for " + path);
}

std::int32_t Vocab::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token_of(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw std::out_of_range("Vocab: id out of range");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a 64
  auto mix = [&h](char c) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  };
  for (const auto& t : id_to_token_) {
    for (char c : t) mix(c);
    mix('\n');
  }
  return h;
}

std::string Vocab::decode(const std::vector<std::int32_t>& ids) const {
  std::string out;
  for (std::int32_t id : ids) {
    if (id == kPadId || id == kUnkId || id == kClsId) continue;
    if (!out.empty()) out += ' ';
    out += token_of(id);
  }
  return out;
}

Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t min_freq) {
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  if (min_freq < 1) throw std::invalid_argument("build_vocab: min_freq must be >= 1");

  struct Entry {
    std::size_t count = 0;
    std::size_t first_seen = 0;
  };
  std::unordered_map<std::string, Entry> stats;
  std::size_t position = 0;
  for (const auto& sentence : corpus) {
    for (auto& tok : tokenize(sentence)) {
      auto [it, inserted] = stats.try_emplace(std::move(tok), Entry{});
      if (inserted) it->second.first_seen = position;
      ++it->second.count;
      ++position;
    }
  }

  std::vector<std::pair<std::string, Entry>> kept;
  kept.reserve(stats.size());
  for (auto& [tok, entry] : stats) {
    if (entry.count >= min_freq) kept.emplace_back(tok, entry);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first_seen < b.second.first_seen;
  });

  std::vector<std::string> ordered;
  ordered.reserve(kept.size());
  for (auto& [tok, entry] : kept) ordered.push_back(std::move(tok));
  return Vocab(std::move(ordered));
}

std::vector<std::int32_t> encode_ids(const std::string& text, const Vocab& vocab,
                                     std::size_t max_len) {
  if (max_len < 2) throw std::invalid_argument("encode_ids: max_len must be >= 2");
  std::vector<std::int32_t> ids;
  ids.push_back(kClsId);
  for (const auto& tok : tokenize(text)) {
    if (ids.size() >= max_len) break;
    ids.push_back(vocab.id_of(tok));
  }
  return ids;
}

std::pair<std::vector<PairExample>, std::vector<PairExample>> split_pairs(
    const std::vector<PairExample>& examples, double ratio, std::uint64_t seed) {
  if (examples.size() < 2) {
    throw std::invalid_argument("split_pairs: need at least 2 examples");
  }
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("split_pairs: ratio must be in (0, 1)");
  }
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const auto n_train = static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(examples.size())));
  std::vector<PairExample> train, test;
  train.reserve(n_train);
  test.reserve(examples.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train : test).push_back(examples[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

namespace {

[[noreturn]] void line_error(const std::string& path, std::size_t line_no,
                             const std::string& what) {
  throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": " + what);
}

int parse_label(const std::string& path, std::size_t line_no, const std::string& raw) {
  if (raw == "0") return 0;
  if (raw == "1") return 1;
  line_error(path, line_no, "label out of range (want 0 or 1, got \"" + raw + "\")");
}

PairExample parse_jsonl_line(const std::string& path, std::size_t line_no,
                             const std::string& line) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    line_error(path, line_no, std::string("bad JSON: ") + e.what());
  }
  for (const char* key : {"text_a", "text_b", "label"}) {
    if (!obj.contains(key)) line_error(path, line_no, std::string("missing field ") + key);
  }
  if (!obj["text_a"].is_string() || !obj["text_b"].is_string()) {
    line_error(path, line_no, "text_a/text_b must be strings");
  }
  PairExample ex;
  ex.text_a = obj["text_a"].get<std::string>();
  ex.text_b = obj["text_b"].get<std::string>();
  if (ex.text_a.empty() || ex.text_b.empty()) {
    line_error(path, line_no, "empty text field");
  }
  if (obj["label"].is_number_integer()) {
    const auto l = obj["label"].get<std::int64_t>();
    if (l != 0 && l != 1) line_error(path, line_no, "label out of range");
    ex.label = static_cast<int>(l);
  } else {
    line_error(path, line_no, "label must be an integer");
  }
  return ex;
}

PairExample parse_tsv_line(const std::string& path, std::size_t line_no,
                           const std::string& line) {
  const auto t1 = line.find('\t');
  const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
  if (t1 == std::string::npos || t2 == std::string::npos) {
    line_error(path, line_no, "expected text_a<TAB>text_b<TAB>label");
  }
  if (line.find('\t', t2 + 1) != std::string::npos) {
    line_error(path, line_no, "too many fields");
  }
  PairExample ex;
  ex.text_a = line.substr(0, t1);
  ex.text_b = line.substr(t1 + 1, t2 - t1 - 1);
  ex.label = parse_label(path, line_no, line.substr(t2 + 1));
  if (ex.text_a.empty() || ex.text_b.empty()) {
    line_error(path, line_no, "empty text field");
  }
  return ex;
}

}  // namespace

std::vector<PairExample> load_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_pairs: cannot open " + path);
  std::vector<PairExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '{') {
      out.push_back(parse_jsonl_line(path, line_no, line));
    } else {
      out.push_back(parse_tsv_line(path, line_no, line));
    }
  }
  return out;
}

std::vector<std::string> load_sentences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_sentences: cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace csdr
