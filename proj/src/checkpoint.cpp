#include "csdr/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace csdr {
namespace {

constexpr char kMagic[8] = {'C', 'S', 'D', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void mat(const Mat& m) {
    u64(m.rows);
    u64(m.cols);
    for (double v : m.data) f64(v);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : buf_(std::move(bytes)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() {
    const char* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const char* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  Mat mat() {
    const std::uint64_t rows = u64();
    const std::uint64_t cols = u64();
    if (rows > (1ULL << 32) || cols > (1ULL << 20) ||
        rows * cols > buf_.size() / 8 + 1) {
      throw std::runtime_error("checkpoint: implausible matrix shape (corrupt file)");
    }
    Mat m(rows, cols);
    for (double& v : m.data) v = f64();
    return m;
  }
  std::string str() {
    const std::uint32_t len = u32();
    const char* p = take(len);
    return std::string(p, len);
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  const char* take(std::size_t n) {
    if (pos_ + n > buf_.size()) {
      throw std::runtime_error("checkpoint: truncated file");
    }
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kVersion);
  w.u64(ckpt.vocab_hash);
  w.u32(static_cast<std::uint32_t>(ckpt.config.embed_dim));
  w.u32(static_cast<std::uint32_t>(ckpt.config.max_len));
  w.f64(ckpt.config.dropout_p);
  w.u8(ckpt.config.pooling == Pooling::cls ? 1 : 0);
  w.u8(ckpt.config.use_position ? 1 : 0);
  w.mat(ckpt.params.token_table);
  w.mat(ckpt.params.position_table);
  w.u8(ckpt.head ? 1 : 0);
  if (ckpt.head) w.mat(*ckpt.head);
  w.u8(ckpt.store ? 1 : 0);
  if (ckpt.store) {
    w.mat(ckpt.store->embeddings);
    w.u64(ckpt.store->labels.size());
    for (int label : ckpt.store->labels) w.u8(label == 1 ? 1 : 0);
    w.str(ckpt.store->provenance);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  Reader r(ss.str());

  for (char expect : kMagic) {
    if (static_cast<char>(r.u8()) != expect) {
      throw std::runtime_error("checkpoint: bad magic in " + path);
    }
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version) + " in " + path);
  }

  Checkpoint ckpt;
  ckpt.version = version;
  ckpt.vocab_hash = r.u64();
  ckpt.config.embed_dim = r.u32();
  ckpt.config.max_len = r.u32();
  ckpt.config.dropout_p = r.f64();
  ckpt.config.pooling = r.u8() == 1 ? Pooling::cls : Pooling::mean;
  ckpt.config.use_position = r.u8() == 1;
  ckpt.params.token_table = r.mat();
  ckpt.params.position_table = r.mat();
  if (r.u8() == 1) ckpt.head = r.mat();
  if (r.u8() == 1) {
    NeighborStore store;
    store.embeddings = r.mat();
    const std::uint64_t m = r.u64();
    store.labels.reserve(m);
    for (std::uint64_t i = 0; i < m; ++i) store.labels.push_back(r.u8());
    store.provenance = r.str();
    ckpt.store = std::move(store);
  }
  if (!r.done()) {
    throw std::runtime_error("checkpoint: trailing bytes in " + path);
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::string& path, const Vocab& vocab) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.vocab_hash != vocab.hash()) {
    std::ostringstream msg;
    msg << "checkpoint: vocab hash mismatch in " << path << " (file has 0x"
        << std::hex << ckpt.vocab_hash << ", vocab is 0x" << vocab.hash() << ")";
    throw std::runtime_error(msg.str());
  }
  if (ckpt.params.token_table.rows != vocab.size()) {
    throw std::runtime_error("checkpoint: token table does not match vocab size");
  }
  return ckpt;
}

}  // namespace csdr
