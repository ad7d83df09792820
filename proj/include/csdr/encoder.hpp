// Trainable siamese sentence encoder: token + position embedding tables,
// inverted dropout, mean or CLS pooling, and exact backpropagation into the
// tables. Both sentences of a pair always go through the same parameters.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "csdr/numeric.hpp"
#include "csdr/rng.hpp"

namespace csdr {

enum class Pooling { mean, cls };

Pooling pooling_from_string(const std::string& name);
std::string pooling_to_string(Pooling p);

struct EncoderConfig {
  std::size_t embed_dim = 64;
  std::size_t max_len = 64;
  double dropout_p = 0.1;
  Pooling pooling = Pooling::mean;
  bool use_position = true;

  void validate() const;
};

struct EncoderParams {
  Mat token_table;     // |vocab| x embed_dim
  Mat position_table;  // max_len x embed_dim

  bool operator==(const EncoderParams&) const = default;
};

// Inverted dropout: survivors are scaled by 1/(1-p) at train time, so
// inference needs no rescaling. Reproducible from (seed, shape, p).
struct DropoutMask {
  std::size_t positions = 0;
  std::size_t dim = 0;
  double scale = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> keep;  // positions x dim

  static DropoutMask make(std::uint64_t seed, std::size_t positions,
                          std::size_t dim, double p);

  double multiplier(std::size_t pos, std::size_t d) const {
    return keep[pos * dim + d] ? scale : 0.0;
  }
};

// Everything backward() needs from the matching forward().
struct ForwardTrace {
  std::vector<std::int32_t> ids;
  std::optional<DropoutMask> mask;
  Pooling pooling = Pooling::mean;
  bool use_position = true;
  std::size_t embed_dim = 0;
};

struct EncodeResult {
  Vec embedding;
  ForwardTrace trace;
};

// Gradient accumulator mirroring EncoderParams shapes.
struct ParamGrads {
  Mat token_table;
  Mat position_table;

  ParamGrads() = default;
  explicit ParamGrads(const EncoderParams& shape)
      : token_table(shape.token_table.rows, shape.token_table.cols),
        position_table(shape.position_table.rows, shape.position_table.cols) {}
  void zero() {
    token_table.fill(0.0);
    position_table.fill(0.0);
  }
};

// Entries i.i.d. uniform in [-0.05, 0.05]; the PAD row stays zero.
EncoderParams init_params(std::size_t vocab_size, const EncoderConfig& config,
                          Rng& rng);

EncodeResult forward(std::span<const std::int32_t> ids, const EncoderParams& params,
                     const EncoderConfig& config, const DropoutMask* mask = nullptr);

// Same ids encoded twice under independent dropout masks drawn from rng.
std::pair<EncodeResult, EncodeResult> forward_two_views(
    std::span<const std::int32_t> ids, const EncoderParams& params,
    const EncoderConfig& config, Rng& rng);

// Accumulates d(loss)/d(tables) for one sentence into acc, given
// d(loss)/d(embedding). Dropout and pooling Jacobians applied exactly.
void backward(const ForwardTrace& trace, std::span<const double> grad_embedding,
              ParamGrads& acc);

}  // namespace csdr
