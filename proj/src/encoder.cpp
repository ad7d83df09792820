#include "csdr/encoder.hpp"

#include <stdexcept>

#include "csdr/text.hpp"

namespace csdr {

Pooling pooling_from_string(const std::string& name) {
  if (name == "mean") return Pooling::mean;
  if (name == "cls") return Pooling::cls;
  throw std::invalid_argument("unknown pooling: " + name);
}

std::string pooling_to_string(Pooling p) {
  return p == Pooling::mean ? "mean" : "cls";
}

void EncoderConfig::validate() const {
  if (embed_dim < 2) throw std::invalid_argument("EncoderConfig: embed_dim must be >= 2");
  if (max_len < 2) throw std::invalid_argument("EncoderConfig: max_len must be >= 2");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw std::invalid_argument("EncoderConfig: dropout_p must be in [0, 1)");
  }
}

DropoutMask DropoutMask::make(std::uint64_t seed, std::size_t positions,
                              std::size_t dim, double p) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("DropoutMask: p must be in [0, 1)");
  }
  DropoutMask mask;
  mask.positions = positions;
  mask.dim = dim;
  mask.scale = 1.0 / (1.0 - p);
  mask.seed = seed;
  mask.keep.resize(positions * dim);
  Rng rng(seed);
  for (auto& bit : mask.keep) {
    bit = rng.next_double() >= p ? 1 : 0;
  }
  return mask;
}

EncoderParams init_params(std::size_t vocab_size, const EncoderConfig& config,
                          Rng& rng) {
  config.validate();
  EncoderParams params;
  params.token_table = Mat(vocab_size, config.embed_dim);
  params.position_table = Mat(config.max_len, config.embed_dim);
  for (std::size_t r = 0; r < vocab_size; ++r) {
    for (std::size_t c = 0; c < config.embed_dim; ++c) {
      const double v = rng.uniform(-0.05, 0.05);
      if (r != static_cast<std::size_t>(kPadId)) params.token_table.at(r, c) = v;
    }
  }
  for (double& v : params.position_table.data) v = rng.uniform(-0.05, 0.05);
  return params;
}

EncodeResult forward(std::span<const std::int32_t> ids, const EncoderParams& params,
                     const EncoderConfig& config, const DropoutMask* mask) {
  config.validate();
  if (ids.empty()) throw std::invalid_argument("forward: empty id sequence");
  if (ids.size() > config.max_len) {
    throw std::invalid_argument("forward: sequence longer than max_len");
  }
  const std::size_t d = config.embed_dim;
  if (params.token_table.cols != d || params.position_table.cols != d) {
    throw std::invalid_argument("forward: table width does not match embed_dim");
  }
  if (mask && (mask->positions != ids.size() || mask->dim != d)) {
    throw std::invalid_argument("forward: dropout mask shape mismatch");
  }

  EncodeResult out;
  out.embedding.assign(d, 0.0);
  const std::size_t n = ids.size();
  const bool mean = config.pooling == Pooling::mean;

  for (std::size_t pos = 0; pos < n; ++pos) {
    const std::int32_t id = ids[pos];
    if (id < 0 || static_cast<std::size_t>(id) >= params.token_table.rows) {
      throw std::invalid_argument("forward: token id out of range");
    }
    if (!mean && pos > 0) break;  // cls pooling reads position 0 only
    const double* tok = params.token_table.row(static_cast<std::size_t>(id));
    const double* posv = config.use_position ? params.position_table.row(pos) : nullptr;
    for (std::size_t c = 0; c < d; ++c) {
      double v = tok[c] + (posv ? posv[c] : 0.0);
      if (mask) v *= mask->multiplier(pos, c);
      out.embedding[c] += v;
    }
  }
  if (mean) {
    for (double& v : out.embedding) v /= static_cast<double>(n);
  }

  // cls pooling still range-checks the remaining ids
  for (std::size_t pos = mean ? n : 1; pos < n; ++pos) {
    const std::int32_t id = ids[pos];
    if (id < 0 || static_cast<std::size_t>(id) >= params.token_table.rows) {
      throw std::invalid_argument("forward: token id out of range");
    }
  }

  out.trace.ids.assign(ids.begin(), ids.end());
  if (mask) out.trace.mask = *mask;
  out.trace.pooling = config.pooling;
  out.trace.use_position = config.use_position;
  out.trace.embed_dim = d;
  return out;
}

std::pair<EncodeResult, EncodeResult> forward_two_views(
    std::span<const std::int32_t> ids, const EncoderParams& params,
    const EncoderConfig& config, Rng& rng) {
  const auto seed_a = rng.next_u64();
  const auto seed_b = rng.next_u64();
  const auto mask_a = DropoutMask::make(seed_a, ids.size(), config.embed_dim,
                                        config.dropout_p);
  const auto mask_b = DropoutMask::make(seed_b, ids.size(), config.embed_dim,
                                        config.dropout_p);
  return {forward(ids, params, config, &mask_a),
          forward(ids, params, config, &mask_b)};
}

void backward(const ForwardTrace& trace, std::span<const double> grad_embedding,
              ParamGrads& acc) {
  const std::size_t d = trace.embed_dim;
  if (grad_embedding.size() != d || acc.token_table.cols != d ||
      (trace.use_position && acc.position_table.cols != d)) {
    throw std::invalid_argument("backward: shape mismatch");
  }
  const std::size_t n = trace.ids.size();
  const bool mean = trace.pooling == Pooling::mean;
  const double pool_scale = mean ? 1.0 / static_cast<double>(n) : 1.0;
  const std::size_t last = mean ? n : 1;

  for (std::size_t pos = 0; pos < last; ++pos) {
    const auto id = static_cast<std::size_t>(trace.ids[pos]);
    double* tok_grad = acc.token_table.row(id);
    double* pos_grad = trace.use_position ? acc.position_table.row(pos) : nullptr;
    for (std::size_t c = 0; c < d; ++c) {
      double g = grad_embedding[c] * pool_scale;
      if (trace.mask) g *= trace.mask->multiplier(pos, c);
      tok_grad[c] += g;
      if (pos_grad) pos_grad[c] += g;
    }
  }
}

}  // namespace csdr
