#ifndef MCN_ENCODER_H_
#define MCN_ENCODER_H_

// Reference feature extractor: a per-frame two-layer MLP, temporal mean
// pooling and L2 normalisation. Both views go through the same weights unless
// `separate_views` is set.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcn/autodiff.h"
#include "mcn/synth_data.h"

namespace mcn {

struct EncoderConfig {
  std::size_t frames = 8;  // T
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 1;
  std::size_t hidden_width = 32;
  std::size_t embed_dim = 16;
  double init_scale = 1.0;
  bool separate_views = false;

  std::size_t frame_size() const { return height * width * channels; }
  void validate() const;
};

// Total scalar count of one encoder tower.
std::size_t encoder_parameter_count(const EncoderConfig& config);

// Parameter name prefix of the tower that encodes `tag`.
std::string encoder_prefix(const EncoderConfig& config, ViewTag tag);

ParamSet init_encoder(const EncoderConfig& config, std::uint64_t seed);

struct EmbeddingNode {
  Var vector;  // [1, embed_dim], unit norm
  std::uint32_t clip_id = 0;
  ViewTag tag = ViewTag::kRgb;
};

// Encodes B views of one tag into a [B, embed_dim] node of unit rows.
Var encode_batch(const BoundParams& params, const EncoderConfig& config,
                 std::span<const Volume* const> views, ViewTag tag);

EmbeddingNode encode(const BoundParams& params, const EncoderConfig& config, const Volume& view,
                     std::uint32_t clip_id, ViewTag tag);

// Graph-free embedding of one view, used by evaluation.
std::vector<double> embed_view(const ParamSet& params, const EncoderConfig& config,
                               const Volume& view, ViewTag tag);

}  // namespace mcn

#endif  // MCN_ENCODER_H_
