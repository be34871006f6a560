#include "mcn/encoder.h"

#include <cmath>
#include <stdexcept>

#include "mcn/rng.h"

namespace mcn {

void EncoderConfig::validate() const {
  if (frames == 0 || height == 0 || width == 0 || channels == 0) {
    throw std::invalid_argument("EncoderConfig: input dims must be positive");
  }
  if (embed_dim < 2) throw std::invalid_argument("EncoderConfig: embed_dim must be >= 2");
  if (hidden_width < embed_dim) {
    throw std::invalid_argument("EncoderConfig: hidden_width must be >= embed_dim");
  }
  if (!(init_scale >= 0.0)) throw std::invalid_argument("EncoderConfig: init_scale must be >= 0");
}

std::size_t encoder_parameter_count(const EncoderConfig& c) {
  const std::size_t tower = (c.frame_size() + 1) * c.hidden_width + (c.hidden_width + 1) * c.embed_dim;
  return c.separate_views ? 2 * tower : tower;
}

std::string encoder_prefix(const EncoderConfig& config, ViewTag tag) {
  if (!config.separate_views) return "encoder/";
  return tag == ViewTag::kRgb ? "encoder_rgb/" : "encoder_res/";
}

namespace {

Tensor uniform_weights(std::size_t fan_in, std::size_t fan_out, double init_scale, Rng& rng) {
  const double bound = init_scale / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor w(Shape{fan_in, fan_out});
  for (auto& v : w.data) v = bound * dist(rng);
  return w;
}

void add_tower(ParamSet& params, const EncoderConfig& c, const std::string& prefix, Rng& rng) {
  params.add(prefix + "fc1/weight", uniform_weights(c.frame_size(), c.hidden_width, c.init_scale, rng));
  params.add(prefix + "fc1/bias", Tensor(Shape{c.hidden_width}));
  params.add(prefix + "fc2/weight", uniform_weights(c.hidden_width, c.embed_dim, c.init_scale, rng));
  params.add(prefix + "fc2/bias", Tensor(Shape{c.embed_dim}));
}

}  // namespace

ParamSet init_encoder(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  ParamSet params;
  Rng rng(derive_seed(seed, {kTagInit}));
  if (config.separate_views) {
    add_tower(params, config, encoder_prefix(config, ViewTag::kRgb), rng);
    add_tower(params, config, encoder_prefix(config, ViewTag::kRes), rng);
  } else {
    add_tower(params, config, encoder_prefix(config, ViewTag::kRgb), rng);
  }
  return params;
}

Var encode_batch(const BoundParams& params, const EncoderConfig& config,
                 std::span<const Volume* const> views, ViewTag tag) {
  if (views.empty()) throw std::invalid_argument("encode_batch: no views");
  const std::size_t T = views[0]->frames;
  const std::size_t fs = config.frame_size();
  for (const Volume* v : views) {
    if (v->frames != T || v->frame_size() != fs || v->height != config.height ||
        v->width != config.width || v->channels != config.channels) {
      throw std::invalid_argument(
          "encode: view dims [" + std::to_string(v->frames) + "," + std::to_string(v->height) +
          "," + std::to_string(v->width) + "," + std::to_string(v->channels) +
          "] do not match encoder input [*," + std::to_string(config.height) + "," +
          std::to_string(config.width) + "," + std::to_string(config.channels) + "]");
    }
  }
  if (T != config.frames) {
    throw std::invalid_argument("encode: view has " + std::to_string(T) +
                                " frames, encoder expects " + std::to_string(config.frames));
  }
  Tensor input(Shape{views.size() * T, fs});
  for (std::size_t b = 0; b < views.size(); ++b) {
    std::copy(views[b]->data.begin(), views[b]->data.end(), input.data.begin() + b * T * fs);
  }
  const std::string prefix = encoder_prefix(config, tag);
  Var x = constant(std::move(input));
  Var h = relu(add_row(matmul(x, params[prefix + "fc1/weight"]), params[prefix + "fc1/bias"]));
  Var z = add_row(matmul(h, params[prefix + "fc2/weight"]), params[prefix + "fc2/bias"]);
  Var pooled = mean_groups(z, T);
  return l2_normalize_rows(pooled, /*canonical_on_zero=*/true);
}

EmbeddingNode encode(const BoundParams& params, const EncoderConfig& config, const Volume& view,
                     std::uint32_t clip_id, ViewTag tag) {
  const Volume* ptr = &view;
  EmbeddingNode out;
  out.vector = encode_batch(params, config, std::span<const Volume* const>(&ptr, 1), tag);
  out.clip_id = clip_id;
  out.tag = tag;
  return out;
}

std::vector<double> embed_view(const ParamSet& params, const EncoderConfig& config,
                               const Volume& view, ViewTag tag) {
  BoundParams frozen = params.bind();
  return encode(frozen, config, view, 0, tag).vector.value().data;
}

}  // namespace mcn
