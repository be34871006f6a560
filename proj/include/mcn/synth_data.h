#ifndef MCN_SYNTH_DATA_H_
#define MCN_SYNTH_DATA_H_

// Procedural toy videos whose classes are motion patterns, the residual view,
// augmentation, support/query splitting and the corpus file format.

#include <cstdint>
#include <string>
#include <vector>

namespace mcn {

// frames x height x width x channels, row-major in that order.
struct Volume {
  std::size_t frames = 0, height = 0, width = 0, channels = 0;
  std::vector<double> data;

  Volume() = default;
  Volume(std::size_t f, std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : frames(f), height(h), width(w), channels(c), data(f * h * w * c, fill) {}

  std::size_t frame_size() const { return height * width * channels; }
  double& at(std::size_t f, std::size_t y, std::size_t x, std::size_t c) {
    return data[((f * height + y) * width + x) * channels + c];
  }
  double at(std::size_t f, std::size_t y, std::size_t x, std::size_t c) const {
    return data[((f * height + y) * width + x) * channels + c];
  }
  Volume first_frames(std::size_t n) const;
  bool same_dims(const Volume& o) const {
    return frames == o.frames && height == o.height && width == o.width && channels == o.channels;
  }
  friend bool operator==(const Volume&, const Volume&) = default;
};

struct Clip {
  Volume frames;  // T+1 raw frames
  int label = 0;
  std::uint32_t clip_id = 0;
};

enum class ViewTag { kRgb, kRes };
const char* view_tag_name(ViewTag tag);
inline ViewTag opposite(ViewTag tag) { return tag == ViewTag::kRgb ? ViewTag::kRes : ViewTag::kRgb; }

struct ViewPair {
  Volume rgb;
  Volume res;
  std::uint32_t clip_id = 0;
};

struct CorpusConfig {
  int n_classes = 8;
  int clips_per_class = 24;
  int frames = 8;  // T; clips store T+1 raw frames
  int height = 16;
  int width = 16;
  int channels = 1;
  int sprite_size = 3;
  double noise_std = 0.01;
  bool motion_blur = true;  // each frame integrates the sprite over its interval
  int center_jitter = 2;    // < 0: trajectory starts anywhere on the torus
  std::uint64_t seed = 7;
};

// Per-frame displacement in pixels. Classes fix |dx| and |dy|; each clip
// draws the signs, so a horizontal flip never changes the class.
inline constexpr double kPixelLevels = 256.0;  // rendered values are multiples of 1/256

struct Motion {
  int dx = 0;
  int dy = 0;
};

Motion class_motion(int label);  // unsigned magnitudes for a class index

struct RenderParams {
  Motion motion;
  std::size_t frames = 9;
  std::size_t height = 16, width = 16, channels = 1;
  int sprite_size = 3;
  double noise_std = 0.01;
  bool motion_blur = true;
  int center_jitter = 2;
};

// Sprite moving with `motion` (wrapping at the borders) over a textured
// background that is independent of the motion. With motion_blur, frame f
// averages max(|dx|,|dy|)+1 sprite placements evenly spaced from position f
// to position f+1, so a moving sprite leaves a streak along its motion. The
// trajectory's middle frame lies within center_jitter pixels of the centre.
Volume render_clip(const RenderParams& params, std::uint64_t seed);

std::vector<Clip> generate_corpus(const CorpusConfig& config);

// out[n] = |frames[n] - frames[n+1]|, one frame shorter than the input.
Volume residual_view(const Volume& frames);

// Mean absolute value of the residual view.
double residual_energy(const Volume& frames);

struct AugmentConfig {
  std::size_t out_height = 0;  // 0 keeps the input size
  std::size_t out_width = 0;
  double crop_min_scale = 0.8;
  double flip_prob = 0.5;
  double jitter = 0.1;
};

struct AugmentParams {
  std::size_t crop_y = 0, crop_x = 0, crop_h = 0, crop_w = 0;
  std::size_t out_h = 0, out_w = 0;
  bool flip = false;
  double brightness = 0.0;
};

AugmentParams sample_augment(const AugmentConfig& config, const Volume& view, std::uint64_t seed);
// Center crop at the mean crop scale; no flip, no jitter.
AugmentParams center_augment(const AugmentConfig& config, const Volume& view);

// Bilinear crop-and-resize applied identically to every frame.
Volume crop_resize(const Volume& view, std::size_t y0, std::size_t x0, std::size_t h,
                   std::size_t w, std::size_t out_h, std::size_t out_w);
Volume flip_horizontal(const Volume& view);
Volume add_brightness(const Volume& view, double delta);  // clamped to [0, 1]

Volume apply_augment(const Volume& view, const AugmentParams& params);
Volume augment(const Volume& view, const AugmentConfig& config, std::uint64_t seed);

// Residual view is computed on raw frames first; both views are then
// augmented with independent sub-seeds. Brightness jitter only touches the
// RGB view since a constant offset cancels in frame differences.
ViewPair make_view_pair(const Clip& clip, const AugmentConfig& config, std::uint64_t seed);

// Deterministic evaluation views (center crop).
Volume eval_rgb_view(const Clip& clip, const AugmentConfig& config);

struct CorpusSplit {
  std::vector<Clip> support;
  std::vector<Clip> query;
  std::vector<Clip> eval_train;
  std::vector<Clip> eval_test;
};

// Class-stratified partitions: support/query cover the corpus, and an
// independent eval_train/eval_test partition feeds the evaluation harness.
CorpusSplit split_support_query(const std::vector<Clip>& corpus, double support_fraction,
                                std::uint64_t seed, double eval_test_fraction = 0.5);

struct Corpus {
  int n_classes = 0;
  std::vector<Clip> clips;
};

inline constexpr std::uint32_t kCorpusVersion = 1;

// "MCNC", version, n_clips, n_classes, raw frames, H, W, C as LE u32, then per
// clip: clip_id (LE u32), label (LE u32), frame values (LE f64).
void write_corpus(const std::string& path, const Corpus& corpus);
Corpus read_corpus(const std::string& path);

}  // namespace mcn

#endif  // MCN_SYNTH_DATA_H_
