#include "mcn/synth_data.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <stdexcept>

#include "mcn/binary_io.h"
#include "mcn/rng.h"

namespace mcn {

Volume Volume::first_frames(std::size_t n) const {
  if (n > frames) throw std::out_of_range("first_frames: asked for more frames than stored");
  Volume out(n, height, width, channels);
  std::copy_n(data.begin(), n * frame_size(), out.data.begin());
  return out;
}

const char* view_tag_name(ViewTag tag) { return tag == ViewTag::kRgb ? "rgb" : "res"; }

Motion class_motion(int label) {
  if (label < 0) throw std::invalid_argument("class_motion: negative label");
  int index = 0;
  for (int m = 1;; ++m) {
    std::vector<Motion> ring{{m, 0}, {0, m}, {m, m}};
    for (int k = 1; k < m; ++k) {
      ring.push_back({m, k});
      ring.push_back({k, m});
    }
    for (const auto& motion : ring) {
      if (index++ == label) return motion;
    }
  }
}

Volume render_clip(const RenderParams& p, std::uint64_t seed) {
  if (p.height < 8 || p.width < 8) {
    throw std::invalid_argument("render_clip: frame " + std::to_string(p.height) + "x" +
                                std::to_string(p.width) + " too small for the sprite (min 8x8)");
  }
  if (p.frames < 1 || p.channels < 1 || p.sprite_size < 1) {
    throw std::invalid_argument("render_clip: empty clip dimensions");
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> coarse(0.1, 0.5);
  std::uniform_real_distribution<double> fine(-0.05, 0.05);
  std::uniform_real_distribution<double> bright(0.8, 1.0);
  const std::size_t H = p.height, W = p.width, C = p.channels;

  // Smooth texture: bilinear upsampling of a 5x5 lattice plus static grain.
  constexpr std::size_t kGrid = 4;
  std::vector<double> background(H * W * C);
  for (std::size_t c = 0; c < C; ++c) {
    double lattice[kGrid + 1][kGrid + 1];
    for (auto& row : lattice)
      for (auto& v : row) v = coarse(rng);
    for (std::size_t y = 0; y < H; ++y) {
      const double gy = static_cast<double>(y) * kGrid / static_cast<double>(H - 1);
      const std::size_t iy = std::min<std::size_t>(static_cast<std::size_t>(gy), kGrid - 1);
      const double ty = gy - static_cast<double>(iy);
      for (std::size_t x = 0; x < W; ++x) {
        const double gx = static_cast<double>(x) * kGrid / static_cast<double>(W - 1);
        const std::size_t ix = std::min<std::size_t>(static_cast<std::size_t>(gx), kGrid - 1);
        const double tx = gx - static_cast<double>(ix);
        const double top = lattice[iy][ix] * (1 - tx) + lattice[iy][ix + 1] * tx;
        const double bot = lattice[iy + 1][ix] * (1 - tx) + lattice[iy + 1][ix + 1] * tx;
        background[(y * W + x) * C + c] = top * (1 - ty) + bot * ty + fine(rng);
      }
    }
  }

  const double sprite_value = bright(rng);
  const int sx = (rng() & 1) ? 1 : -1;
  const int sy = (rng() & 1) ? 1 : -1;
  const int dx = p.motion.dx * sx;
  const int dy = p.motion.dy * sy;
  long y0 = 0, x0 = 0;
  if (p.center_jitter < 0) {
    y0 = static_cast<long>(rng() % H);
    x0 = static_cast<long>(rng() % W);
  } else {
    // The middle frame sits within center_jitter pixels of the frame centre.
    std::uniform_int_distribution<long> jitter(-p.center_jitter, p.center_jitter);
    const long mid = static_cast<long>(p.frames - 1) / 2;
    y0 = (static_cast<long>(H) - p.sprite_size) / 2 + jitter(rng) - mid * dy;
    x0 = (static_cast<long>(W) - p.sprite_size) / 2 + jitter(rng) - mid * dx;
  }
  std::normal_distribution<double> noise(0.0, 1.0);

  const int span = std::max(std::abs(dx), std::abs(dy));
  const int samples = p.motion_blur ? span + 1 : 1;
  Volume out(p.frames, H, W, C);
  const long h = static_cast<long>(H), w = static_cast<long>(W);
  std::vector<double> coverage(H * W);
  for (std::size_t f = 0; f < p.frames; ++f) {
    std::fill(coverage.begin(), coverage.end(), 0.0);
    for (int j = 0; j < samples; ++j) {
      // Sub-positions are rounded to the pixel grid; j/span of the way to f+1.
      const double s = span > 0 && samples > 1 ? static_cast<double>(j) / span : 0.0;
      const long fy = y0 + static_cast<long>(f) * dy + std::lround(s * dy);
      const long fx = x0 + static_cast<long>(f) * dx + std::lround(s * dx);
      for (int a = 0; a < p.sprite_size; ++a) {
        for (int b = 0; b < p.sprite_size; ++b) {
          const auto y = static_cast<std::size_t>(((fy + a) % h + h) % h);
          const auto x = static_cast<std::size_t>(((fx + b) % w + w) % w);
          coverage[y * W + x] += 1.0 / samples;
        }
      }
    }
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double k = std::min(coverage[y * W + x], 1.0);
        for (std::size_t c = 0; c < C; ++c) {
          out.at(f, y, x, c) = (1.0 - k) * background[(y * W + x) * C + c] + k * sprite_value;
        }
      }
    }
  }
  if (p.noise_std > 0.0) {
    for (auto& v : out.data) v += p.noise_std * noise(rng);
  }
  // Pixels sit on a 1/256 grid, so adding any grid-aligned offset is exact.
  for (auto& v : out.data) v = std::round(std::clamp(v, 0.0, 1.0) * kPixelLevels) / kPixelLevels;
  return out;
}

std::vector<Clip> generate_corpus(const CorpusConfig& config) {
  if (config.n_classes < 2) throw std::invalid_argument("generate_corpus: need at least 2 classes");
  if (config.clips_per_class < 2) {
    throw std::invalid_argument("generate_corpus: need at least 2 clips per class");
  }
  if (config.frames < 2) throw std::invalid_argument("generate_corpus: need T >= 2 frames");
  if (config.height < 8 || config.width < 8) {
    throw std::invalid_argument("generate_corpus: H and W must be at least 8 to render the sprite");
  }
  if (config.channels < 1) throw std::invalid_argument("generate_corpus: need >= 1 channel");
  std::vector<Clip> clips;
  clips.reserve(static_cast<std::size_t>(config.n_classes * config.clips_per_class));
  std::uint32_t next_id = 0;
  for (int label = 0; label < config.n_classes; ++label) {
    RenderParams params;
    params.motion = class_motion(label);
    params.frames = static_cast<std::size_t>(config.frames) + 1;
    params.height = static_cast<std::size_t>(config.height);
    params.width = static_cast<std::size_t>(config.width);
    params.channels = static_cast<std::size_t>(config.channels);
    params.sprite_size = config.sprite_size;
    params.noise_std = config.noise_std;
    params.motion_blur = config.motion_blur;
    params.center_jitter = config.center_jitter;
    for (int j = 0; j < config.clips_per_class; ++j) {
      Clip clip;
      clip.clip_id = next_id++;
      clip.label = label;
      clip.frames = render_clip(params, derive_seed(config.seed, {kTagClip, clip.clip_id}));
      clips.push_back(std::move(clip));
    }
  }
  return clips;
}

Volume residual_view(const Volume& frames) {
  if (frames.frames < 2) {
    throw std::invalid_argument("residual_view: need at least 2 frames, got " +
                                std::to_string(frames.frames));
  }
  Volume out(frames.frames - 1, frames.height, frames.width, frames.channels);
  const std::size_t fs = frames.frame_size();
  for (std::size_t n = 0; n + 1 < frames.frames; ++n)
    for (std::size_t i = 0; i < fs; ++i)
      out.data[n * fs + i] = std::fabs(frames.data[n * fs + i] - frames.data[(n + 1) * fs + i]);
  return out;
}

double residual_energy(const Volume& frames) {
  const Volume res = residual_view(frames);
  double acc = 0.0;
  for (double v : res.data) acc += v;
  return acc / static_cast<double>(res.data.size());
}

namespace {
std::size_t out_dim(std::size_t requested, std::size_t input) {
  return requested == 0 ? input : requested;
}
}  // namespace

AugmentParams sample_augment(const AugmentConfig& config, const Volume& view, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AugmentParams p;
  const double scale = config.crop_min_scale + (1.0 - config.crop_min_scale) * unit(rng);
  p.crop_h = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(scale * static_cast<double>(view.height))), 1,
      view.height);
  p.crop_w = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(scale * static_cast<double>(view.width))), 1, view.width);
  p.crop_y = static_cast<std::size_t>(rng() % (view.height - p.crop_h + 1));
  p.crop_x = static_cast<std::size_t>(rng() % (view.width - p.crop_w + 1));
  p.flip = unit(rng) < config.flip_prob;
  p.brightness = config.jitter * (2.0 * unit(rng) - 1.0);
  p.out_h = out_dim(config.out_height, view.height);
  p.out_w = out_dim(config.out_width, view.width);
  return p;
}

AugmentParams center_augment(const AugmentConfig& config, const Volume& view) {
  AugmentParams p;
  const double scale = 0.5 * (1.0 + config.crop_min_scale);
  p.crop_h = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(scale * static_cast<double>(view.height))), 1,
      view.height);
  p.crop_w = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(scale * static_cast<double>(view.width))), 1, view.width);
  p.crop_y = (view.height - p.crop_h) / 2;
  p.crop_x = (view.width - p.crop_w) / 2;
  p.out_h = out_dim(config.out_height, view.height);
  p.out_w = out_dim(config.out_width, view.width);
  return p;
}

Volume crop_resize(const Volume& view, std::size_t y0, std::size_t x0, std::size_t h,
                   std::size_t w, std::size_t out_h, std::size_t out_w) {
  if (h == 0 || w == 0 || y0 + h > view.height || x0 + w > view.width) {
    throw std::out_of_range("crop_resize: crop window outside the frame");
  }
  Volume out(view.frames, out_h, out_w, view.channels);
  auto source = [](std::size_t o, std::size_t start, std::size_t len, std::size_t out_len) {
    double s = static_cast<double>(start) +
               (static_cast<double>(o) + 0.5) * static_cast<double>(len) /
                   static_cast<double>(out_len) -
               0.5;
    return std::clamp(s, static_cast<double>(start), static_cast<double>(start + len - 1));
  };
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const double sy = source(oy, y0, h, out_h);
    const auto iy = static_cast<std::size_t>(sy);
    const std::size_t iy1 = std::min(iy + 1, y0 + h - 1);
    const double ty = sy - static_cast<double>(iy);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const double sx = source(ox, x0, w, out_w);
      const auto ix = static_cast<std::size_t>(sx);
      const std::size_t ix1 = std::min(ix + 1, x0 + w - 1);
      const double tx = sx - static_cast<double>(ix);
      for (std::size_t f = 0; f < view.frames; ++f) {
        for (std::size_t c = 0; c < view.channels; ++c) {
          const double top = view.at(f, iy, ix, c) * (1 - tx) + view.at(f, iy, ix1, c) * tx;
          const double bot = view.at(f, iy1, ix, c) * (1 - tx) + view.at(f, iy1, ix1, c) * tx;
          out.at(f, oy, ox, c) = top * (1 - ty) + bot * ty;
        }
      }
    }
  }
  return out;
}

Volume flip_horizontal(const Volume& view) {
  Volume out = view;
  for (std::size_t f = 0; f < view.frames; ++f)
    for (std::size_t y = 0; y < view.height; ++y)
      for (std::size_t x = 0; x < view.width; ++x)
        for (std::size_t c = 0; c < view.channels; ++c)
          out.at(f, y, x, c) = view.at(f, y, view.width - 1 - x, c);
  return out;
}

Volume add_brightness(const Volume& view, double delta) {
  Volume out = view;
  for (auto& v : out.data) v = std::clamp(v + delta, 0.0, 1.0);
  return out;
}

Volume apply_augment(const Volume& view, const AugmentParams& p) {
  Volume out = crop_resize(view, p.crop_y, p.crop_x, p.crop_h, p.crop_w, p.out_h, p.out_w);
  if (p.flip) out = flip_horizontal(out);
  if (p.brightness != 0.0) out = add_brightness(out, p.brightness);
  return out;
}

Volume augment(const Volume& view, const AugmentConfig& config, std::uint64_t seed) {
  return apply_augment(view, sample_augment(config, view, seed));
}

ViewPair make_view_pair(const Clip& clip, const AugmentConfig& config, std::uint64_t seed) {
  if (clip.frames.frames < 2) {
    throw std::invalid_argument("make_view_pair: clip " + std::to_string(clip.clip_id) +
                                " has fewer than 2 frames");
  }
  const std::size_t T = clip.frames.frames - 1;
  const Volume res_raw = residual_view(clip.frames);
  const Volume rgb_raw = clip.frames.first_frames(T);

  ViewPair pair;
  pair.clip_id = clip.clip_id;
  pair.rgb = augment(rgb_raw, config, derive_seed(seed, {kTagRgbAug, clip.clip_id}));
  AugmentParams res_params =
      sample_augment(config, res_raw, derive_seed(seed, {kTagResAug, clip.clip_id}));
  res_params.brightness = 0.0;
  pair.res = apply_augment(res_raw, res_params);
  return pair;
}

Volume eval_rgb_view(const Clip& clip, const AugmentConfig& config) {
  const Volume rgb = clip.frames.first_frames(clip.frames.frames - 1);
  return apply_augment(rgb, center_augment(config, rgb));
}

namespace {

// Stratified two-way partition; `first` receives about `fraction` of each
// class, with rounding carried across classes so totals stay balanced.
void stratified_partition(const std::vector<Clip>& corpus, double fraction, std::uint64_t seed,
                          std::uint64_t tag, std::vector<Clip>& first, std::vector<Clip>& second) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < corpus.size(); ++i) by_class[corpus[i].label].push_back(i);
  std::size_t seen = 0, taken = 0;
  for (auto& [label, members] : by_class) {
    if (members.size() < 2) {
      throw std::invalid_argument("split: class " + std::to_string(label) + " has " +
                                  std::to_string(members.size()) + " clip(s); need >= 2 to stratify");
    }
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return corpus[a].clip_id < corpus[b].clip_id; });
    Rng rng(derive_seed(seed, {tag, static_cast<std::uint64_t>(label)}));
    std::shuffle(members.begin(), members.end(), rng);
    seen += members.size();
    const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(seen)));
    std::size_t n_first = target > taken ? target - taken : 0;
    n_first = std::clamp<std::size_t>(n_first, 1, members.size() - 1);
    taken += n_first;
    for (std::size_t j = 0; j < members.size(); ++j) {
      (j < n_first ? first : second).push_back(corpus[members[j]]);
    }
  }
  auto by_id = [](const Clip& a, const Clip& b) { return a.clip_id < b.clip_id; };
  std::sort(first.begin(), first.end(), by_id);
  std::sort(second.begin(), second.end(), by_id);
}

}  // namespace

CorpusSplit split_support_query(const std::vector<Clip>& corpus, double support_fraction,
                                std::uint64_t seed, double eval_test_fraction) {
  if (!(support_fraction > 0.0 && support_fraction < 1.0)) {
    throw std::invalid_argument("split_support_query: support_fraction must be in (0, 1)");
  }
  if (!(eval_test_fraction > 0.0 && eval_test_fraction < 1.0)) {
    throw std::invalid_argument("split_support_query: eval_test_fraction must be in (0, 1)");
  }
  CorpusSplit split;
  stratified_partition(corpus, support_fraction, seed, kTagSplit, split.support, split.query);
  stratified_partition(corpus, eval_test_fraction, seed, kTagEvalSplit, split.eval_test,
                       split.eval_train);
  return split;
}

void write_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_corpus: cannot open '" + path + "' for writing");
  const Volume* dims = corpus.clips.empty() ? nullptr : &corpus.clips.front().frames;
  os.write("MCNC", 4);
  binio::put_u32(os, kCorpusVersion);
  binio::put_u32(os, static_cast<std::uint32_t>(corpus.clips.size()));
  binio::put_u32(os, static_cast<std::uint32_t>(corpus.n_classes));
  binio::put_u32(os, dims ? static_cast<std::uint32_t>(dims->frames) : 0);
  binio::put_u32(os, dims ? static_cast<std::uint32_t>(dims->height) : 0);
  binio::put_u32(os, dims ? static_cast<std::uint32_t>(dims->width) : 0);
  binio::put_u32(os, dims ? static_cast<std::uint32_t>(dims->channels) : 0);
  for (const auto& clip : corpus.clips) {
    if (!clip.frames.same_dims(*dims)) {
      throw std::invalid_argument("write_corpus: clip " + std::to_string(clip.clip_id) +
                                  " has different dimensions");
    }
    binio::put_u32(os, clip.clip_id);
    binio::put_u32(os, static_cast<std::uint32_t>(clip.label));
    for (double v : clip.frames.data) binio::put_f64(os, v);
  }
  if (!os) throw std::runtime_error("write_corpus: write to '" + path + "' failed");
}

Corpus read_corpus(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_corpus: cannot open '" + path + "'");
  char magic[4];
  binio::read_exact(is, magic, 4, "corpus magic");
  if (std::string(magic, 4) != "MCNC") {
    throw std::runtime_error("read_corpus: '" + path + "' is not a corpus file (bad magic)");
  }
  const std::uint32_t version = binio::get_u32(is, "corpus version");
  if (version != kCorpusVersion) {
    throw std::runtime_error("read_corpus: file version " + std::to_string(version) +
                             ", reader supports version " + std::to_string(kCorpusVersion));
  }
  const std::uint32_t n_clips = binio::get_u32(is, "clip count");
  Corpus corpus;
  corpus.n_classes = static_cast<int>(binio::get_u32(is, "class count"));
  const std::uint32_t f = binio::get_u32(is, "frames");
  const std::uint32_t h = binio::get_u32(is, "height");
  const std::uint32_t w = binio::get_u32(is, "width");
  const std::uint32_t c = binio::get_u32(is, "channels");
  corpus.clips.reserve(n_clips);
  for (std::uint32_t i = 0; i < n_clips; ++i) {
    Clip clip;
    clip.clip_id = binio::get_u32(is, "clip id");
    clip.label = static_cast<int>(binio::get_u32(is, "label"));
    clip.frames = Volume(f, h, w, c);
    for (auto& v : clip.frames.data) v = binio::get_f64(is, "frame data");
    corpus.clips.push_back(std::move(clip));
  }
  return corpus;
}

}  // namespace mcn
