#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "mcn/synth_data.h"

using namespace mcn;

namespace {

CorpusConfig small_corpus() {
  CorpusConfig c;
  c.n_classes = 4;
  c.clips_per_class = 6;
  c.frames = 4;
  c.height = 10;
  c.width = 10;
  return c;
}

}  // namespace

TEST_CASE("class motions are distinct and non-static") {
  std::set<std::pair<int, int>> seen;
  for (int label = 0; label < 32; ++label) {
    const Motion m = class_motion(label);
    CHECK((m.dx != 0 || m.dy != 0));
    CHECK(seen.insert({m.dx, m.dy}).second);
  }
  CHECK(class_motion(0).dx == 1);
  CHECK(class_motion(0).dy == 0);
  CHECK_THROWS(class_motion(-1));
}

TEST_CASE("corpus generation is deterministic and labelled by class") {
  const auto a = generate_corpus(small_corpus());
  const auto b = generate_corpus(small_corpus());
  REQUIRE(a.size() == 24);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].frames == b[i].frames);
    CHECK(a[i].clip_id == i);
    CHECK(a[i].frames.frames == 5);
  }
  CorpusConfig other = small_corpus();
  other.seed = 8;
  CHECK_FALSE(generate_corpus(other)[0].frames == a[0].frames);
}

TEST_CASE("pixel values stay in [0, 1] on the 1/256 grid") {
  for (const auto& clip : generate_corpus(small_corpus())) {
    for (double v : clip.frames.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(v * kPixelLevels == std::round(v * kPixelLevels));
    }
  }
}

TEST_CASE("residual view is invariant under a constant offset") {
  const auto clip = generate_corpus(small_corpus())[3];
  for (double offset : {0.25, -0.5, 3.0 / kPixelLevels}) {
    Volume shifted = clip.frames;
    for (auto& v : shifted.data) v += offset;
    CHECK(residual_view(shifted) == residual_view(clip.frames));
  }
}

TEST_CASE("residual view of a hand-built clip") {
  Volume v(3, 1, 1, 1);
  v.data = {0.2, 0.5, 0.1};
  const Volume r = residual_view(v);
  REQUIRE(r.frames == 2);
  CHECK(r.data[0] == doctest::Approx(0.3));
  CHECK(r.data[1] == doctest::Approx(0.4));
  CHECK_THROWS(residual_view(Volume(1, 2, 2, 1)));
}

TEST_CASE("moving sprites carry more residual energy than static ones") {
  RenderParams p;
  p.noise_std = 0.01;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RenderParams still = p;
    still.motion = {0, 0};
    RenderParams moving = p;
    moving.motion = class_motion(static_cast<int>(seed % 5));
    CHECK(residual_energy(render_clip(moving, seed)) > residual_energy(render_clip(still, seed)));
  }
}

TEST_CASE("augmentation keeps output dims and brightness in range") {
  const auto clip = generate_corpus(small_corpus())[0];
  AugmentConfig cfg;
  cfg.out_height = 8;
  cfg.out_width = 8;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const AugmentParams ap = sample_augment(cfg, clip.frames, seed);
    CHECK(ap.crop_h <= clip.frames.height);
    CHECK(ap.crop_y + ap.crop_h <= clip.frames.height);
    CHECK(ap.crop_x + ap.crop_w <= clip.frames.width);
    CHECK(std::abs(ap.brightness) <= cfg.jitter);
    const Volume out = augment(clip.frames, cfg, seed);
    CHECK(out.height == 8);
    CHECK(out.width == 8);
    CHECK(out.frames == clip.frames.frames);
  }
}

TEST_CASE("flip is an involution") {
  const auto clip = generate_corpus(small_corpus())[5];
  CHECK(flip_horizontal(flip_horizontal(clip.frames)) == clip.frames);
}

TEST_CASE("view pair has T frames in both views and no brightness shift on the residual") {
  const auto clip = generate_corpus(small_corpus())[2];
  AugmentConfig cfg;
  cfg.crop_min_scale = 1.0;
  cfg.flip_prob = 0.0;
  cfg.jitter = 0.3;
  const ViewPair vp = make_view_pair(clip, cfg, 9);
  CHECK(vp.rgb.frames == 4);
  CHECK(vp.res.frames == 4);
  CHECK(vp.res == residual_view(clip.frames));
}

TEST_CASE("training and evaluation splits each partition the corpus") {
  CorpusConfig c = small_corpus();
  c.clips_per_class = 8;
  const auto corpus = generate_corpus(c);
  const CorpusSplit s = split_support_query(corpus, 0.5, 3);
  auto covers = [&](const std::vector<Clip>& a, const std::vector<Clip>& b) {
    std::set<std::uint32_t> ids;
    for (const auto& clip : a) ids.insert(clip.clip_id);
    for (const auto& clip : b) ids.insert(clip.clip_id);
    return !a.empty() && !b.empty() && a.size() + b.size() == corpus.size() && ids.size() == corpus.size();
  };
  CHECK(covers(s.support, s.query));
  CHECK(covers(s.eval_train, s.eval_test));
  std::map<int, int> per_class;
  for (const auto& clip : s.support) ++per_class[clip.label];
  for (const auto& [label, n] : per_class) CHECK(n == 4);
  CHECK_THROWS(split_support_query(corpus, 1.5, 3));
}

TEST_CASE("corpus files round-trip exactly and reject truncation") {
  Corpus corpus{4, generate_corpus(small_corpus())};
  const auto path = (std::filesystem::temp_directory_path() / "mcn_corpus_roundtrip.bin").string();
  write_corpus(path, corpus);
  const Corpus back = read_corpus(path);
  CHECK(back.n_classes == 4);
  REQUIRE(back.clips.size() == corpus.clips.size());
  for (std::size_t i = 0; i < back.clips.size(); ++i) {
    CHECK(back.clips[i].frames == corpus.clips[i].frames);
    CHECK(back.clips[i].label == corpus.clips[i].label);
  }
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  CHECK_THROWS(read_corpus(path));
  std::remove(path.c_str());
}

TEST_CASE("residual view examples") {
  Volume two(2, 1, 1, 1);
  two.data = {5.0, 3.0};
  CHECK(residual_view(two).data == std::vector<double>{2.0});
  Volume three(3, 1, 1, 1);
  three.data = {0.1, 0.4, 0.2};
  const Volume r = residual_view(three);
  CHECK(r.data[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(r.data[1] == doctest::Approx(0.2).epsilon(1e-15));
  Volume still(4, 2, 2, 1, 0.375);
  for (double v : residual_view(still).data) CHECK(v == 0.0);
}

TEST_CASE("default-size corpus has the requested counts per class") {
  CorpusConfig c;
  c.n_classes = 4;
  c.clips_per_class = 8;
  const auto corpus = generate_corpus(c);
  CHECK(corpus.size() == 32);
  std::map<int, int> counts;
  for (const auto& clip : corpus) ++counts[clip.label];
  for (const auto& [label, n] : counts) CHECK(n == 8);
  c.height = 7;
  CHECK_THROWS(generate_corpus(c));
  c.height = 16;
  c.frames = 1;
  CHECK_THROWS(generate_corpus(c));
}

TEST_CASE("static sprite leaves only noise in the residual") {
  RenderParams p;
  p.motion = {0, 0};
  p.noise_std = 0.0;
  const Volume clean = render_clip(p, 4);
  for (double v : residual_view(clean).data) CHECK(v == 0.0);
  p.noise_std = 0.01;
  CHECK(residual_energy(render_clip(p, 4)) < 0.02);
}

TEST_CASE("brightness jitter clamps to [0, 1]") {
  Volume v(1, 1, 2, 1);
  v.data = {0.95, 0.02};
  CHECK(add_brightness(v, 0.1).data[0] == 1.0);
  CHECK(add_brightness(v, -0.1).data[1] == 0.0);
}

TEST_CASE("zero-motion residual view ignores brightness applied to the rgb view") {
  RenderParams p;
  p.motion = {0, 0};
  p.noise_std = 0.0;
  Clip clip{render_clip(p, 2), 0, 0};
  AugmentConfig cfg;
  cfg.jitter = 0.1;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (double v : make_view_pair(clip, cfg, seed).res.data) CHECK(v == 0.0);
  }
}

TEST_CASE("split per-class counts differ by at most one and tiny classes are rejected") {
  CorpusConfig c = small_corpus();
  c.clips_per_class = 5;
  const auto corpus = generate_corpus(c);
  const CorpusSplit s = split_support_query(corpus, 0.5, 1);
  std::map<int, int> sup, qry;
  for (const auto& clip : s.support) ++sup[clip.label];
  for (const auto& clip : s.query) ++qry[clip.label];
  for (int label = 0; label < c.n_classes; ++label) CHECK(std::abs(sup[label] - qry[label]) <= 1);
  std::vector<Clip> lonely(corpus.begin(), corpus.begin() + 6);
  lonely.push_back(corpus.back());
  CHECK_THROWS(split_support_query(lonely, 0.5, 1));
}

TEST_CASE("evaluation view is the deterministic centre crop of the first T frames") {
  const auto clip = generate_corpus(small_corpus())[1];
  AugmentConfig cfg;
  const Volume a = eval_rgb_view(clip, cfg);
  CHECK(a == eval_rgb_view(clip, cfg));
  CHECK(a.frames == clip.frames.frames - 1);
}
