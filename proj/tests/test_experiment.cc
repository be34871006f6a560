#include <cstdio>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "fixtures.h"
#include "mcn/ablation.h"
#include "mcn/checkpoint.h"
#include "mcn/experiment.h"
#include "mcn/svg_plot.h"

using namespace mcn;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("defaults resolve to the library defaults") {
  const ExperimentConfig c;
  const TrainConfig t = train_config(c);
  CHECK(t.alpha == 0.2);
  CHECK(t.batch_size == 8);
  CHECK(t.encoder.frames == 8);
  CHECK(t.encoder.height == 16);
  CHECK(t.inner_lr() == t.lr);
  CHECK(train_mode(c) == TrainMode::kMcn);
  CHECK(corpus_config(c).n_classes == 8);
  CHECK(eval_config(c).ks == std::vector<std::size_t>{1, 5, 10, 20, 50});
}

TEST_CASE("overrides parse and unknown or malformed keys are rejected") {
  ExperimentConfig c;
  c.set("train.lr_inner=0.5");
  c.set("train.mode", "baseline");
  CHECK(train_config(c).inner_lr() == 0.5);
  CHECK(train_mode(c) == TrainMode::kBaseline);
  CHECK_THROWS(c.set("train.nope=1"));
  CHECK_THROWS(c.set("no_equals_sign"));
  c.set("train.alpha=abc");
  CHECK_THROWS(train_config(c));
}

TEST_CASE("config text skips comments and round-trips through its echo") {
  ExperimentConfig c;
  c.load_text("# comment\n\ntrain.epochs=7\ncontrastive.tau=0.5\n", "inline");
  const ExperimentConfig back = config_from_echo(c.echo());
  CHECK(back.values() == c.values());
  CHECK(back.get_int("train.epochs") == 7);
  CHECK_THROWS(c.load_text("bogus.key=1\n", "inline"));
}

TEST_CASE("checkpoints round-trip parameters and config text exactly") {
  const TrainConfig cfg = testing::tiny_train_config();
  const Checkpoint ck{gradcheck_params(cfg), "train.seed=1\n"};
  const auto path = temp_path("mcn_ckpt_roundtrip.bin");
  write_checkpoint(path, ck);
  const Checkpoint back = read_checkpoint(path);
  CHECK(back.params == ck.params);
  CHECK(back.config_text == ck.config_text);
  const std::string digest = file_digest(path);
  CHECK(digest.size() == 16);
  CHECK(digest == file_digest(path));
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 1);
  CHECK_THROWS(read_checkpoint(path));
  std::remove(path.c_str());
}

TEST_CASE("median of odd and even samples") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS(median({}));
}

TEST_CASE("ablation rows are complete and deterministic on a tiny corpus") {
  TrainConfig base = testing::tiny_train_config();
  base.epochs = 1;
  base.eval.ks = {1, 5};
  const auto split = testing::tiny_split();
  const std::vector<std::uint64_t> seeds{1, 2};
  const std::vector<double> alphas{0.1, 0.4};
  const AblationResult a = run_ablation(base, split, seeds, alphas);
  REQUIRE(a.components.size() == 3);
  REQUIRE(a.alpha_sweep.size() == 2);
  for (const auto& row : a.components) CHECK(row.retrieval_top1.size() == 2);
  CHECK(a.components[0].mode == TrainMode::kBaseline);
  CHECK(a.components[2].mode == TrainMode::kMcn);
  const AblationResult b = run_ablation(base, split, seeds, alphas);
  std::ostringstream ta, tb;
  write_ablation_table(ta, a.components, "");
  write_ablation_table(tb, b.components, "");
  CHECK(ta.str() == tb.str());
}

TEST_CASE("svg output is a well-formed document with one element per series or bar") {
  const std::string line = line_plot_svg("t", "x", "y", {{"a", {1.0, 2.0}}, {"b", {2.0, 1.0}}});
  CHECK(line.rfind("<svg", 0) == 0);
  CHECK(line.find("</svg>") != std::string::npos);
  const std::string bars = bar_plot_svg("t", "y", {{"p", 0.5, 0.4, 0.6}, {"q", 0.7, 0.7, 0.7}});
  CHECK(bars.find(">p<") != std::string::npos);
  CHECK(bars.find(">q<") != std::string::npos);
}
