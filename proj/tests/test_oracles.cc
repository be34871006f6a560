// Frozen worked examples, one check per documented input/output pair.

#include <cmath>

#include "doctest.h"
#include "fixtures.h"
#include "mcn/contrastive.h"
#include "mcn/eval_harness.h"
#include "mcn/experiment.h"
#include "mcn/meta_branch.h"

using namespace mcn;

namespace {

Var row(std::vector<double> v) {
  const std::size_t n = v.size();
  return constant(Tensor(Shape{1, n}, std::move(v)));
}

ParamSet scalar_param(double v) {
  ParamSet p;
  p.add("p", Tensor::scalar(v));
  return p;
}

}  // namespace

TEST_CASE("op forward values") {
  CHECK(abs(constant(Tensor(Shape{3}, {-2.0, 0.0, 3.0}))).value().data == std::vector<double>{2.0, 0.0, 3.0});
  CHECK(logsumexp(row({0.0, 0.0}), 1).value()[0] == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  const Tensor n = l2_normalize_rows(row({3.0, 4.0})).value();
  CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("backward on closed-form derivatives") {
  ParamSet p = scalar_param(3.0);
  auto b = p.bind();
  CHECK(backward(mul(b["p"], b["p"]), b)["p"][0] == 6.0);

  ParamSet q;
  q.add("p", Tensor(Shape{3}, 0.0));
  auto bq = q.bind();
  const GradMap g = backward(sum(sigmoid(bq["p"])), bq);
  for (double v : g.at("p").data) CHECK(v == 0.25);
}

TEST_CASE("numeric_grad closed forms") {
  const GradMap cube = numeric_grad([](const ParamSet& s) { return std::pow(s.at("p")[0], 3); }, scalar_param(2.0));
  CHECK(cube.at("p")[0] == doctest::Approx(12.0).epsilon(1e-9));
  const GradMap flat = numeric_grad([](const ParamSet&) { return 4.0; }, scalar_param(2.0));
  CHECK(flat.at("p")[0] == 0.0);
}

TEST_CASE("numeric_grad agrees with backward on an NCE loss") {
  ParamSet p;
  p.add("a", Tensor(Shape{1, 3}, {0.3, -0.2, 0.9}));
  p.add("n", Tensor(Shape{2, 3}, {0.1, 0.8, -0.4, -0.7, 0.2, 0.3}));
  const Var pos = row({0.5, 0.1, 0.6});
  auto loss = [&](const BoundParams& b) {
    Var a = l2_normalize_rows(b["a"]);
    Var n = l2_normalize_rows(b["n"]);
    std::vector<Var> negs{slice_row(n, 0), slice_row(n, 1)};
    return nce_loss(a, l2_normalize_rows(pos), negs, 0.5);
  };
  auto b = p.bind();
  const GradMap analytic = backward(loss(b), b);
  const GradMap numeric = numeric_grad([&](const ParamSet& s) { return loss(s.bind()).item(); }, p);
  CHECK(max_relative_error(analytic, numeric) < 1e-4);
}

TEST_CASE("sgd_step arithmetic") {
  ParamSet p = scalar_param(1.0);
  CHECK(sgd_step(p, {{"p", Tensor::scalar(2.0)}}, 0.1).at("p")[0] == doctest::Approx(0.8).epsilon(1e-15));
  ParamSet v;
  v.add("p", Tensor(Shape{2}, {1.0, 1.0}));
  CHECK(sgd_step(v, {{"p", Tensor(Shape{2}, {1.0, -1.0})}}, 0.5).at("p").data == std::vector<double>{0.5, 1.5});
}

TEST_CASE("encoder parameter count and degenerate zero-scale network") {
  EncoderConfig c;
  c.frames = 3;
  c.height = 8;
  c.width = 8;
  c.hidden_width = 6;
  c.embed_dim = 4;
  CHECK(encoder_parameter_count(c) == (8 * 8 + 1) * 6 + (6 + 1) * 4);
  c.init_scale = 0.0;
  const ParamSet p = init_encoder(c, 1);
  Volume a(3, 8, 8, 1, 0.2), b(3, 8, 8, 1, 0.9);
  CHECK(embed_view(p, c, a, ViewTag::kRgb) == embed_view(p, c, b, ViewTag::kRgb));
}

TEST_CASE("embedding is invariant to positive scaling of the pre-normalised feature") {
  const Var x = row({0.3, -1.2, 0.4});
  const Tensor a = l2_normalize_rows(x).value();
  const Tensor b = l2_normalize_rows(scale(x, 7.5)).value();
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15));
}

TEST_CASE("log-score examples") {
  CHECK(score(row({1.0, 0.0}), row({1.0, 0.0}), 1.0).item() == 1.0);
  CHECK(score(row({1.0, 0.0}), row({0.0, 1.0}), 0.3).item() == 0.0);
  CHECK(score(row({1.0, 0.0}), row({-1.0, 0.0}), 0.5).item() == -2.0);
}

TEST_CASE("NCE examples") {
  const Var anchor = row({1.0, 0.0, 0.0});
  const Var orth = row({0.0, 1.0, 0.0});
  std::vector<Var> seven(7, orth);
  CHECK(nce_loss(anchor, orth, seven, 0.1).item() == doctest::Approx(2.0794415416798357).epsilon(1e-12));
  std::vector<Var> one{orth};
  CHECK(nce_loss(anchor, anchor, one, 1.0).item() == doctest::Approx(0.31326168751822286).epsilon(1e-12));
  CHECK(nce_loss(anchor, anchor, one, 0.01).item() < 1e-40);
}

TEST_CASE("in-batch bank gives exactly B-1 eligible negatives and persistent selection is seeded") {
  FeatureBank bank;
  for (std::uint32_t id = 0; id < 6; ++id) {
    bank.insert_detached(id, ViewTag::kRgb, Tensor(Shape{2}, {1.0, 0.0}));
    bank.insert_detached(id, ViewTag::kRes, Tensor(Shape{2}, {std::cos(id * 1.0), std::sin(id * 1.0)}));
  }
  CHECK(bank.eligible_count(0, ViewTag::kRgb) == 5);
  const auto a = select_negatives(bank, 0, ViewTag::kRgb, 3, 42);
  const auto b = select_negatives(bank, 0, ViewTag::kRgb, 3, 42);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i].value() == b[i].value());
}

TEST_CASE("FCM with B = 2 swaps the residual halves") {
  std::vector<EmbeddingNode> rgb{{row({1.0, 0.0}), 1, ViewTag::kRgb}, {row({0.0, 1.0}), 2, ViewTag::kRgb}};
  std::vector<EmbeddingNode> res{{row({0.6, 0.8}), 1, ViewTag::kRes}, {row({0.8, 0.6}), 2, ViewTag::kRes}};
  const auto pairs = fcm_pairs(rgb, res, 0);
  REQUIRE(pairs.size() == 4);
  CHECK(pairs[2].source_ids == std::pair<std::uint32_t, std::uint32_t>{1, 2});
  CHECK(pairs[3].source_ids == std::pair<std::uint32_t, std::uint32_t>{2, 1});
  CHECK(pairs[2].label == 0);
  CHECK(pairs[2].feature.value().data == std::vector<double>{1.0, 0.0, 0.8, 0.6});
}

TEST_CASE("classifier saturates with the bias") {
  ParamSet params;
  add_head(params, 2, 3);
  params.set(kHeadBias, Tensor(Shape{1}, {60.0}));
  std::vector<EmbeddingNode> rgb{{row({1.0, 0.0}), 1, ViewTag::kRgb}, {row({0.0, 1.0}), 2, ViewTag::kRgb}};
  const auto pairs = fcm_pairs(rgb, rgb, 0);
  const BoundParams bound = params.bind();
  const Var probs = classify_all(bound, pairs);
  for (double p : probs.value().data) CHECK(p == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("head gradient matches numeric_grad") {
  ParamSet params;
  add_head(params, 2, 5);
  std::vector<EmbeddingNode> rgb{{row({1.0, 0.0}), 1, ViewTag::kRgb}, {row({0.6, 0.8}), 2, ViewTag::kRgb}};
  std::vector<EmbeddingNode> res{{row({0.0, 1.0}), 1, ViewTag::kRes}, {row({-0.8, 0.6}), 2, ViewTag::kRes}};
  const auto pairs = fcm_pairs(rgb, res, 0);
  std::vector<int> labels;
  for (const auto& p : pairs) labels.push_back(p.label);
  auto loss = [&](const BoundParams& b) { return bce_loss(classify_all(b, pairs), labels); };
  auto b = params.bind();
  const GradMap analytic = backward(loss(b), b);
  const GradMap numeric = numeric_grad([&](const ParamSet& s) { return loss(s.bind()).item(); }, params);
  CHECK(max_relative_error(analytic, numeric) < 1e-4);
}

TEST_CASE("BCE examples") {
  const int one[1] = {1};
  CHECK(bce_loss(row({1.0}), one).item() == doctest::Approx(-std::log(1.0 - kProbClamp)));
  CHECK(bce_loss(row({0.5}), one).item() == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  const Var probs = constant(Tensor(Shape{3, 1}, {0.2, 0.7, 0.9}));
  const Var flipped = constant(Tensor(Shape{3, 1}, {0.8, 0.3, 0.1}));
  const int labels[3] = {1, 0, 1};
  const int inverse[3] = {0, 1, 0};
  CHECK(bce_loss(probs, labels).item() == doctest::Approx(bce_loss(flipped, inverse).item()).epsilon(1e-15));
}

TEST_CASE("meta loss example") {
  CHECK(meta_loss(constant(Tensor::scalar(1.0)), constant(Tensor::scalar(2.0)), 0.2).item() ==
        doctest::Approx(1.8).epsilon(1e-15));
}

TEST_CASE("B = 2, k = 1 batch and zero-scale encoder give ln(k + 1)") {
  TrainConfig cfg = testing::tiny_train_config();
  cfg.batch_size = 2;
  cfg.encoder.init_scale = 0.0;
  cfg.contrastive.k = 1;
  const auto batch = gradcheck_batch(2, 0);
  const std::vector<Clip> two(batch.begin(), batch.begin() + 2);
  const ParamSet p = init_model(cfg);
  const BoundParams b = p.bind();
  const BranchLosses l = compute_branch_losses(b, two, cfg, 3);
  CHECK(l.l_contrast.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("inner update examples") {
  const auto split = testing::tiny_split();
  const std::vector<Clip> s(split.support.begin(), split.support.begin() + 4);
  const std::vector<Clip> q(split.query.begin(), split.query.begin() + 4);
  TrainConfig cfg = testing::tiny_train_config();
  const ParamSet theta = gradcheck_params(cfg);

  TrainConfig frozen = cfg;
  frozen.lr_inner = 0.0;
  CHECK(inner_update(theta, s, frozen, 1).theta_bar == theta);

  TrainConfig small = cfg;
  small.lr_inner = 1e-3;
  const InnerResult inner = inner_update(theta, s, small, 1);
  const BoundParams bar = inner.theta_bar.bind();
  CHECK(compute_branch_losses(bar, s, small, 1).l_meta.item() <= inner.losses.l_meta);

  TrainConfig still = cfg;
  still.lr_meta = 0.0;
  CHECK(meta_update(theta, inner.theta_bar, q, still, 2).params == theta);
}

TEST_CASE("contrastive loss falls over training on the default corpus") {
  const ExperimentConfig defaults;
  const SplitConfig sc = split_config(defaults);
  const auto split = split_support_query(generate_corpus(corpus_config(defaults)), sc.support_fraction, sc.seed,
                                         sc.eval_test_fraction);
  TrainConfig cfg = train_config(defaults);
  cfg.epochs = 20;
  const TrainResult r = baseline_train(cfg, split);
  auto epoch_mean = [&](std::size_t e) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& it : r.record.iterations) {
      if (it.epoch != e) continue;
      acc += it.support.l_contrast;
      ++n;
    }
    return acc / static_cast<double>(n);
  };
  CHECK(epoch_mean(cfg.epochs - 1) < epoch_mean(0));
}

TEST_CASE("evaluation harness examples") {
  const std::vector<FeatureRecord> train{{0, 0, {1.0, 0.0}}, {1, 1, {0.0, 1.0}}, {2, 0, {0.7, 0.7}}};
  const std::vector<FeatureRecord> test{{5, 1, {0.0, 1.0}}, {6, 0, {-1.0, 0.2}}};
  const auto r = retrieval_topk(train, test, {1, 3});
  CHECK(r.hits.at(1) == 1);
  CHECK(r.accuracy.at(3) == 1.0);
  CHECK(linear_probe(train, test, 0, 1.0, 9) == linear_probe(train, test, 0, 1.0, 9));
}

TEST_CASE("feature extraction is one deterministic unit vector per clip") {
  const auto split = testing::tiny_split();
  const TrainConfig cfg = testing::tiny_train_config();
  const ParamSet p = init_model(cfg);
  const auto a = extract_features(p, cfg.encoder, cfg.augment, split.eval_test);
  const auto b = extract_features(p, cfg.encoder, cfg.augment, split.eval_test);
  REQUIRE(a.size() == split.eval_test.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].embedding == b[i].embedding);
    double ss = 0.0;
    for (double v : a[i].embedding) ss += v * v;
    CHECK(std::fabs(std::sqrt(ss) - 1.0) < 1e-6);
  }
}
