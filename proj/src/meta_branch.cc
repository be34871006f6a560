#include "mcn/meta_branch.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mcn/rng.h"

namespace mcn {

void add_head(ParamSet& params, std::size_t embed_dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {kTagHead}));
  const std::size_t fan_in = 2 * embed_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor w(Shape{fan_in, 1});
  for (auto& v : w.data) v = dist(rng);
  params.add(kHeadWeight, std::move(w));
  params.add(kHeadBias, Tensor(Shape{1}));
}

bool is_head_param(const std::string& name) { return name.rfind("head/", 0) == 0; }

std::vector<std::size_t> random_derangement(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("random_derangement: no derangement of " + std::to_string(n));
  Rng rng(seed);
  std::vector<std::size_t> perm(n);
  for (;;) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    bool fixed_point = false;
    for (std::size_t i = 0; i < n; ++i) fixed_point = fixed_point || perm[i] == i;
    if (!fixed_point) return perm;
  }
}

std::vector<LabeledPair> fcm_pairs(std::span<const EmbeddingNode> rgb,
                                   std::span<const EmbeddingNode> res, std::uint64_t seed,
                                   PairPolicy policy, bool mirror) {
  const std::size_t B = rgb.size();
  if (res.size() != B) throw std::invalid_argument("fcm_pairs: view lists differ in length");
  if (B < 2) throw std::invalid_argument("fcm_pairs: need B >= 2 clips to form negatives");
  for (std::size_t i = 0; i < B; ++i) {
    if (rgb[i].clip_id != res[i].clip_id) {
      throw std::invalid_argument("fcm_pairs: lists must cover the same clips in the same order");
    }
  }
  std::vector<LabeledPair> pairs;
  auto emit = [&](std::size_t i, std::size_t j) {
    const int label = i == j ? 1 : 0;
    Var ab[2] = {rgb[i].vector, res[j].vector};
    pairs.push_back({concat_cols(ab), label, {rgb[i].clip_id, res[j].clip_id}});
    if (mirror) {
      Var ba[2] = {res[j].vector, rgb[i].vector};
      pairs.push_back({concat_cols(ba), label, {res[j].clip_id, rgb[i].clip_id}});
    }
  };
  for (std::size_t i = 0; i < B; ++i) emit(i, i);
  if (policy == PairPolicy::kDerangement) {
    const auto sigma = random_derangement(B, derive_seed(seed, {kTagPairs}));
    for (std::size_t i = 0; i < B; ++i) emit(i, sigma[i]);
  } else {
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < B; ++j)
        if (i != j) emit(i, j);
  }
  return pairs;
}

Var classify_all(const BoundParams& params, std::span<const LabeledPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("classify: no pairs");
  const Var& w = params[kHeadWeight];
  const std::size_t width = w.shape()[0];
  std::vector<Var> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.feature.value().size() != width) {
      throw std::invalid_argument("classify: pair feature width " +
                                  std::to_string(p.feature.value().size()) +
                                  " does not match head input width " + std::to_string(width));
    }
    rows.push_back(p.feature);
  }
  return sigmoid(add_row(matmul(concat_rows(rows), w), params[kHeadBias]));
}

Var classify(const BoundParams& params, const LabeledPair& pair) {
  return classify_all(params, std::span<const LabeledPair>(&pair, 1));
}

Var bce_loss(const Var& probs, std::span<const int> labels) {
  if (probs.value().size() != labels.size()) {
    throw std::invalid_argument("bce_loss: " + std::to_string(probs.value().size()) +
                                " probabilities vs " + std::to_string(labels.size()) + " labels");
  }
  Tensor y(probs.shape()), not_y(probs.shape());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("bce_loss: labels must be 0/1");
    y.data[i] = labels[i];
    not_y.data[i] = 1 - labels[i];
  }
  Var p = clamp(probs, kProbClamp, 1.0 - kProbClamp);
  Var one_minus_p = add_scalar(scale(p, -1.0), 1.0);
  Var ll = add(mul(constant(std::move(y)), log(p)), mul(constant(std::move(not_y)), log(one_minus_p)));
  return scale(sum(ll), -1.0);
}

Var bce_loss(std::span<const Var> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) {
    throw std::invalid_argument("bce_loss: " + std::to_string(probs.size()) +
                                " probabilities vs " + std::to_string(labels.size()) + " labels");
  }
  if (probs.empty()) throw std::invalid_argument("bce_loss: empty input");
  std::vector<Var> rows;
  for (const auto& p : probs) rows.push_back(reshape(p, Shape{1, 1}));
  return bce_loss(concat_rows(rows), labels);
}

}  // namespace mcn
