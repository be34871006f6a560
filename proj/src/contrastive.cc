#include "mcn/contrastive.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mcn/rng.h"

namespace mcn {

namespace {

double norm_of(const Tensor& t) {
  double ss = 0.0;
  for (double v : t.data) ss += v * v;
  return std::sqrt(ss);
}

void require_nonzero(const Var& v, const char* who) {
  if (!(norm_of(v.value()) > 0.0)) {
    throw std::domain_error(std::string(who) + ": zero vector (cosine undefined)");
  }
}

Var as_row(const Var& v) {
  if (v.shape().size() == 1) return reshape(v, Shape{1, v.shape()[0]});
  return v;
}

}  // namespace

void ContrastiveConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("ContrastiveConfig: tau must be > 0");
}

Var score(const Var& z1, const Var& z2, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("score: tau must be > 0");
  require_nonzero(z1, "score");
  require_nonzero(z2, "score");
  return scale(sum(mul(z1, z2)), 1.0 / tau);
}

Var nce_loss(const Var& anchor, const Var& positive, std::span<const Var> negatives, double tau) {
  if (negatives.empty()) throw std::invalid_argument("nce_loss: empty negative list");
  if (!(tau > 0.0)) throw std::invalid_argument("nce_loss: tau must be > 0");
  require_nonzero(anchor, "nce_loss");
  std::vector<Var> candidates;
  candidates.reserve(negatives.size() + 1);
  candidates.push_back(as_row(positive));
  for (const auto& n : negatives) candidates.push_back(as_row(n));
  Var stacked = concat_rows(candidates);                                   // [k+1, E]
  Var logits = scale(matmul(stacked, transpose(as_row(anchor))), 1.0 / tau);  // [k+1, 1]
  Var lse = reshape(logsumexp(logits, 0), Shape{});
  Var positive_logit = reshape(slice_row(logits, 0), Shape{});
  return sub(lse, positive_logit);
}

void FeatureBank::put(BankEntry entry) {
  const double n = norm_of(entry.vector);
  if (std::fabs(n - 1.0) > 1e-6) {
    throw std::invalid_argument("FeatureBank: entry for clip " + std::to_string(entry.clip_id) +
                                " has norm " + std::to_string(n) + ", expected 1");
  }
  auto same = [&](const BankEntry& e) { return e.clip_id == entry.clip_id && e.tag == entry.tag; };
  if (auto it = std::find_if(entries_.begin(), entries_.end(), same); it != entries_.end()) {
    entries_.erase(it);
  }
  entries_.push_back(std::move(entry));
  if (capacity_ > 0) {
    while (entries_.size() > capacity_) entries_.pop_front();
  }
}

void FeatureBank::insert(std::uint32_t clip_id, ViewTag tag, const Var& node) {
  put(BankEntry{clip_id, tag, node.value(), node});
}

void FeatureBank::insert_detached(std::uint32_t clip_id, ViewTag tag, Tensor vector) {
  if (vector.rank() == 1) vector.shape = Shape{1, vector.size()};
  Var node = constant(vector);
  put(BankEntry{clip_id, tag, std::move(vector), std::move(node)});
}

std::size_t FeatureBank::eligible_count(std::uint32_t anchor_clip_id, ViewTag anchor_tag) const {
  const ViewTag want = opposite(anchor_tag);
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [&](const BankEntry& e) {
    return e.tag == want && e.clip_id != anchor_clip_id;
  }));
}

std::vector<Var> select_negatives(const FeatureBank& bank, std::uint32_t anchor_clip_id,
                                  ViewTag anchor_tag, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw std::invalid_argument("select_negatives: k must be >= 1");
  const ViewTag want = opposite(anchor_tag);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < bank.entries().size(); ++i) {
    const auto& e = bank.entries()[i];
    if (e.tag == want && e.clip_id != anchor_clip_id) eligible.push_back(i);
  }
  if (eligible.size() < k) {
    throw std::invalid_argument("select_negatives: only " + std::to_string(eligible.size()) +
                                " eligible entries for clip " + std::to_string(anchor_clip_id) +
                                ", need k = " + std::to_string(k));
  }
  if (eligible.size() > k) {
    Rng rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, eligible.size() - 1);
      std::swap(eligible[i], eligible[pick(rng)]);
    }
    eligible.resize(k);
  }
  std::vector<Var> out;
  out.reserve(k);
  for (auto i : eligible) out.push_back(bank.entries()[i].node);
  return out;
}

Var batch_contrastive_loss(const Var& rgb, const Var& res, std::span<const std::uint32_t> clip_ids,
                           const ContrastiveConfig& config, const FeatureBank* persistent,
                           std::uint64_t seed) {
  config.validate();
  if (rgb.shape() != res.shape() || rgb.shape().size() != 2) {
    throw std::invalid_argument("batch_contrastive_loss: view embeddings " + shape_str(rgb.shape()) +
                                " and " + shape_str(res.shape()) + " differ");
  }
  const std::size_t B = rgb.shape()[0];
  if (clip_ids.size() != B) throw std::invalid_argument("batch_contrastive_loss: clip id count mismatch");
  const std::size_t k = config.k == 0 ? B - 1 : config.k;

  std::vector<Var> rgb_rows, res_rows;
  for (std::size_t i = 0; i < B; ++i) {
    rgb_rows.push_back(slice_row(rgb, i));
    res_rows.push_back(slice_row(res, i));
  }

  FeatureBank batch_bank;
  const FeatureBank* bank = persistent;
  if (config.bank_mode == BankMode::kInBatch) {
    for (std::size_t i = 0; i < B; ++i) {
      batch_bank.insert(clip_ids[i], ViewTag::kRgb, rgb_rows[i]);
      batch_bank.insert(clip_ids[i], ViewTag::kRes, res_rows[i]);
    }
    bank = &batch_bank;
  } else if (bank == nullptr) {
    throw std::invalid_argument("batch_contrastive_loss: persistent mode needs a feature bank");
  }

  std::vector<Var> terms;
  auto add_direction = [&](const std::vector<Var>& anchors, const std::vector<Var>& positives,
                           ViewTag anchor_tag) {
    for (std::size_t i = 0; i < B; ++i) {
      const auto negs = select_negatives(
          *bank, clip_ids[i], anchor_tag, k,
          derive_seed(seed, {kTagNegatives, static_cast<std::uint64_t>(anchor_tag), clip_ids[i]}));
      terms.push_back(reshape(nce_loss(anchors[i], positives[i], negs, config.tau), Shape{1}));
    }
  };
  add_direction(rgb_rows, res_rows, ViewTag::kRgb);
  if (config.symmetric) add_direction(res_rows, rgb_rows, ViewTag::kRes);
  return mean(concat_cols(terms));
}

}  // namespace mcn
