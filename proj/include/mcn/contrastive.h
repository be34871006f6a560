#ifndef MCN_CONTRASTIVE_H_
#define MCN_CONTRASTIVE_H_

// Cross-view NCE objective over unit embeddings. Scores stay in the log
// domain, z1.z2/tau; they are only exponentiated inside log-sum-exp.

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "mcn/autodiff.h"
#include "mcn/synth_data.h"

namespace mcn {

enum class BankMode { kInBatch, kPersistent };

struct ContrastiveConfig {
  double tau = 0.1;
  std::size_t k = 0;  // negatives per anchor; 0 means B-1
  BankMode bank_mode = BankMode::kInBatch;
  bool symmetric = true;
  std::size_t bank_capacity = 0;  // persistent mode; 0 = unbounded

  void validate() const;
};

// Log of the exponentiated cosine score: (z1 . z2) / tau.
Var score(const Var& z1, const Var& z2, double tau);

// logsumexp over {positive} U negatives minus the positive's log-score.
Var nce_loss(const Var& anchor, const Var& positive, std::span<const Var> negatives, double tau);

struct BankEntry {
  std::uint32_t clip_id = 0;
  ViewTag tag = ViewTag::kRgb;
  Tensor vector;  // [1, E]
  Var node;       // live node for in-batch entries, detached constant otherwise
};

// At most one entry per (clip_id, view); inserting an existing key replaces
// it. When a capacity is set, the oldest entries are evicted first.
class FeatureBank {
 public:
  explicit FeatureBank(std::size_t capacity = 0) : capacity_(capacity) {}

  void insert(std::uint32_t clip_id, ViewTag tag, const Var& node);  // keeps the node
  void insert_detached(std::uint32_t clip_id, ViewTag tag, Tensor vector);

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<BankEntry>& entries() const { return entries_; }
  std::size_t eligible_count(std::uint32_t anchor_clip_id, ViewTag anchor_tag) const;

 private:
  void put(BankEntry entry);

  std::size_t capacity_;
  std::deque<BankEntry> entries_;
};

// k opposite-view entries whose clip differs from the anchor's. Exactly k
// eligible entries are returned in bank order; otherwise a seeded uniform
// draw without replacement.
std::vector<Var> select_negatives(const FeatureBank& bank, std::uint32_t anchor_clip_id,
                                  ViewTag anchor_tag, std::size_t k, std::uint64_t seed);

// Batch objective: mean NCE over anchors, RGB anchoring residual and (when
// symmetric) the reverse, averaged. `persistent` is consulted in persistent
// mode; in-batch mode builds its bank from the live batch rows.
Var batch_contrastive_loss(const Var& rgb, const Var& res, std::span<const std::uint32_t> clip_ids,
                           const ContrastiveConfig& config, const FeatureBank* persistent,
                           std::uint64_t seed);

}  // namespace mcn

#endif  // MCN_CONTRASTIVE_H_
