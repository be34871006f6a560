#ifndef MCN_META_BRANCH_H_
#define MCN_META_BRANCH_H_

// Feature combination module: cross-view concatenated pairs labelled
// same-clip (1) or different-clip (0), an affine+sigmoid head, and the summed
// binary cross-entropy.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mcn/autodiff.h"
#include "mcn/encoder.h"

namespace mcn {

enum class PairPolicy { kDerangement, kAllPairs };

struct LabeledPair {
  Var feature;  // [1, 2E]: rgb embedding then residual embedding
  int label = 0;
  std::pair<std::uint32_t, std::uint32_t> source_ids;
};

inline constexpr const char* kHeadWeight = "head/weight";
inline constexpr const char* kHeadBias = "head/bias";
inline constexpr double kProbClamp = 1e-12;

// Adds the head entries ([2E, 1] weight, [1] bias) to `params`.
void add_head(ParamSet& params, std::size_t embed_dim, std::uint64_t seed);

bool is_head_param(const std::string& name);

// Uniformly drawn permutation with no fixed points; needs n >= 2.
std::vector<std::size_t> random_derangement(std::size_t n, std::uint64_t seed);

// Derangement policy: B positives (rgb_i + res_i) and B negatives
// (rgb_i + res_sigma(i)). All-pairs: every i != j is a negative. `mirror`
// also emits each pair with the views swapped and the same label.
std::vector<LabeledPair> fcm_pairs(std::span<const EmbeddingNode> rgb,
                                   std::span<const EmbeddingNode> res, std::uint64_t seed,
                                   PairPolicy policy = PairPolicy::kDerangement,
                                   bool mirror = false);

Var classify(const BoundParams& params, const LabeledPair& pair);  // [1,1] probability
Var classify_all(const BoundParams& params, std::span<const LabeledPair> pairs);  // [N,1]

// sum_i -y_i log p_i - (1 - y_i) log(1 - p_i) with p clamped to
// [1e-12, 1 - 1e-12].
Var bce_loss(const Var& probs, std::span<const int> labels);
Var bce_loss(std::span<const Var> probs, std::span<const int> labels);

}  // namespace mcn

#endif  // MCN_META_BRANCH_H_
