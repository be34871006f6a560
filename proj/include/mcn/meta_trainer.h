#ifndef MCN_META_TRAINER_H_
#define MCN_META_TRAINER_H_

// Two-stage training: an inner SGD step on a support batch gives
// theta_bar, the query-batch meta loss at theta_bar then updates theta.
// Single-stage (baseline / CL+BL) training shares the same step code.

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mcn/autodiff.h"
#include "mcn/contrastive.h"
#include "mcn/encoder.h"
#include "mcn/eval_harness.h"
#include "mcn/meta_branch.h"
#include "mcn/synth_data.h"

namespace mcn {

enum class MetaOrder { kFirstOrder, kExactCheck };

struct ComponentFlags {
  bool use_bl = true;           // binary loss enters the objective
  bool use_meta_stages = true;  // support/query two-stage update
};

struct TrainConfig {
  double alpha = 0.2;
  double lr = 0.03;
  std::optional<double> lr_inner;  // defaults to lr
  std::optional<double> lr_meta;   // defaults to lr
  std::size_t batch_size = 8;
  std::size_t epochs = 100;
  std::size_t iterations_per_epoch = 0;  // 0: min(|support|, |query|) / B
  std::size_t inner_steps = 1;
  bool freeze_head_inner = false;
  MetaOrder meta_order = MetaOrder::kFirstOrder;
  double exact_eps = 1e-5;
  std::uint64_t seed = 1;
  ComponentFlags flags;
  ContrastiveConfig contrastive;
  PairPolicy pair_policy = PairPolicy::kDerangement;
  bool mirror_pairs = false;
  EncoderConfig encoder;
  AugmentConfig augment;
  EvalConfig eval;
  std::size_t eval_every = 0;  // epochs between evaluation hooks; 0 = end only

  double inner_lr() const { return lr_inner.value_or(lr); }
  double meta_lr() const { return lr_meta.value_or(lr); }
  // alpha as it enters the objective (0 when the binary loss is disabled).
  double effective_alpha() const { return flags.use_bl ? alpha : 0.0; }
  void validate() const;
};

// Encoder plus meta-branch head under one ParamSet.
ParamSet init_model(const TrainConfig& config);

// alpha * l_cls + (1 - alpha) * l_contrast.
Var meta_loss(const Var& l_cls, const Var& l_contrast, double alpha);

struct BranchLosses {
  Var l_contrast;
  Var l_cls;
  Var l_meta;
  // Detached embeddings of this batch, for the persistent feature bank.
  std::vector<std::uint32_t> clip_ids;
  std::vector<Tensor> rgb_embeddings;
  std::vector<Tensor> res_embeddings;
};

// One shared encoding pass of B clips feeds both branches.
BranchLosses compute_branch_losses(const BoundParams& params, std::span<const Clip> clips,
                                   const TrainConfig& config, std::uint64_t seed,
                                   const FeatureBank* bank = nullptr);

struct StageLosses {
  double l_contrast = 0.0;
  double l_cls = 0.0;
  double l_meta = 0.0;
};

struct StageResult {
  ParamSet params;
  StageLosses losses;  // measured at the parameters the gradient was taken at
  GradMap grads;
  BranchLosses batch;
};

// Loss value and gradient of the meta objective on one batch.
StageResult loss_and_grad(const ParamSet& params, std::span<const Clip> clips,
                          const TrainConfig& config, std::uint64_t seed, const FeatureBank* bank);

struct InnerResult {
  ParamSet theta_bar;
  StageLosses losses;  // at theta
  std::uint64_t seed = 0;
  BranchLosses batch;
};

// theta_bar = theta - lr_inner * grad L_meta(support; theta). theta is not
// touched.
InnerResult inner_update(const ParamSet& theta, std::span<const Clip> support,
                         const TrainConfig& config, std::uint64_t seed,
                         const FeatureBank* bank = nullptr);

// First-order meta update: the query-batch gradient taken at theta_bar is
// applied to theta. `losses` are measured at theta_bar.
StageResult meta_update(const ParamSet& theta, const ParamSet& theta_bar,
                        std::span<const Clip> query, const TrainConfig& config, std::uint64_t seed,
                        const FeatureBank* bank = nullptr);

// Derivative of theta -> L_meta(query; inner_update(theta)) by central
// differences through both stages.
GradMap exact_meta_gradient(const ParamSet& theta, std::span<const Clip> support,
                            std::span<const Clip> query, const TrainConfig& config,
                            std::uint64_t support_seed, std::uint64_t query_seed,
                            const FeatureBank* bank = nullptr);

// First-order meta-gradient: grad of L_meta(query) at theta_bar.
GradMap first_order_meta_gradient(const ParamSet& theta, std::span<const Clip> support,
                                  std::span<const Clip> query, const TrainConfig& config,
                                  std::uint64_t support_seed, std::uint64_t query_seed,
                                  const FeatureBank* bank = nullptr);

std::uint64_t support_stage_seed(std::uint64_t iteration_seed);
std::uint64_t query_stage_seed(std::uint64_t iteration_seed);

struct IterationRecord {
  std::size_t epoch = 0;
  std::size_t iteration = 0;  // global index
  StageLosses support;        // single-stage runs log their batch here
  std::optional<StageLosses> query;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  EvalReport report;
};

struct RunRecord {
  std::vector<IterationRecord> iterations;
  std::vector<EpochMetrics> evaluations;
  bool has_query_stage = false;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

struct StepOutcome {
  ParamSet params;
  IterationRecord record;
};

// One two-stage iteration (inner update on support, meta update on query).
StepOutcome mcn_step(const ParamSet& theta, std::span<const Clip> support,
                     std::span<const Clip> query, const TrainConfig& config,
                     std::uint64_t iteration_seed, FeatureBank* bank = nullptr);

// One plain SGD step on one batch, using `stage_seed` for its views.
StepOutcome single_stage_step(const ParamSet& theta, std::span<const Clip> batch,
                              const TrainConfig& config, std::uint64_t stage_seed,
                              FeatureBank* bank = nullptr);

struct TrainResult {
  ParamSet params;
  RunRecord record;
};

TrainResult train(const TrainConfig& config, const CorpusSplit& split);

// train() with alpha = 0 and both component flags off.
TrainResult baseline_train(TrainConfig config, const CorpusSplit& split);

// Tab-separated loss log; `preamble` lines (e.g. "# key=value") go first.
void write_loss_log(std::ostream& os, const RunRecord& record, const std::string& preamble);

}  // namespace mcn

#endif  // MCN_META_TRAINER_H_
