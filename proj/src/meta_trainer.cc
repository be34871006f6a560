#include "mcn/meta_trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mcn/rng.h"
#include "mcn/text_format.h"

namespace mcn {

void TrainConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("TrainConfig: alpha must be in [0, 1]");
  if (!(lr >= 0.0) || !(inner_lr() >= 0.0) || !(meta_lr() >= 0.0)) {
    throw std::invalid_argument("TrainConfig: learning rates must be >= 0");
  }
  if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
  if (inner_steps < 1) throw std::invalid_argument("TrainConfig: inner_steps must be >= 1");
  if (contrastive.k > batch_size - 1 && contrastive.bank_mode == BankMode::kInBatch) {
    throw std::invalid_argument("TrainConfig: in-batch mode allows at most B-1 = " +
                                std::to_string(batch_size - 1) + " negatives");
  }
  contrastive.validate();
  encoder.validate();
}

ParamSet init_model(const TrainConfig& config) {
  ParamSet params = init_encoder(config.encoder, config.seed);
  add_head(params, config.encoder.embed_dim, config.seed);
  return params;
}

Var meta_loss(const Var& l_cls, const Var& l_contrast, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("meta_loss: alpha = " + fmt_double(alpha) + " outside [0, 1]");
  }
  if (!std::isfinite(l_cls.item()) || !std::isfinite(l_contrast.item())) {
    throw std::domain_error("meta_loss: non-finite branch loss");
  }
  return add(scale(l_cls, alpha), scale(l_contrast, 1.0 - alpha));
}

BranchLosses compute_branch_losses(const BoundParams& params, std::span<const Clip> clips,
                                   const TrainConfig& config, std::uint64_t seed,
                                   const FeatureBank* bank) {
  const std::size_t B = clips.size();
  if (B < 2) throw std::invalid_argument("compute_branch_losses: need a batch of >= 2 clips");
  std::vector<ViewPair> views;
  views.reserve(B);
  for (const auto& clip : clips) views.push_back(make_view_pair(clip, config.augment, seed));
  std::vector<const Volume*> rgb_in, res_in;
  BranchLosses out;
  for (const auto& v : views) {
    rgb_in.push_back(&v.rgb);
    res_in.push_back(&v.res);
    out.clip_ids.push_back(v.clip_id);
  }
  Var rgb = encode_batch(params, config.encoder, rgb_in, ViewTag::kRgb);
  Var res = encode_batch(params, config.encoder, res_in, ViewTag::kRes);

  out.l_contrast = batch_contrastive_loss(rgb, res, out.clip_ids, config.contrastive, bank,
                                          derive_seed(seed, {kTagNegatives}));

  std::vector<EmbeddingNode> rgb_nodes, res_nodes;
  for (std::size_t i = 0; i < B; ++i) {
    rgb_nodes.push_back({slice_row(rgb, i), out.clip_ids[i], ViewTag::kRgb});
    res_nodes.push_back({slice_row(res, i), out.clip_ids[i], ViewTag::kRes});
    out.rgb_embeddings.push_back(rgb_nodes.back().vector.value());
    out.res_embeddings.push_back(res_nodes.back().vector.value());
  }
  const auto pairs = fcm_pairs(rgb_nodes, res_nodes, seed, config.pair_policy, config.mirror_pairs);
  std::vector<int> labels;
  for (const auto& p : pairs) labels.push_back(p.label);
  out.l_cls = bce_loss(classify_all(params, pairs), labels);
  out.l_meta = meta_loss(out.l_cls, out.l_contrast, config.effective_alpha());
  return out;
}

namespace {

StageLosses values_of(const BranchLosses& b) {
  StageLosses s{b.l_contrast.item(), b.l_cls.item(), b.l_meta.item()};
  if (!std::isfinite(s.l_contrast) || !std::isfinite(s.l_cls) || !std::isfinite(s.l_meta)) {
    throw std::runtime_error("non-finite loss recorded");
  }
  return s;
}

double meta_objective(const ParamSet& params, std::span<const Clip> clips, const TrainConfig& config,
                      std::uint64_t seed, const FeatureBank* bank) {
  const BoundParams bound = params.bind();
  return compute_branch_losses(bound, clips, config, seed, bank).l_meta.item();
}

void store_in_bank(FeatureBank& bank, const BranchLosses& batch) {
  for (std::size_t i = 0; i < batch.clip_ids.size(); ++i) {
    bank.insert_detached(batch.clip_ids[i], ViewTag::kRgb, batch.rgb_embeddings[i]);
    bank.insert_detached(batch.clip_ids[i], ViewTag::kRes, batch.res_embeddings[i]);
  }
}

}  // namespace

StageResult loss_and_grad(const ParamSet& params, std::span<const Clip> clips,
                          const TrainConfig& config, std::uint64_t seed, const FeatureBank* bank) {
  const BoundParams bound = params.bind();
  StageResult out;
  out.batch = compute_branch_losses(bound, clips, config, seed, bank);
  out.losses = values_of(out.batch);
  out.grads = backward(out.batch.l_meta, bound);
  out.params = params;
  return out;
}

InnerResult inner_update(const ParamSet& theta, std::span<const Clip> support,
                         const TrainConfig& config, std::uint64_t seed, const FeatureBank* bank) {
  InnerResult out;
  out.seed = seed;
  out.theta_bar = theta;
  for (std::size_t step = 0; step < config.inner_steps; ++step) {
    const std::uint64_t step_seed = step == 0 ? seed : derive_seed(seed, {kTagInnerStep, step});
    StageResult r = loss_and_grad(out.theta_bar, support, config, step_seed, bank);
    if (step == 0) {
      out.losses = r.losses;
      out.batch = std::move(r.batch);
    }
    if (config.freeze_head_inner) {
      for (auto& [name, g] : r.grads) {
        if (is_head_param(name)) std::fill(g.data.begin(), g.data.end(), 0.0);
      }
    }
    out.theta_bar = sgd_step(out.theta_bar, r.grads, config.inner_lr());
  }
  return out;
}

StageResult meta_update(const ParamSet& theta, const ParamSet& theta_bar,
                        std::span<const Clip> query, const TrainConfig& config, std::uint64_t seed,
                        const FeatureBank* bank) {
  StageResult r = loss_and_grad(theta_bar, query, config, seed, bank);
  r.params = sgd_step(theta, r.grads, config.meta_lr());
  return r;
}

GradMap exact_meta_gradient(const ParamSet& theta, std::span<const Clip> support,
                            std::span<const Clip> query, const TrainConfig& config,
                            std::uint64_t support_seed, std::uint64_t query_seed,
                            const FeatureBank* bank) {
  auto composite = [&](const ParamSet& p) {
    const InnerResult inner = inner_update(p, support, config, support_seed, bank);
    return meta_objective(inner.theta_bar, query, config, query_seed, bank);
  };
  return numeric_grad(composite, theta, config.exact_eps);
}

GradMap first_order_meta_gradient(const ParamSet& theta, std::span<const Clip> support,
                                  std::span<const Clip> query, const TrainConfig& config,
                                  std::uint64_t support_seed, std::uint64_t query_seed,
                                  const FeatureBank* bank) {
  const InnerResult inner = inner_update(theta, support, config, support_seed, bank);
  return loss_and_grad(inner.theta_bar, query, config, query_seed, bank).grads;
}

std::uint64_t support_stage_seed(std::uint64_t iteration_seed) {
  return derive_seed(iteration_seed, {kTagSupport});
}

std::uint64_t query_stage_seed(std::uint64_t iteration_seed) {
  return derive_seed(iteration_seed, {kTagQuery});
}

StepOutcome mcn_step(const ParamSet& theta, std::span<const Clip> support,
                     std::span<const Clip> query, const TrainConfig& config,
                     std::uint64_t iteration_seed, FeatureBank* bank) {
  const std::uint64_t s_seed = support_stage_seed(iteration_seed);
  const std::uint64_t q_seed = query_stage_seed(iteration_seed);
  const InnerResult inner = inner_update(theta, support, config, s_seed, bank);
  StageResult meta = meta_update(theta, inner.theta_bar, query, config, q_seed, bank);
  if (config.meta_order == MetaOrder::kExactCheck) {
    meta.params = sgd_step(
        theta, exact_meta_gradient(theta, support, query, config, s_seed, q_seed, bank),
        config.meta_lr());
  }
  if (bank != nullptr && config.contrastive.bank_mode == BankMode::kPersistent) {
    store_in_bank(*bank, inner.batch);
    store_in_bank(*bank, meta.batch);
  }
  StepOutcome out;
  out.params = std::move(meta.params);
  out.record.support = inner.losses;
  out.record.query = meta.losses;
  return out;
}

StepOutcome single_stage_step(const ParamSet& theta, std::span<const Clip> batch,
                              const TrainConfig& config, std::uint64_t stage_seed,
                              FeatureBank* bank) {
  StageResult r = loss_and_grad(theta, batch, config, stage_seed, bank);
  if (bank != nullptr && config.contrastive.bank_mode == BankMode::kPersistent) {
    store_in_bank(*bank, r.batch);
  }
  StepOutcome out;
  out.params = sgd_step(theta, r.grads, config.lr);
  out.record.support = r.losses;
  return out;
}

namespace {

std::vector<Clip> gather(const std::vector<Clip>& pool, const std::vector<std::size_t>& order,
                         std::size_t start, std::size_t count) {
  std::vector<Clip> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(pool[order[start + i]]);
  return out;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

TrainResult train(const TrainConfig& config, const CorpusSplit& split) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t B = config.batch_size;
  const bool two_stage = config.flags.use_meta_stages;
  if (split.support.size() < B || split.query.size() < B) {
    throw std::invalid_argument("train: batch size " + std::to_string(B) +
                                " larger than support (" + std::to_string(split.support.size()) +
                                ") or query (" + std::to_string(split.query.size()) + ") set");
  }

  std::vector<Clip> pool;
  if (!two_stage) {
    pool = split.support;
    pool.insert(pool.end(), split.query.begin(), split.query.end());
    std::sort(pool.begin(), pool.end(),
              [](const Clip& a, const Clip& b) { return a.clip_id < b.clip_id; });
  }
  const std::size_t iters_per_epoch = config.iterations_per_epoch > 0
                                          ? config.iterations_per_epoch
                                          : std::min(split.support.size(), split.query.size()) / B;
  if (!two_stage && iters_per_epoch * B > pool.size()) {
    throw std::invalid_argument("train: iterations_per_epoch * B exceeds the training pool");
  }
  if (two_stage && iters_per_epoch * B > std::min(split.support.size(), split.query.size())) {
    throw std::invalid_argument("train: iterations_per_epoch * B exceeds the support/query sets");
  }

  TrainResult result;
  result.params = init_model(config);
  result.record.seed = config.seed;
  result.record.has_query_stage = two_stage;

  FeatureBank bank(config.contrastive.bank_capacity);
  if (config.contrastive.bank_mode == BankMode::kPersistent) {
    const std::uint64_t fill_seed = derive_seed(config.seed, {kTagBank});
    std::vector<Clip> all = split.support;
    all.insert(all.end(), split.query.begin(), split.query.end());
    for (const auto& clip : all) {
      const ViewPair vp = make_view_pair(clip, config.augment, fill_seed);
      bank.insert_detached(clip.clip_id, ViewTag::kRgb,
                           Tensor::row(embed_view(result.params, config.encoder, vp.rgb, ViewTag::kRgb)));
      bank.insert_detached(clip.clip_id, ViewTag::kRes,
                           Tensor::row(embed_view(result.params, config.encoder, vp.res, ViewTag::kRes)));
    }
  }

  auto run_eval = [&](std::size_t epoch) {
    if (split.eval_train.empty() || split.eval_test.empty()) return;
    EpochMetrics m;
    m.epoch = epoch;
    m.report = evaluate(result.params, config.encoder, config.augment, split.eval_train,
                        split.eval_test, config.eval);
    result.record.evaluations.push_back(std::move(m));
  };

  std::size_t global = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> s_order, q_order, p_order;
    if (two_stage) {
      s_order = epoch_order(split.support.size(), derive_seed(config.seed, {kTagEpoch, epoch, kTagSupport}));
      q_order = epoch_order(split.query.size(), derive_seed(config.seed, {kTagEpoch, epoch, kTagQuery}));
    } else {
      p_order = epoch_order(pool.size(), derive_seed(config.seed, {kTagEpoch, epoch, kTagQuery}));
    }
    for (std::size_t it = 0; it < iters_per_epoch; ++it, ++global) {
      const std::uint64_t iter_seed = derive_seed(config.seed, {kTagIteration, global});
      StepOutcome step;
      if (two_stage) {
        const auto support = gather(split.support, s_order, it * B, B);
        const auto query = gather(split.query, q_order, it * B, B);
        step = mcn_step(result.params, support, query, config, iter_seed, &bank);
      } else {
        const auto batch = gather(pool, p_order, it * B, B);
        step = single_stage_step(result.params, batch, config, query_stage_seed(iter_seed), &bank);
      }
      step.record.epoch = epoch;
      step.record.iteration = global;
      result.params = std::move(step.params);
      result.record.iterations.push_back(step.record);
    }
    if (config.eval_every > 0 && (epoch + 1) % config.eval_every == 0) run_eval(epoch + 1);
  }
  if (result.record.evaluations.empty() || result.record.evaluations.back().epoch != config.epochs) {
    run_eval(config.epochs);
  }
  result.record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

TrainResult baseline_train(TrainConfig config, const CorpusSplit& split) {
  config.alpha = 0.0;
  config.flags.use_bl = false;
  config.flags.use_meta_stages = false;
  return train(config, split);
}

void write_loss_log(std::ostream& os, const RunRecord& record, const std::string& preamble) {
  os << preamble;
  os << "iteration\tl_contrast_sup\tl_cls_sup\tl_meta_sup";
  if (record.has_query_stage) os << "\tl_contrast_qry\tl_cls_qry\tl_meta_qry";
  os << "\tepoch\n";
  for (const auto& r : record.iterations) {
    os << r.iteration << '\t' << fmt_double(r.support.l_contrast) << '\t'
       << fmt_double(r.support.l_cls) << '\t' << fmt_double(r.support.l_meta);
    if (record.has_query_stage) {
      const StageLosses q = r.query.value_or(StageLosses{});
      os << '\t' << fmt_double(q.l_contrast) << '\t' << fmt_double(q.l_cls) << '\t'
         << fmt_double(q.l_meta);
    }
    os << '\t' << r.epoch << '\n';
  }
}

}  // namespace mcn
