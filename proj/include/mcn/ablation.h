#ifndef MCN_ABLATION_H_
#define MCN_ABLATION_H_

// Component ablation {CL, CL+BL, CL+BL+meta} and alpha sweep across seeds,
// aggregated to median/min/max of probe and retrieval accuracy.

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "mcn/experiment.h"
#include "mcn/meta_trainer.h"

namespace mcn {

struct RunSummary {
  std::string row;  // component label or "alpha=<a>"
  TrainMode mode = TrainMode::kMcn;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  EvalReport report;
  std::vector<double> epoch_contrast;  // mean L_contrast (support stream) per epoch
};

struct AblationRow {
  std::string label;
  TrainMode mode = TrainMode::kMcn;
  double alpha = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> probe_top1;      // per seed, aligned with `seeds`
  std::vector<double> retrieval_top1;
  std::vector<double> retrieval_top5;
};

struct AblationResult {
  std::vector<AblationRow> components;
  std::vector<AblationRow> alpha_sweep;
  std::vector<RunSummary> runs;
};

double median(std::vector<double> values);

// Component rows train with the base alpha; the sweep uses full MCN. Runs
// with identical configuration are computed once and shared.
AblationResult run_ablation(const TrainConfig& base, const CorpusSplit& split,
                            const std::vector<std::uint64_t>& seeds,
                            const std::vector<double>& alphas,
                            const std::function<void(const RunSummary&)>& on_run = {});

// Tab-separated: label, mode, alpha, then median/min/max per metric and the
// seed list with per-seed values.
void write_ablation_table(std::ostream& os, const std::vector<AblationRow>& rows,
                          const std::string& preamble);
void write_run_table(std::ostream& os, const std::vector<RunSummary>& runs,
                     const std::string& preamble);

}  // namespace mcn

#endif  // MCN_ABLATION_H_
