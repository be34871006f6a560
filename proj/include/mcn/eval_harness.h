#ifndef MCN_EVAL_HARNESS_H_
#define MCN_EVAL_HARNESS_H_

// Frozen-representation evaluation: linear probe top-1 and top-k retrieval.

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "mcn/autodiff.h"
#include "mcn/encoder.h"
#include "mcn/synth_data.h"

namespace mcn {

struct FeatureRecord {
  std::uint32_t clip_id = 0;
  int label = 0;
  std::vector<double> embedding;
};

struct EvalConfig {
  std::size_t probe_iters = 300;
  double probe_lr = 1.0;
  std::uint64_t probe_seed = 0;
  std::vector<std::size_t> ks = {1, 5, 10, 20, 50};
};

struct RetrievalResult {
  std::map<std::size_t, double> accuracy;  // k -> fraction of queries hit
  std::map<std::size_t, std::size_t> hits;
};

struct EvalReport {
  double probe_top1 = 0.0;
  RetrievalResult retrieval;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::string checkpoint_id;
};

// Center-cropped RGB view, no flip or jitter; labels are carried through for
// scoring only.
std::vector<FeatureRecord> extract_features(const ParamSet& params, const EncoderConfig& encoder,
                                            const AugmentConfig& augment,
                                            const std::vector<Clip>& clips);

// Softmax regression on frozen features by full-batch gradient descent;
// returns test top-1.
double linear_probe(const std::vector<FeatureRecord>& train, const std::vector<FeatureRecord>& test,
                    std::size_t iters, double lr, std::uint64_t seed);

// Cosine ranking of train items per test query (ties by ascending clip_id);
// a query is a hit at k when any of its k nearest shares its label.
RetrievalResult retrieval_topk(const std::vector<FeatureRecord>& train,
                               const std::vector<FeatureRecord>& test,
                               const std::vector<std::size_t>& ks);

EvalReport evaluate(const ParamSet& params, const EncoderConfig& encoder,
                    const AugmentConfig& augment, const std::vector<Clip>& eval_train,
                    const std::vector<Clip>& eval_test, const EvalConfig& config);

// Flat key=value document; `preamble` lines are written first.
void write_eval_report(std::ostream& os, const EvalReport& report, const std::string& preamble);

}  // namespace mcn

#endif  // MCN_EVAL_HARNESS_H_
