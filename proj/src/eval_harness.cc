#include "mcn/eval_harness.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "mcn/rng.h"
#include "mcn/text_format.h"

namespace mcn {

std::vector<FeatureRecord> extract_features(const ParamSet& params, const EncoderConfig& encoder,
                                            const AugmentConfig& augment,
                                            const std::vector<Clip>& clips) {
  std::vector<FeatureRecord> out;
  out.reserve(clips.size());
  for (const auto& clip : clips) {
    FeatureRecord rec;
    rec.clip_id = clip.clip_id;
    rec.label = clip.label;
    rec.embedding = embed_view(params, encoder, eval_rgb_view(clip, augment), ViewTag::kRgb);
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

Tensor feature_matrix(const std::vector<FeatureRecord>& records, std::size_t dim) {
  Tensor m(Shape{records.size(), dim});
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].embedding.size() != dim) {
      throw std::invalid_argument("linear_probe: inconsistent feature widths");
    }
    std::copy(records[i].embedding.begin(), records[i].embedding.end(), m.data.begin() + i * dim);
  }
  return m;
}

}  // namespace

double linear_probe(const std::vector<FeatureRecord>& train, const std::vector<FeatureRecord>& test,
                    std::size_t iters, double lr, std::uint64_t seed) {
  if (train.empty() || test.empty()) throw std::invalid_argument("linear_probe: empty feature set");
  std::set<int> label_set;
  for (const auto& r : train) label_set.insert(r.label);
  if (label_set.size() < 2) throw std::invalid_argument("linear_probe: need >= 2 classes in train");
  for (const auto& r : test) {
    if (!label_set.count(r.label)) {
      throw std::invalid_argument("linear_probe: test label " + std::to_string(r.label) +
                                  " absent from train");
    }
  }
  const std::vector<int> labels(label_set.begin(), label_set.end());
  auto class_index = [&](int label) {
    return static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), label) - labels.begin());
  };
  const std::size_t C = labels.size();
  const std::size_t D = train.front().embedding.size();

  const Tensor x_train = feature_matrix(train, D);
  const Tensor x_test = feature_matrix(test, D);
  Tensor onehot(Shape{train.size(), C});
  for (std::size_t i = 0; i < train.size(); ++i) onehot(i, class_index(train[i].label)) = 1.0;

  Rng rng(derive_seed(seed, {kTagProbe}));
  std::normal_distribution<double> init(0.0, 0.01);
  ParamSet probe;
  Tensor w(Shape{D, C});
  for (auto& v : w.data) v = init(rng);
  probe.add("probe/weight", std::move(w));
  probe.add("probe/bias", Tensor(Shape{C}));

  const Var x = constant(x_train);
  const Var y = constant(onehot);
  for (std::size_t it = 0; it < iters; ++it) {
    BoundParams p = probe.bind();
    Var logits = add_row(matmul(x, p["probe/weight"]), p["probe/bias"]);
    Var nll = sub(logsumexp(logits, 1), sum_axis(mul(logits, y), 1));
    Var loss = mean(nll);
    probe = sgd_step(probe, backward(loss, p), lr);
  }

  const Tensor& w_final = probe.at("probe/weight");
  const Tensor& b_final = probe.at("probe/bias");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C; ++c) {
      double s = b_final[c];
      for (std::size_t d = 0; d < D; ++d) s += x_test(i, d) * w_final(d, c);
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    if (labels[best] == test[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

RetrievalResult retrieval_topk(const std::vector<FeatureRecord>& train,
                               const std::vector<FeatureRecord>& test,
                               const std::vector<std::size_t>& ks) {
  for (auto k : ks) {
    if (k == 0 || k > train.size()) {
      throw std::invalid_argument("retrieval_topk: k = " + std::to_string(k) +
                                  " outside [1, train size " + std::to_string(train.size()) + "]");
    }
  }
  if (test.empty()) throw std::invalid_argument("retrieval_topk: no queries");
  auto norm = [](const std::vector<double>& v) {
    double ss = 0.0;
    for (double x : v) ss += x * x;
    return std::sqrt(ss);
  };
  std::vector<double> train_norms;
  for (const auto& r : train) train_norms.push_back(norm(r.embedding));

  RetrievalResult result;
  for (auto k : ks) result.hits[k] = 0;
  std::vector<std::size_t> order(train.size());
  std::vector<double> sims(train.size());
  for (const auto& q : test) {
    const double qn = norm(q.embedding);
    for (std::size_t j = 0; j < train.size(); ++j) {
      if (train[j].embedding.size() != q.embedding.size()) {
        throw std::invalid_argument("retrieval_topk: inconsistent feature widths");
      }
      double dot = 0.0;
      for (std::size_t d = 0; d < q.embedding.size(); ++d) dot += q.embedding[d] * train[j].embedding[d];
      const double denom = qn * train_norms[j];
      sims[j] = denom > 0.0 ? dot / denom : 0.0;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (sims[a] != sims[b]) return sims[a] > sims[b];
      return train[a].clip_id < train[b].clip_id;
    });
    // Rank of the first same-label neighbour decides every k at once.
    std::size_t first_hit = train.size();
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (train[order[r]].label == q.label) {
        first_hit = r;
        break;
      }
    }
    for (auto k : ks) {
      if (first_hit < k) ++result.hits[k];
    }
  }
  for (const auto& [k, h] : result.hits) {
    result.accuracy[k] = static_cast<double>(h) / static_cast<double>(test.size());
  }
  return result;
}

EvalReport evaluate(const ParamSet& params, const EncoderConfig& encoder,
                    const AugmentConfig& augment, const std::vector<Clip>& eval_train,
                    const std::vector<Clip>& eval_test, const EvalConfig& config) {
  const auto train = extract_features(params, encoder, augment, eval_train);
  const auto test = extract_features(params, encoder, augment, eval_test);
  EvalReport report;
  report.n_train = train.size();
  report.n_test = test.size();
  report.probe_top1 = linear_probe(train, test, config.probe_iters, config.probe_lr, config.probe_seed);
  report.retrieval = retrieval_topk(train, test, config.ks);
  return report;
}

void write_eval_report(std::ostream& os, const EvalReport& report, const std::string& preamble) {
  os << preamble;
  os << "checkpoint_id=" << report.checkpoint_id << '\n';
  os << "n_train=" << report.n_train << '\n';
  os << "n_test=" << report.n_test << '\n';
  os << "probe_top1=" << fmt_double(report.probe_top1) << '\n';
  for (const auto& [k, acc] : report.retrieval.accuracy) {
    os << "retrieval_top" << k << '=' << fmt_double(acc) << '\n';
  }
  for (const auto& [k, h] : report.retrieval.hits) {
    os << "retrieval_hits_top" << k << '=' << h << '\n';
  }
}

}  // namespace mcn
