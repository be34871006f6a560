#include "mcn/ablation.h"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "mcn/text_format.h"

namespace mcn {

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

std::vector<double> epoch_means(const RunRecord& record) {
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (const auto& it : record.iterations) {
    auto& [sum, n] = acc[it.epoch];
    sum += it.support.l_contrast;
    ++n;
  }
  std::vector<double> out;
  for (const auto& [epoch, p] : acc) out.push_back(p.first / static_cast<double>(p.second));
  return out;
}

void add_to_row(AblationRow& row, const RunSummary& run) {
  row.seeds.push_back(run.seed);
  row.probe_top1.push_back(run.report.probe_top1);
  const auto& acc = run.report.retrieval.accuracy;
  if (!acc.count(1) || !acc.count(5)) throw std::invalid_argument("run_ablation: eval.ks must include 1 and 5");
  row.retrieval_top1.push_back(acc.at(1));
  row.retrieval_top5.push_back(acc.at(5));
}

}  // namespace

AblationResult run_ablation(const TrainConfig& base, const CorpusSplit& split,
                            const std::vector<std::uint64_t>& seeds,
                            const std::vector<double>& alphas,
                            const std::function<void(const RunSummary&)>& on_run) {
  if (seeds.empty()) throw std::invalid_argument("run_ablation: no seeds");
  AblationResult result;
  // Keyed by (mode, alpha as text, seed) so shared configurations run once.
  std::map<std::tuple<int, std::string, std::uint64_t>, std::size_t> done;
  auto run_one = [&](const std::string& label, TrainMode mode, double alpha, std::uint64_t seed) {
    const auto key = std::make_tuple(static_cast<int>(mode), fmt_double(alpha), seed);
    if (auto it = done.find(key); it != done.end()) {
      RunSummary copy = result.runs[it->second];
      copy.row = label;
      return copy;
    }
    TrainConfig config = base;
    config.flags = mode_flags(mode);
    config.alpha = alpha;
    config.seed = seed;
    const TrainResult trained = train(config, split);
    RunSummary run;
    run.row = label;
    run.mode = mode;
    run.alpha = alpha;
    run.seed = seed;
    if (trained.record.evaluations.empty()) throw std::runtime_error("run_ablation: no evaluation recorded");
    run.report = trained.record.evaluations.back().report;
    run.epoch_contrast = epoch_means(trained.record);
    done[key] = result.runs.size();
    result.runs.push_back(run);
    if (on_run) on_run(run);
    return run;
  };

  const struct {
    const char* label;
    TrainMode mode;
  } components[] = {{"CL", TrainMode::kBaseline}, {"CL+BL", TrainMode::kClBl}, {"CL+BL+meta", TrainMode::kMcn}};
  for (const auto& c : components) {
    AblationRow row;
    row.label = c.label;
    row.mode = c.mode;
    row.alpha = c.mode == TrainMode::kBaseline ? 0.0 : base.alpha;
    for (auto seed : seeds) add_to_row(row, run_one(row.label, c.mode, row.alpha, seed));
    result.components.push_back(std::move(row));
  }
  for (double alpha : alphas) {
    AblationRow row;
    row.label = "alpha=" + fmt_double(alpha);
    row.mode = TrainMode::kMcn;
    row.alpha = alpha;
    for (auto seed : seeds) add_to_row(row, run_one(row.label, TrainMode::kMcn, alpha, seed));
    result.alpha_sweep.push_back(std::move(row));
  }
  return result;
}

namespace {

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_double(v[i]);
  return s;
}

}  // namespace

void write_ablation_table(std::ostream& os, const std::vector<AblationRow>& rows,
                          const std::string& preamble) {
  os << preamble;
  os << "row\tmode\talpha";
  for (const char* m : {"probe_top1", "retrieval_top1", "retrieval_top5"}) {
    os << '\t' << m << "_median\t" << m << "_min\t" << m << "_max";
  }
  os << "\tseeds\tprobe_top1_values\tretrieval_top1_values\tretrieval_top5_values\n";
  for (const auto& r : rows) {
    os << r.label << '\t' << train_mode_name(r.mode) << '\t' << fmt_double(r.alpha);
    for (const auto* v : {&r.probe_top1, &r.retrieval_top1, &r.retrieval_top5}) {
      os << '\t' << fmt_double(median(*v)) << '\t' << fmt_double(*std::min_element(v->begin(), v->end()))
         << '\t' << fmt_double(*std::max_element(v->begin(), v->end()));
    }
    os << '\t';
    for (std::size_t i = 0; i < r.seeds.size(); ++i) os << (i ? "," : "") << r.seeds[i];
    os << '\t' << join(r.probe_top1) << '\t' << join(r.retrieval_top1) << '\t' << join(r.retrieval_top5)
       << '\n';
  }
}

void write_run_table(std::ostream& os, const std::vector<RunSummary>& runs,
                     const std::string& preamble) {
  os << preamble;
  os << "mode\talpha\tseed\tprobe_top1";
  if (!runs.empty()) {
    for (const auto& [k, acc] : runs.front().report.retrieval.accuracy) os << "\tretrieval_top" << k;
  }
  os << "\tfinal_epoch_l_contrast\n";
  for (const auto& r : runs) {
    os << train_mode_name(r.mode) << '\t' << fmt_double(r.alpha) << '\t' << r.seed << '\t'
       << fmt_double(r.report.probe_top1);
    for (const auto& [k, acc] : r.report.retrieval.accuracy) os << '\t' << fmt_double(acc);
    os << '\t' << (r.epoch_contrast.empty() ? std::string("nan") : fmt_double(r.epoch_contrast.back()))
       << '\n';
  }
}

}  // namespace mcn
