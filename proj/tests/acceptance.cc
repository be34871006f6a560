// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "mcn/ablation.h"
#include "mcn/contrastive.h"
#include "mcn/eval_harness.h"
#include "mcn/experiment.h"
#include "mcn/gradcheck.h"
#include "mcn/meta_trainer.h"
#include "mcn/rng.h"
#include "mcn/text_format.h"

#ifndef MCN_CLI_PATH
#error "MCN_CLI_PATH must name the built CLI"
#endif

using namespace mcn;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTolerance = 1e-4;
constexpr double kGradEps = 1e-5;
constexpr std::size_t kGradCases = 20;
constexpr double kGradSeconds = 120.0;
constexpr double kClosedFormTol = 1e-9;
constexpr double kMetaCosineMin = 0.99;
constexpr std::size_t kCollapseIterations = 6;
constexpr std::size_t kMcnWinsRequired = 4;
constexpr double kAblationSeconds = 1800.0;
constexpr std::size_t kNoiseSeeds = 20;
constexpr double kNoiseSigmas = 3.0;
constexpr double kMaxResidualNoise = 0.01;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& body) {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << title << "  ["
            << o.detail << "; " << fmt_double(std::round(s * 100) / 100) << " s]" << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

Outcome gradient_correctness() {
  GradcheckConfig cfg;
  cfg.cases = kGradCases;
  cfg.eps = kGradEps;
  cfg.tolerance = kGradTolerance;
  const auto start = std::chrono::steady_clock::now();
  auto cases = run_gradcheck(GradcheckScope::kOps, cfg);
  const auto losses = run_gradcheck(GradcheckScope::kLosses, cfg);
  cases.insert(cases.end(), losses.begin(), losses.end());
  const double secs = seconds_since(start);
  double worst = 0.0;
  std::string worst_name;
  std::size_t failed = 0;
  for (const auto& c : cases) {
    if (!c.passed) ++failed;
    if (c.value > worst) {
      worst = c.value;
      worst_name = c.scope + "/" + c.name + " seed " + std::to_string(c.seed);
    }
  }
  std::ostringstream d;
  d << cases.size() << " cases, " << failed << " over " << kGradTolerance << ", max rel err "
    << fmt_double(worst) << " (" << worst_name << "), " << fmt_double(secs) << " s";
  return {failed == 0 && secs < kGradSeconds, d.str()};
}

Outcome nce_closed_forms() {
  std::ostringstream d;
  bool ok = true;
  Var a = constant(Tensor(Shape{1, 2}, {1.0, 0.0}));
  for (std::size_t k : {1u, 7u, 63u}) {
    std::vector<Var> negs(k, a);
    const double err = std::fabs(nce_loss(a, a, negs, 0.07).item() - std::log(static_cast<double>(k + 1)));
    ok = ok && err < kClosedFormTol;
    d << "k=" << k << " err " << fmt_double(err) << ", ";
  }
  Var n = constant(Tensor(Shape{1, 2}, {0.0, 1.0}));
  std::vector<Var> negs{n};
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  const double err = std::fabs(nce_loss(a, a, negs, 1.0).item() - expected);
  ok = ok && err < kClosedFormTol;
  d << "two-point err " << fmt_double(err);
  return {ok, d.str()};
}

Outcome meta_fidelity() {
  GradcheckConfig cfg;
  cfg.cosine_min = kMetaCosineMin;
  cfg.meta_inner_lrs = {1e-2, 1e-3, 1e-4};
  const auto cases = run_gradcheck(GradcheckScope::kMeta, cfg);
  const std::size_t params = gradcheck_params(gradcheck_model_config()).scalar_count();
  bool ok = params <= 500 && !cases.empty();
  std::ostringstream d;
  d << params << " params";
  for (const auto& c : cases) {
    ok = ok && c.passed;
    d << ", " << c.name << " seed " << c.seed << " = " << fmt_double(c.value) << (c.passed ? "" : " FAIL");
  }
  return {ok, d.str()};
}

Outcome collapse_identities(const CorpusSplit& split, const ExperimentConfig& base) {
  TrainConfig cfg = train_config(base);
  cfg.flags.use_bl = false;
  cfg.lr_inner = 0.0;
  const std::size_t B = cfg.batch_size;
  ParamSet a = init_model(cfg);
  ParamSet b = a;
  std::size_t identical = 0;
  for (std::size_t it = 0; it < kCollapseIterations; ++it) {
    const std::uint64_t iter_seed = derive_seed(cfg.seed, {kTagIteration, it});
    const std::vector<Clip> s(split.support.begin() + it * B, split.support.begin() + (it + 1) * B);
    const std::vector<Clip> q(split.query.begin() + it * B, split.query.begin() + (it + 1) * B);
    a = mcn_step(a, s, q, cfg, iter_seed).params;
    b = single_stage_step(b, q, cfg, query_stage_seed(iter_seed)).params;
    identical += a == b ? 1 : 0;
  }
  bool alpha_ok = true;
  const std::vector<Clip> batch(split.support.begin(), split.support.begin() + B);
  for (double alpha : {0.0, 1.0}) {
    TrainConfig c = train_config(base);
    c.alpha = alpha;
    const ParamSet p = init_model(c);
    const BoundParams bound = p.bind();
    const BranchLosses l = compute_branch_losses(bound, batch, c, 11);
    alpha_ok = alpha_ok && l.l_meta.item() == (alpha == 0.0 ? l.l_contrast.item() : l.l_cls.item());
  }
  std::ostringstream d;
  d << identical << "/" << kCollapseIterations << " iterations bit-identical, alpha 0/1 exact: "
    << (alpha_ok ? "yes" : "no");
  return {identical == kCollapseIterations && alpha_ok, d.str()};
}

const AblationRow& row_for(const std::vector<AblationRow>& rows, TrainMode mode) {
  for (const auto& r : rows)
    if (r.mode == mode) return r;
  throw std::runtime_error("missing ablation row");
}

Outcome component_direction(const AblationResult& r, double secs) {
  const auto& cl = row_for(r.components, TrainMode::kBaseline);
  const auto& clbl = row_for(r.components, TrainMode::kClBl);
  const auto& mcn = row_for(r.components, TrainMode::kMcn);
  const double m_cl = median(cl.retrieval_top1), m_clbl = median(clbl.retrieval_top1),
               m_mcn = median(mcn.retrieval_top1);
  std::size_t wins = 0;
  for (std::size_t i = 0; i < cl.seeds.size(); ++i) wins += mcn.retrieval_top1[i] > cl.retrieval_top1[i] ? 1 : 0;
  std::ostringstream d;
  d << "median top-1 retrieval CL " << fmt_double(m_cl) << ", CL+BL " << fmt_double(m_clbl) << ", CL+BL+meta "
    << fmt_double(m_mcn) << "; MCN > CL in " << wins << "/" << cl.seeds.size() << " seeds; ablation "
    << fmt_double(std::round(secs)) << " s";
  return {m_cl <= m_clbl && m_clbl <= m_mcn && wins >= kMcnWinsRequired && secs < kAblationSeconds, d.str()};
}

Outcome alpha_shape(const AblationResult& r) {
  double best_other = -1.0, at_04 = -1.0;
  std::ostringstream d;
  d << "median probe top-1:";
  for (const auto& row : r.alpha_sweep) {
    const double m = median(row.probe_top1);
    d << " " << row.label << "=" << fmt_double(m);
    if (fmt_double(row.alpha) == "0.4") at_04 = m;
    else best_other = std::max(best_other, m);
  }
  return {at_04 >= 0.0 && at_04 < best_other, d.str()};
}

Outcome harness_oracles() {
  std::vector<FeatureRecord> train, test;
  for (std::uint32_t i = 0; i < 10; ++i) {
    const double wobble = 0.05 * std::sin(static_cast<double>(i));
    train.push_back({i, 0, {1.0, wobble}});
    train.push_back({100 + i, 1, {wobble, 1.0}});
    test.push_back({200 + i, 0, {2.0, -wobble}});
    test.push_back({300 + i, 1, {-wobble, 0.5}});
  }
  const double retrieval = retrieval_topk(train, test, {1}).accuracy.at(1);

  std::vector<FeatureRecord> oh_train, oh_test;
  constexpr int kClasses = 5;
  for (std::uint32_t i = 0; i < 40; ++i) {
    std::vector<double> e(kClasses, 0.0);
    e[i % kClasses] = 1.0;
    (i < 25 ? oh_train : oh_test).push_back({i, static_cast<int>(i % kClasses), e});
  }
  const double onehot = linear_probe(oh_train, oh_test, 300, 1.0, 0);

  // Noise calibration: 20 seeds of Gaussian features with uniform labels;
  // the mean must sit within 3 binomial standard errors of chance.
  constexpr std::size_t kDim = 16, kTrain = 96, kTest = 96;
  double acc_sum = 0.0;
  for (std::uint64_t s = 0; s < kNoiseSeeds; ++s) {
    Rng rng(derive_seed(s, {0xCA1B}));
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> label(0, kClasses - 1);
    std::vector<FeatureRecord> a, b;
    for (std::uint32_t i = 0; i < kTrain + kTest; ++i) {
      std::vector<double> e(kDim);
      for (auto& v : e) v = g(rng);
      const int y = i < kClasses ? static_cast<int>(i) : label(rng);
      (i < kTrain ? a : b).push_back({i, y, e});
    }
    acc_sum += linear_probe(a, b, 300, 1.0, s);
  }
  const double chance = 1.0 / kClasses;
  const double mean_acc = acc_sum / kNoiseSeeds;
  const double band = kNoiseSigmas * std::sqrt(chance * (1.0 - chance) / (kTest * kNoiseSeeds));
  std::ostringstream d;
  d << "orthogonal retrieval top-1 " << fmt_double(retrieval) << ", one-hot probe " << fmt_double(onehot)
    << ", noise probe mean " << fmt_double(mean_acc) << " vs chance " << fmt_double(chance) << " +/- "
    << fmt_double(band);
  return {retrieval == 1.0 && onehot == 1.0 && std::fabs(mean_acc - chance) <= band, d.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void run_cli(const std::string& args) {
  const std::string cmd = std::string(MCN_CLI_PATH) + " " + args + " 2>/dev/null >/dev/null";
  if (std::system(cmd.c_str()) != 0) throw std::runtime_error("command failed: " + cmd);
}

Outcome determinism() {
  // Both runs use the same paths; outputs of the first are moved aside.
  const fs::path root = fs::temp_directory_path() / "mcn_acceptance_determinism";
  const fs::path work = root / "work";
  fs::remove_all(root);
  const std::string corpus = (work / "corpus.bin").string();
  const std::string set = " --set train.epochs=3 --set train.eval_every=1";
  const std::vector<std::string> files{"corpus.bin", "corpus.bin.summary.txt", "run/checkpoint.bin",
                                       "run/loss_log.tsv", "run/eval_report.txt", "eval.txt", "gradcheck.txt"};
  for (int run = 0; run < 2; ++run) {
    fs::create_directories(work);
    run_cli("generate --out " + corpus);
    run_cli("train --corpus " + corpus + " --out-dir " + (work / "run").string() + set);
    run_cli("eval --checkpoint " + (work / "run/checkpoint.bin").string() + " --corpus " + corpus + " --out " +
            (work / "eval.txt").string());
    run_cli("gradcheck --scope ops --out " + (work / "gradcheck.txt").string());
    fs::rename(work, root / std::to_string(run));
  }
  bool ok = true;
  std::ostringstream d;
  d << "byte-identical reruns of generate/train/eval/gradcheck:";
  for (const auto& f : files) {
    const bool same = slurp(root / "0" / f) == slurp(root / "1" / f);
    ok = ok && same;
    d << " " << f << (same ? "" : " DIFFERS");
  }
  fs::remove_all(root);
  return {ok, d.str()};
}

Outcome residual_property() {
  CorpusConfig cc;
  cc.clips_per_class = 4;
  const auto corpus = generate_corpus(cc);
  bool invariant = true;
  for (const auto& clip : corpus) {
    for (double offset : {0.125, -0.25, 0.5}) {
      Volume shifted = clip.frames;
      for (auto& v : shifted.data) v += offset;
      invariant = invariant && residual_view(shifted) == residual_view(clip.frames);
    }
  }
  std::size_t ordered = 0, total = 0;
  double min_gap = INFINITY;
  for (double noise : {0.0, 0.005, kMaxResidualNoise}) {
    for (int label = 0; label < cc.n_classes; ++label) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        RenderParams p;
        p.noise_std = noise;
        p.frames = static_cast<std::size_t>(cc.frames) + 1;
        RenderParams still = p;
        still.motion = {0, 0};
        p.motion = class_motion(label);
        const double gap = residual_energy(render_clip(p, seed)) - residual_energy(render_clip(still, seed));
        min_gap = std::min(min_gap, gap);
        ordered += gap > 0.0 ? 1 : 0;
        ++total;
      }
    }
  }
  std::ostringstream d;
  d << "offset invariance exact: " << (invariant ? "yes" : "no") << ", moving > static in " << ordered << "/"
    << total << " (min energy gap " << fmt_double(min_gap) << ")";
  return {invariant && ordered == total, d.str()};
}

}  // namespace

int main() {
  const ExperimentConfig defaults;
  const SplitConfig sc = split_config(defaults);
  const CorpusSplit split = split_support_query(generate_corpus(corpus_config(defaults)), sc.support_fraction,
                                                sc.seed, sc.eval_test_fraction);

  report(1, "gradient correctness (ops and composed losses)", gradient_correctness);
  report(2, "NCE closed forms", nce_closed_forms);
  report(3, "first-order vs exact meta-gradient", meta_fidelity);
  report(4, "collapse identities", [&] { return collapse_identities(split, defaults); });

  AblationResult ablation;
  double ablation_secs = 0.0;
  std::string ablation_error;
  try {
    const auto start = std::chrono::steady_clock::now();
    ablation = run_ablation(train_config(defaults), split, defaults.get_uints("ablate.seeds"),
                            defaults.get_doubles("ablate.alphas"));
    ablation_secs = seconds_since(start);
  } catch (const std::exception& e) {
    ablation_error = e.what();
  }
  auto guarded = [&](std::function<Outcome()> f) {
    return [&, f] {
      if (!ablation_error.empty()) return Outcome{false, "ablation failed: " + ablation_error};
      return f();
    };
  };
  report(5, "component ablation direction", guarded([&] { return component_direction(ablation, ablation_secs); }));
  report(6, "alpha sweep shape", guarded([&] { return alpha_shape(ablation); }));
  report(7, "evaluation harness oracles", harness_oracles);
  report(8, "determinism", determinism);
  report(9, "residual view properties", residual_property);

  std::cout << (failures == 0 ? "all criteria PASS" : std::to_string(failures) + " criteria FAIL") << std::endl;
  return failures == 0 ? 0 : 1;
}
