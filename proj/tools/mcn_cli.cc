// Experiment driver: generate | train | eval | ablate | gradcheck | config.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "mcn/ablation.h"
#include "mcn/checkpoint.h"
#include "mcn/experiment.h"
#include "mcn/gradcheck.h"
#include "mcn/meta_trainer.h"
#include "mcn/svg_plot.h"
#include "mcn/text_format.h"

namespace fs = std::filesystem;
using namespace mcn;

namespace {

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_file, "flat key=value config file");
  cmd->add_option("--set", opts.overrides, "override one key (key=value); repeatable");
}

ExperimentConfig resolve(const CommonOptions& opts) {
  ExperimentConfig config;
  if (!opts.config_file.empty()) config.load_file(opts.config_file);
  for (const auto& o : opts.overrides) config.set(o);
  return config;
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// Rejects a corpus whose dimensions disagree with the resolved config.
void check_corpus(const Corpus& corpus, const CorpusConfig& expected) {
  if (corpus.clips.empty()) throw std::runtime_error("corpus has no clips");
  const Volume& v = corpus.clips.front().frames;
  std::ostringstream file, cfg;
  file << "frames=" << v.frames - 1 << " height=" << v.height << " width=" << v.width
       << " channels=" << v.channels << " classes=" << corpus.n_classes;
  cfg << "frames=" << expected.frames << " height=" << expected.height << " width=" << expected.width
      << " channels=" << expected.channels << " classes=" << expected.n_classes;
  if (file.str() != cfg.str()) {
    throw std::runtime_error("corpus/config mismatch: corpus file has " + file.str() + ", config has " +
                             cfg.str());
  }
}

CorpusSplit make_split(const Corpus& corpus, const ExperimentConfig& config) {
  const SplitConfig s = split_config(config);
  return split_support_query(corpus.clips, s.support_fraction, s.seed, s.eval_test_fraction);
}

int cmd_generate(const ExperimentConfig& config, const std::string& out) {
  const CorpusConfig cc = corpus_config(config);
  Corpus corpus;
  corpus.n_classes = cc.n_classes;
  corpus.clips = generate_corpus(cc);
  ensure_dir(fs::path(out).parent_path().string());
  write_corpus(out, corpus);
  std::map<int, std::size_t> histogram;
  for (const auto& c : corpus.clips) ++histogram[c.label];
  std::ostringstream os;
  os << config.echo();
  os << "corpus_file=" << out << '\n';
  os << "corpus_digest=" << file_digest(out) << '\n';
  os << "n_clips=" << corpus.clips.size() << '\n';
  os << "n_classes=" << corpus.n_classes << '\n';
  os << "raw_frames=" << cc.frames + 1 << '\n';
  os << "dims=" << cc.height << 'x' << cc.width << 'x' << cc.channels << '\n';
  os << "seed=" << cc.seed << '\n';
  for (const auto& [label, n] : histogram) {
    const Motion m = class_motion(label);
    os << "class_" << label << "_count=" << n << '\n';
    os << "class_" << label << "_motion=" << m.dx << ',' << m.dy << '\n';
  }
  write_text_file(out + ".summary.txt", os.str());
  std::cerr << "wrote " << corpus.clips.size() << " clips to " << out << '\n';
  return 0;
}

void write_report_file(const std::string& path, const EvalReport& report, const std::string& preamble) {
  std::ostringstream os;
  write_eval_report(os, report, preamble);
  write_text_file(path, os.str());
}

int cmd_train(const ExperimentConfig& config, const std::string& corpus_path, const std::string& out_dir) {
  const Corpus corpus = read_corpus(corpus_path);
  check_corpus(corpus, corpus_config(config));
  const TrainConfig tc = train_config(config);
  const CorpusSplit split = make_split(corpus, config);
  ensure_dir(out_dir);
  const std::string preamble = config.echo() + "# corpus_digest=" + file_digest(corpus_path) + "\n";

  const TrainResult result = train(tc, split);

  const std::string ckpt = join_path(out_dir, "checkpoint.bin");
  write_checkpoint(ckpt, Checkpoint{result.params, config.echo("")});
  const std::string ckpt_id = file_digest(ckpt);

  std::ostringstream log;
  write_loss_log(log, result.record, preamble);
  write_text_file(join_path(out_dir, "loss_log.tsv"), log.str());

  if (result.record.evaluations.empty()) throw std::runtime_error("no evaluation was recorded");
  EvalReport final_report = result.record.evaluations.back().report;
  final_report.checkpoint_id = ckpt_id;
  write_report_file(join_path(out_dir, "eval_report.txt"), final_report, preamble);

  std::ostringstream summary;
  summary << preamble;
  summary << "mode=" << train_mode_name(train_mode(config)) << '\n';
  summary << "seed=" << tc.seed << '\n';
  summary << "iterations=" << result.record.iterations.size() << '\n';
  summary << "has_query_stage=" << (result.record.has_query_stage ? 1 : 0) << '\n';
  summary << "checkpoint_id=" << ckpt_id << '\n';
  summary << "wall_seconds=" << fmt_double(result.record.wall_seconds) << '\n';
  for (const auto& e : result.record.evaluations) {
    summary << "epoch_" << e.epoch << "_probe_top1=" << fmt_double(e.report.probe_top1) << '\n';
    for (const auto& [k, acc] : e.report.retrieval.accuracy) {
      summary << "epoch_" << e.epoch << "_retrieval_top" << k << '=' << fmt_double(acc) << '\n';
    }
  }
  write_text_file(join_path(out_dir, "summary.txt"), summary.str());
  std::cerr << "probe_top1=" << fmt_double(final_report.probe_top1)
            << " retrieval_top1=" << fmt_double(final_report.retrieval.accuracy.begin()->second) << '\n';
  return 0;
}

int cmd_eval(const CommonOptions& opts, const std::string& ckpt_path, const std::string& corpus_path,
             const std::string& out) {
  const Checkpoint ckpt = read_checkpoint(ckpt_path);
  ExperimentConfig config = config_from_echo(ckpt.config_text);
  if (!opts.config_file.empty()) config.load_file(opts.config_file);
  for (const auto& o : opts.overrides) config.set(o);
  const Corpus corpus = read_corpus(corpus_path);
  try {
    check_corpus(corpus, corpus_config(config));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string("incompatible dims between checkpoint and corpus: ") + e.what());
  }
  const TrainConfig tc = train_config(config);
  const CorpusSplit split = make_split(corpus, config);
  EvalReport report = evaluate(ckpt.params, tc.encoder, tc.augment, split.eval_train, split.eval_test,
                               eval_config(config));
  report.checkpoint_id = file_digest(ckpt_path);
  const std::string preamble = config.echo() + "# corpus_digest=" + file_digest(corpus_path) + "\n";
  ensure_dir(fs::path(out).parent_path().string());
  write_report_file(out, report, preamble);
  std::cerr << "probe_top1=" << fmt_double(report.probe_top1) << '\n';
  return 0;
}

std::vector<Bar> bars_of(const std::vector<AblationRow>& rows, const std::vector<double> AblationRow::*metric) {
  std::vector<Bar> bars;
  for (const auto& r : rows) {
    const auto& v = r.*metric;
    bars.push_back({r.label, median(v), *std::min_element(v.begin(), v.end()),
                    *std::max_element(v.begin(), v.end())});
  }
  return bars;
}

int cmd_ablate(const ExperimentConfig& config, const std::string& corpus_path, const std::string& out_dir) {
  const Corpus corpus = read_corpus(corpus_path);
  check_corpus(corpus, corpus_config(config));
  const TrainConfig base = train_config(config);
  const CorpusSplit split = make_split(corpus, config);
  const auto seeds = config.get_uints("ablate.seeds");
  const auto alphas = config.get_doubles("ablate.alphas");
  ensure_dir(out_dir);
  const std::string preamble = config.echo() + "# corpus_digest=" + file_digest(corpus_path) + "\n";

  const AblationResult result = run_ablation(base, split, seeds, alphas, [](const RunSummary& r) {
    std::cerr << "run mode=" << train_mode_name(r.mode) << " alpha=" << fmt_double(r.alpha) << " seed=" << r.seed
              << " probe_top1=" << fmt_double(r.report.probe_top1)
              << " retrieval_top1=" << fmt_double(r.report.retrieval.accuracy.at(1)) << '\n';
  });

  std::ostringstream comp, sweep, runs;
  write_ablation_table(comp, result.components, preamble);
  write_ablation_table(sweep, result.alpha_sweep, preamble);
  write_run_table(runs, result.runs, preamble);
  write_text_file(join_path(out_dir, "components.tsv"), comp.str());
  write_text_file(join_path(out_dir, "alpha_sweep.tsv"), sweep.str());
  write_text_file(join_path(out_dir, "runs.tsv"), runs.str());

  const std::string seed_note = "seeds: " + config.get("ablate.seeds") + "; bars = median, whiskers = min/max";
  write_text_file(join_path(out_dir, "components_retrieval_top1.svg"),
                  bar_plot_svg("Component ablation: retrieval top-1", "retrieval top-1",
                               bars_of(result.components, &AblationRow::retrieval_top1), seed_note));
  write_text_file(join_path(out_dir, "components_probe_top1.svg"),
                  bar_plot_svg("Component ablation: linear probe top-1", "probe top-1",
                               bars_of(result.components, &AblationRow::probe_top1), seed_note));
  write_text_file(join_path(out_dir, "alpha_sweep_probe_top1.svg"),
                  bar_plot_svg("Alpha sweep: linear probe top-1", "probe top-1",
                               bars_of(result.alpha_sweep, &AblationRow::probe_top1), seed_note));

  // Loss curves: per-epoch mean contrastive loss, averaged over seeds.
  std::vector<LineSeries> curves;
  for (const auto& row : result.components) {
    LineSeries s;
    s.label = row.label;
    std::size_t count = 0;
    for (const auto& r : result.runs) {
      if (r.mode != row.mode || fmt_double(r.alpha) != fmt_double(row.alpha)) continue;
      if (s.y.empty()) s.y.assign(r.epoch_contrast.size(), 0.0);
      for (std::size_t i = 0; i < s.y.size() && i < r.epoch_contrast.size(); ++i) s.y[i] += r.epoch_contrast[i];
      ++count;
    }
    for (auto& v : s.y) v /= static_cast<double>(count);
    curves.push_back(std::move(s));
  }
  write_text_file(join_path(out_dir, "loss_curves.svg"),
                  line_plot_svg("Contrastive loss (support stream), mean over seeds", "epoch", "L_contrast",
                                curves, "seeds: " + config.get("ablate.seeds")));
  std::cout << comp.str().substr(preamble.size()) << sweep.str().substr(preamble.size());
  return 0;
}

int cmd_gradcheck(const ExperimentConfig& config, const std::string& scope_text, const std::string& out) {
  const GradcheckScope scope = parse_gradcheck_scope(scope_text);
  const auto start = std::chrono::steady_clock::now();
  const auto cases = run_gradcheck(scope, gradcheck_config(config));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream os;
  write_gradcheck_report(os, cases, config.echo());
  if (out.empty()) std::cout << os.str();
  else {
    ensure_dir(fs::path(out).parent_path().string());
    write_text_file(out, os.str());
  }
  std::size_t failed = 0;
  for (const auto& c : cases) failed += c.passed ? 0 : 1;
  std::cerr << "gradcheck scope=" << scope_text << " cases=" << cases.size() << " failed=" << failed
            << " seconds=" << fmt_double(seconds) << '\n';
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-contrastive training driver"};
  app.require_subcommand(1);

  CommonOptions gen_opts, train_opts, eval_opts, ablate_opts, grad_opts;
  std::string gen_out = "corpus.bin";
  auto* gen = app.add_subcommand("generate", "write a synthetic corpus and its summary");
  add_common(gen, gen_opts);
  gen->add_option("--out", gen_out, "corpus file path");

  std::string train_corpus, train_out = "run";
  auto* tr = app.add_subcommand("train", "train one model; writes checkpoint, loss log and eval report");
  add_common(tr, train_opts);
  tr->add_option("--corpus", train_corpus, "corpus file")->required();
  tr->add_option("--out-dir", train_out, "output directory");

  std::string eval_ckpt, eval_corpus, eval_out = "eval_report.txt";
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint (probe and retrieval)");
  add_common(ev, eval_opts);
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  ev->add_option("--corpus", eval_corpus, "corpus file")->required();
  ev->add_option("--out", eval_out, "report path");

  std::string ablate_corpus, ablate_out = "ablation";
  auto* ab = app.add_subcommand("ablate", "component ablation and alpha sweep across seeds");
  add_common(ab, ablate_opts);
  ab->add_option("--corpus", ablate_corpus, "corpus file")->required();
  ab->add_option("--out-dir", ablate_out, "output directory");

  std::string grad_scope = "ops", grad_out;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  add_common(gc, grad_opts);
  gc->add_option("--scope", grad_scope, "ops | losses | meta");
  gc->add_option("--out", grad_out, "report path (default stdout)");

  CommonOptions show_opts;
  auto* show = app.add_subcommand("config", "print the resolved configuration (every key with its value)");
  add_common(show, show_opts);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_generate(resolve(gen_opts), gen_out);
    if (*tr) return cmd_train(resolve(train_opts), train_corpus, train_out);
    if (*ev) return cmd_eval(eval_opts, eval_ckpt, eval_corpus, eval_out);
    if (*ab) return cmd_ablate(resolve(ablate_opts), ablate_corpus, ablate_out);
    if (*gc) return cmd_gradcheck(resolve(grad_opts), grad_scope, grad_out);
    if (*show) {
      std::cout << resolve(show_opts).echo("");
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
