#include "mcn/experiment.h"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mcn {

namespace {

const std::vector<std::pair<std::string, std::string>>& defaults() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"corpus.n_classes", "8"},
      {"corpus.clips_per_class", "24"},
      {"corpus.frames", "8"},
      {"corpus.height", "16"},
      {"corpus.width", "16"},
      {"corpus.channels", "1"},
      {"corpus.sprite_size", "3"},
      {"corpus.noise_std", "0.01"},
      {"corpus.motion_blur", "1"},
      {"corpus.center_jitter", "2"},
      {"corpus.seed", "7"},
      {"split.support_fraction", "0.5"},
      {"split.eval_test_fraction", "0.5"},
      {"split.seed", "3"},
      {"augment.crop_min_scale", "0.8"},
      {"augment.flip_prob", "0.5"},
      {"augment.jitter", "0.1"},
      {"encoder.hidden_width", "32"},
      {"encoder.embed_dim", "16"},
      {"encoder.init_scale", "1"},
      {"encoder.separate_views", "0"},
      {"contrastive.tau", "0.1"},
      {"contrastive.k", "0"},
      {"contrastive.bank_mode", "in_batch"},
      {"contrastive.symmetric", "1"},
      {"contrastive.bank_capacity", "0"},
      {"meta.pair_policy", "derangement"},
      {"meta.mirror_pairs", "0"},
      {"train.mode", "mcn"},
      {"train.alpha", "0.2"},
      {"train.lr", "0.03"},
      {"train.lr_inner", "same"},
      {"train.lr_meta", "same"},
      {"train.batch_size", "8"},
      {"train.epochs", "100"},
      {"train.iterations_per_epoch", "0"},
      {"train.inner_steps", "1"},
      {"train.freeze_head_inner", "0"},
      {"train.meta_order", "first_order"},
      {"train.exact_eps", "1e-05"},
      {"train.seed", "1"},
      {"train.eval_every", "0"},
      {"eval.probe_iters", "300"},
      {"eval.probe_lr", "1"},
      {"eval.probe_seed", "0"},
      {"eval.ks", "1,5,10,20,50"},
      {"ablate.seeds", "1,2,3,4,5"},
      {"ablate.alphas", "0.1,0.2,0.3,0.4"},
      {"gradcheck.cases", "20"},
      {"gradcheck.eps", "1e-05"},
      {"gradcheck.tolerance", "0.0001"},
      {"gradcheck.seed", "0"},
      {"gradcheck.cosine_min", "0.99"},
      {"gradcheck.meta_models", "3"},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw std::invalid_argument("config " + key + ": cannot parse '" + text + "'");
  }
  return v;
}

}  // namespace

TrainMode parse_train_mode(const std::string& text) {
  if (text == "baseline") return TrainMode::kBaseline;
  if (text == "cl_bl") return TrainMode::kClBl;
  if (text == "mcn") return TrainMode::kMcn;
  throw std::invalid_argument("train.mode must be baseline, cl_bl or mcn (got '" + text + "')");
}

const char* train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kBaseline: return "baseline";
    case TrainMode::kClBl: return "cl_bl";
    case TrainMode::kMcn: return "mcn";
  }
  return "?";
}

ComponentFlags mode_flags(TrainMode mode) {
  ComponentFlags f;
  f.use_bl = mode != TrainMode::kBaseline;
  f.use_meta_stages = mode == TrainMode::kMcn;
  return f;
}

ExperimentConfig::ExperimentConfig() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  it->second = value;
}

void ExperimentConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("expected key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void ExperimentConfig::load_text(const std::string& text, const std::string& source) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    try {
      set(line);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void ExperimentConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  load_text(ss.str(), path);
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  return it->second;
}

std::int64_t ExperimentConfig::get_int(const std::string& key) const {
  return parse_number<std::int64_t>(key, get(key));
}

std::uint64_t ExperimentConfig::get_uint(const std::string& key) const {
  return parse_number<std::uint64_t>(key, get(key));
}

double ExperimentConfig::get_double(const std::string& key) const {
  return parse_number<double>(key, get(key));
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw std::invalid_argument("config " + key + ": expected 0/1/true/false, got '" + v + "'");
}

std::vector<double> ExperimentConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : split_list(get(key))) out.push_back(parse_number<double>(key, s));
  return out;
}

std::vector<std::uint64_t> ExperimentConfig::get_uints(const std::string& key) const {
  std::vector<std::uint64_t> out;
  for (const auto& s : split_list(get(key))) out.push_back(parse_number<std::uint64_t>(key, s));
  return out;
}

std::string ExperimentConfig::echo(const std::string& prefix) const {
  std::string out;
  for (const auto& [k, v] : values_) out += prefix + k + "=" + v + "\n";
  return out;
}

ExperimentConfig config_from_echo(const std::string& echo_text) {
  std::istringstream is(echo_text);
  std::string line, body;
  while (std::getline(is, line)) {
    if (line.rfind("# ", 0) == 0) line = line.substr(2);
    body += line + "\n";
  }
  ExperimentConfig config;
  config.load_text(body, "embedded config");
  return config;
}

CorpusConfig corpus_config(const ExperimentConfig& c) {
  CorpusConfig out;
  out.n_classes = static_cast<int>(c.get_int("corpus.n_classes"));
  out.clips_per_class = static_cast<int>(c.get_int("corpus.clips_per_class"));
  out.frames = static_cast<int>(c.get_int("corpus.frames"));
  out.height = static_cast<int>(c.get_int("corpus.height"));
  out.width = static_cast<int>(c.get_int("corpus.width"));
  out.channels = static_cast<int>(c.get_int("corpus.channels"));
  out.sprite_size = static_cast<int>(c.get_int("corpus.sprite_size"));
  out.noise_std = c.get_double("corpus.noise_std");
  out.motion_blur = c.get_bool("corpus.motion_blur");
  out.center_jitter = static_cast<int>(c.get_int("corpus.center_jitter"));
  out.seed = c.get_uint("corpus.seed");
  return out;
}

SplitConfig split_config(const ExperimentConfig& c) {
  SplitConfig out;
  out.support_fraction = c.get_double("split.support_fraction");
  out.eval_test_fraction = c.get_double("split.eval_test_fraction");
  out.seed = c.get_uint("split.seed");
  return out;
}

TrainMode train_mode(const ExperimentConfig& c) { return parse_train_mode(c.get("train.mode")); }

TrainConfig train_config(const ExperimentConfig& c) {
  TrainConfig t;
  const CorpusConfig corpus = corpus_config(c);
  t.encoder.frames = static_cast<std::size_t>(corpus.frames);
  t.encoder.height = static_cast<std::size_t>(corpus.height);
  t.encoder.width = static_cast<std::size_t>(corpus.width);
  t.encoder.channels = static_cast<std::size_t>(corpus.channels);
  t.encoder.hidden_width = c.get_uint("encoder.hidden_width");
  t.encoder.embed_dim = c.get_uint("encoder.embed_dim");
  t.encoder.init_scale = c.get_double("encoder.init_scale");
  t.encoder.separate_views = c.get_bool("encoder.separate_views");

  t.augment.crop_min_scale = c.get_double("augment.crop_min_scale");
  t.augment.flip_prob = c.get_double("augment.flip_prob");
  t.augment.jitter = c.get_double("augment.jitter");

  t.contrastive.tau = c.get_double("contrastive.tau");
  t.contrastive.k = c.get_uint("contrastive.k");
  const std::string& bank = c.get("contrastive.bank_mode");
  if (bank == "in_batch") t.contrastive.bank_mode = BankMode::kInBatch;
  else if (bank == "persistent") t.contrastive.bank_mode = BankMode::kPersistent;
  else throw std::invalid_argument("contrastive.bank_mode must be in_batch or persistent");
  t.contrastive.symmetric = c.get_bool("contrastive.symmetric");
  t.contrastive.bank_capacity = c.get_uint("contrastive.bank_capacity");

  const std::string& policy = c.get("meta.pair_policy");
  if (policy == "derangement") t.pair_policy = PairPolicy::kDerangement;
  else if (policy == "all_pairs") t.pair_policy = PairPolicy::kAllPairs;
  else throw std::invalid_argument("meta.pair_policy must be derangement or all_pairs");
  t.mirror_pairs = c.get_bool("meta.mirror_pairs");

  t.flags = mode_flags(train_mode(c));
  t.alpha = c.get_double("train.alpha");
  t.lr = c.get_double("train.lr");
  if (c.get("train.lr_inner") != "same") t.lr_inner = c.get_double("train.lr_inner");
  if (c.get("train.lr_meta") != "same") t.lr_meta = c.get_double("train.lr_meta");
  t.batch_size = c.get_uint("train.batch_size");
  t.epochs = c.get_uint("train.epochs");
  t.iterations_per_epoch = c.get_uint("train.iterations_per_epoch");
  t.inner_steps = c.get_uint("train.inner_steps");
  t.freeze_head_inner = c.get_bool("train.freeze_head_inner");
  const std::string& order = c.get("train.meta_order");
  if (order == "first_order") t.meta_order = MetaOrder::kFirstOrder;
  else if (order == "exact_check") t.meta_order = MetaOrder::kExactCheck;
  else throw std::invalid_argument("train.meta_order must be first_order or exact_check");
  t.exact_eps = c.get_double("train.exact_eps");
  t.seed = c.get_uint("train.seed");
  t.eval_every = c.get_uint("train.eval_every");
  t.eval = eval_config(c);
  t.validate();
  return t;
}

EvalConfig eval_config(const ExperimentConfig& c) {
  EvalConfig e;
  e.probe_iters = c.get_uint("eval.probe_iters");
  e.probe_lr = c.get_double("eval.probe_lr");
  e.probe_seed = c.get_uint("eval.probe_seed");
  e.ks.clear();
  for (auto k : c.get_uints("eval.ks")) e.ks.push_back(static_cast<std::size_t>(k));
  return e;
}

GradcheckConfig gradcheck_config(const ExperimentConfig& c) {
  GradcheckConfig g;
  g.cases = c.get_uint("gradcheck.cases");
  g.eps = c.get_double("gradcheck.eps");
  g.tolerance = c.get_double("gradcheck.tolerance");
  g.seed = c.get_uint("gradcheck.seed");
  g.cosine_min = c.get_double("gradcheck.cosine_min");
  g.meta_models = c.get_uint("gradcheck.meta_models");
  return g;
}

}  // namespace mcn
