#ifndef MCN_EXPERIMENT_H_
#define MCN_EXPERIMENT_H_

// Flat key=value experiment configuration. Resolution order: built-in
// defaults, then a config file, then individual overrides. Every key has a
// default; unknown keys are rejected.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mcn/eval_harness.h"
#include "mcn/gradcheck.h"
#include "mcn/meta_trainer.h"
#include "mcn/synth_data.h"

namespace mcn {

enum class TrainMode { kBaseline, kClBl, kMcn };

TrainMode parse_train_mode(const std::string& text);
const char* train_mode_name(TrainMode mode);
ComponentFlags mode_flags(TrainMode mode);

struct SplitConfig {
  double support_fraction = 0.5;
  double eval_test_fraction = 0.5;
  std::uint64_t seed = 3;
};

class ExperimentConfig {
 public:
  ExperimentConfig();  // built-in defaults

  // "key=value" lines; blank lines and lines starting with '#' are skipped.
  void load_text(const std::string& text, const std::string& source);
  void load_file(const std::string& path);
  void set(const std::string& assignment);  // "key=value"
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::uint64_t> get_uints(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  // "key=value" per line in key order, each line prefixed by `prefix`.
  std::string echo(const std::string& prefix = "# ") const;

 private:
  std::map<std::string, std::string> values_;
};

// Config text echoed into artifacts parses back with load_text after the
// "# " prefix is stripped; this does both.
ExperimentConfig config_from_echo(const std::string& echo_text);

CorpusConfig corpus_config(const ExperimentConfig& config);
SplitConfig split_config(const ExperimentConfig& config);
// Encoder input dims follow the corpus: T = corpus.frames, H, W, C.
TrainConfig train_config(const ExperimentConfig& config);
EvalConfig eval_config(const ExperimentConfig& config);
GradcheckConfig gradcheck_config(const ExperimentConfig& config);
TrainMode train_mode(const ExperimentConfig& config);

}  // namespace mcn

#endif  // MCN_EXPERIMENT_H_
