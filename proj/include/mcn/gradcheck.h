#ifndef MCN_GRADCHECK_H_
#define MCN_GRADCHECK_H_

// Finite-difference verification suites: every catalog op, the composed
// branch losses through the encoder, and the two-stage meta-gradient.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "mcn/meta_trainer.h"

namespace mcn {

enum class GradcheckScope { kOps, kLosses, kMeta };

GradcheckScope parse_gradcheck_scope(const std::string& text);
const char* gradcheck_scope_name(GradcheckScope scope);

struct GradcheckConfig {
  std::size_t cases = 20;    // seeded cases per op and per composed loss
  double eps = 1e-5;
  double tolerance = 1e-4;   // max relative error
  std::uint64_t seed = 0;
  double cosine_min = 0.99;  // first-order vs exact at lr_inner = 1e-3
  std::vector<double> meta_inner_lrs = {1e-2, 1e-3, 1e-4};
  std::size_t meta_models = 3;
};

struct GradcheckCase {
  std::string scope;
  std::string name;
  std::uint64_t seed = 0;
  double value = 0.0;      // max relative error, or cosine for meta cases
  double threshold = 0.0;
  bool passed = false;
  std::string detail;      // extra key=value fields
};

// Tiny model used by the loss and meta suites (427 scalars with the head).
TrainConfig gradcheck_model_config();
std::vector<Clip> gradcheck_batch(std::size_t batch_size, std::uint64_t seed);

// init_model with hidden biases drawn from U(0.1, 0.5) and the other biases
// from U(-0.5, 0.5). Zero biases put views whose hidden units are all
// inactive on the zero vector, where L2 normalisation is discontinuous, and
// barely-active units yield gradient entries below the central-difference
// noise floor; oracles are therefore taken at these generic points.
ParamSet gradcheck_params(const TrainConfig& config);

std::vector<GradcheckCase> run_gradcheck(GradcheckScope scope, const GradcheckConfig& config);

// One case per line: scope, name, seed, value, threshold, status, details.
void write_gradcheck_report(std::ostream& os, const std::vector<GradcheckCase>& cases,
                            const std::string& preamble);

bool all_passed(const std::vector<GradcheckCase>& cases);

}  // namespace mcn

#endif  // MCN_GRADCHECK_H_
