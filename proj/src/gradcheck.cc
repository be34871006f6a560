#include "mcn/gradcheck.h"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "mcn/rng.h"
#include "mcn/text_format.h"

namespace mcn {

GradcheckScope parse_gradcheck_scope(const std::string& text) {
  if (text == "ops") return GradcheckScope::kOps;
  if (text == "losses") return GradcheckScope::kLosses;
  if (text == "meta") return GradcheckScope::kMeta;
  throw std::invalid_argument("gradcheck scope must be ops, losses or meta (got '" + text + "')");
}

const char* gradcheck_scope_name(GradcheckScope scope) {
  switch (scope) {
    case GradcheckScope::kOps: return "ops";
    case GradcheckScope::kLosses: return "losses";
    case GradcheckScope::kMeta: return "meta";
  }
  return "?";
}

TrainConfig gradcheck_model_config() {
  TrainConfig config;
  config.encoder.frames = 3;
  config.encoder.height = 8;
  config.encoder.width = 8;
  config.encoder.channels = 1;
  config.encoder.hidden_width = 6;
  config.encoder.embed_dim = 4;
  config.batch_size = 4;
  config.alpha = 0.2;
  return config;
}

std::vector<Clip> gradcheck_batch(std::size_t batch_size, std::uint64_t seed) {
  CorpusConfig corpus;
  corpus.n_classes = static_cast<int>(batch_size);
  corpus.clips_per_class = 2;
  corpus.frames = 3;
  corpus.height = 8;
  corpus.width = 8;
  corpus.seed = seed;
  return generate_corpus(corpus);
}

ParamSet gradcheck_params(const TrainConfig& config) {
  ParamSet params = init_model(config);
  Rng rng(derive_seed(config.seed, {kTagInit, 0xB1A5}));
  std::uniform_real_distribution<double> u(-0.5, 0.5), active(0.1, 0.5);
  for (const auto& name : params.names()) {
    if (name.size() < 4 || name.compare(name.size() - 4, 4, "bias") != 0) continue;
    const bool hidden = name.find("fc1/") != std::string::npos;
    for (auto& v : params.mutable_at(name).data) v = hidden ? active(rng) : u(rng);
  }
  return params;
}

namespace {

using Builder = std::function<Var(const BoundParams&)>;

struct OpCase {
  ParamSet inputs;
  Builder build;
  std::string detail;
};

Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = u(rng);
  return t;
}

// Values with |x| in [0.1, 1] so kinks at zero stay out of reach of eps.
Tensor away_from_zero(Rng& rng, Shape shape) {
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = (rng() & 1) ? mag(rng) : -mag(rng);
  return t;
}

std::size_t dim(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

OpCase make_op_case(const std::string& op, Rng& rng) {
  OpCase c;
  const std::size_t n = dim(rng, 1, 5), m = dim(rng, 1, 5), k = dim(rng, 1, 5);
  auto x = [&](Tensor t) { c.inputs.add("x", std::move(t)); };
  auto y = [&](Tensor t) { c.inputs.add("y", std::move(t)); };
  const Shape nm{n, m};
  c.detail = "shape=" + shape_str(nm);
  if (op == "matmul") {
    x(random_tensor(rng, {n, k}, -1, 1));
    y(random_tensor(rng, {k, m}, -1, 1));
    c.build = [](const BoundParams& p) { return matmul(p["x"], p["y"]); };
  } else if (op == "transpose") {
    x(random_tensor(rng, nm, -1, 1));
    c.build = [](const BoundParams& p) { return transpose(p["x"]); };
  } else if (op == "add" || op == "sub" || op == "mul") {
    x(random_tensor(rng, nm, -1, 1));
    y(random_tensor(rng, nm, -1, 1));
    if (op == "add") c.build = [](const BoundParams& p) { return add(p["x"], p["y"]); };
    if (op == "sub") c.build = [](const BoundParams& p) { return sub(p["x"], p["y"]); };
    if (op == "mul") c.build = [](const BoundParams& p) { return mul(p["x"], p["y"]); };
  } else if (op == "mul_shared") {
    x(random_tensor(rng, nm, -1, 1));
    c.build = [](const BoundParams& p) { return mul(p["x"], p["x"]); };
  } else if (op == "add_row") {
    x(random_tensor(rng, nm, -1, 1));
    y(random_tensor(rng, (rng() & 1) ? Shape{m} : Shape{1, m}, -1, 1));
    c.build = [](const BoundParams& p) { return add_row(p["x"], p["y"]); };
  } else if (op == "scale" || op == "add_scalar") {
    const double s = std::uniform_real_distribution<double>(-2, 2)(rng);
    x(random_tensor(rng, nm, -1, 1));
    if (op == "scale") c.build = [s](const BoundParams& p) { return scale(p["x"], s); };
    else c.build = [s](const BoundParams& p) { return add_scalar(p["x"], s); };
  } else if (op == "abs" || op == "relu") {
    x(away_from_zero(rng, nm));
    if (op == "abs") c.build = [](const BoundParams& p) { return abs(p["x"]); };
    else c.build = [](const BoundParams& p) { return relu(p["x"]); };
  } else if (op == "sigmoid") {
    x(random_tensor(rng, nm, -4, 4));
    c.build = [](const BoundParams& p) { return sigmoid(p["x"]); };
  } else if (op == "exp") {
    x(random_tensor(rng, nm, -2, 2));
    c.build = [](const BoundParams& p) { return exp(p["x"]); };
  } else if (op == "log") {
    x(random_tensor(rng, nm, 0.2, 3));
    c.build = [](const BoundParams& p) { return log(p["x"]); };
  } else if (op == "clamp") {
    // Entries kept at least 0.05 from either bound.
    Tensor t = random_tensor(rng, nm, -1, 1);
    for (auto& v : t.data) {
      if (std::abs(std::abs(v) - 0.5) < 0.05) v = v > 0 ? 0.7 : -0.2;
    }
    x(std::move(t));
    c.build = [](const BoundParams& p) { return clamp(p["x"], -0.5, 0.5); };
  } else if (op == "sum" || op == "mean") {
    x(random_tensor(rng, nm, -1, 1));
    if (op == "sum") c.build = [](const BoundParams& p) { return sum(p["x"]); };
    else c.build = [](const BoundParams& p) { return mean(p["x"]); };
  } else if (op == "sum_axis0" || op == "sum_axis1") {
    x(random_tensor(rng, nm, -1, 1));
    const int axis = op == "sum_axis0" ? 0 : 1;
    c.build = [axis](const BoundParams& p) { return sum_axis(p["x"], axis); };
  } else if (op == "mean_groups") {
    x(random_tensor(rng, {n * k, m}, -1, 1));
    c.build = [k](const BoundParams& p) { return mean_groups(p["x"], k); };
  } else if (op == "concat_cols") {
    x(random_tensor(rng, {n, m}, -1, 1));
    y(random_tensor(rng, {n, k}, -1, 1));
    c.build = [](const BoundParams& p) {
      const Var parts[] = {p["x"], p["y"], p["x"]};
      return concat_cols(parts);
    };
  } else if (op == "concat_rows") {
    x(random_tensor(rng, {n, m}, -1, 1));
    y(random_tensor(rng, {k, m}, -1, 1));
    c.build = [](const BoundParams& p) {
      const Var parts[] = {p["y"], p["x"]};
      return concat_rows(parts);
    };
  } else if (op == "slice_row") {
    x(random_tensor(rng, nm, -1, 1));
    const std::size_t r = dim(rng, 0, n - 1);
    c.build = [r](const BoundParams& p) { return slice_row(p["x"], r); };
  } else if (op == "reshape") {
    x(random_tensor(rng, nm, -1, 1));
    c.build = [n, m](const BoundParams& p) { return reshape(p["x"], Shape{m * n}); };
  } else if (op == "l2_normalize_rows") {
    x(away_from_zero(rng, nm));
    c.build = [](const BoundParams& p) { return l2_normalize_rows(p["x"]); };
  } else if (op == "logsumexp_axis0" || op == "logsumexp_axis1") {
    x(random_tensor(rng, nm, -3, 3));
    const int axis = op == "logsumexp_axis0" ? 0 : 1;
    c.build = [axis](const BoundParams& p) { return logsumexp(p["x"], axis); };
  } else {
    throw std::invalid_argument("unknown op case " + op);
  }
  return c;
}

const std::vector<std::string>& op_names() {
  static const std::vector<std::string> names = {
      "matmul", "transpose", "add", "sub", "mul", "mul_shared", "add_row", "scale",
      "add_scalar", "abs", "relu", "sigmoid", "exp", "log", "clamp", "sum", "mean",
      "sum_axis0", "sum_axis1", "mean_groups", "concat_cols", "concat_rows", "slice_row",
      "reshape", "l2_normalize_rows", "logsumexp_axis0", "logsumexp_axis1"};
  return names;
}

// Scalar probe of an arbitrary-shaped output: sum(out * R) with fixed R.
Var weighted_sum(const Var& out, const Tensor& weights) {
  if (out.shape().empty()) return out;
  return sum(mul(out, constant(weights)));
}

GradcheckCase check(const std::string& scope, const std::string& name, std::uint64_t seed,
                    const ParamSet& params, const std::function<Var(const BoundParams&)>& loss,
                    const GradcheckConfig& config, std::string detail) {
  const BoundParams bound = params.bind();
  const GradMap analytic = backward(loss(bound), bound);
  const GradMap numeric = numeric_grad(
      [&](const ParamSet& p) {
        const BoundParams b = p.bind();
        return loss(b).item();
      },
      params, config.eps);
  GradcheckCase out;
  out.scope = scope;
  out.name = name;
  out.seed = seed;
  out.value = max_relative_error(analytic, numeric);
  out.threshold = config.tolerance;
  out.passed = std::isfinite(out.value) && out.value < config.tolerance;
  out.detail = "metric=max_rel_error\t" + std::move(detail);
  return out;
}

void run_ops(const GradcheckConfig& config, std::vector<GradcheckCase>& out) {
  for (std::size_t oi = 0; oi < op_names().size(); ++oi) {
    const std::string& op = op_names()[oi];
    for (std::size_t i = 0; i < config.cases; ++i) {
      const std::uint64_t seed = derive_seed(config.seed, {oi, i});
      Rng rng(seed);
      OpCase c = make_op_case(op, rng);
      const Var probe = c.build(c.inputs.bind());
      const Tensor weights = random_tensor(rng, probe.shape(), -1, 1);
      auto loss = [&](const BoundParams& p) { return weighted_sum(c.build(p), weights); };
      out.push_back(check("ops", op, i, c.inputs, loss, config, c.detail));
    }
  }
}

void run_losses(const GradcheckConfig& config, std::vector<GradcheckCase>& out) {
  // NCE on normalised free embeddings.
  for (std::size_t i = 0; i < config.cases; ++i) {
    const std::uint64_t seed = derive_seed(config.seed, {101, i});
    Rng rng(seed);
    const std::size_t e = dim(rng, 2, 6), k = dim(rng, 1, 6);
    const double tau = std::uniform_real_distribution<double>(0.07, 1.0)(rng);
    ParamSet p;
    p.add("anchor", away_from_zero(rng, {1, e}));
    p.add("positive", away_from_zero(rng, {1, e}));
    p.add("negatives", away_from_zero(rng, {k, e}));
    auto loss = [k, tau](const BoundParams& b) {
      std::vector<Var> negs;
      const Var n = l2_normalize_rows(b["negatives"]);
      for (std::size_t r = 0; r < k; ++r) negs.push_back(slice_row(n, r));
      return nce_loss(l2_normalize_rows(b["anchor"]), l2_normalize_rows(b["positive"]), negs, tau);
    };
    out.push_back(check("losses", "nce_embeddings", i, p, loss, config,
                        "k=" + std::to_string(k) + "\ttau=" + fmt_double(tau)));
  }
  // BCE on sigmoid probabilities.
  for (std::size_t i = 0; i < config.cases; ++i) {
    const std::uint64_t seed = derive_seed(config.seed, {102, i});
    Rng rng(seed);
    const std::size_t n = dim(rng, 2, 8);
    ParamSet p;
    p.add("logits", random_tensor(rng, {n, 1}, -3, 3));
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng() & 1);
    auto loss = [&labels](const BoundParams& b) { return bce_loss(sigmoid(b["logits"]), labels); };
    out.push_back(check("losses", "bce_probabilities", i, p, loss, config, "n=" + std::to_string(n)));
  }
  // Composed objectives through the encoder and head.
  const struct {
    const char* name;
    double alpha;
  } composed[] = {{"contrastive_encoder", 0.0}, {"bce_encoder", 1.0}, {"meta_loss_encoder", 0.2}};
  for (std::size_t ci = 0; ci < 3; ++ci) {
    for (std::size_t i = 0; i < config.cases; ++i) {
      TrainConfig tc = gradcheck_model_config();
      tc.alpha = composed[ci].alpha;
      tc.seed = derive_seed(config.seed, {103, ci, i});
      const ParamSet params = gradcheck_params(tc);
      const auto corpus = gradcheck_batch(tc.batch_size, tc.seed);
      const std::vector<Clip> batch(corpus.begin(), corpus.begin() + static_cast<long>(tc.batch_size));
      auto loss = [&](const BoundParams& b) {
        return compute_branch_losses(b, batch, tc, tc.seed).l_meta;
      };
      out.push_back(check("losses", composed[ci].name, i, params, loss, config,
                          "alpha=" + fmt_double(tc.alpha) +
                              "\tparams=" + std::to_string(params.scalar_count())));
    }
  }
}

double dot(const GradMap& a, const GradMap& b) {
  double s = 0.0;
  for (const auto& [name, t] : a) {
    const Tensor& u = b.at(name);
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * u[i];
  }
  return s;
}

void run_meta(const GradcheckConfig& config, std::vector<GradcheckCase>& out) {
  for (std::size_t m = 0; m < config.meta_models; ++m) {
    TrainConfig tc = gradcheck_model_config();
    tc.seed = derive_seed(config.seed, {104, m});
    tc.exact_eps = config.eps;
    const ParamSet theta = gradcheck_params(tc);
    const auto corpus = gradcheck_batch(tc.batch_size, tc.seed);
    const std::vector<Clip> support(corpus.begin(), corpus.begin() + 4);
    const std::vector<Clip> query(corpus.begin() + 4, corpus.begin() + 8);
    const std::uint64_t iter_seed = derive_seed(tc.seed, {kTagIteration});
    const std::uint64_t s_seed = support_stage_seed(iter_seed), q_seed = query_stage_seed(iter_seed);
    std::vector<double> rel_diffs;
    for (double lr_inner : config.meta_inner_lrs) {
      tc.lr_inner = lr_inner;
      const GradMap fo = first_order_meta_gradient(theta, support, query, tc, s_seed, q_seed);
      const GradMap ex = exact_meta_gradient(theta, support, query, tc, s_seed, q_seed);
      GradMap diff = fo;
      for (auto& [name, t] : diff) {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] -= ex.at(name)[i];
      }
      const double cosine = dot(fo, ex) / std::sqrt(dot(fo, fo) * dot(ex, ex));
      const double rel = std::sqrt(dot(diff, diff) / dot(ex, ex));
      rel_diffs.push_back(rel);
      GradcheckCase c;
      c.scope = "meta";
      c.name = "first_order_vs_exact";
      c.seed = m;
      c.value = cosine;
      const bool gated = std::abs(lr_inner - 1e-3) < 1e-15;
      c.threshold = gated ? config.cosine_min : 0.0;
      c.passed = std::isfinite(cosine) && (!gated || cosine > config.cosine_min);
      c.detail = "metric=cosine\tlr_inner=" + fmt_double(lr_inner) + "\trel_diff=" + fmt_double(rel) +
                 "\tparams=" + std::to_string(theta.scalar_count()) + (gated ? "\tgated=1" : "\tgated=0");
      out.push_back(std::move(c));
    }
    // Relative difference must shrink as lr_inner shrinks.
    double worst_ratio = 0.0;
    for (std::size_t i = 1; i < rel_diffs.size(); ++i) {
      worst_ratio = std::max(worst_ratio, rel_diffs[i] / rel_diffs[i - 1]);
    }
    GradcheckCase c;
    c.scope = "meta";
    c.name = "rel_diff_monotone";
    c.seed = m;
    c.value = worst_ratio;
    c.threshold = 1.0;
    c.passed = std::isfinite(worst_ratio) && worst_ratio < 1.0;
    c.detail = "metric=max_successive_ratio";
    out.push_back(std::move(c));
  }
}

}  // namespace

std::vector<GradcheckCase> run_gradcheck(GradcheckScope scope, const GradcheckConfig& config) {
  std::vector<GradcheckCase> out;
  switch (scope) {
    case GradcheckScope::kOps: run_ops(config, out); break;
    case GradcheckScope::kLosses: run_losses(config, out); break;
    case GradcheckScope::kMeta: run_meta(config, out); break;
  }
  return out;
}

void write_gradcheck_report(std::ostream& os, const std::vector<GradcheckCase>& cases,
                            const std::string& preamble) {
  os << preamble;
  for (const auto& c : cases) {
    os << "scope=" << c.scope << "\tcase=" << c.name << "\tseed=" << c.seed
       << "\tvalue=" << fmt_double(c.value) << "\tthreshold=" << fmt_double(c.threshold)
       << "\tstatus=" << (c.passed ? "PASS" : "FAIL");
    if (!c.detail.empty()) os << '\t' << c.detail;
    os << '\n';
  }
}

bool all_passed(const std::vector<GradcheckCase>& cases) {
  for (const auto& c : cases) {
    if (!c.passed) return false;
  }
  return true;
}

}  // namespace mcn
