#include "mcn/autodiff.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace mcn {

namespace {

std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(op + ": shape mismatch " + shape_str(a) + " vs " +
                              shape_str(b));
}

void require_rank2(const std::string& op, const Var& a) {
  if (a.shape().size() != 2) {
    throw std::invalid_argument(op + ": expected rank-2 input, got " + shape_str(a.shape()));
  }
}

// Rows/cols when an array is viewed along its feature (last) axis.
std::size_t feature_rows(const Shape& s) { return s.size() == 2 ? s[0] : 1; }
std::size_t feature_cols(const Shape& s) { return s.empty() ? 1 : s.back(); }

void require_feature_rank(const std::string& op, const Shape& s) {
  if (s.size() != 1 && s.size() != 2) {
    throw std::invalid_argument(op + ": expected rank-1 or rank-2 input, got " + shape_str(s));
  }
}

template <typename Fwd, typename Deriv>
Var unary(const Var& a, const std::string& op, Fwd fwd, Deriv deriv) {
  Tensor out(a.shape());
  const auto& x = a.value().data;
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = fwd(x[i]);
  return make_node(std::move(out), {a}, op, [deriv](detail::Node& self) {
    auto& g = self.parent_grad(0);
    const auto& x = self.parents[0]->value.data;
    for (std::size_t i = 0; i < x.size(); ++i) {
      g.data[i] += self.grad.data[i] * deriv(x[i], self.value.data[i]);
    }
  });
}

}  // namespace

// --- Var / Node ---------------------------------------------------------------

Tensor& detail::Node::parent_grad(std::size_t i) {
  auto& p = *parents[i];
  if (p.grad.shape != p.value.shape || p.grad.data.size() != p.value.data.size()) {
    p.grad = Tensor(p.value.shape);
  }
  return p.grad;
}

const Tensor& Var::value() const { return node_->value; }
const Shape& Var::shape() const { return node_->value.shape; }
bool Var::requires_grad() const { return node_->requires_grad; }
const std::string& Var::op() const { return node_->op; }

double Var::item() const {
  if (node_->value.size() != 1) {
    throw std::invalid_argument("item: node '" + node_->op + "' has shape " +
                                shape_str(node_->value.shape));
  }
  return node_->value.data[0];
}

Tensor Var::grad() const {
  if (node_->grad.shape == node_->value.shape &&
      node_->grad.data.size() == node_->value.data.size()) {
    return node_->grad;
  }
  return Tensor(node_->value.shape);
}

detail::Node& node_of(const Var& v) { return *v.node_; }

Var make_node(Tensor value, std::vector<Var> parents, std::string op,
              std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->op = std::move(op);
  node->id = next_node_id();
  for (auto& p : parents) {
    node->requires_grad = node->requires_grad || p.requires_grad();
    node->parents.push_back(p.node_);
  }
  if (node->requires_grad) node->backward_fn = std::move(backward_fn);
  return Var(std::move(node));
}

Var constant(Tensor value) { return make_node(std::move(value), {}, "constant", nullptr); }

Var leaf(Tensor value) {
  Var v = make_node(std::move(value), {}, "leaf", nullptr);
  node_of(v).requires_grad = true;
  return v;
}

// --- ops ------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
    shape_error("matmul", a.shape(), b.shape());
  }
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  Tensor out(Shape{n, m});
  const auto& x = a.value().data;
  const auto& y = b.value().data;
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = &out.data[i * m];
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x[i * k + p];
      if (xv == 0.0) continue;
      const double* yrow = &y[p * m];
      for (std::size_t j = 0; j < m; ++j) orow[j] += xv * yrow[j];
    }
  }
  return make_node(std::move(out), {a, b}, "matmul", [n, k, m](detail::Node& self) {
    const auto& g = self.grad.data;
    const auto& x = self.parents[0]->value.data;
    const auto& y = self.parents[1]->value.data;
    if (self.parents[0]->requires_grad) {
      auto& ga = self.parent_grad(0).data;
      // dA = G * B^T
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * y[p * m + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (self.parents[1]->requires_grad) {
      auto& gb = self.parent_grad(1).data;
      // dB = A^T * G
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = x[i * k + p];
          if (xv == 0.0) continue;
          for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += xv * g[i * m + j];
        }
      }
    }
  });
}

Var transpose(const Var& a) {
  require_rank2("transpose", a);
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out.data[j * n + i] = a.value().data[i * m + j];
  return make_node(std::move(out), {a}, "transpose", [n, m](detail::Node& self) {
    auto& g = self.parent_grad(0).data;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) g[i * m + j] += self.grad.data[j * n + i];
  });
}

namespace {
template <typename Combine, typename DA, typename DB>
Var binary(const Var& a, const Var& b, const std::string& op, Combine combine, DA da, DB db) {
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
  Tensor out(a.shape());
  const auto& x = a.value().data;
  const auto& y = b.value().data;
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = combine(x[i], y[i]);
  return make_node(std::move(out), {a, b}, op, [da, db](detail::Node& self) {
    const auto& x = self.parents[0]->value.data;
    const auto& y = self.parents[1]->value.data;
    const auto& g = self.grad.data;
    if (self.parents[0]->requires_grad) {
      auto& ga = self.parent_grad(0).data;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(x[i], y[i]);
    }
    if (self.parents[1]->requires_grad) {
      auto& gb = self.parent_grad(1).data;
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(x[i], y[i]);
    }
  });
}
}  // namespace

Var add(const Var& a, const Var& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var add_row(const Var& a, const Var& row) {
  require_rank2("add_row", a);
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  const bool ok = (row.shape() == Shape{m}) || (row.shape() == Shape{1, m});
  if (!ok) shape_error("add_row", a.shape(), row.shape());
  Tensor out = a.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out.data[i * m + j] += row.value().data[j];
  return make_node(std::move(out), {a, row}, "add_row", [n, m](detail::Node& self) {
    const auto& g = self.grad.data;
    if (self.parents[0]->requires_grad) {
      auto& ga = self.parent_grad(0).data;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& gb = self.parent_grad(1).data;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
    }
  });
}

Var scale(const Var& a, double c) {
  return unary(a, "scale", [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(const Var& a, double c) {
  return unary(a, "add_scalar", [c](double x) { return x + c; },
               [](double, double) { return 1.0; });
}

Var abs(const Var& a) {
  return unary(a, "abs", [](double x) { return std::fabs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var relu(const Var& a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  for (double v : a.value().data) {
    if (!(v > 0.0)) throw std::domain_error("log: non-positive input " + std::to_string(v));
  }
  return unary(a, "log", [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var sum(const Var& a) {
  double acc = 0.0;
  for (double v : a.value().data) acc += v;
  return make_node(Tensor::scalar(acc), {a}, "sum", [](detail::Node& self) {
    auto& g = self.parent_grad(0).data;
    const double s = self.grad.data[0];
    for (auto& v : g) v += s;
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var sum_axis(const Var& a, int axis) {
  require_rank2("sum_axis", a);
  if (axis != 0 && axis != 1) throw std::invalid_argument("sum_axis: axis must be 0 or 1");
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  Tensor out(Shape{axis == 0 ? m : n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out.data[axis == 0 ? j : i] += a.value().data[i * m + j];
  return make_node(std::move(out), {a}, "sum_axis", [n, m, axis](detail::Node& self) {
    auto& g = self.parent_grad(0).data;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) g[i * m + j] += self.grad.data[axis == 0 ? j : i];
  });
}

Var mean_groups(const Var& a, std::size_t group) {
  require_rank2("mean_groups", a);
  const std::size_t rows = a.shape()[0], m = a.shape()[1];
  if (group == 0 || rows % group != 0) {
    throw std::invalid_argument("mean_groups: " + std::to_string(rows) +
                                " rows not divisible into groups of " + std::to_string(group));
  }
  const std::size_t n = rows / group;
  const double inv = 1.0 / static_cast<double>(group);
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < group; ++t) {
      const double* src = &a.value().data[(i * group + t) * m];
      for (std::size_t j = 0; j < m; ++j) out.data[i * m + j] += src[j];
    }
    for (std::size_t j = 0; j < m; ++j) out.data[i * m + j] *= inv;
  }
  return make_node(std::move(out), {a}, "mean_groups", [n, m, group, inv](detail::Node& self) {
    auto& g = self.parent_grad(0).data;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < group; ++t)
        for (std::size_t j = 0; j < m; ++j)
          g[(i * group + t) * m + j] += self.grad.data[i * m + j] * inv;
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  require_feature_rank("concat_cols", parts[0].shape());
  const std::size_t rank = parts[0].shape().size();
  const std::size_t n = feature_rows(parts[0].shape());
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.shape().size() != rank || feature_rows(p.shape()) != n) {
      shape_error("concat_cols", parts[0].shape(), p.shape());
    }
    widths.push_back(feature_cols(p.shape()));
    total += widths.back();
  }
  Tensor out(rank == 1 ? Shape{total} : Shape{n, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& src = parts[k].value().data;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j)
        out.data[i * total + offset + j] = src[i * widths[k] + j];
    offset += widths[k];
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return make_node(std::move(out), std::move(parents), "concat_cols",
                   [n, total, widths](detail::Node& self) {
                     std::size_t offset = 0;
                     for (std::size_t k = 0; k < widths.size(); ++k) {
                       if (self.parents[k]->requires_grad) {
                         auto& g = self.parent_grad(k).data;
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < widths[k]; ++j)
                             g[i * widths[k] + j] += self.grad.data[i * total + offset + j];
                       }
                       offset += widths[k];
                     }
                   });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  require_feature_rank("concat_rows", parts[0].shape());
  const std::size_t m = feature_cols(parts[0].shape());
  std::vector<std::size_t> heights;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_feature_rank("concat_rows", p.shape());
    if (feature_cols(p.shape()) != m) shape_error("concat_rows", parts[0].shape(), p.shape());
    heights.push_back(feature_rows(p.shape()));
    total += heights.back();
  }
  Tensor out(Shape{total, m});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data.begin(), p.value().data.end(), out.data.begin() + offset * m);
    offset += feature_rows(p.shape());
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return make_node(std::move(out), std::move(parents), "concat_rows",
                   [m, heights](detail::Node& self) {
                     std::size_t offset = 0;
                     for (std::size_t k = 0; k < heights.size(); ++k) {
                       if (self.parents[k]->requires_grad) {
                         auto& g = self.parent_grad(k).data;
                         for (std::size_t i = 0; i < heights[k] * m; ++i)
                           g[i] += self.grad.data[offset * m + i];
                       }
                       offset += heights[k];
                     }
                   });
}

Var slice_row(const Var& a, std::size_t r) {
  require_rank2("slice_row", a);
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  if (r >= n) {
    throw std::out_of_range("slice_row: row " + std::to_string(r) + " of " + shape_str(a.shape()));
  }
  Tensor out(Shape{1, m});
  std::copy_n(a.value().data.begin() + r * m, m, out.data.begin());
  return make_node(std::move(out), {a}, "slice_row", [r, m](detail::Node& self) {
    auto& g = self.parent_grad(0).data;
    for (std::size_t j = 0; j < m; ++j) g[r * m + j] += self.grad.data[j];
  });
}

Var reshape(const Var& a, Shape shape) {
  if (shape_size(shape) != a.value().size()) shape_error("reshape", a.shape(), shape);
  Tensor out(std::move(shape), a.value().data);
  return make_node(std::move(out), {a}, "reshape", [](detail::Node& self) {
    auto& g = self.parent_grad(0).data;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[i];
  });
}

Var l2_normalize_rows(const Var& a, bool canonical_on_zero) {
  require_feature_rank("l2_normalize_rows", a.shape());
  const std::size_t n = feature_rows(a.shape()), m = feature_cols(a.shape());
  Tensor out(a.shape());
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < m; ++j) ss += a.value().data[i * m + j] * a.value().data[i * m + j];
    norms[i] = std::sqrt(ss);
    if (!(norms[i] > 0.0)) {
      if (!canonical_on_zero) {
        throw std::domain_error("l2_normalize_rows: row " + std::to_string(i) + " has zero norm");
      }
      for (std::size_t j = 0; j < m; ++j) out.data[i * m + j] = 1.0 / std::sqrt(double(m));
      continue;
    }
    for (std::size_t j = 0; j < m; ++j) out.data[i * m + j] = a.value().data[i * m + j] / norms[i];
  }
  return make_node(std::move(out), {a}, "l2_normalize_rows",
                   [n, m, norms](detail::Node& self) {
                     auto& g = self.parent_grad(0).data;
                     const auto& y = self.value.data;
                     const auto& gy = self.grad.data;
                     for (std::size_t i = 0; i < n; ++i) {
                       if (!(norms[i] > 0.0)) continue;
                       double dot = 0.0;
                       for (std::size_t j = 0; j < m; ++j) dot += y[i * m + j] * gy[i * m + j];
                       for (std::size_t j = 0; j < m; ++j)
                         g[i * m + j] += (gy[i * m + j] - y[i * m + j] * dot) / norms[i];
                     }
                   });
}

Var logsumexp(const Var& a, int axis) {
  require_rank2("logsumexp", a);
  if (axis != 0 && axis != 1) throw std::invalid_argument("logsumexp: axis must be 0 or 1");
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  const std::size_t outer = axis == 1 ? n : m;
  const std::size_t inner = axis == 1 ? m : n;
  auto at = [n, m, axis](std::size_t o, std::size_t i) {
    (void)n;
    return axis == 1 ? o * m + i : i * m + o;
  };
  const auto& x = a.value().data;
  Tensor out(Shape{outer});
  for (std::size_t o = 0; o < outer; ++o) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inner; ++i) mx = std::max(mx, x[at(o, i)]);
    double acc = 0.0;
    for (std::size_t i = 0; i < inner; ++i) acc += std::exp(x[at(o, i)] - mx);
    out.data[o] = mx + std::log(acc);
  }
  return make_node(std::move(out), {a}, "logsumexp", [outer, inner, at](detail::Node& self) {
    auto& g = self.parent_grad(0).data;
    const auto& x = self.parents[0]->value.data;
    for (std::size_t o = 0; o < outer; ++o) {
      const double lse = self.value.data[o];
      for (std::size_t i = 0; i < inner; ++i)
        g[at(o, i)] += self.grad.data[o] * std::exp(x[at(o, i)] - lse);
    }
  });
}

// --- backward -------------------------------------------------------------------

void backward(const Var& loss) {
  if (loss.value().size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
  }
  // Parents always carry smaller ids than their children, so descending id
  // order is a valid reverse topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{loss.node_.get()};
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || !seen.insert(n).second) continue;
    order.push_back(n);
    for (auto& p : n->parents) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->id > b->id; });
  for (auto* n : order) n->grad = Tensor(n->value.shape);
  if (order.empty()) return;
  loss.node_->grad.data[0] = 1.0;
  for (auto* n : order) {
    if (n->backward_fn) n->backward_fn(*n);
  }
}

// --- parameters -------------------------------------------------------------------

const Var& BoundParams::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw std::out_of_range("BoundParams: unknown parameter '" + name + "'");
  return it->second;
}

void ParamSet::add(const std::string& name, Tensor value) {
  if (!entries_.emplace(name, std::move(value)).second) {
    throw std::invalid_argument("ParamSet: duplicate parameter '" + name + "'");
  }
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("ParamSet: unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParamSet::mutable_at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("ParamSet: unknown parameter '" + name + "'");
  return it->second;
}

void ParamSet::set(const std::string& name, Tensor value) {
  Tensor& slot = mutable_at(name);
  if (slot.shape != value.shape) shape_error("ParamSet::set(" + name + ")", slot.shape, value.shape);
  slot = std::move(value);
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.size();
  return n;
}

BoundParams ParamSet::bind() const {
  BoundParams b;
  for (const auto& [name, t] : entries_) b.vars_.emplace(name, leaf(t));
  return b;
}

GradMap backward(const Var& loss, const BoundParams& params) {
  // Drop gradients left over from an earlier backward through other losses.
  for (const auto& [_, v] : params.vars()) node_of(v).grad = Tensor();
  backward(loss);
  GradMap out;
  for (const auto& [name, v] : params.vars()) out.emplace(name, v.grad());
  return out;
}

GradMap numeric_grad(const std::function<double(const ParamSet&)>& f, const ParamSet& params,
                     double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("numeric_grad: eps must be positive");
  GradMap out;
  ParamSet probe = params;
  for (const auto& [name, base] : params.entries()) {
    Tensor g(base.shape);
    Tensor& slot = probe.mutable_at(name);
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double orig = base.data[i];
      slot.data[i] = orig + eps;
      const double fp = f(probe);
      slot.data[i] = orig - eps;
      const double fm = f(probe);
      slot.data[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw std::domain_error("numeric_grad: non-finite objective when perturbing '" + name +
                                "'[" + std::to_string(i) + "]");
      }
      g.data[i] = (fp - fm) / (2.0 * eps);
    }
    out.emplace(name, std::move(g));
  }
  return out;
}

ParamSet sgd_step(const ParamSet& params, const GradMap& grads, double lr) {
  if (lr < 0.0) throw std::invalid_argument("sgd_step: negative learning rate");
  ParamSet out = params;
  for (const auto& [name, value] : params.entries()) {
    auto it = grads.find(name);
    if (it == grads.end()) throw std::invalid_argument("sgd_step: missing gradient for '" + name + "'");
    if (it->second.shape != value.shape) {
      shape_error("sgd_step(" + name + ")", value.shape, it->second.shape);
    }
    Tensor& slot = out.mutable_at(name);
    for (std::size_t i = 0; i < slot.size(); ++i) slot.data[i] -= lr * it->second.data[i];
  }
  return out;
}

double max_relative_error(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) shape_error("max_relative_error", a.shape, b.shape);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::fabs(a.data[i]), std::fabs(b.data[i]), 1e-8});
    worst = std::max(worst, std::fabs(a.data[i] - b.data[i]) / denom);
  }
  return worst;
}

double max_relative_error(const GradMap& a, const GradMap& b) {
  double worst = 0.0;
  for (const auto& [name, ta] : a) {
    auto it = b.find(name);
    if (it == b.end()) throw std::invalid_argument("max_relative_error: '" + name + "' missing");
    worst = std::max(worst, max_relative_error(ta, it->second));
  }
  return worst;
}

}  // namespace mcn
