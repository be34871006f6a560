#ifndef MCN_AUTODIFF_H_
#define MCN_AUTODIFF_H_

// Define-by-run reverse-mode differentiation over dense double arrays.
//
// Every op builds a fresh node holding its value and a closure that pushes
// the node's gradient into its parents. Graphs are rebuilt on every forward
// pass; nothing is cached between iterations.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mcn/tensor.h"

namespace mcn {

namespace detail {
struct Node;
}

// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const;
  double item() const;  // value of a single-element node
  bool requires_grad() const;
  const std::string& op() const;
  bool valid() const { return node_ != nullptr; }

  // Gradient accumulated by the last backward() through this node; zeros if
  // the node was not reached.
  Tensor grad() const;

 private:
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend struct detail::Node;
  friend Var make_node(Tensor value, std::vector<Var> parents, std::string op,
                       std::function<void(detail::Node&)> backward);
  friend void backward(const Var& loss);
  friend detail::Node& node_of(const Var& v);
};

namespace detail {
struct Node {
  Tensor value;
  Tensor grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  std::string op;
  std::uint64_t id = 0;
  bool requires_grad = false;

  Tensor& parent_grad(std::size_t i);
};
}  // namespace detail

Var make_node(Tensor value, std::vector<Var> parents, std::string op,
              std::function<void(detail::Node&)> backward);
detail::Node& node_of(const Var& v);

Var constant(Tensor value);
Var leaf(Tensor value);  // differentiable input

// --- op catalog -----------------------------------------------------------

Var matmul(const Var& a, const Var& b);  // [n,k] x [k,m]
Var transpose(const Var& a);             // rank-2
Var add(const Var& a, const Var& b);     // identical shapes
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_row(const Var& a, const Var& row);  // [n,m] + broadcast [m] or [1,m]
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var abs(const Var& a);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var clamp(const Var& a, double lo, double hi);
Var sum(const Var& a);   // -> scalar
Var mean(const Var& a);  // -> scalar
Var sum_axis(const Var& a, int axis);       // rank-2 -> rank-1
Var mean_groups(const Var& a, std::size_t group);  // [n*g,m] -> [n,m]
Var concat_cols(std::span<const Var> parts);       // along the feature axis
Var concat_rows(std::span<const Var> parts);
Var slice_row(const Var& a, std::size_t r);        // [n,m] -> [1,m]
Var reshape(const Var& a, Shape shape);
// Along the feature axis. Zero rows are rejected unless `canonical_on_zero`,
// in which case they map to the constant unit vector (1,..,1)/sqrt(m) with no
// gradient.
Var l2_normalize_rows(const Var& a, bool canonical_on_zero = false);
Var logsumexp(const Var& a, int axis);             // rank-2 -> rank-1

// Recomputes gradients of every node reachable from `loss`. `loss` must hold
// a single element.
void backward(const Var& loss);

// --- parameters -------------------------------------------------------------

using GradMap = std::map<std::string, Tensor>;

// Leaf nodes bound to a ParamSet for one forward pass.
class BoundParams {
 public:
  const Var& operator[](const std::string& name) const;
  bool contains(const std::string& name) const { return vars_.count(name) > 0; }
  const std::map<std::string, Var>& vars() const { return vars_; }

 private:
  std::map<std::string, Var> vars_;
  friend class ParamSet;
};

// Named trainable arrays. The name set is fixed once built; updates replace
// values only.
class ParamSet {
 public:
  void add(const std::string& name, Tensor value);
  const Tensor& at(const std::string& name) const;
  Tensor& mutable_at(const std::string& name);
  void set(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  std::vector<std::string> names() const;
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  const std::map<std::string, Tensor>& entries() const { return entries_; }

  BoundParams bind() const;

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::map<std::string, Tensor> entries_;
};

// Gradient of `loss` w.r.t. every bound parameter. Unreached parameters get
// zeros.
GradMap backward(const Var& loss, const BoundParams& params);

// Central differences (f(p+eps) - f(p-eps)) / 2eps for each scalar entry.
GradMap numeric_grad(const std::function<double(const ParamSet&)>& f,
                     const ParamSet& params, double eps = 1e-5);

// p - lr * g for every entry; returns a new set.
ParamSet sgd_step(const ParamSet& params, const GradMap& grads, double lr);

// |a-b| / max(|a|, |b|, 1e-8), maximised over all entries.
double max_relative_error(const GradMap& a, const GradMap& b);
double max_relative_error(const Tensor& a, const Tensor& b);

}  // namespace mcn

#endif  // MCN_AUTODIFF_H_
