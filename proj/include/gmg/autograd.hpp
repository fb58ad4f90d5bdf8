#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gmg/tensor.hpp"

namespace gmg {

/// A named trainable tensor plus its accumulated gradient.
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  std::size_t size() const { return value.size(); }
  void zero_grad() { grad.fill(T(0)); }
};

/// Owns parameters with stable addresses, in registration order.
template <class T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string name, Shape shape, T fill = T(0)) {
    for (const auto& p : items_)
      detail::require(p->name != name, "duplicate parameter name " + name);
    items_.push_back(std::make_unique<Parameter<T>>(std::move(name), Tensor<T>(std::move(shape), fill)));
    return *items_.back();
  }

  std::size_t count() const { return items_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *items_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *items_[i]; }

  Parameter<T>* find(const std::string& name) {
    for (auto& p : items_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& p : items_) n += p->size();
    return n;
  }

  /// Sum of parameter sizes whose name starts with `prefix` or contains `"." + tag + "."`.
  std::size_t size_matching(const std::string& tag) const {
    std::size_t n = 0;
    for (const auto& p : items_)
      if (p->name.find("." + tag + ".") != std::string::npos || p->name.rfind(tag + ".", 0) == 0)
        n += p->size();
    return n;
  }

  void zero_grad() {
    for (auto& p : items_) p->zero_grad();
  }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> items_;
};

template <class T>
class Graph;

/// Handle to a node in a Graph.
template <class T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* g, std::size_t id) : graph_(g), id_(id) {}

  Graph<T>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }
  const Tensor<T>& value() const { return graph_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  int dim(int i) const { return value().dim(i); }
  bool requires_grad() const { return graph_->requires_grad(id_); }

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so walking the
/// tape backwards visits every node after all of its consumers.
template <class T>
class Graph {
 public:
  using Backward = std::function<void(Graph&, const Tensor<T>& grad_out)>;

  Graph() { scopes_.emplace_back(""); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> v) {
    Node& n = nodes_.emplace_back();
    n.owned_value = std::move(v);
    n.value = &n.owned_value;
    n.op = "input";
    n.scope = current_scope_;
    return Var<T>(this, nodes_.size() - 1);
  }

  /// Leaf bound to a parameter; gradients accumulate into `p.grad`.
  Var<T> param(Parameter<T>& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var<T>(this, it->second);
    Node& n = nodes_.emplace_back();
    n.value = &p.value;
    n.grad = &p.grad;
    n.requires_grad = track_params_;
    n.op = "param";
    n.param_name = p.name;
    n.scope = current_scope_;
    param_nodes_.emplace(&p, nodes_.size() - 1);
    return Var<T>(this, nodes_.size() - 1);
  }

  /// Records an op result. `backward` runs only when some parent needs gradients.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents, Backward backward, const char* op) {
    return record_impl(std::move(value), parents.begin(), parents.end(), std::move(backward), op);
  }
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& parents, Backward backward, const char* op) {
    return record_impl(std::move(value), parents.begin(), parents.end(), std::move(backward), op);
  }

  /// Id the next recorded node will receive; lets a backward closure read its own output.
  std::size_t next_id() const { return nodes_.size(); }

  const Tensor<T>& value(std::size_t id) const { return *nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer for a node, zero-initialized on first access.
  Tensor<T>& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.grad) {
      n.owned_grad = Tensor<T>(n.value->shape());
      n.grad = &n.owned_grad;
    }
    return *n.grad;
  }
  Tensor<T>& grad(const Var<T>& v) { return grad(v.id()); }

  /// Backpropagates from a scalar (single-element) node with seed 1.
  void backward(const Var<T>& loss) {
    detail::require(loss.value().size() == 1, "backward expects a scalar loss");
    if (!requires_grad(loss.id())) return;
    grad(loss.id())[0] += T(1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || !n.grad) continue;
      n.backward(*this, *n.grad);
      // Intermediate gradients are no longer needed once propagated.
      n.owned_grad = Tensor<T>();
      n.grad = nullptr;
    }
  }

  /// Multiply-add counter per scope, filled by ops that call add_flops().
  void add_flops(double flops) { flops_[scopes_[current_scope_]] += flops; }
  const std::unordered_map<std::string, double>& flops() const { return flops_; }

  /// RAII scope label used for diagnostics and per-module cost accounting.
  class Scope {
   public:
    Scope(Graph& g, const std::string& name) : g_(g), prev_(g.current_scope_) {
      const std::string& parent = g.scopes_[prev_];
      g.scopes_.push_back(parent.empty() ? name : parent + "/" + name);
      g.current_scope_ = g.scopes_.size() - 1;
    }
    ~Scope() { g_.current_scope_ = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Graph& g_;
    std::size_t prev_;
  };
  Scope scope(const std::string& name) { return Scope(*this, name); }

  /// Describes the first node (in evaluation order) holding a non-finite value.
  std::string first_non_finite() const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      if (!n.value->all_finite()) {
        std::string s = "node #" + std::to_string(i) + " op=" + n.op;
        if (!n.param_name.empty()) s += " param=" + n.param_name;
        const std::string& sc = scopes_[n.scope];
        if (!sc.empty()) s += " scope=" + sc;
        s += " shape=" + shape_str(n.value->shape());
        return s;
      }
    }
    return "";
  }

  std::size_t size() const { return nodes_.size(); }

  /// When false, parameter leaves do not request gradients (pure inference).
  void set_track_params(bool on) { track_params_ = on; }

 private:
  template <class It>
  Var<T> record_impl(Tensor<T> value, It first, It last, Backward backward, const char* op) {
    bool needs = false;
    for (It p = first; p != last; ++p) needs = needs || nodes_[p->id()].requires_grad;
    Node& n = nodes_.emplace_back();
    n.owned_value = std::move(value);
    n.value = &n.owned_value;
    n.op = op;
    n.scope = current_scope_;
    n.requires_grad = needs;
    if (needs) n.backward = std::move(backward);
    return Var<T>(this, nodes_.size() - 1);
  }

  struct Node {
    Tensor<T> owned_value;
    const Tensor<T>* value = nullptr;
    Tensor<T> owned_grad;
    Tensor<T>* grad = nullptr;
    Backward backward;
    bool requires_grad = false;
    const char* op = "";
    std::string param_name;
    std::size_t scope = 0;
  };

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> param_nodes_;
  std::vector<std::string> scopes_;
  std::size_t current_scope_ = 0;
  std::unordered_map<std::string, double> flops_;
  bool track_params_ = true;
};

}  // namespace gmg
