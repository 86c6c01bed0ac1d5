// seqrep/graph.h

// Copyright 2026  seqrep authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SEQREP_GRAPH_H_
#define SEQREP_GRAPH_H_

// Reverse-mode differentiation on a tape.
//
// A Graph records nodes in creation order, which is a topological order of
// the computation.  Backward() walks the tape once in reverse, calling each
// node's backward function, which accumulates (sums) into its parents'
// gradient buffers.  Gradients are only materialised for nodes that depend on
// a requires-grad leaf.
//
// A Graph is single-threaded.  Distinct graphs share no mutable state except
// the Parameter objects they reference, whose gradients are only written by
// Backward(); callers running graphs on several threads must give each graph
// its own gradient sink (see Graph::set_accumulate_param_grads).

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqrep/tensor.h"

namespace seqrep {

/// A named trainable tensor that outlives graphs.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // same shape as value; accumulated by Graph::Backward

  void ZeroGrad() {
    if (!grad.SameShape(value)) grad = Tensor(value.rows(), value.cols());
    else grad.Fill(0.0);
  }
};

class Graph;

/// Handle to a node of a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph *graph, int32_t id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr; }
  Graph &graph() const { return *graph_; }
  int32_t id() const { return id_; }
  const Tensor &value() const;
  int64_t rows() const { return value().rows(); }
  int64_t cols() const { return value().cols(); }

 private:
  Graph *graph_ = nullptr;
  int32_t id_ = -1;
};

/// Backward function of a node: reads graph.grad(self) and accumulates
/// into the gradients of the node's parents.
using BackwardFn = std::function<void(Graph &graph, int32_t self)>;

/// Gradients of requires-grad leaves, keyed by node id.
class GradientMap {
 public:
  const Tensor &at(const Var &v) const;
  bool contains(const Var &v) const { return grads_.count(v.id()) > 0; }
  size_t size() const { return grads_.size(); }
  std::map<int32_t, Tensor> &raw() { return grads_; }

 private:
  std::map<int32_t, Tensor> grads_;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph &) = delete;
  Graph &operator=(const Graph &) = delete;

  /// Leaf without gradient.
  Var Constant(Tensor value, std::string name = "constant");
  /// Leaf that receives a gradient.
  Var Input(Tensor value, std::string name = "input");
  /// Leaf bound to a Parameter; repeated calls return the same node.
  Var Param(Parameter *p);

  /// Records an op node.  requires_grad is inherited from the parents; the
  /// backward function is dropped when no parent requires a gradient.
  /// Throws NumericalError if value has a non-finite entry.
  Var Record(const char *op, Tensor value, std::vector<int32_t> parents, BackwardFn backward);

  /// Runs the reverse sweep from a 1 x 1 loss.  Parameter gradients are
  /// accumulated into Parameter::grad when enabled (default).
  GradientMap Backward(const Var &loss);

  const Tensor &value(int32_t id) const { return nodes_[id].value; }
  bool requires_grad(int32_t id) const { return nodes_[id].requires_grad; }
  const std::string &op(int32_t id) const { return nodes_[id].op; }
  const std::vector<int32_t> &parents(int32_t id) const { return nodes_[id].parents; }

  /// Gradient buffer of a node, allocated as zeros on first use.
  Tensor &grad(int32_t id);
  /// Gradient buffer of a parent, or nullptr if it needs no gradient.
  Tensor *grad_if_needed(int32_t id) { return requires_grad(id) ? &grad(id) : nullptr; }
  bool has_grad(int32_t id) const { return !nodes_[id].grad.empty() || nodes_[id].value.empty(); }

  size_t size() const { return nodes_.size(); }
  void set_accumulate_param_grads(bool on) { accumulate_param_grads_ = on; }
  /// Parameters referenced by this graph, in first-use order.
  std::vector<Parameter *> params() const;

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    std::vector<int32_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
    Parameter *param = nullptr;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter *, int32_t> param_nodes_;
  bool accumulate_param_grads_ = true;
};

}  // namespace seqrep

#endif  // SEQREP_GRAPH_H_
