// core/src/graph.cc

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

#include "seqrep/graph.h"

#include "seqrep/error.h"

namespace seqrep {

const Tensor &Var::value() const { return graph_->value(id_); }

const Tensor &GradientMap::at(const Var &v) const {
  auto it = grads_.find(v.id());
  if (it == grads_.end())
    throw Error("no gradient recorded for node " + std::to_string(v.id()));
  return it->second;
}

Var Graph::Constant(Tensor value, std::string name) {
  Node n;
  n.op = std::move(name);
  n.value = std::move(value);
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int32_t>(nodes_.size() - 1));
}

Var Graph::Input(Tensor value, std::string name) {
  Node n;
  n.op = std::move(name);
  n.value = std::move(value);
  n.is_leaf = true;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int32_t>(nodes_.size() - 1));
}

Var Graph::Param(Parameter *p) {
  auto it = param_nodes_.find(p);
  if (it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.op = "param:" + p->name;
  n.value = p->value;
  n.is_leaf = true;
  n.requires_grad = true;
  n.param = p;
  nodes_.push_back(std::move(n));
  const auto id = static_cast<int32_t>(nodes_.size() - 1);
  param_nodes_.emplace(p, id);
  return Var(this, id);
}

Var Graph::Record(const char *op, Tensor value, std::vector<int32_t> parents,
                  BackwardFn backward) {
  const auto id = static_cast<int32_t>(nodes_.size());
  if (!value.AllFinite())
    throw NumericalError(std::string("non-finite value produced by op '") + op + "' (node " +
                         std::to_string(id) + ")");
  Node n;
  n.op = op;
  n.value = std::move(value);
  for (int32_t p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, id);
}

Tensor &Graph::grad(int32_t id) {
  Node &n = nodes_[id];
  if (!n.grad.SameShape(n.value)) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

std::vector<Parameter *> Graph::params() const {
  std::vector<Parameter *> out;
  for (const Node &n : nodes_)
    if (n.param != nullptr) out.push_back(n.param);
  return out;
}

GradientMap Graph::Backward(const Var &loss) {
  if (&loss.graph() != this) throw Error("Backward: loss belongs to another graph");
  const Tensor &lv = value(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1)
    throw ShapeError("Backward: loss must be scalar, got " + lv.ShapeString());
  if (!lv.AllFinite()) throw NumericalError("Backward: loss is not finite");

  for (Node &n : nodes_) n.grad = Tensor();
  GradientMap out;
  if (!nodes_[loss.id()].requires_grad) return out;
  grad(loss.id()).Fill(1.0);

  for (int32_t id = loss.id(); id >= 0; --id) {
    Node &n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (!n.grad.AllFinite())
      throw NumericalError("non-finite gradient flowing into op '" + n.op + "' (node " +
                           std::to_string(id) + ")");
    if (n.is_leaf) {
      if (n.param != nullptr && accumulate_param_grads_) {
        if (!n.param->grad.SameShape(n.param->value)) n.param->ZeroGrad();
        n.param->grad.AddScaled(n.grad);
      }
      out.raw().emplace(id, n.grad);
      continue;
    }
    if (n.backward) n.backward(*this, id);
  }
  // Leaves the loss does not depend on still get an (all-zero) entry.
  for (int32_t id = 0; id <= loss.id(); ++id) {
    const Node &n = nodes_[id];
    if (n.is_leaf && n.requires_grad && !out.raw().count(id))
      out.raw().emplace(id, Tensor(n.value.rows(), n.value.cols()));
  }
  return out;
}

}  // namespace seqrep
