// Copyright 2026 The mamlst Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mamlst/graph.h"

#include <cassert>
#include <sstream>

namespace mamlst {

std::string ShapeString(const Shape &shape) {
  std::ostringstream out;
  out << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << "x";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

int64_t ShapeSize(const Shape &shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

template <typename T>
Var<T> Graph<T>::Constant(Tensor<T> value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var<T> Graph<T>::Leaf(Tensor<T> value, std::string name) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = track_gradients_;
  node.name = std::move(name);
  nodes_.push_back(std::move(node));
  int id = static_cast<int>(nodes_.size()) - 1;
  if (!nodes_[id].name.empty()) param_ids_[nodes_[id].name] = id;
  return Var<T>{this, id};
}

template <typename T>
Var<T> Graph<T>::Param(const std::string &name) {
  auto it = param_ids_.find(name);
  if (it != param_ids_.end()) return Var<T>{this, it->second};
  if (params_ == nullptr) {
    throw ContractError("graph has no bound parameters; asked for " + name);
  }
  auto p = params_->find(name);
  if (p == params_->end()) throw ContractError("unknown parameter " + name);
  return Leaf(p->second, name);
}

template <typename T>
Var<T> Graph<T>::Record(Tensor<T> value, const std::vector<Var<T>> &inputs,
                        BackwardFn backward) {
  bool needs = false;
  if (track_gradients_) {
    for (const Var<T> &in : inputs) {
      assert(in.graph == this);
      needs = needs || nodes_[in.id].requires_grad;
    }
  }
  assert(value.AllFinite());
  Node node;
  node.value = std::move(value);
  node.requires_grad = needs;
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Tensor<T> &Graph<T>::grad(Var<T> v) {
  Node &node = nodes_[v.id];
  if (node.grad.empty()) node.grad = Tensor<T>(node.value.shape());
  return node.grad;
}

template <typename T>
GradMap<T> Graph<T>::Backward(Var<T> loss) {
  if (loss.graph != this) throw ContractError("loss belongs to another graph");
  const Tensor<T> &lv = nodes_[loss.id].value;
  if (lv.size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        ShapeString(lv.shape()));
  }
  for (Node &node : nodes_) node.grad = Tensor<T>();
  if (nodes_[loss.id].requires_grad) {
    grad(loss).Fill(T(1));
    for (int i = loss.id; i >= 0; --i) {
      Node &node = nodes_[i];
      if (!node.backward || node.grad.empty()) continue;
      node.backward(*this, node.grad);
    }
  }
  GradMap<T> out;
  for (const auto &[name, id] : param_ids_) {
    Node &node = nodes_[id];
    Tensor<T> g = node.grad.empty() ? Tensor<T>(node.value.shape())
                                    : node.grad;
    if (!g.AllFinite()) {
      throw NumericError("non-finite gradient for parameter " + name);
    }
    out.emplace(name, std::move(g));
  }
  return out;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace mamlst
