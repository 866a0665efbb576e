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

#ifndef MAMLST_GRAPH_H_
#define MAMLST_GRAPH_H_

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mamlst/tensor.h"

namespace mamlst {

template <typename T>
class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
struct Var {
  Graph<T> *graph = nullptr;
  int id = -1;

  const Tensor<T> &value() const { return graph->value(*this); }
  const Shape &shape() const { return graph->value(*this).shape(); }
  bool requires_grad() const { return graph->requires_grad(*this); }
};

// Tape of executed primitives. Nodes are appended in execution order, so the
// node vector is already a topological order and backward is one reverse
// sweep.
//
// Parameters enter through a bound ParamMap: param(name) copies the named
// tensor into a leaf node the first time it is requested. Parameters that are
// never requested do not appear in the gradient map at all; requested but
// unreachable ones get an all-zero gradient.
template <typename T>
class Graph {
 public:
  // Receives the node's output gradient and accumulates into its inputs.
  using BackwardFn = std::function<void(Graph &, const Tensor<T> &)>;

  // With track_gradients=false no backward closures are recorded.
  explicit Graph(bool track_gradients = true)
      : track_gradients_(track_gradients) {}

  Graph(const Graph &) = delete;
  Graph &operator=(const Graph &) = delete;

  void Bind(const ParamMap<T> *params) { params_ = params; }
  bool tracking() const { return track_gradients_; }

  Var<T> Constant(Tensor<T> value);
  Var<T> Leaf(Tensor<T> value, std::string name);
  Var<T> Param(const std::string &name);
  bool HasParam(const std::string &name) const {
    return param_ids_.count(name) > 0;
  }

  // Appends an op result; the closure is dropped when no input needs grad.
  Var<T> Record(Tensor<T> value, const std::vector<Var<T>> &inputs,
                BackwardFn backward);

  const Tensor<T> &value(Var<T> v) const { return nodes_[v.id].value; }
  bool requires_grad(Var<T> v) const { return nodes_[v.id].requires_grad; }

  // Gradient slot of v, zero-allocated on first use.
  Tensor<T> &grad(Var<T> v);
  bool has_grad(Var<T> v) const { return !nodes_[v.id].grad.empty(); }

  // Runs reverse accumulation from a scalar loss. Gradients are zeroed first,
  // so calling twice yields the same result. Returns one entry per requested
  // parameter, plus every Leaf with a name.
  GradMap<T> Backward(Var<T> loss);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::string name;
    BackwardFn backward;
  };

  bool track_gradients_;
  const ParamMap<T> *params_ = nullptr;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> param_ids_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace mamlst

#endif  // MAMLST_GRAPH_H_
