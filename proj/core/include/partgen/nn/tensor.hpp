// Copyright 2026 The PartGen Authors
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

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace partgen::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A named trainable tensor (always 2-d; vectors are 1 x n).
template <class T>
struct Param {
  std::string name;
  Mat<T> value;
  Mat<T> grad;
  bool trainable = true;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Handle to a node of a Graph.
struct Var {
  int id = -1;
};

/// Query rows [q_begin, q_end) attend to key rows [k_begin, k_end).
struct Segment {
  int q_begin = 0;
  int q_end = 0;
  int k_begin = 0;
  int k_end = 0;
};

/// Reverse-mode tape. A Graph built with record=false keeps only values and
/// is what sampling uses.
template <class T>
class Graph {
 public:
  using Backward = std::function<void(Graph&, int)>;

  explicit Graph(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Var constant(Mat<T> value);
  Var param(Param<T>& p);
  Var make(Mat<T> value, std::initializer_list<Var> inputs, Backward backward);

  const Mat<T>& value(Var v) const { return nodes_[v.id].value; }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  /// Gradient buffer, zero-initialized on first access.
  Mat<T>& grad(Var v);
  bool has_grad(Var v) const { return nodes_[v.id].grad.size() != 0; }

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and accumulates into Param::grad.
  void backward(Var out);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat<T> value;
    Mat<T> grad;
    Backward backward;
    Param<T>* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  bool record_;
};

template <class T> Var matmul(Graph<T>& g, Var a, Var b);
/// x * W + b with W (in x out) and b (1 x out).
template <class T> Var linear(Graph<T>& g, Var x, Var w, Var b);
template <class T> Var add(Graph<T>& g, Var a, Var b);
/// Adds a 1 x D row to every row of x.
template <class T> Var add_row(Graph<T>& g, Var x, Var row);
template <class T> Var scale(Graph<T>& g, Var x, T s);
template <class T> Var layer_norm(Graph<T>& g, Var x, Var gamma, Var beta, T eps = T(1e-5));
/// tanh-approximated GELU.
template <class T> Var gelu(Graph<T>& g, Var x);
template <class T> Var silu(Graph<T>& g, Var x);

/// Multi-head softmax attention restricted to the given segments. q is
/// n x D, k and v are m x D, D divisible by `heads`. Query rows outside every
/// segment produce zeros.
template <class T>
Var attention(Graph<T>& g, Var q, Var k, Var v, int heads, const std::vector<Segment>& segments);

/// Row i of the result is the sum of table rows indices[i*per_row .. (i+1)*per_row).
template <class T>
Var gather_sum(Graph<T>& g, Var table, std::shared_ptr<const std::vector<int32_t>> indices, int per_row);

/// Row-weighted mean squared error; weights are typically 0/1 slot masks.
/// Returns a 1x1 node: sum_i w_i * sum_c (p - t)^2 / (C * sum_i w_i).
template <class T>
Var masked_mse(Graph<T>& g, Var pred, const Mat<T>& target, const std::vector<T>& row_weights);

}  // namespace partgen::nn
