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

#include "partgen/nn/tensor.hpp"

#include <cmath>

#include "partgen/error.hpp"

namespace partgen::nn {

template <class T>
Var Graph<T>::constant(Mat<T> value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Var Graph<T>::param(Param<T>& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.needs_grad = record_ && p.trainable;
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Var Graph<T>::make(Mat<T> value, std::initializer_list<Var> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (Var in : inputs) n.needs_grad = n.needs_grad || nodes_[in.id].needs_grad;
    if (n.needs_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Mat<T>& Graph<T>::grad(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
  return n.grad;
}

template <class T>
void Graph<T>::backward(Var out) {
  if (!record_) throw Error(ErrorCode::kInvalidArgument, "backward on a non-recording graph");
  if (nodes_[out.id].value.size() != 1) {
    throw Error(ErrorCode::kInvalidArgument, "backward needs a scalar output");
  }
  grad(out).setOnes();
  for (int id = out.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) {
      if (n.param->grad.size() == 0) n.param->zero_grad();
      n.param->grad += n.grad;
    }
  }
}

template <class T>
Var matmul(Graph<T>& g, Var a, Var b) {
  Mat<T> out = g.value(a) * g.value(b);
  return g.make(std::move(out), {a, b}, [a, b](Graph<T>& gr, int self) {
    const Mat<T>& go = gr.grad(Var{self});
    if (gr.needs_grad(a)) gr.grad(a).noalias() += go * gr.value(b).transpose();
    if (gr.needs_grad(b)) gr.grad(b).noalias() += gr.value(a).transpose() * go;
  });
}

template <class T>
Var linear(Graph<T>& g, Var x, Var w, Var b) {
  Mat<T> out = g.value(x) * g.value(w);
  out.rowwise() += g.value(b).row(0);
  return g.make(std::move(out), {x, w, b}, [x, w, b](Graph<T>& gr, int self) {
    const Mat<T>& go = gr.grad(Var{self});
    if (gr.needs_grad(x)) gr.grad(x).noalias() += go * gr.value(w).transpose();
    if (gr.needs_grad(w)) gr.grad(w).noalias() += gr.value(x).transpose() * go;
    if (gr.needs_grad(b)) gr.grad(b).row(0) += go.colwise().sum();
  });
}

template <class T>
Var add(Graph<T>& g, Var a, Var b) {
  Mat<T> out = g.value(a) + g.value(b);
  return g.make(std::move(out), {a, b}, [a, b](Graph<T>& gr, int self) {
    const Mat<T>& go = gr.grad(Var{self});
    if (gr.needs_grad(a)) gr.grad(a) += go;
    if (gr.needs_grad(b)) gr.grad(b) += go;
  });
}

template <class T>
Var add_row(Graph<T>& g, Var x, Var row) {
  Mat<T> out = g.value(x);
  out.rowwise() += g.value(row).row(0);
  return g.make(std::move(out), {x, row}, [x, row](Graph<T>& gr, int self) {
    const Mat<T>& go = gr.grad(Var{self});
    if (gr.needs_grad(x)) gr.grad(x) += go;
    if (gr.needs_grad(row)) gr.grad(row).row(0) += go.colwise().sum();
  });
}

template <class T>
Var scale(Graph<T>& g, Var x, T s) {
  Mat<T> out = g.value(x) * s;
  return g.make(std::move(out), {x}, [x, s](Graph<T>& gr, int self) {
    if (gr.needs_grad(x)) gr.grad(x) += gr.grad(Var{self}) * s;
  });
}

template <class T>
Var layer_norm(Graph<T>& g, Var x, Var gamma, Var beta, T eps) {
  const Mat<T>& xv = g.value(x);
  const Eigen::Index n = xv.rows();
  const Eigen::Index d = xv.cols();
  auto xhat = std::make_shared<Mat<T>>(n, d);
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mean = xv.row(i).mean();
    const T var = (xv.row(i).array() - mean).square().mean();
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(i)] = is;
    xhat->row(i) = (xv.row(i).array() - mean) * is;
  }
  Mat<T> out = xhat->array().rowwise() * g.value(gamma).row(0).array();
  out.rowwise() += g.value(beta).row(0);
  return g.make(std::move(out), {x, gamma, beta}, [x, gamma, beta, xhat, inv_std](Graph<T>& gr, int self) {
    const Mat<T>& go = gr.grad(Var{self});
    if (gr.needs_grad(gamma)) gr.grad(gamma).row(0) += (go.array() * xhat->array()).colwise().sum().matrix();
    if (gr.needs_grad(beta)) gr.grad(beta).row(0) += go.colwise().sum();
    if (gr.needs_grad(x)) {
      const Mat<T> dxhat = go.array().rowwise() * gr.value(gamma).row(0).array();
      Mat<T>& gx = gr.grad(x);
      for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
        const T m1 = dxhat.row(i).mean();
        const T m2 = (dxhat.row(i).array() * xhat->row(i).array()).mean();
        gx.row(i).array() +=
            (*inv_std)[static_cast<std::size_t>(i)] * (dxhat.row(i).array() - m1 - xhat->row(i).array() * m2);
      }
    }
  });
}

template <class T>
Var gelu(Graph<T>& g, Var x) {
  static constexpr T k0 = T(0.7978845608028654);  // sqrt(2/pi)
  static constexpr T k1 = T(0.044715);
  const Mat<T>& xv = g.value(x);
  Mat<T> out = (T(0.5) * xv.array() * (T(1) + (k0 * (xv.array() + k1 * xv.array().cube())).tanh())).matrix();
  return g.make(std::move(out), {x}, [x](Graph<T>& gr, int self) {
    if (!gr.needs_grad(x)) return;
    const auto xa = gr.value(x).array();
    const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> th = (k0 * (xa + k1 * xa.cube())).tanh();
    const auto dth = (T(1) - th.square()) * k0 * (T(1) + T(3) * k1 * xa.square());
    gr.grad(x).array() += gr.grad(Var{self}).array() * (T(0.5) * (T(1) + th) + T(0.5) * xa * dth);
  });
}

template <class T>
Var silu(Graph<T>& g, Var x) {
  const Mat<T>& xv = g.value(x);
  Mat<T> out = (xv.array() / (T(1) + (-xv.array()).exp())).matrix();
  return g.make(std::move(out), {x}, [x](Graph<T>& gr, int self) {
    if (!gr.needs_grad(x)) return;
    const auto xa = gr.value(x).array();
    const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> sig = T(1) / (T(1) + (-xa).exp());
    gr.grad(x).array() += gr.grad(Var{self}).array() * (sig * (T(1) + xa * (T(1) - sig)));
  });
}

template <class T>
Var attention(Graph<T>& g, Var q, Var k, Var v, int heads, const std::vector<Segment>& segments) {
  const Mat<T>& qv = g.value(q);
  const Mat<T>& kv = g.value(k);
  const Mat<T>& vv = g.value(v);
  const Eigen::Index d = qv.cols();
  if (heads <= 0 || d % heads != 0 || kv.cols() != d || vv.cols() != d || kv.rows() != vv.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "attention: inconsistent shapes");
  }
  const Eigen::Index hd = d / heads;
  const T sc = T(1) / std::sqrt(static_cast<T>(hd));
  Mat<T> out = Mat<T>::Zero(qv.rows(), d);
  auto probs = std::make_shared<std::vector<Mat<T>>>();
  const bool keep = g.recording();
  if (keep) probs->reserve(segments.size() * static_cast<std::size_t>(heads));
  for (const Segment& s : segments) {
    const Eigen::Index nq = s.q_end - s.q_begin;
    const Eigen::Index nk = s.k_end - s.k_begin;
    for (int h = 0; h < heads; ++h) {
      if (nq == 0 || nk == 0) {
        if (keep) probs->emplace_back();
        continue;
      }
      Mat<T> p = (qv.block(s.q_begin, h * hd, nq, hd) * kv.block(s.k_begin, h * hd, nk, hd).transpose()) * sc;
      for (Eigen::Index i = 0; i < nq; ++i) {
        const T mx = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - mx).exp();
        p.row(i) /= p.row(i).sum();
      }
      out.block(s.q_begin, h * hd, nq, hd).noalias() = p * vv.block(s.k_begin, h * hd, nk, hd);
      if (keep) probs->push_back(std::move(p));
    }
  }
  return g.make(std::move(out), {q, k, v}, [q, k, v, heads, segments, probs, hd, sc](Graph<T>& gr, int self) {
    const Mat<T>& go = gr.grad(Var{self});
    const Mat<T>& qv2 = gr.value(q);
    const Mat<T>& kv2 = gr.value(k);
    const Mat<T>& vv2 = gr.value(v);
    const bool gq = gr.needs_grad(q);
    const bool gk = gr.needs_grad(k);
    const bool gv = gr.needs_grad(v);
    std::size_t slot = 0;
    for (const Segment& s : segments) {
      const Eigen::Index nq = s.q_end - s.q_begin;
      const Eigen::Index nk = s.k_end - s.k_begin;
      for (int h = 0; h < heads; ++h, ++slot) {
        if (nq == 0 || nk == 0) continue;
        const Mat<T>& p = (*probs)[slot];
        const auto dout = go.block(s.q_begin, h * hd, nq, hd);
        if (gv) gr.grad(v).block(s.k_begin, h * hd, nk, hd).noalias() += p.transpose() * dout;
        if (!gq && !gk) continue;
        Mat<T> dp = dout * vv2.block(s.k_begin, h * hd, nk, hd).transpose();
        const Eigen::Matrix<T, Eigen::Dynamic, 1> rs = (dp.array() * p.array()).rowwise().sum();
        Mat<T> ds = (p.array() * (dp.array().colwise() - rs.array())).matrix() * sc;
        if (gq) gr.grad(q).block(s.q_begin, h * hd, nq, hd).noalias() += ds * kv2.block(s.k_begin, h * hd, nk, hd);
        if (gk) gr.grad(k).block(s.k_begin, h * hd, nk, hd).noalias() += ds.transpose() * qv2.block(s.q_begin, h * hd, nq, hd);
      }
    }
  });
}

template <class T>
Var gather_sum(Graph<T>& g, Var table, std::shared_ptr<const std::vector<int32_t>> indices, int per_row) {
  const Mat<T>& tv = g.value(table);
  const Eigen::Index rows = static_cast<Eigen::Index>(indices->size()) / per_row;
  Mat<T> out = Mat<T>::Zero(rows, tv.cols());
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (int j = 0; j < per_row; ++j) {
      const int32_t r = (*indices)[static_cast<std::size_t>(i * per_row + j)];
      if (r < 0 || r >= tv.rows()) throw Error(ErrorCode::kOutOfRange, "gather_sum: index out of range");
      out.row(i) += tv.row(r);
    }
  }
  return g.make(std::move(out), {table}, [table, indices, per_row](Graph<T>& gr, int self) {
    const Mat<T>& go = gr.grad(Var{self});
    Mat<T>& gt = gr.grad(table);
    for (Eigen::Index i = 0; i < go.rows(); ++i) {
      for (int j = 0; j < per_row; ++j) gt.row((*indices)[static_cast<std::size_t>(i * per_row + j)]) += go.row(i);
    }
  });
}

template <class T>
Var masked_mse(Graph<T>& g, Var pred, const Mat<T>& target, const std::vector<T>& row_weights) {
  const Mat<T>& pv = g.value(pred);
  if (pv.rows() != target.rows() || pv.cols() != target.cols() ||
      static_cast<std::size_t>(pv.rows()) != row_weights.size()) {
    throw Error(ErrorCode::kInvalidArgument, "masked_mse: shape mismatch");
  }
  T wsum = 0;
  for (T w : row_weights) wsum += w;
  const T denom = wsum * static_cast<T>(pv.cols());
  auto diff = std::make_shared<Mat<T>>(pv - target);
  T loss = 0;
  for (Eigen::Index i = 0; i < pv.rows(); ++i) {
    const T w = row_weights[static_cast<std::size_t>(i)];
    if (w != T(0)) loss += w * diff->row(i).squaredNorm();
  }
  Mat<T> out(1, 1);
  out(0, 0) = denom > 0 ? loss / denom : T(0);
  auto weights = std::make_shared<std::vector<T>>(row_weights);
  return g.make(std::move(out), {pred}, [pred, diff, weights, denom](Graph<T>& gr, int self) {
    if (denom <= 0) return;
    const T go = gr.grad(Var{self})(0, 0);
    Mat<T>& gp = gr.grad(pred);
    for (Eigen::Index i = 0; i < diff->rows(); ++i) {
      const T w = (*weights)[static_cast<std::size_t>(i)];
      if (w != T(0)) gp.row(i) += diff->row(i) * (T(2) * w * go / denom);
    }
  });
}

#define PARTGEN_INSTANTIATE(T)                                                                  \
  template class Graph<T>;                                                                      \
  template Var matmul<T>(Graph<T>&, Var, Var);                                                  \
  template Var linear<T>(Graph<T>&, Var, Var, Var);                                             \
  template Var add<T>(Graph<T>&, Var, Var);                                                     \
  template Var add_row<T>(Graph<T>&, Var, Var);                                                 \
  template Var scale<T>(Graph<T>&, Var, T);                                                     \
  template Var layer_norm<T>(Graph<T>&, Var, Var, Var, T);                                      \
  template Var gelu<T>(Graph<T>&, Var);                                                         \
  template Var silu<T>(Graph<T>&, Var);                                                         \
  template Var attention<T>(Graph<T>&, Var, Var, Var, int, const std::vector<Segment>&);        \
  template Var gather_sum<T>(Graph<T>&, Var, std::shared_ptr<const std::vector<int32_t>>, int); \
  template Var masked_mse<T>(Graph<T>&, Var, const Mat<T>&, const std::vector<T>&);

PARTGEN_INSTANTIATE(float)
PARTGEN_INSTANTIATE(double)

#undef PARTGEN_INSTANTIATE

}  // namespace partgen::nn
