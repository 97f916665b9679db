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

#include <cmath>
#include <vector>

#include "partgen/nn/tensor.hpp"

namespace partgen::nn {

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double grad_clip = 1.0;  // global-norm clip; <= 0 disables
};

/// AdamW over a fixed parameter list. Updates are a pure function of the
/// gradients, so training is reproducible for a fixed data order.
template <class T>
class AdamW {
 public:
  AdamW(std::vector<Param<T>*> params, AdamWOptions opts) : params_(std::move(params)), opts_(opts) {
    for (Param<T>* p : params_) {
      m_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zero_grad() {
    for (Param<T>* p : params_) p->zero_grad();
  }

  void set_lr(double lr) { opts_.lr = lr; }
  double lr() const { return opts_.lr; }
  long steps() const { return step_; }

  /// Applies one update and returns the pre-clip gradient norm.
  double step() {
    ++step_;
    double norm_sq = 0.0;
    for (Param<T>* p : params_) {
      if (p->trainable && p->grad.size() != 0) norm_sq += static_cast<double>(p->grad.squaredNorm());
    }
    const double norm = std::sqrt(norm_sq);
    const double clip = (opts_.grad_clip > 0 && norm > opts_.grad_clip) ? opts_.grad_clip / norm : 1.0;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param<T>& p = *params_[i];
      if (!p.trainable || p.grad.size() == 0) continue;
      const T b1 = static_cast<T>(opts_.beta1);
      const T b2 = static_cast<T>(opts_.beta2);
      const auto g = p.grad.array() * static_cast<T>(clip);
      m_[i].array() = b1 * m_[i].array() + (T(1) - b1) * g;
      v_[i].array() = b2 * v_[i].array() + (T(1) - b2) * g.square();
      if (opts_.weight_decay > 0) p.value *= static_cast<T>(1.0 - opts_.lr * opts_.weight_decay);
      p.value.array() -= static_cast<T>(opts_.lr) * (m_[i].array() / static_cast<T>(bc1)) /
                         ((v_[i].array() / static_cast<T>(bc2)).sqrt() + static_cast<T>(opts_.eps));
    }
    return norm;
  }

 private:
  std::vector<Param<T>*> params_;
  std::vector<Mat<T>> m_;
  std::vector<Mat<T>> v_;
  AdamWOptions opts_;
  long step_ = 0;
};

}  // namespace partgen::nn
