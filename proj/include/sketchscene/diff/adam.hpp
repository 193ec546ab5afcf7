// Copyright 2026 The sketchscene Authors
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
#include <cstdint>
#include <vector>

#include "sketchscene/diff/tape.hpp"

namespace sks::diff {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-9;
};

// Bias-corrected Adam over a fixed list of parameters.
template <class T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamOptions options) : params_(std::move(params)), options_(options) {
    for (const auto* p : params_) {
      first_.emplace_back(p->size(), T(0));
      second_.emplace_back(p->size(), T(0));
    }
  }

  // Applies one update from the parameters' accumulated gradients and
  // clears them. A non-finite gradient skips the update (the step counter
  // still advances) and returns false.
  bool step() {
    ++step_;
    for (const auto* p : params_) {
      for (T g : p->grad) {
        if (!std::isfinite(static_cast<double>(g))) {
          warn("adam: non-finite gradient in '" + p->name + "' at step " + std::to_string(step_) + "; update skipped");
          zero_grad();
          return false;
        }
      }
    }
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    const T lr = static_cast<T>(options_.learning_rate);
    const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);
    const T inv_c1 = static_cast<T>(1.0 / c1), inv_c2 = static_cast<T>(1.0 / c2);
    const T eps = static_cast<T>(options_.epsilon);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Parameter<T>& p = *params_[k];
      T* m = first_[k].data();
      T* v = second_[k].data();
      T* w = p.value.data();
      const T* g = p.grad.data();
      const std::size_t n = p.size();
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = tb1 * m[i] + (T(1) - tb1) * g[i];
        v[i] = tb2 * v[i] + (T(1) - tb2) * g[i] * g[i];
        w[i] -= lr * (m[i] * inv_c1) / (std::sqrt(v[i] * inv_c2) + eps);
      }
    }
    zero_grad();
    return true;
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  std::int64_t steps() const { return step_; }
  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  const std::vector<Parameter<T>*>& params() const { return params_; }
  const std::vector<T>& first_moment(std::size_t k) const { return first_.at(k); }
  const std::vector<T>& second_moment(std::size_t k) const { return second_.at(k); }

 private:
  std::vector<Parameter<T>*> params_;
  AdamOptions options_;
  std::vector<std::vector<T>> first_;
  std::vector<std::vector<T>> second_;
  std::int64_t step_ = 0;
};

}  // namespace sks::diff
