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

// Central-difference validation of backward rules.

#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sketchscene/diff/tape.hpp"

namespace sks::diff {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  bool finite = true;
  std::optional<std::size_t> non_finite_index;  // first component whose evaluation was not finite
  std::vector<double> analytic;
  std::vector<double> numeric;

  bool passed(double tolerance) const { return finite && max_relative_error < tolerance; }
};

template <class T>
using ScalarGraph = std::function<Var<T>(Tape<T>&, Var<T>)>;

namespace detail {

inline void check_step(double h) {
  if (!(h >= 1e-4 && h <= 1e-2)) throw Error("grad_check: step " + std::to_string(h) + " outside [1e-4, 1e-2]");
}

inline void accumulate(GradCheckResult& r) {
  for (std::size_t i = 0; i < r.analytic.size(); ++i) {
    const double err = std::abs(r.analytic[i] - r.numeric[i]) / std::max(1.0, std::abs(r.numeric[i]));
    if (!std::isfinite(r.analytic[i]) || !std::isfinite(r.numeric[i])) {
      r.finite = false;
      if (!r.non_finite_index) r.non_finite_index = i;
      continue;
    }
    if (err > r.max_relative_error) {
      r.max_relative_error = err;
      r.worst_index = i;
    }
  }
}

}  // namespace detail

// Compares d f / d x from backward() against central differences with step h.
// Error per component is |analytic - numeric| / max(1, |numeric|).
template <class T>
GradCheckResult grad_check(const ScalarGraph<T>& f, const Shape& shape, const std::vector<T>& x, double h) {
  detail::check_step(h);
  GradCheckResult result;
  auto eval = [&](const std::vector<T>& point) {
    Tape<T> tape;
    Var<T> out = f(tape, tape.constant(shape, point));
    return static_cast<double>(out.item());
  };
  {
    Tape<T> tape;
    Var<T> in = tape.variable(shape, x);
    Var<T> out = f(tape, in);
    tape.backward(out);
    for (T g : in.grad()) result.analytic.push_back(static_cast<double>(g));
  }
  std::vector<T> point = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    point[i] = static_cast<T>(static_cast<double>(x[i]) + h);
    const double up = eval(point);
    point[i] = static_cast<T>(static_cast<double>(x[i]) - h);
    const double down = eval(point);
    point[i] = x[i];
    result.numeric.push_back((up - down) / (2.0 * h));
  }
  detail::accumulate(result);
  return result;
}

// Same check with respect to a parameter that f reads through tape.param().
template <class T>
GradCheckResult grad_check_parameter(const std::function<Var<T>(Tape<T>&)>& f, Parameter<T>& p, double h) {
  detail::check_step(h);
  GradCheckResult result;
  const std::vector<T> saved_grad = p.grad;
  p.zero_grad();
  {
    Tape<T> tape;
    Var<T> out = f(tape);
    tape.backward(out);
    for (T g : p.grad) result.analytic.push_back(static_cast<double>(g));
  }
  p.grad = saved_grad;
  auto eval = [&] {
    Tape<T> tape;
    return static_cast<double>(f(tape).item());
  };
  for (std::size_t i = 0; i < p.size(); ++i) {
    const T orig = p.value[i];
    p.value[i] = static_cast<T>(static_cast<double>(orig) + h);
    const double up = eval();
    p.value[i] = static_cast<T>(static_cast<double>(orig) - h);
    const double down = eval();
    p.value[i] = orig;
    result.numeric.push_back((up - down) / (2.0 * h));
  }
  detail::accumulate(result);
  return result;
}

}  // namespace sks::diff
