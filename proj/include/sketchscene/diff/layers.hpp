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
#include <string>
#include <vector>

#include "sketchscene/diff/ops.hpp"

namespace sks::diff {

enum class Activation { kNone, kRelu, kLeakyRelu, kSigmoid, kTanh };

template <class T>
Var<T> activate(Var<T> x, Activation act) {
  switch (act) {
    case Activation::kNone:
      return x;
    case Activation::kRelu:
      return relu(x);
    case Activation::kLeakyRelu:
      return leaky_relu(x, T(0.2));
    case Activation::kSigmoid:
      return sigmoid(x);
    case Activation::kTanh:
      return tanh(x);
  }
  return x;
}

// Uniform Glorot init for weights, zero bias.
template <class T>
void init_glorot(Parameter<T>& w, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& x : w.value) x = static_cast<T>(rng.uniform(-bound, bound));
}

// Fully connected layer: weight [in, out], bias [out].
template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(ParameterSet<T>& params, const std::string& name, int in, int out, Rng& rng)
      : weight_(&params.add(name + ".w", {in, out})), bias_(&params.add(name + ".b", {out})), in_(in), out_(out) {
    init_glorot(*weight_, in, out, rng);
  }

  Var<T> operator()(Tape<T>& tape, Var<T> x, bool freeze = false) const {
    return linear(x, tape.param_or_frozen(*weight_, freeze), tape.param_or_frozen(*bias_, freeze));
  }

  int in() const { return in_; }
  int out() const { return out_; }
  Parameter<T>& weight() const { return *weight_; }
  Parameter<T>& bias() const { return *bias_; }

 private:
  Parameter<T>* weight_ = nullptr;
  Parameter<T>* bias_ = nullptr;
  int in_ = 0;
  int out_ = 0;
};

// Stack of Linear layers; `hidden` is applied after every layer but the
// last, `output` after the last.
template <class T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterSet<T>& params, const std::string& name, const std::vector<int>& widths, Activation hidden,
      Activation output, Rng& rng)
      : hidden_(hidden), output_(output) {
    if (widths.size() < 2) throw Error("Mlp '" + name + "' needs at least two widths");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
      layers_.emplace_back(params, name + ".l" + std::to_string(i), widths[i], widths[i + 1], rng);
  }

  Var<T> operator()(Tape<T>& tape, Var<T> x, bool freeze = false) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = layers_[i](tape, x, freeze);
      x = activate(x, i + 1 == layers_.size() ? output_ : hidden_);
    }
    return x;
  }

  // Forward that also returns every hidden activation (post-activation).
  Var<T> forward_with_hidden(Tape<T>& tape, Var<T> x, std::vector<Var<T>>& hidden, bool freeze = false) const {
    hidden.clear();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = layers_[i](tape, x, freeze);
      x = activate(x, i + 1 == layers_.size() ? output_ : hidden_);
      if (i + 1 < layers_.size()) hidden.push_back(x);
    }
    return x;
  }

  int in() const { return layers_.front().in(); }
  int out() const { return layers_.back().out(); }
  const std::vector<Linear<T>>& layers() const { return layers_; }

 private:
  std::vector<Linear<T>> layers_;
  Activation hidden_ = Activation::kRelu;
  Activation output_ = Activation::kNone;
};

// Learnable lookup table [rows, width].
template <class T>
class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterSet<T>& params, const std::string& name, int rows, int width, Rng& rng)
      : table_(&params.add(name, {rows, width})) {
    for (auto& x : table_->value) x = static_cast<T>(rng.normal() * 0.1);
  }

  Var<T> operator()(Tape<T>& tape, const std::vector<int>& indices, bool freeze = false) const {
    return gather_rows(tape.param_or_frozen(*table_, freeze), indices);
  }

  int rows() const { return table_->shape[0]; }
  int width() const { return table_->shape[1]; }
  Parameter<T>& table() const { return *table_; }

 private:
  Parameter<T>* table_ = nullptr;
};

}  // namespace sks::diff
