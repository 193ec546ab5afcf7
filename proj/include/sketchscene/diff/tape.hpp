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

// Define-by-run reverse-mode differentiation. A Tape records nodes in
// creation order, which is a topological order of the graph; backward()
// walks it once in reverse.

#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sketchscene/common.hpp"

namespace sks::diff {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
  ShapeError(std::string_view op, const Shape& a, const Shape& b)
      : Error("op '" + std::string(op) + "': incompatible shapes " + shape_str(a) + " and " +
              shape_str(b)) {}
};

// A learnable tensor that outlives any single tape.
template <class T>
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

// Ordered, name-addressable parameter registry. Pointers stay valid for the
// lifetime of the set.
template <class T>
class ParameterSet {
 public:
  Parameter<T>& add(const std::string& name, Shape shape) {
    if (index_.count(name)) throw Error("duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->shape = std::move(shape);
    p->value.assign(numel(p->shape), T(0));
    p->grad.assign(p->value.size(), T(0));
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  Parameter<T>& at(const std::string& name) {
    if (auto* p = find(name)) return *p;
    throw Error("unknown parameter: " + name);
  }

  std::vector<Parameter<T>*> all() const {
    std::vector<Parameter<T>*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  // Parameters whose name starts with any of the given prefixes.
  std::vector<Parameter<T>*> with_prefix(std::initializer_list<std::string_view> prefixes) const {
    std::vector<Parameter<T>*> out;
    for (const auto& p : params_) {
      for (auto prefix : prefixes) {
        if (std::string_view(p->name).substr(0, prefix.size()) == prefix) {
          out.push_back(p.get());
          break;
        }
      }
    }
    return out;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& p : params_) out.push_back(p->name);
    return out;
  }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <class T>
class Tape;

// Lightweight handle to a node on a tape.
template <class T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

  Tape<T>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Shape& shape() const;
  std::size_t numel() const;
  int rows() const;
  int cols() const;
  bool requires_grad() const;

  std::span<const T> value() const;
  std::span<T> mutable_value();
  std::span<const T> grad() const;
  T item() const;

 private:
  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

template <class T>
class Tape {
 public:
  struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // allocated only when requires_grad
    bool requires_grad = false;
    std::function<void()> backward;
    Parameter<T>* param = nullptr;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Shape shape, std::vector<T> value) {
    check_size("constant", shape, value.size());
    return Var<T>(this, push(std::move(shape), std::move(value), false, {}));
  }

  Var<T> zeros(Shape shape) {
    std::vector<T> v(numel(shape), T(0));
    return constant(std::move(shape), std::move(v));
  }

  // Leaf that receives gradient (read back through Var::grad()).
  Var<T> variable(Shape shape, std::vector<T> value) {
    check_size("variable", shape, value.size());
    return Var<T>(this, push(std::move(shape), std::move(value), true, {}));
  }

  // Leaf bound to a parameter; backward() adds its gradient into param.grad.
  // Repeated calls for the same parameter return the same node.
  Var<T> param(Parameter<T>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var<T>(this, it->second);
    const int id = push(p.shape, p.value, true, {});
    nodes_[static_cast<std::size_t>(id)].param = &p;
    param_nodes_[&p] = id;
    return Var<T>(this, id);
  }

  // Parameter value as a constant: gradient never reaches the parameter.
  Var<T> frozen(const Parameter<T>& p) { return constant(p.shape, p.value); }

  Var<T> param_or_frozen(Parameter<T>& p, bool freeze) { return freeze ? frozen(p) : param(p); }

  int push(Shape shape, std::vector<T> value, bool requires_grad, std::function<void()> backward) {
    Node n;
    n.shape = std::move(shape);
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.grad.assign(n.value.size(), T(0));
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 and propagates to every upstream node. Root
  // must hold a single element. Each node's rule runs at most once.
  void backward(Var<T> root) {
    if (root.tape() != this) throw Error("backward: root belongs to another tape");
    Node& r = node(root.id());
    if (r.value.size() != 1) throw ShapeError("backward: root must be scalar, got " + shape_str(r.shape));
    if (backward_done_) throw Error("backward: tape already differentiated");
    backward_done_ = true;
    if (!r.requires_grad) return;
    r.grad[0] += T(1);
    for (int id = root.id(); id >= 0; --id) {
      Node& n = node(id);
      if (n.requires_grad && n.backward) n.backward();
    }
    for (auto& [param, id] : param_nodes_) {
      const Node& n = node(id);
      for (std::size_t i = 0; i < n.grad.size(); ++i) param->grad[i] += n.grad[i];
    }
  }

 private:
  static void check_size(std::string_view op, const Shape& shape, std::size_t size) {
    if (numel(shape) != size)
      throw ShapeError("op '" + std::string(op) + "': shape " + shape_str(shape) + " needs " +
                       std::to_string(numel(shape)) + " values, got " + std::to_string(size));
  }

  std::vector<Node> nodes_;
  std::unordered_map<Parameter<T>*, int> param_nodes_;
  bool backward_done_ = false;
};

template <class T>
const Shape& Var<T>::shape() const {
  return tape_->node(id_).shape;
}
template <class T>
std::size_t Var<T>::numel() const {
  return tape_->node(id_).value.size();
}
template <class T>
int Var<T>::cols() const {
  const Shape& s = shape();
  return s.empty() ? 1 : s.back();
}
template <class T>
int Var<T>::rows() const {
  const int c = cols();
  return c == 0 ? 0 : static_cast<int>(numel() / static_cast<std::size_t>(c));
}
template <class T>
bool Var<T>::requires_grad() const {
  return tape_->node(id_).requires_grad;
}
template <class T>
std::span<const T> Var<T>::value() const {
  return tape_->node(id_).value;
}
template <class T>
std::span<T> Var<T>::mutable_value() {
  return tape_->node(id_).value;
}
template <class T>
std::span<const T> Var<T>::grad() const {
  return tape_->node(id_).grad;
}
template <class T>
T Var<T>::item() const {
  const auto& v = tape_->node(id_).value;
  if (v.size() != 1) throw ShapeError("item: expected a single element, got " + shape_str(shape()));
  return v[0];
}

}  // namespace sks::diff
