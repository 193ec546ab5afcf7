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

// Scene-level contrastive objective over sketch SRs x_s, photo SRs x_i and
// swap-negative SRs x_sn. Row b of each set comes from the same source scene.

#pragma once

#include <vector>

#include "sketchscene/diff/ops.hpp"

namespace sks::retrieval {

struct ContrastiveOptions {
  bool clamped = true;          // hinge at margin 1 on both negative terms
  bool swap_negatives = true;   // include the x_sn term
};

// mean_{s,i} [ 1/2 Y D(s,i) + 1/4 (1-Y) h(D(s,i)) ] + 1/4 mean_{s,sn} h(D(s,sn))
// with Y the identity, h(d) = max(0, 1 - d) when clamped and h(d) = 1 - d for
// the pair term and -d for the swap term otherwise.
template <class T>
diff::Var<T> contrastive_loss(diff::Tape<T>& tape, diff::Var<T> xs, diff::Var<T> xi, const diff::Var<T>* xsn,
                              const ContrastiveOptions& opt = {}) {
  const int b = xs.rows();
  if (b == 0) throw Error("contrastive_loss: empty batch");
  if (xs.shape() != xi.shape()) throw diff::ShapeError("contrastive_loss", xs.shape(), xi.shape());
  const std::size_t bb = static_cast<std::size_t>(b) * b;
  std::vector<T> y(bb, T(0)), not_y(bb, T(1));
  for (int k = 0; k < b; ++k) {
    y[static_cast<std::size_t>(k) * b + k] = T(1);
    not_y[static_cast<std::size_t>(k) * b + k] = T(0);
  }
  auto d = diff::pairwise_l2(xs, xi);
  auto pos = diff::mul(d, tape.constant({b, b}, y));
  auto hinge = [&](diff::Var<T> dist) {
    auto m = diff::add_scalar(diff::scale(dist, T(-1)), T(1));
    return opt.clamped ? diff::relu(m) : m;
  };
  auto neg = diff::mul(hinge(d), tape.constant({b, b}, not_y));
  auto pair_term = diff::mean(diff::add(diff::scale(pos, T(0.5)), diff::scale(neg, T(0.25))));
  if (!opt.swap_negatives || xsn == nullptr) return pair_term;
  if (xsn->shape() != xs.shape()) throw diff::ShapeError("contrastive_loss", xs.shape(), xsn->shape());
  auto dsn = diff::pairwise_l2(xs, *xsn);
  auto swap = opt.clamped ? diff::mean(diff::relu(diff::add_scalar(diff::scale(dsn, T(-1)), T(1))))
                          : diff::scale(diff::mean(dsn), T(-1));
  return diff::add(pair_term, diff::scale(swap, T(0.25)));
}

}  // namespace sks::retrieval
