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

// Layout heads on the FCR: box regressor, mask generator, mask
// discriminator, FCR classifier, and their losses.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sketchscene/diff/layers.hpp"
#include "sketchscene/glyph/types.hpp"

namespace sks::layout {

inline constexpr int kFcrDim = 128;
inline constexpr double kMinSide = 1e-3;

struct LossWeights {
  double box_giou = 10.0;    // lambda1
  double box_l2 = 10.0;      // lambda2
  double mask_recon = 10.0;  // lambda3
  double mask_adv = 0.25;    // lambda4
  double mask_fm = 10.0;     // lambda5
};

// Generalized IoU of two corner boxes; works on any scale.
inline double giou(const glyph::BBox& a, const glyph::BBox& b) {
  const double iw = std::max(0.0, static_cast<double>(std::min(a.x1, b.x1)) - std::max(a.x0, b.x0));
  const double ih = std::max(0.0, static_cast<double>(std::min(a.y1, b.y1)) - std::max(a.y0, b.y0));
  const double inter = iw * ih;
  const double uni = static_cast<double>(a.width()) * a.height() + static_cast<double>(b.width()) * b.height() - inter;
  const double hull = (static_cast<double>(std::max(a.x1, b.x1)) - std::min(a.x0, b.x0)) *
                      (static_cast<double>(std::max(a.y1, b.y1)) - std::min(a.y0, b.y0));
  return inter / uni - (hull - uni) / hull;
}

// Row-wise GIoU of corner boxes a, b [n, 4] -> [n].
template <class T>
diff::Var<T> giou_rows(diff::Var<T> a, diff::Var<T> b) {
  diff::Tape<T>& tape = diff::detail::same_tape("giou", {a, b});
  if (a.shape() != b.shape() || a.cols() != 4) throw diff::ShapeError("giou", a.shape(), b.shape());
  const int n = a.rows();
  const auto& av = tape.node(a.id()).value;
  const auto& bv = tape.node(b.id()).value;
  std::vector<T> out(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    const T* p = av.data() + 4 * r;
    const T* q = bv.data() + 4 * r;
    const T iw = std::max(T(0), std::min(p[2], q[2]) - std::max(p[0], q[0]));
    const T ih = std::max(T(0), std::min(p[3], q[3]) - std::max(p[1], q[1]));
    const T inter = iw * ih;
    const T uni = (p[2] - p[0]) * (p[3] - p[1]) + (q[2] - q[0]) * (q[3] - q[1]) - inter;
    const T hull = (std::max(p[2], q[2]) - std::min(p[0], q[0])) * (std::max(p[3], q[3]) - std::min(p[1], q[1]));
    out[static_cast<std::size_t>(r)] = inter / uni + uni / hull - T(1);
  }
  const bool rg = diff::detail::any_grad({a, b});
  const int ia = a.id(), ib = b.id();
  const int id = tape.push({n}, std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, ib, id, n] {
      auto& o = tape.node(id);
      auto& na = tape.node(ia);
      auto& nb = tape.node(ib);
      for (int r = 0; r < n; ++r) {
        const T g = o.grad[static_cast<std::size_t>(r)];
        if (g == T(0)) continue;
        const T* p = na.value.data() + 4 * r;
        const T* q = nb.value.data() + 4 * r;
        T dp[4] = {0, 0, 0, 0}, dq[4] = {0, 0, 0, 0};
        // Intersection extents and which box bounds them.
        const bool ix0_p = p[0] >= q[0], ix1_p = p[2] <= q[2];
        const bool iy0_p = p[1] >= q[1], iy1_p = p[3] <= q[3];
        const T iw_raw = (ix1_p ? p[2] : q[2]) - (ix0_p ? p[0] : q[0]);
        const T ih_raw = (iy1_p ? p[3] : q[3]) - (iy0_p ? p[1] : q[1]);
        const T iw = std::max(T(0), iw_raw), ih = std::max(T(0), ih_raw);
        const T inter = iw * ih;
        const T area_p = (p[2] - p[0]) * (p[3] - p[1]);
        const T area_q = (q[2] - q[0]) * (q[3] - q[1]);
        const T uni = area_p + area_q - inter;
        const bool hx0_p = p[0] <= q[0], hx1_p = p[2] >= q[2];
        const bool hy0_p = p[1] <= q[1], hy1_p = p[3] >= q[3];
        const T hw = (hx1_p ? p[2] : q[2]) - (hx0_p ? p[0] : q[0]);
        const T hh = (hy1_p ? p[3] : q[3]) - (hy0_p ? p[1] : q[1]);
        const T hull = hw * hh;
        // giou = I/U + U/H - 1, with U = Ap + Aq - I.
        const T d_inter = T(1) / uni + inter / (uni * uni) - T(1) / hull;
        const T d_area = -inter / (uni * uni) + T(1) / hull;
        const T d_hull = -uni / (hull * hull);
        auto add = [&](bool from_p, int k, T v) { (from_p ? dp : dq)[k] += v; };
        if (iw_raw > 0 && ih_raw > 0) {
          add(ix1_p, 2, d_inter * ih);
          add(ix0_p, 0, -d_inter * ih);
          add(iy1_p, 3, d_inter * iw);
          add(iy0_p, 1, -d_inter * iw);
        }
        dp[2] += d_area * (p[3] - p[1]);
        dp[0] -= d_area * (p[3] - p[1]);
        dp[3] += d_area * (p[2] - p[0]);
        dp[1] -= d_area * (p[2] - p[0]);
        dq[2] += d_area * (q[3] - q[1]);
        dq[0] -= d_area * (q[3] - q[1]);
        dq[3] += d_area * (q[2] - q[0]);
        dq[1] -= d_area * (q[2] - q[0]);
        add(hx1_p, 2, d_hull * hh);
        add(hx0_p, 0, -d_hull * hh);
        add(hy1_p, 3, d_hull * hw);
        add(hy0_p, 1, -d_hull * hw);
        for (int k = 0; k < 4; ++k) {
          if (na.requires_grad) na.grad[static_cast<std::size_t>(4 * r + k)] += g * dp[k];
          if (nb.requires_grad) nb.grad[static_cast<std::size_t>(4 * r + k)] += g * dq[k];
        }
      }
    };
  }
  return diff::Var<T>(&tape, id);
}

// G_b: FCR -> (cx, cy, w, h) through sigmoids, returned as corners [n, 4].
template <class T>
class BoxGenerator {
 public:
  BoxGenerator() = default;
  BoxGenerator(diff::ParameterSet<T>& params, Rng& rng)
      : mlp_(params, "gen.box", {kFcrDim, 64, 4}, diff::Activation::kRelu, diff::Activation::kSigmoid, rng) {}

  diff::Var<T> operator()(diff::Tape<T>& tape, diff::Var<T> fcr) const {
    auto s = mlp_(tape, fcr);
    auto center = diff::slice(s, 1, 0, 2);
    auto size = diff::add_scalar(diff::scale(diff::slice(s, 1, 2, 2), T(1 - kMinSide)), T(kMinSide));
    auto half = diff::scale(size, T(0.5));
    return diff::concat<T>({diff::sub(center, half), diff::add(center, half)}, 1);
  }

 private:
  diff::Mlp<T> mlp_;
};

// Boxes as a [n, 4] corner matrix.
inline std::vector<float> box_rows(const std::vector<glyph::BBox>& boxes) {
  std::vector<float> v;
  for (const auto& b : boxes) v.insert(v.end(), {b.x0, b.y0, b.x1, b.y1});
  return v;
}

// Mean over objects of l1 * (1 - giou) + l2 * |b - b_hat|_2.
template <class T>
diff::Var<T> box_loss(diff::Var<T> predicted, diff::Var<T> truth, const LossWeights& w = {}) {
  if (predicted.shape() != truth.shape()) throw diff::ShapeError("box_loss", predicted.shape(), truth.shape());
  auto giou_term = diff::scale(diff::add_scalar(diff::scale(giou_rows(predicted, truth), T(-1)), T(1)), T(w.box_giou));
  auto l2_term = diff::scale(diff::l2_distance(predicted, truth), T(w.box_l2));
  return diff::mean(diff::add(giou_term, l2_term));
}

// G_m: FCR -> 32x32 mask probabilities, flattened [n, 1024].
template <class T>
class MaskGenerator {
 public:
  MaskGenerator() = default;
  MaskGenerator(diff::ParameterSet<T>& params, Rng& rng)
      : mlp_(params, "gen.mask", {kFcrDim, 256, glyph::kCropPixels}, diff::Activation::kRelu,
             diff::Activation::kSigmoid, rng) {}

  diff::Var<T> operator()(diff::Tape<T>& tape, diff::Var<T> fcr) const { return mlp_(tape, fcr); }

 private:
  diff::Mlp<T> mlp_;
};

// D over concat(mask, one-hot class). Hidden activations feed L_FM.
template <class T>
class MaskDiscriminator {
 public:
  MaskDiscriminator() = default;
  MaskDiscriminator(diff::ParameterSet<T>& params, int num_classes, Rng& rng)
      : mlp_(params, "disc", {glyph::kCropPixels + num_classes, 256, 64, 1}, diff::Activation::kLeakyRelu,
             diff::Activation::kNone, rng),
        num_classes_(num_classes) {}

  struct Output {
    diff::Var<T> score;                // [n]
    std::vector<diff::Var<T>> hidden;  // [n, 256], [n, 64]
  };

  Output operator()(diff::Tape<T>& tape, diff::Var<T> masks, const std::vector<int>& classes, bool freeze) const {
    if (masks.cols() != glyph::kCropPixels || masks.rows() != static_cast<int>(classes.size()))
      throw diff::ShapeError("op 'discriminator': masks " + diff::shape_str(masks.shape()) + " for " +
                             std::to_string(classes.size()) + " classes");
    std::vector<T> onehot(classes.size() * static_cast<std::size_t>(num_classes_), T(0));
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (classes[i] < 0 || classes[i] >= num_classes_) throw Error("discriminator: class id out of range");
      onehot[i * static_cast<std::size_t>(num_classes_) + static_cast<std::size_t>(classes[i])] = T(1);
    }
    auto x = diff::concat<T>({masks, tape.constant({masks.rows(), num_classes_}, std::move(onehot))}, 1);
    Output out;
    auto s = mlp_.forward_with_hidden(tape, x, out.hidden, freeze);
    out.score = diff::reshape(s, {masks.rows()});
    return out;
  }

  int num_classes() const { return num_classes_; }

 private:
  diff::Mlp<T> mlp_;
  int num_classes_ = 0;
};

// Mean-absolute difference per hidden layer, layers summed with weight 1.
template <class T>
diff::Var<T> feature_matching(const std::vector<diff::Var<T>>& real, const std::vector<diff::Var<T>>& fake) {
  if (real.size() != fake.size() || real.empty()) throw Error("feature_matching: layer count mismatch");
  std::vector<diff::Var<T>> terms;
  for (std::size_t i = 0; i < real.size(); ++i)
    terms.push_back(diff::scale(diff::mean(diff::l1_distance(real[i], fake[i])), T(1) / static_cast<T>(real[i].cols())));
  return diff::add_all(terms);
}

// Generator side of the mask objective. D is read frozen, so only the
// generator (and whatever feeds the FCR) receives gradient.
template <class T>
diff::Var<T> mask_generator_loss(diff::Tape<T>& tape, const MaskDiscriminator<T>& disc, diff::Var<T> generated,
                                 diff::Var<T> truth, const std::vector<int>& classes, const LossWeights& w = {}) {
  if (generated.shape() != truth.shape()) throw diff::ShapeError("mask_gan_losses", generated.shape(), truth.shape());
  auto recon = diff::squared_error(generated, truth);
  auto fake = disc(tape, generated, classes, true);
  auto real = disc(tape, truth, classes, true);
  auto adv = diff::mean(diff::mul(diff::add_scalar(fake.score, T(-1)), diff::add_scalar(fake.score, T(-1))));
  auto fm = feature_matching(real.hidden, fake.hidden);
  return diff::add_all<T>({diff::scale(recon, T(w.mask_recon)), diff::scale(adv, T(w.mask_adv)),
                           diff::scale(fm, T(w.mask_fm))});
}

// LSGAN discriminator objective 1/2 [(D(real) - 1)^2 + D(fake)^2] on scores.
template <class T>
diff::Var<T> lsgan_discriminator_loss(diff::Var<T> real_score, diff::Var<T> fake_score) {
  auto r = diff::add_scalar(real_score, T(-1));
  return diff::scale(diff::add(diff::mean(diff::mul(r, r)), diff::mean(diff::mul(fake_score, fake_score))), T(0.5));
}

// Discriminator step input: the generated masks enter as constants.
template <class T>
diff::Var<T> mask_discriminator_loss(diff::Tape<T>& tape, const MaskDiscriminator<T>& disc,
                                     const std::vector<T>& generated, diff::Var<T> truth,
                                     const std::vector<int>& classes) {
  auto fake = tape.constant(truth.shape(), generated);
  return lsgan_discriminator_loss(disc(tape, truth, classes, false).score, disc(tape, fake, classes, false).score);
}

// Linear FCR classifier; its cross-entropy keeps the FCR semantic.
template <class T>
class FcrClassifier {
 public:
  FcrClassifier() = default;
  FcrClassifier(diff::ParameterSet<T>& params, int num_classes, Rng& rng)
      : linear_(params, "gen.cls", kFcrDim, num_classes, rng) {}

  diff::Var<T> logits(diff::Tape<T>& tape, diff::Var<T> fcr) const { return linear_(tape, fcr); }

  diff::Var<T> loss(diff::Tape<T>& tape, diff::Var<T> fcr, const std::vector<int>& classes) const {
    return diff::mean(diff::cross_entropy_logits(logits(tape, fcr), classes));
  }

 private:
  diff::Linear<T> linear_;
};

}  // namespace sks::layout
