// Copyright 2026 The attention-drag Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTENTION_DRAG_ELEMENT_MOVEMENT_HPP_
#define ATTENTION_DRAG_ELEMENT_MOVEMENT_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <tuple>
#include <vector>

#include "attention_drag/latent_core.hpp"

namespace attention_drag {

struct DragInstruction {
  Point handle;
  Point target;

  friend bool operator==(const DragInstruction&, const DragInstruction&) = default;
};

inline Displacement drag_vector(const DragInstruction& instr) {
  return Displacement{instr.target.x - instr.handle.x, instr.target.y - instr.handle.y};
}

namespace detail {

// Half-away-from-zero rounding, saturated well outside any grid so the
// integer conversion is always defined.
inline int round_component(double v) {
  constexpr double kLimit = 1 << 24;
  return static_cast<int>(std::round(std::clamp(v, -kLimit, kLimit)));
}

inline void check_field_inputs(const WeightPlane& weights, Point handle, const BinaryMask& mask) {
  if (!weights.same_shape(mask)) throw ValidationError("attention map and mask differ in shape");
  if (!weights.contains(handle)) throw ValidationError("handle outside the attention map", "handle");
  if (!(weights[handle] > 0.0)) throw ValidationError("handle attention weight must be positive", "handle");
}

}  // namespace detail

/// Displacement at every position: (weight / handle weight) * drag, rounded
/// per component, zero wherever the mask is 0.
inline MovementField compute_movement_field(const WeightPlane& weights, Point handle, Displacement drag,
                                            const BinaryMask& mask) {
  detail::check_field_inputs(weights, handle, mask);
  const double ref = weights[handle];
  MovementField field(weights.height(), weights.width());
  const auto w = weights.data();
  const auto m = mask.data();
  auto f = field.data();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!m[i]) continue;
    const double ratio = w[i] / ref;
    f[i] = Displacement{detail::round_component(ratio * drag.dx), detail::round_component(ratio * drag.dy)};
  }
  return field;
}

inline MovementField compute_movement_field(const AttentionMap& map, Point handle, Displacement drag,
                                            const BinaryMask& mask) {
  return compute_movement_field(map.weights(), handle, drag, mask);
}

/// Literal per-timestep reading: each step's vectors use that step's own
/// handle weight as reference, and the real-valued vectors are averaged
/// before rounding.
inline MovementField compute_movement_field_per_step(std::span<const AttentionMap> maps, Point handle,
                                                     Displacement drag, const BinaryMask& mask) {
  if (maps.empty()) throw ValidationError("no attention maps for movement field");
  std::vector<double> sx(mask.size(), 0.0), sy(mask.size(), 0.0);
  for (const auto& map : maps) {
    detail::check_field_inputs(map.weights(), handle, mask);
    const double ref = map[handle];
    const auto w = map.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      sx[i] += w[i] / ref * drag.dx;
      sy[i] += w[i] / ref * drag.dy;
    }
  }
  const double inv = 1.0 / static_cast<double>(maps.size());
  MovementField field(mask.height(), mask.width());
  const auto m = mask.data();
  auto f = field.data();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (m[i]) f[i] = Displacement{detail::round_component(sx[i] * inv), detail::round_component(sy[i] * inv)};
  }
  return field;
}

struct WarpResult {
  LatentGrid warped;
  std::vector<Point> blanks;  // row-major order
  std::size_t collisions = 0; // destinations claimed by more than one source

  friend bool operator==(const WarpResult&, const WarpResult&) = default;
};

struct WarpOptions {
  /// When set, a move whose destination is 0 in this mask is dropped.
  const BinaryMask* destination_mask = nullptr;
};

inline Point clamp_to_grid(Point p, int width, int height) {
  return Point{std::clamp(p.x, 0, width - 1), std::clamp(p.y, 0, height - 1)};
}

/// Scatter each displaced position's channel vector to its (clamped)
/// destination. Colliding sources resolve to the higher priority weight, then
/// the lower flat index. A moved source that nothing writes into is blank.
inline WarpResult warp_latent(const LatentGrid& z, const MovementField& field, const WeightPlane& priority,
                              const WarpOptions& options = {}) {
  if (!field.same_shape(z.height(), z.width()) || !priority.same_shape(field)) {
    throw ValidationError("latent, field and attention map differ in shape");
  }
  if (options.destination_mask && !options.destination_mask->same_shape(field)) {
    throw ValidationError("destination mask differs in shape");
  }
  const int w = z.width(), h = z.height();
  struct Move {
    std::size_t dest;
    double weight;
    std::size_t src;
  };
  std::vector<Move> moves;
  for (std::size_t src = 0; src < field.size(); ++src) {
    const Displacement d = field.at(src);
    if (d.is_zero()) continue;
    const Point s = unflatten_index(src, w, h);
    const Point t = clamp_to_grid(Point{s.x + d.dx, s.y + d.dy}, w, h);
    if (t == s) continue;
    if (options.destination_mask && !(*options.destination_mask)[t]) continue;
    moves.push_back(Move{flatten_index(t, w, h), priority.at(src), src});
  }
  std::sort(moves.begin(), moves.end(), [](const Move& a, const Move& b) {
    return std::tuple(a.dest, -a.weight, a.src) < std::tuple(b.dest, -b.weight, b.src);
  });

  WarpResult result{z, {}, 0};
  std::vector<std::uint8_t> written(field.size(), 0);
  for (std::size_t i = 0; i < moves.size();) {
    std::size_t j = i;
    while (j < moves.size() && moves[j].dest == moves[i].dest) ++j;
    if (j - i > 1) ++result.collisions;
    const Point dst = unflatten_index(moves[i].dest, w, h);
    result.warped.copy_position(z, unflatten_index(moves[i].src, w, h), dst);
    written[moves[i].dest] = 1;
    i = j;
  }
  std::vector<std::size_t> vacated;
  vacated.reserve(moves.size());
  for (const auto& m : moves) {
    if (!written[m.src]) vacated.push_back(m.src);
  }
  std::sort(vacated.begin(), vacated.end());
  for (std::size_t src : vacated) result.blanks.push_back(unflatten_index(src, w, h));
  return result;
}

inline WarpResult warp_latent(const LatentGrid& z, const MovementField& field, const AttentionMap& map,
                              const WarpOptions& options = {}) {
  return warp_latent(z, field, map.weights(), options);
}

}  // namespace attention_drag

#endif  // ATTENTION_DRAG_ELEMENT_MOVEMENT_HPP_
