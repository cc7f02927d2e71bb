// Copyright 2026 The attention-drag Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTENTION_DRAG_SEMANTIC_INTERPOLATION_HPP_
#define ATTENTION_DRAG_SEMANTIC_INTERPOLATION_HPP_

#include <algorithm>
#include <limits>
#include <span>
#include <vector>

#include "attention_drag/latent_core.hpp"

namespace attention_drag {

namespace detail {

// Euclidean-nearest non-blank position, lowest flat index on ties.
inline Point nearest_contributor(Point b, const std::vector<std::uint8_t>& is_blank, int width, int height) {
  long best = std::numeric_limits<long>::max();
  Point out{-1, -1};
  for (std::size_t i = 0; i < is_blank.size(); ++i) {
    if (is_blank[i]) continue;
    const Point p = unflatten_index(i, width, height);
    const long dx = p.x - b.x, dy = p.y - b.y;
    const long d2 = dx * dx + dy * dy;
    if (d2 < best) {
      best = d2;
      out = p;
    }
  }
  return out;
}

}  // namespace detail

/// Fills each blank with the attention-weighted mean of the non-blank
/// positions, using that blank's own attention row restricted to non-blank
/// support and renormalized. Non-blank values pass through untouched.
inline LatentGrid interpolate_blanks(const LatentGrid& warped, std::span<const Point> blanks,
                                     std::span<const AttentionMap> rows) {
  if (blanks.size() != rows.size()) throw ValidationError("need one attention row per blank");
  const int w = warped.width(), h = warped.height();
  std::vector<std::uint8_t> is_blank(warped.plane_size(), 0);
  for (Point b : blanks) is_blank[flatten_index(b, w, h)] = 1;
  if (!blanks.empty() && std::find(is_blank.begin(), is_blank.end(), 0) == is_blank.end()) {
    throw ValidationError("every position is blank; nothing to interpolate from", "mask");
  }

  LatentGrid out = warped;
  const std::size_t n = warped.plane_size();
  const auto src = warped.values();
  auto dst = out.values();
  for (std::size_t bi = 0; bi < blanks.size(); ++bi) {
    const AttentionMap& row = rows[bi];
    if (row.height() != h || row.width() != w) throw ValidationError("attention row differs in shape from latent");
    const std::size_t b = flatten_index(blanks[bi], w, h);
    const auto a = row.data();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_blank[i]) total += a[i];
    }
    if (!(total > 0.0)) {
      const Point near = detail::nearest_contributor(blanks[bi], is_blank, w, h);
      out.copy_position(warped, near, blanks[bi]);
      continue;
    }
    // Accumulate offsets from one contributor's value so a field of equal
    // contributors reproduces that value bit-exactly.
    const std::size_t anchor = static_cast<std::size_t>(
        std::find(is_blank.begin(), is_blank.end(), std::uint8_t{0}) - is_blank.begin());
    for (int c = 0; c < warped.channels(); ++c) {
      const std::size_t base = static_cast<std::size_t>(c) * n;
      const double ref = src[base + anchor];
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!is_blank[i]) acc += a[i] * (src[base + i] - ref);
      }
      dst[base + b] = ref + acc / total;
    }
  }
  return out;
}

}  // namespace attention_drag

#endif  // ATTENTION_DRAG_SEMANTIC_INTERPOLATION_HPP_
