// Copyright 2026 The attention-drag Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTENTION_DRAG_MASK_GENERATION_HPP_
#define ATTENTION_DRAG_MASK_GENERATION_HPP_

#include <algorithm>
#include <cmath>

#include "attention_drag/latent_core.hpp"

namespace attention_drag {

struct MaskConfig {
  double tau = 2.0;
  bool include_handle = true;
  int dilation_radius = 0;

  void validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("tau must be a positive number", "tau");
    if (dilation_radius < 0) throw ValidationError("dilation_radius must be >= 0", "dilation_radius");
  }
  friend bool operator==(const MaskConfig&, const MaskConfig&) = default;
};

/// Square (Chebyshev) dilation.
inline BinaryMask dilate(const BinaryMask& mask, int radius) {
  if (radius <= 0) return mask;
  BinaryMask out(mask.height(), mask.width(), std::uint8_t{0});
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask[{x, y}]) continue;
      for (int yy = std::max(0, y - radius); yy <= std::min(mask.height() - 1, y + radius); ++yy) {
        for (int xx = std::max(0, x - radius); xx <= std::min(mask.width() - 1, x + radius); ++xx) {
          out[{xx, yy}] = 1;
        }
      }
    }
  }
  return out;
}

/// Marks positions whose weight exceeds tau times the handle weight. The
/// weights need not be normalized; only ratios matter.
inline BinaryMask generate_mask(const WeightPlane& weights, Point handle, const MaskConfig& cfg = {}) {
  cfg.validate();
  if (!weights.contains(handle)) throw ValidationError("handle outside the attention map", "handle");
  const double ref = weights[handle];
  if (!(ref > 0.0)) throw ValidationError("handle attention weight must be positive", "handle");
  BinaryMask mask(weights.height(), weights.width(), std::uint8_t{0});
  const auto w = weights.data();
  auto m = mask.data();
  for (std::size_t i = 0; i < w.size(); ++i) m[i] = (w[i] / ref > cfg.tau) ? 1 : 0;
  // The literal rule never admits the handle itself when tau >= 1.
  if (cfg.include_handle) mask[handle] = 1;
  return dilate(mask, cfg.dilation_radius);
}

inline BinaryMask generate_mask(const AttentionMap& map, Point handle, const MaskConfig& cfg = {}) {
  return generate_mask(map.weights(), handle, cfg);
}

}  // namespace attention_drag

#endif  // ATTENTION_DRAG_MASK_GENERATION_HPP_
