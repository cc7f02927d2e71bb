// Copyright 2026 The attention-drag Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTENTION_DRAG_EVAL_HARNESS_HPP_
#define ATTENTION_DRAG_EVAL_HARNESS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "attention_drag/edit_pipeline.hpp"
#include "attention_drag/latent_core.hpp"

namespace attention_drag {

// ---------------------------------------------------------------------------
// Synthetic scenes
// ---------------------------------------------------------------------------

struct Blob {
  Point center;
  double radius = 3.0;     // support radius; the profile is zero beyond it
  double amplitude = 1.0;  // peak height above background in channel 0

  friend bool operator==(const Blob&, const Blob&) = default;
};

struct SyntheticScene {
  LatentGrid grid;
  std::vector<Blob> blobs;
  double background = 0.0;
};

inline constexpr double kMinBlobAmplitude = 0.25;

/// Channel c carries the blob profile scaled by this gain; channel 0 is 1.
inline double channel_gain(int c) { return c == 0 ? 1.0 : 0.8 * std::cos(1.7 * c); }

/// Truncated Gaussian bump, sigma = radius / 2, zero outside the radius.
inline double blob_profile(const Blob& b, double x, double y) {
  const double dx = x - b.center.x, dy = y - b.center.y;
  const double d2 = dx * dx + dy * dy;
  if (d2 > b.radius * b.radius) return 0.0;
  const double sigma = 0.5 * b.radius;
  return b.amplitude * std::exp(-d2 / (2.0 * sigma * sigma));
}

inline SyntheticScene make_scene(int channels, int height, int width, std::vector<Blob> blobs, double background = 0.0) {
  LatentGrid grid(channels, height, width, background);
  for (const auto& b : blobs) {
    if (!grid.contains(b.center)) throw ValidationError("blob center outside the grid", "scene");
    if (!(b.amplitude >= kMinBlobAmplitude)) throw ValidationError("blob amplitude below the detection margin", "scene");
    if (!(b.radius > 0.0)) throw ValidationError("blob radius must be positive", "scene");
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double profile = 0.0;
      for (const auto& b : blobs) profile += blob_profile(b, x, y);
      for (int c = 0; c < channels; ++c) grid(c, y, x) = background + channel_gain(c) * profile;
    }
  }
  return SyntheticScene{grid.quantized(), std::move(blobs), background};
}

/// One blob with a drag of length in [min_drag, max_drag] that keeps both
/// the blob and its target fully inside the grid.
struct DragScene {
  SyntheticScene scene;
  DragInstruction instruction;
};

inline DragScene random_drag_scene(std::uint64_t seed, int channels = 4, int height = 32, int width = 32,
                                   double min_drag = 4.0, double max_drag = 8.0) {
  std::mt19937_64 rng(seed);
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  const double radius = 3.0 + unit();
  const double amplitude = 1.5 + unit();
  const int margin = static_cast<int>(std::ceil(radius)) + 1;
  for (;;) {
    const Point c{margin + static_cast<int>(unit() * (width - 2 * margin)),
                  margin + static_cast<int>(unit() * (height - 2 * margin))};
    const double angle = unit() * 2.0 * 3.14159265358979323846;
    const double len = min_drag + unit() * (max_drag - min_drag);
    const Point t{c.x + static_cast<int>(std::lround(len * std::cos(angle))),
                  c.y + static_cast<int>(std::lround(len * std::sin(angle)))};
    const double actual = std::hypot(t.x - c.x, t.y - c.y);
    if (actual < min_drag || actual > max_drag) continue;
    if (t.x < margin || t.y < margin || t.x >= width - margin || t.y >= height - margin) continue;
    return DragScene{make_scene(channels, height, width, {Blob{c, radius, amplitude}}), DragInstruction{c, t}};
  }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Fraction of the blob amplitude a channel-0 value must exceed background by
/// to count toward the tracked centroid.
inline constexpr double kCentroidThreshold = 0.25;

/// Intensity-weighted centroid of the dragged blob, searched in the box
/// spanned by handle and target grown by the blob radius. nullopt when the
/// blob is not detectable there.
inline std::optional<std::pair<double, double>> track_blob(const LatentGrid& edited, const SyntheticScene& scene,
                                                           const DragInstruction& instr) {
  const auto it = std::find_if(scene.blobs.begin(), scene.blobs.end(),
                               [&](const Blob& b) { return b.center == instr.handle; });
  if (it == scene.blobs.end()) throw ValidationError("no blob centered on the handle point", "points");
  if (!edited.same_shape(scene.grid)) throw ValidationError("edited grid differs in shape from the scene");
  const int grow = static_cast<int>(std::ceil(it->radius)) + 1;
  const int x0 = std::max(0, std::min(instr.handle.x, instr.target.x) - grow);
  const int x1 = std::min(edited.width() - 1, std::max(instr.handle.x, instr.target.x) + grow);
  const int y0 = std::max(0, std::min(instr.handle.y, instr.target.y) - grow);
  const int y1 = std::min(edited.height() - 1, std::max(instr.handle.y, instr.target.y) + grow);
  const double floor = scene.background + kCentroidThreshold * it->amplitude;
  double mass = 0.0, mx = 0.0, my = 0.0;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double wgt = std::max(0.0, edited(0, y, x) - floor);
      mass += wgt;
      mx += wgt * x;
      my += wgt * y;
    }
  }
  if (!(mass > 1e-9 * it->amplitude)) return std::nullopt;
  return std::pair{mx / mass, my / mass};
}

/// Mean-distance proxy: distance from the tracked blob centroid to the target.
inline std::optional<double> mean_distance(const LatentGrid& edited, const SyntheticScene& scene,
                                           const DragInstruction& instr) {
  const auto c = track_blob(edited, scene, instr);
  if (!c) return std::nullopt;
  return std::hypot(c->first - instr.target.x, c->second - instr.target.y);
}

/// 1 - (mean |original - edited| outside the mask) / (value range of both
/// grids), clamped to [0, 1].
inline double region_fidelity(const LatentGrid& original, const LatentGrid& edited, const BinaryMask& mask) {
  if (!original.same_shape(edited) || !mask.same_shape(original.height(), original.width())) {
    throw ValidationError("fidelity inputs differ in shape");
  }
  const std::size_t outside = mask.size() - count_set(mask);
  if (outside == 0) throw ValidationError("mask covers the whole grid; no region to compare", "mask");
  const std::size_t n = original.plane_size();
  double lo = original.values()[0], hi = lo;
  for (const auto* g : {&original, &edited}) {
    for (double v : g->values()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  double diff = 0.0;
  for (int c = 0; c < original.channels(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      if (mask.at(i)) continue;
      const std::size_t k = static_cast<std::size_t>(c) * n + i;
      diff += std::abs(original.values()[k] - edited.values()[k]);
    }
  }
  const double mad = diff / static_cast<double>(outside * static_cast<std::size_t>(original.channels()));
  if (mad == 0.0) return 1.0;
  const double range = hi - lo;
  return std::clamp(1.0 - mad / range, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Tau sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  double tau = 0.0;
  std::optional<double> md;
  double fidelity = 0.0;
  std::size_t mask_size = 0;
  BinaryMask mask;
  PhaseTimings timings;
};

/// One pipeline run per tau over a shared inversion; rows follow `taus`.
inline std::vector<SweepRow> tau_sweep(const SyntheticScene& scene, const DragInstruction& instr,
                                       std::span<const double> taus, EditConfig base = {}) {
  for (double t : taus) {
    if (!(t > 0.0)) throw ValidationError("tau values must be positive", "tau");
  }
  base.validate();
  const InversionTrace trace = invert_for(scene.grid, base);
  std::vector<SweepRow> rows;
  rows.reserve(taus.size());
  for (double t : taus) {
    EditRequest req{scene.grid, {instr}, std::nullopt, base};
    req.config.tau = t;
    EditReport report = run_edit(req, &trace);
    SweepRow row;
    row.tau = t;
    row.md = mean_distance(report.output, scene, instr);
    row.fidelity = region_fidelity(scene.grid, report.output, report.edit_mask);
    row.mask_size = count_set(report.instructions.front().mask);
    row.mask = report.instructions.front().mask;
    row.timings = report.timings;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string sweep_table(std::span<const SweepRow> rows) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%8s %10s %10s %8s\n", "tau", "md", "fidelity", "mask_px");
  os << line;
  for (const auto& r : rows) {
    char md[32];
    if (r.md) {
      std::snprintf(md, sizeof md, "%10.4f", *r.md);
    } else {
      std::snprintf(md, sizeof md, "%10s", "lost");
    }
    std::snprintf(line, sizeof line, "%8.3f %s %10.6f %8zu\n", r.tau, md, r.fidelity, r.mask_size);
    os << line;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// PPM output
// ---------------------------------------------------------------------------

namespace detail {

inline std::string ppm_header(int width, int height) {
  return "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
}

inline unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace detail

/// First three channels as RGB (channel 0 as gray when fewer), min-max scaled.
inline std::string grid_to_ppm(const LatentGrid& grid) {
  const int used = grid.channels() >= 3 ? 3 : 1;
  const std::size_t n = grid.plane_size();
  double lo = grid.values()[0], hi = lo;
  for (std::size_t i = 0; i < static_cast<std::size_t>(used) * n; ++i) {
    lo = std::min(lo, grid.values()[i]);
    hi = std::max(hi, grid.values()[i]);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  std::string out = detail::ppm_header(grid.width(), grid.height());
  for (std::size_t i = 0; i < n; ++i) {
    for (int ch = 0; ch < 3; ++ch) {
      const int c = used == 3 ? ch : 0;
      out.push_back(static_cast<char>(detail::to_byte((grid.values()[static_cast<std::size_t>(c) * n + i] - lo) / span)));
    }
  }
  return out;
}

/// Heat ramp black -> red -> yellow -> white, scaled by the map maximum.
inline std::string heatmap_to_ppm(const WeightPlane& weights) {
  double hi = 0.0;
  for (double w : weights.data()) hi = std::max(hi, w);
  std::string out = detail::ppm_header(weights.width(), weights.height());
  for (double w : weights.data()) {
    const double t = hi > 0.0 ? w / hi : 0.0;
    out.push_back(static_cast<char>(detail::to_byte(3.0 * t)));
    out.push_back(static_cast<char>(detail::to_byte(3.0 * t - 1.0)));
    out.push_back(static_cast<char>(detail::to_byte(3.0 * t - 2.0)));
  }
  return out;
}

/// Channel 0 in gray with masked positions tinted red.
inline std::string mask_overlay_ppm(const LatentGrid& grid, const BinaryMask& mask) {
  if (!mask.same_shape(grid.height(), grid.width())) throw ValidationError("mask shape does not match grid", "mask");
  const std::size_t n = grid.plane_size();
  double lo = grid.values()[0], hi = lo;
  for (std::size_t i = 0; i < n; ++i) {
    lo = std::min(lo, grid.values()[i]);
    hi = std::max(hi, grid.values()[i]);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  std::string out = detail::ppm_header(grid.width(), grid.height());
  for (std::size_t i = 0; i < n; ++i) {
    const double g = (grid.values()[i] - lo) / span;
    if (mask.at(i)) {
      out.push_back(static_cast<char>(detail::to_byte(0.5 + 0.5 * g)));
      out.push_back(static_cast<char>(detail::to_byte(0.3 * g)));
      out.push_back(static_cast<char>(detail::to_byte(0.3 * g)));
    } else {
      for (int k = 0; k < 3; ++k) out.push_back(static_cast<char>(detail::to_byte(g)));
    }
  }
  return out;
}

}  // namespace attention_drag

#endif  // ATTENTION_DRAG_EVAL_HARNESS_HPP_
