// Copyright 2026 The attention-drag Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTENTION_DRAG_EDIT_PIPELINE_HPP_
#define ATTENTION_DRAG_EDIT_PIPELINE_HPP_

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "attention_drag/attention_analysis.hpp"
#include "attention_drag/diffusion_substrate.hpp"
#include "attention_drag/element_movement.hpp"
#include "attention_drag/latent_core.hpp"
#include "attention_drag/mask_generation.hpp"
#include "attention_drag/semantic_interpolation.hpp"

namespace attention_drag {

struct ScheduleConfig {
  int train_steps = 50;
  double beta_start = 1e-4;
  double beta_end = 2e-2;

  friend bool operator==(const ScheduleConfig&, const ScheduleConfig&) = default;
};

struct EditConfig {
  int inversion_steps = 10;
  int edit_step = 5;
  double tau = 2.0;
  bool include_handle = true;
  int dilation_radius = 0;
  bool per_step_fields = false;
  bool restrict_destinations = false;
  std::uint64_t seed = 0;
  int hidden = 16;
  int key_dim = 8;
  int heads = 2;
  /// Test hook: replace the seeded denoiser by the all-zero one (epsilon = 0,
  /// uniform attention).
  bool zero_epsilon = false;
  ScheduleConfig schedule;

  MaskConfig mask_config() const { return MaskConfig{tau, include_handle, dilation_radius}; }

  void validate() const {
    mask_config().validate();
    if (schedule.train_steps < 1) throw ValidationError("train_steps must be >= 1", "schedule.train_steps");
    if (inversion_steps < 1 || inversion_steps > schedule.train_steps) {
      throw ValidationError("inversion_steps must lie in [1, train_steps]", "inversion_steps");
    }
    if (edit_step < 1 || edit_step > inversion_steps) {
      throw ValidationError("edit_step must lie in [1, inversion_steps]", "edit_step");
    }
    if (hidden < 1) throw ValidationError("hidden must be >= 1", "hidden");
    if (key_dim < 1) throw ValidationError("key_dim must be >= 1", "key_dim");
    if (heads < 1) throw ValidationError("heads must be >= 1", "heads");
  }

  friend bool operator==(const EditConfig&, const EditConfig&) = default;
};

struct EditRequest {
  LatentGrid input;
  std::vector<DragInstruction> instructions;
  std::optional<BinaryMask> user_mask;  // inpainting mode
  EditConfig config;
};

struct InstructionReport {
  DragInstruction instruction;
  AttentionMap map;  // handle row aggregated over all inversion steps
  BinaryMask mask;
  MovementField field;

  friend bool operator==(const InstructionReport&, const InstructionReport&) = default;
};

struct PhaseTimings {
  double invert_ms = 0.0;
  double analysis_ms = 0.0;
  double warp_ms = 0.0;
  double interpolate_ms = 0.0;
  double sample_ms = 0.0;
  double total_ms = 0.0;
};

struct EditReport {
  LatentGrid output;            // float32-quantized result at level 0
  LatentGrid latent_before;     // inverted latent at the edit step
  LatentGrid latent_after;      // same latent after warp and fill
  std::vector<InstructionReport> instructions;
  BinaryMask edit_mask;         // composed drag mask, or the user mask
  MovementField field;          // composed field (all zero for inpainting)
  std::vector<Point> blanks;
  std::size_t blanks_filled = 0;
  std::size_t collisions = 0;
  PhaseTimings timings;         // not part of the deterministic payload
};

struct ComposedEdit {
  MovementField field;
  BinaryMask mask;
  AttentionMap priority;  // collision priority for the warp
};

/// Merges per-instruction fields. Masks are united; a position claimed by
/// several instructions takes the field of the one with the highest attention
/// ratio (map weight over that instruction's handle weight), earliest first on
/// ties. Collision priority is the mean of the instruction maps.
inline ComposedEdit compose_multi_point(std::span<const InstructionReport> parts) {
  if (parts.empty()) throw ValidationError("nothing to compose");
  const int h = parts.front().mask.height(), w = parts.front().mask.width();
  MovementField field(h, w);
  BinaryMask mask(h, w, std::uint8_t{0});
  std::vector<AttentionMap> maps;
  maps.reserve(parts.size());
  for (const auto& part : parts) {
    if (!part.mask.same_shape(h, w) || !part.field.same_shape(h, w) || part.map.height() != h || part.map.width() != w) {
      throw ValidationError("instruction reports differ in shape");
    }
    maps.push_back(part.map);
  }
  for (std::size_t i = 0; i < mask.size(); ++i) {
    double best_ratio = -1.0;
    for (const auto& part : parts) {
      if (!part.mask.at(i)) continue;
      const double ratio = part.map.data()[i] / part.map[part.instruction.handle];
      if (ratio > best_ratio) {
        best_ratio = ratio;
        field.at(i) = part.field.at(i);
      }
    }
    mask.at(i) = best_ratio >= 0.0 ? 1 : 0;
  }
  return ComposedEdit{std::move(field), std::move(mask), aggregate_maps(maps)};
}

inline ToyDenoiser make_denoiser(const EditConfig& cfg, const LatentGrid& grid) {
  DenoiserConfig dc{grid.channels(), grid.height(), grid.width(), cfg.hidden, cfg.key_dim, cfg.heads, cfg.seed};
  return cfg.zero_epsilon ? ToyDenoiser::zero(dc) : ToyDenoiser::seeded(dc);
}

inline NoiseSchedule make_schedule(const EditConfig& cfg) {
  return NoiseSchedule::linear(cfg.schedule.train_steps, cfg.schedule.beta_start, cfg.schedule.beta_end);
}

/// Inversion that run_edit / run_inpaint would perform for this input.
inline InversionTrace invert_for(const LatentGrid& input, const EditConfig& cfg) {
  cfg.validate();
  return ddim_invert(input, cfg.inversion_steps, make_denoiser(cfg, input), make_schedule(cfg));
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

inline void check_point(Point p, const LatentGrid& grid, const char* field) {
  if (!grid.contains(p)) {
    throw ValidationError("point (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") outside the " +
                              std::to_string(grid.width()) + "x" + std::to_string(grid.height()) + " grid",
                          field);
  }
}

inline const InversionTrace& resolve_trace(const EditRequest& req, const InversionTrace* cached,
                                           std::optional<InversionTrace>& storage, PhaseTimings& timings) {
  if (cached) {
    if (static_cast<int>(cached->size()) != req.config.inversion_steps ||
        (!cached->latents.empty() && !cached->latents.front().same_shape(req.input))) {
      throw ValidationError("cached inversion does not match the request");
    }
    return *cached;
  }
  const auto start = Clock::now();
  storage = invert_for(req.input, req.config);
  timings.invert_ms = elapsed_ms(start);
  return *storage;
}

inline std::vector<AttentionMap> blank_rows(const InversionTrace& trace, std::span<const Point> blanks) {
  std::vector<AttentionMap> rows;
  rows.reserve(blanks.size());
  for (Point b : blanks) rows.push_back(aggregated_row(trace.attention, b));
  return rows;
}

inline void finish(EditReport& report, const EditRequest& req, const LatentGrid& latent, Clock::time_point total_start) {
  const auto start = Clock::now();
  const auto& cfg = req.config;
  report.output = ddim_sample(latent, cfg.edit_step, cfg.inversion_steps, make_denoiser(cfg, req.input),
                              make_schedule(cfg))
                      .quantized();
  report.timings.sample_ms = elapsed_ms(start);
  report.timings.total_ms = elapsed_ms(total_start);
}

}  // namespace detail

/// One-step drag edit: invert while recording attention, build the handle
/// maps, masks and fields, warp the edit-step latent, fill the blanks, and
/// sample back to level 0. Pass `cached` to reuse an inversion of the same
/// input and config.
inline EditReport run_edit(const EditRequest& req, const InversionTrace* cached = nullptr) {
  const auto total_start = detail::Clock::now();
  const EditConfig& cfg = req.config;
  cfg.validate();
  if (req.instructions.empty()) throw ValidationError("edit request has no drag instructions", "points");
  for (const auto& instr : req.instructions) {
    detail::check_point(instr.handle, req.input, "points");
    detail::check_point(instr.target, req.input, "points");
  }

  EditReport report;
  std::optional<InversionTrace> storage;
  const InversionTrace& trace = detail::resolve_trace(req, cached, storage, report.timings);
  const LatentGrid& zs = trace.level(req.input, cfg.edit_step);

  auto start = detail::Clock::now();
  for (const auto& instr : req.instructions) {
    const auto per_step = slice_all(trace.attention, instr.handle);
    AttentionMap map = aggregate_maps(per_step);
    BinaryMask mask = generate_mask(map, instr.handle, cfg.mask_config());
    const Displacement v = drag_vector(instr);
    MovementField field = cfg.per_step_fields ? compute_movement_field_per_step(per_step, instr.handle, v, mask)
                                              : compute_movement_field(map, instr.handle, v, mask);
    report.instructions.push_back(InstructionReport{instr, std::move(map), std::move(mask), std::move(field)});
  }
  ComposedEdit composed = compose_multi_point(report.instructions);
  report.timings.analysis_ms = detail::elapsed_ms(start);

  start = detail::Clock::now();
  WarpOptions options;
  if (cfg.restrict_destinations) options.destination_mask = &composed.mask;
  WarpResult warp = warp_latent(zs, composed.field, composed.priority, options);
  report.timings.warp_ms = detail::elapsed_ms(start);

  start = detail::Clock::now();
  const auto rows = detail::blank_rows(trace, warp.blanks);
  report.latent_after = interpolate_blanks(warp.warped, warp.blanks, rows);
  report.timings.interpolate_ms = detail::elapsed_ms(start);

  report.latent_before = zs;
  report.edit_mask = std::move(composed.mask);
  report.field = std::move(composed.field);
  report.blanks = std::move(warp.blanks);
  report.blanks_filled = report.blanks.size();
  report.collisions = warp.collisions;
  detail::finish(report, req, report.latent_after, total_start);
  return report;
}

/// Mask-only mode: masked positions of the edit-step latent are treated as
/// blanks and refilled from their own attention rows.
inline EditReport run_inpaint(const EditRequest& req, const InversionTrace* cached = nullptr) {
  const auto total_start = detail::Clock::now();
  const EditConfig& cfg = req.config;
  cfg.validate();
  if (!req.user_mask) throw ValidationError("inpainting needs a mask", "mask");
  const BinaryMask& mask = *req.user_mask;
  if (!mask.same_shape(req.input.height(), req.input.width())) {
    throw ValidationError("mask shape does not match the input grid", "mask");
  }
  check_binary(mask);
  if (count_set(mask) == mask.size()) throw ValidationError("mask covers the whole grid", "mask");

  EditReport report;
  std::optional<InversionTrace> storage;
  const InversionTrace& trace = detail::resolve_trace(req, cached, storage, report.timings);
  const LatentGrid& zs = trace.level(req.input, cfg.edit_step);

  auto start = detail::Clock::now();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.at(i)) report.blanks.push_back(unflatten_index(i, mask.width(), mask.height()));
  }
  const auto rows = detail::blank_rows(trace, report.blanks);
  report.timings.analysis_ms = detail::elapsed_ms(start);

  start = detail::Clock::now();
  report.latent_after = interpolate_blanks(zs, report.blanks, rows);
  report.timings.interpolate_ms = detail::elapsed_ms(start);

  report.latent_before = zs;
  report.edit_mask = mask;
  report.field = MovementField(mask.height(), mask.width());
  report.blanks_filled = report.blanks.size();
  detail::finish(report, req, report.latent_after, total_start);
  return report;
}

/// Dispatches on request shape: instructions select drag mode, a lone mask
/// selects inpainting.
inline EditReport run_request(const EditRequest& req, const InversionTrace* cached = nullptr) {
  if (!req.instructions.empty() && req.user_mask) {
    throw ValidationError("give either drag points or an inpainting mask, not both", "mask");
  }
  if (req.user_mask) return run_inpaint(req, cached);
  if (req.instructions.empty()) throw ValidationError("request needs drag points or a mask", "points");
  return run_edit(req, cached);
}

/// Baseline with no edit: invert to the edit step and sample straight back.
inline LatentGrid invert_sample_baseline(const LatentGrid& input, const EditConfig& cfg) {
  const InversionTrace trace = invert_for(input, cfg);
  return ddim_sample(trace.level(input, cfg.edit_step), cfg.edit_step, cfg.inversion_steps,
                     make_denoiser(cfg, input), make_schedule(cfg))
      .quantized();
}

}  // namespace attention_drag

#endif  // ATTENTION_DRAG_EDIT_PIPELINE_HPP_
