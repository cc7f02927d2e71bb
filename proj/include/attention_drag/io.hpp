// Copyright 2026 The attention-drag Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTENTION_DRAG_IO_HPP_
#define ATTENTION_DRAG_IO_HPP_

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "attention_drag/edit_pipeline.hpp"
#include "attention_drag/eval_harness.hpp"
#include "attention_drag/latent_core.hpp"

namespace attention_drag {

using json = nlohmann::json;

// Point / instructions --------------------------------------------------------

inline void to_json(json& j, const Point& p) { j = json{{"x", p.x}, {"y", p.y}}; }
inline void from_json(const json& j, Point& p) {
  j.at("x").get_to(p.x);
  j.at("y").get_to(p.y);
}

inline void to_json(json& j, const DragInstruction& d) { j = json{{"handle", d.handle}, {"target", d.target}}; }
inline void from_json(const json& j, DragInstruction& d) {
  j.at("handle").get_to(d.handle);
  j.at("target").get_to(d.target);
}

// Planes ------------------------------------------------------------------------

inline json mask_to_json(const BinaryMask& mask) {
  json rows = json::array();
  for (int y = 0; y < mask.height(); ++y) {
    json row = json::array();
    for (int x = 0; x < mask.width(); ++x) row.push_back(static_cast<int>(mask[{x, y}]));
    rows.push_back(std::move(row));
  }
  return json{{"height", mask.height()}, {"width", mask.width()}, {"bits", std::move(rows)}};
}

/// Accepts {"bits": [[...], ...]} or a bare array of rows.
inline BinaryMask mask_from_json(const json& j) {
  const json& rows = j.is_array() ? j : j.at("bits");
  if (!rows.is_array() || rows.empty() || !rows.front().is_array() || rows.front().empty()) {
    throw ValidationError("mask must be a non-empty array of bit rows", "mask");
  }
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.front().size());
  BinaryMask mask(h, w, std::uint8_t{0});
  for (int y = 0; y < h; ++y) {
    const json& row = rows[static_cast<std::size_t>(y)];
    if (!row.is_array() || static_cast<int>(row.size()) != w) throw ValidationError("mask rows differ in length", "mask");
    for (int x = 0; x < w; ++x) {
      const json& bit = row[static_cast<std::size_t>(x)];
      if (!bit.is_number_integer() || (bit.get<int>() != 0 && bit.get<int>() != 1)) {
        throw ValidationError("mask entries must be 0 or 1", "mask");
      }
      mask[{x, y}] = static_cast<std::uint8_t>(bit.get<int>());
    }
  }
  return mask;
}

inline json field_to_json(const MovementField& field) {
  json rows = json::array();
  for (int y = 0; y < field.height(); ++y) {
    json row = json::array();
    for (int x = 0; x < field.width(); ++x) row.push_back(json::array({field[{x, y}].dx, field[{x, y}].dy}));
    rows.push_back(std::move(row));
  }
  return json{{"height", field.height()}, {"width", field.width()}, {"vectors", std::move(rows)}};
}

inline json weights_to_json(const WeightPlane& weights) {
  json rows = json::array();
  for (int y = 0; y < weights.height(); ++y) {
    json row = json::array();
    for (int x = 0; x < weights.width(); ++x) row.push_back(weights[{x, y}]);
    rows.push_back(std::move(row));
  }
  return json{{"height", weights.height()}, {"width", weights.width()}, {"weights", std::move(rows)}};
}

inline json map_to_json(const AttentionMap& map) { return weights_to_json(map.weights()); }

inline json points_to_json(std::span<const Point> points) {
  json out = json::array();
  for (Point p : points) out.push_back(p);
  return out;
}

// Grids ------------------------------------------------------------------------

inline json grid_to_json(const LatentGrid& g) {
  return json{{"channels", g.channels()},
              {"height", g.height()},
              {"width", g.width()},
              {"values", std::vector<double>(g.values().begin(), g.values().end())}};
}

inline LatentGrid grid_from_json(const json& j) {
  try {
    return LatentGrid(j.at("channels").get<int>(), j.at("height").get<int>(), j.at("width").get<int>(),
                      j.at("values").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed grid: ") + e.what(), "grid");
  }
}

// Config -----------------------------------------------------------------------

inline json config_to_json(const EditConfig& c) {
  return json{{"inversion_steps", c.inversion_steps},
              {"edit_step", c.edit_step},
              {"tau", c.tau},
              {"include_handle", c.include_handle},
              {"dilation_radius", c.dilation_radius},
              {"per_step_fields", c.per_step_fields},
              {"restrict_destinations", c.restrict_destinations},
              {"seed", c.seed},
              {"hidden", c.hidden},
              {"key_dim", c.key_dim},
              {"heads", c.heads},
              {"zero_epsilon", c.zero_epsilon},
              {"schedule",
               {{"train_steps", c.schedule.train_steps},
                {"beta_start", c.schedule.beta_start},
                {"beta_end", c.schedule.beta_end}}}};
}

/// Overlays the fields present in `j` onto `base`. Unknown keys are rejected
/// so typos surface as validation errors.
inline EditConfig config_from_json(const json& j, EditConfig base = {}) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object", "config");
  auto read = [&](const json& obj, const char* key, auto& dst, const std::string& path) {
    if (!obj.contains(key)) return;
    try {
      obj.at(key).get_to(dst);
    } catch (const json::exception&) {
      throw ValidationError("config field has the wrong type", path);
    }
  };
  static const char* kKeys[] = {"inversion_steps", "edit_step", "tau",    "include_handle", "dilation_radius",
                                "per_step_fields", "restrict_destinations", "seed", "hidden", "key_dim",
                                "heads",           "zero_epsilon",          "schedule"};
  for (const auto& item : j.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return item.key() == k; }) ==
        std::end(kKeys)) {
      throw ValidationError("unknown config field '" + item.key() + "'", item.key());
    }
  }
  read(j, "inversion_steps", base.inversion_steps, "inversion_steps");
  read(j, "edit_step", base.edit_step, "edit_step");
  read(j, "tau", base.tau, "tau");
  read(j, "include_handle", base.include_handle, "include_handle");
  read(j, "dilation_radius", base.dilation_radius, "dilation_radius");
  read(j, "per_step_fields", base.per_step_fields, "per_step_fields");
  read(j, "restrict_destinations", base.restrict_destinations, "restrict_destinations");
  read(j, "seed", base.seed, "seed");
  read(j, "hidden", base.hidden, "hidden");
  read(j, "key_dim", base.key_dim, "key_dim");
  read(j, "heads", base.heads, "heads");
  read(j, "zero_epsilon", base.zero_epsilon, "zero_epsilon");
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    if (!s.is_object()) throw ValidationError("schedule must be an object", "schedule");
    read(s, "train_steps", base.schedule.train_steps, "schedule.train_steps");
    read(s, "beta_start", base.schedule.beta_start, "schedule.beta_start");
    read(s, "beta_end", base.schedule.beta_end, "schedule.beta_end");
  }
  base.validate();
  return base;
}

// Reports ----------------------------------------------------------------------

inline json timings_to_json(const PhaseTimings& t) {
  return json{{"invert_ms", t.invert_ms},         {"analysis_ms", t.analysis_ms}, {"warp_ms", t.warp_ms},
              {"interpolate_ms", t.interpolate_ms}, {"sample_ms", t.sample_ms},     {"total_ms", t.total_ms}};
}

inline json report_to_json(const EditReport& r, bool include_timings = true) {
  json instrs = json::array();
  for (const auto& ir : r.instructions) {
    instrs.push_back(json{{"instruction", ir.instruction},
                          {"mask", mask_to_json(ir.mask)},
                          {"field", field_to_json(ir.field)},
                          {"map", map_to_json(ir.map)}});
  }
  json out{{"shape", {{"channels", r.output.channels()}, {"height", r.output.height()}, {"width", r.output.width()}}},
           {"instructions", std::move(instrs)},
           {"edit_mask", mask_to_json(r.edit_mask)},
           {"field", field_to_json(r.field)},
           {"blanks", points_to_json(r.blanks)},
           {"blanks_filled", r.blanks_filled},
           {"collisions", r.collisions}};
  if (include_timings) out["timings"] = timings_to_json(r.timings);
  return out;
}

namespace detail {
inline void append_doubles(std::vector<std::uint8_t>& out, std::span<const double> values) {
  const std::size_t at = out.size();
  out.resize(at + values.size() * sizeof(double));
  if (!values.empty()) std::memcpy(out.data() + at, values.data(), values.size() * sizeof(double));
}
}  // namespace detail

/// Deterministic payload of a report: everything except wall-clock timings,
/// with latents in full internal precision.
inline std::vector<std::uint8_t> canonical_report_bytes(const EditReport& r) {
  const std::string text = report_to_json(r, false).dump();
  std::vector<std::uint8_t> out(text.begin(), text.end());
  detail::append_doubles(out, r.output.values());
  detail::append_doubles(out, r.latent_before.values());
  detail::append_doubles(out, r.latent_after.values());
  return out;
}

inline json sweep_to_json(std::span<const SweepRow> rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back(json{{"tau", r.tau},
                       {"md", r.md ? json(*r.md) : json(nullptr)},
                       {"fidelity", r.fidelity},
                       {"mask_size", r.mask_size},
                       {"timings", timings_to_json(r.timings)}});
  }
  return out;
}

// Text formats -----------------------------------------------------------------

/// Parses "x0,y0:x1,y1;x0,y0:x1,y1" into handle/target pairs.
inline std::vector<DragInstruction> parse_points(const std::string& text) {
  std::vector<DragInstruction> out;
  std::stringstream pairs(text);
  std::string pair;
  while (std::getline(pairs, pair, ';')) {
    if (pair.find_first_not_of(" \t") == std::string::npos) continue;
    int hx = 0, hy = 0, tx = 0, ty = 0;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream is(pair);
    if (!(is >> hx >> c1 >> hy >> c2 >> tx >> c3 >> ty) || c1 != ',' || c2 != ':' || c3 != ',') {
      throw ValidationError("cannot parse point pair '" + pair + "', expected x0,y0:x1,y1", "points");
    }
    is >> std::ws;
    if (!is.eof()) throw ValidationError("trailing characters in point pair '" + pair + "'", "points");
    out.push_back(DragInstruction{{hx, hy}, {tx, ty}});
  }
  if (out.empty()) throw ValidationError("no point pairs given", "points");
  return out;
}

// Files ------------------------------------------------------------------------

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'", "path");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline LatentGrid load_grid(const std::filesystem::path& path) { return deserialize_grid(read_file(path)); }

/// Mask file: JSON bit rows, or an LGRD grid whose channel 0 is nonzero on
/// masked positions.
inline BinaryMask load_mask(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (wire::has_magic(bytes, kGridMagic)) {
    const LatentGrid g = deserialize_grid(bytes);
    BinaryMask mask(g.height(), g.width(), std::uint8_t{0});
    for (int y = 0; y < g.height(); ++y) {
      for (int x = 0; x < g.width(); ++x) mask[{x, y}] = g(0, y, x) != 0.0 ? 1 : 0;
    }
    return mask;
  }
  try {
    return mask_from_json(json::parse(bytes.begin(), bytes.end()));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("mask file is neither LGRD nor JSON: ") + e.what(), "mask");
  }
}

}  // namespace attention_drag

#endif  // ATTENTION_DRAG_IO_HPP_
