// Copyright 2026 The attention-drag Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTENTION_DRAG_ATTENTION_ANALYSIS_HPP_
#define ATTENTION_DRAG_ATTENTION_ANALYSIS_HPP_

#include <span>
#include <vector>

#include "attention_drag/diffusion_substrate.hpp"
#include "attention_drag/latent_core.hpp"

namespace attention_drag {

/// Attention paid by `query` to every position, reshaped to H x W. The weight
/// at (x, y) is record[query, (x, y)].
inline AttentionMap slice_attention_row(const AttentionRecord& record, Point query) {
  const std::size_t r = flatten_index(query, record.width(), record.height());
  const auto row = record.row(r);
  return AttentionMap(record.height(), record.width(), std::vector<double>(row.begin(), row.end()));
}

/// Handle-point slice. Same row extraction as slice_attention_row; kept as its
/// own entry point because the handle map drives both mask and movement.
inline AttentionMap slice_attention_map(const AttentionRecord& record, Point handle) {
  return slice_attention_row(record, handle);
}

/// Element-wise mean over timesteps.
inline AttentionMap aggregate_maps(std::span<const AttentionMap> maps) {
  if (maps.empty()) throw ValidationError("cannot aggregate an empty set of attention maps");
  const int h = maps.front().height();
  const int w = maps.front().width();
  std::vector<double> sum(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), 0.0);
  for (const auto& m : maps) {
    if (m.height() != h || m.width() != w) throw ValidationError("attention maps differ in shape");
    const auto d = m.data();
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += d[i];
  }
  const double inv = 1.0 / static_cast<double>(maps.size());
  for (double& v : sum) v *= inv;
  return AttentionMap(h, w, std::move(sum));
}

inline std::vector<AttentionMap> slice_all(std::span<const AttentionRecord> records, Point query) {
  std::vector<AttentionMap> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(slice_attention_row(r, query));
  return out;
}

/// Row of `query` averaged over every record.
inline AttentionMap aggregated_row(std::span<const AttentionRecord> records, Point query) {
  if (records.empty()) throw ValidationError("no attention records to aggregate");
  const auto maps = slice_all(records, query);
  return aggregate_maps(maps);
}

}  // namespace attention_drag

#endif  // ATTENTION_DRAG_ATTENTION_ANALYSIS_HPP_
