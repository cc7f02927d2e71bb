// Copyright 2026 The attention-drag Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTENTION_DRAG_SERVICE_API_HPP_
#define ATTENTION_DRAG_SERVICE_API_HPP_

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "attention_drag/edit_pipeline.hpp"
#include "attention_drag/eval_harness.hpp"
#include "attention_drag/io.hpp"

namespace attention_drag {

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SessionStatus { created, inverted, edited };

inline const char* to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::created: return "created";
    case SessionStatus::inverted: return "inverted";
    case SessionStatus::edited: return "edited";
  }
  return "unknown";
}

/// Scenes that can be created by name.
inline SyntheticScene named_scene(const std::string& name) {
  if (name == "blob-8x8") return make_scene(4, 8, 8, {Blob{{4, 4}, 2.5, 1.5}});
  if (name == "blob-16x16") return make_scene(4, 16, 16, {Blob{{6, 8}, 3.0, 1.5}});
  if (name == "blob-32x32") return make_scene(4, 32, 32, {Blob{{12, 16}, 3.5, 2.0}});
  if (name == "two-blobs-32x32") {
    return make_scene(4, 32, 32, {Blob{{9, 10}, 3.5, 2.0}, Blob{{22, 21}, 3.0, 1.5}});
  }
  throw ValidationError("unknown scene '" + name + "'", "scene");
}

inline bool same_inversion(const EditConfig& a, const EditConfig& b) {
  return a.inversion_steps == b.inversion_steps && a.seed == b.seed && a.hidden == b.hidden &&
         a.key_dim == b.key_dim && a.heads == b.heads && a.zero_epsilon == b.zero_epsilon && a.schedule == b.schedule;
}

/// In-memory session store over the edit pipeline. Sessions are independent;
/// calls on one session are serialized by its own lock.
class EditService {
 public:
  struct Created {
    std::string id;
    SessionStatus status;
    int channels, height, width;
  };

  explicit EditService(std::optional<std::filesystem::path> persist_dir = std::nullopt)
      : persist_dir_(std::move(persist_dir)) {
    if (persist_dir_) std::filesystem::create_directories(*persist_dir_);
  }

  /// A repeated non-empty `request_token` returns the session it created first.
  Created create_session(LatentGrid grid, EditConfig config, const std::string& request_token = {}) {
    config.validate();
    std::lock_guard lock(store_mutex_);
    if (!request_token.empty()) {
      if (auto it = tokens_.find(request_token); it != tokens_.end()) return describe_created(*sessions_.at(it->second));
    }
    auto s = std::make_shared<Session>();
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(++next_id_));
    s->id = buf;
    s->input = std::move(grid);
    s->config = config;
    sessions_[s->id] = s;
    if (!request_token.empty()) tokens_[request_token] = s->id;
    persist(*s, "input.lgrd", serialize_grid(s->input));
    return describe_created(*s);
  }

  Created create_scene_session(const std::string& scene, EditConfig config, const std::string& request_token = {}) {
    return create_session(named_scene(scene).grid, config, request_token);
  }

  json describe(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    return json{{"id", s->id},
                {"status", to_string(s->status)},
                {"channels", s->input.channels()},
                {"height", s->input.height()},
                {"width", s->input.width()},
                {"config", config_to_json(s->config)},
                {"edits", s->edits.size()}};
  }

  SessionStatus status(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    return s->status;
  }

  /// Aggregated attention row of `query`; inverts on first use.
  AttentionMap attention(const std::string& id, Point query) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    check_point(*s, query, "x");
    return aggregated_row(ensure_trace(*s).attention, query);
  }

  /// Mask the session would generate for `handle` at `tau`. Does not change
  /// the session beyond the cached inversion.
  BinaryMask preview_mask(const std::string& id, Point handle, double tau) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    check_point(*s, handle, "x");
    MaskConfig cfg = s->config.mask_config();
    cfg.tau = tau;
    cfg.validate();
    return generate_mask(aggregated_row(ensure_trace(*s).attention, handle), handle, cfg);
  }

  /// Runs an edit (drag points) or inpainting (mask) and stores the report as
  /// a new version. Returns the 1-based version number.
  std::size_t apply_edit(const std::string& id, std::vector<DragInstruction> points, std::optional<BinaryMask> mask,
                         const json& overrides = json::object()) {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    EditConfig cfg = overrides.is_null() ? s->config : config_from_json(overrides, s->config);
    EditRequest req{s->input, std::move(points), std::move(mask), cfg};
    const InversionTrace& trace = ensure_trace(*s);
    const InversionTrace* cached = same_inversion(cfg, s->config) ? &trace : nullptr;
    auto report = std::make_shared<const EditReport>(run_request(req, cached));
    s->edits.push_back(report);
    s->status = SessionStatus::edited;
    const std::size_t n = s->edits.size();
    persist(*s, "edit-" + std::to_string(n) + ".lgrd", serialize_grid(report->output));
    const std::string text = report_to_json(*report).dump(2);
    persist(*s, "edit-" + std::to_string(n) + ".json", std::vector<std::uint8_t>(text.begin(), text.end()));
    return n;
  }

  std::shared_ptr<const EditReport> report(const std::string& id, std::size_t n) const {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    if (n == 0 || n > s->edits.size()) throw NotFoundError("edit " + std::to_string(n) + " not found in session " + id);
    return s->edits[n - 1];
  }

  std::vector<std::uint8_t> result_bytes(const std::string& id, std::size_t n) const {
    return serialize_grid(report(id, n)->output);
  }

  std::string result_ppm(const std::string& id, std::size_t n) const { return grid_to_ppm(report(id, n)->output); }

  LatentGrid input(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->mutex);
    return s->input;
  }

 private:
  struct Session {
    std::string id;
    LatentGrid input;
    EditConfig config;
    SessionStatus status = SessionStatus::created;
    std::optional<InversionTrace> trace;
    std::vector<std::shared_ptr<const EditReport>> edits;
    mutable std::mutex mutex;
  };

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lock(store_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("session '" + id + "' not found");
    return it->second;
  }

  static Created describe_created(const Session& s) {
    return Created{s.id, s.status, s.input.channels(), s.input.height(), s.input.width()};
  }

  static void check_point(const Session& s, Point p, const char* field) {
    if (!s.input.contains(p)) throw ValidationError("point outside the session grid", field);
  }

  const InversionTrace& ensure_trace(Session& s) {
    if (!s.trace) {
      s.trace = invert_for(s.input, s.config);
      if (s.status == SessionStatus::created) s.status = SessionStatus::inverted;
    }
    return *s.trace;
  }

  void persist(const Session& s, const std::string& name, const std::vector<std::uint8_t>& bytes) const {
    if (!persist_dir_) return;
    const auto dir = *persist_dir_ / s.id;
    std::filesystem::create_directories(dir);
    write_file(dir / name, bytes);
  }

  std::optional<std::filesystem::path> persist_dir_;
  mutable std::mutex store_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::string> tokens_;
  unsigned long long next_id_ = 0;
};

}  // namespace attention_drag

#endif  // ATTENTION_DRAG_SERVICE_API_HPP_
