// Copyright 2026 The attention-drag Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTENTION_DRAG_SERVICE_HTTP_HPP_
#define ATTENTION_DRAG_SERVICE_HTTP_HPP_

#include <functional>
#include <string>

#include "httplib.h"

#include "attention_drag/service_api.hpp"

namespace attention_drag {

namespace http_detail {

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                       const std::string& field = {}) {
  json body{{"code", code}, {"message", message}};
  if (!field.empty()) body["field"] = field;
  send_json(res, status, body);
}

// Maps library exceptions onto the {code, message, field?} error body.
inline void guarded(httplib::Response& res, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    send_error(res, 400, "validation_error", e.what(), e.field());
  } catch (const NotFoundError& e) {
    send_error(res, 404, "not_found", e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, "malformed_json", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal_error", e.what());
  }
}

inline int int_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) throw ValidationError(std::string("missing query parameter '") + name + "'", name);
  const std::string v = req.get_param_value(name);
  std::size_t used = 0;
  int out = 0;
  try {
    out = std::stoi(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ValidationError(std::string("query parameter '") + name + "' must be an integer", name);
  return out;
}

inline double double_param(const httplib::Request& req, const char* name, double fallback) {
  if (!req.has_param(name)) return fallback;
  const std::string v = req.get_param_value(name);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ValidationError(std::string("query parameter '") + name + "' must be a number", name);
  return out;
}

inline json created_json(const EditService::Created& c) {
  return json{{"id", c.id},
              {"status", to_string(c.status)},
              {"channels", c.channels},
              {"height", c.height},
              {"width", c.width}};
}

inline std::size_t edit_index(const std::string& text) {
  try {
    return static_cast<std::size_t>(std::stoull(text));
  } catch (const std::exception&) {
    throw NotFoundError("edit '" + text + "' not found");
  }
}

}  // namespace http_detail

/// Mounts the session endpoints on `server`:
///   POST /sessions                          JSON {scene|grid, config?, request_token?} or raw LGRD body
///   GET  /sessions/{id}
///   GET  /sessions/{id}/attention?x=&y=     add format=ppm for a heatmap
///   GET  /sessions/{id}/mask?x=&y=&tau=     add format=ppm for an overlay
///   POST /sessions/{id}/edits               JSON {points|mask, overrides?}
///   GET  /sessions/{id}/edits/{n}           report JSON
///   GET  /sessions/{id}/edits/{n}/result    LGRD bytes
///   GET  /sessions/{id}/edits/{n}/result.ppm
inline void register_routes(httplib::Server& server, EditService& service) {
  using namespace http_detail;

  server.Post("/sessions", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string token = req.get_header_value("X-Request-Token");
      if (req.get_header_value("Content-Type") == "application/octet-stream") {
        const auto* p = reinterpret_cast<const std::uint8_t*>(req.body.data());
        LatentGrid grid = deserialize_grid(std::span<const std::uint8_t>(p, req.body.size()));
        send_json(res, 201, created_json(service.create_session(std::move(grid), EditConfig{}, token)));
        return;
      }
      const json body = json::parse(req.body.empty() ? std::string("{}") : req.body);
      if (!body.is_object()) throw ValidationError("request body must be a JSON object");
      const EditConfig cfg = body.contains("config") ? config_from_json(body.at("config")) : EditConfig{};
      const std::string tok = body.value("request_token", token);
      if (body.contains("scene")) {
        send_json(res, 201, created_json(service.create_scene_session(body.at("scene").get<std::string>(), cfg, tok)));
      } else if (body.contains("grid")) {
        send_json(res, 201, created_json(service.create_session(grid_from_json(body.at("grid")), cfg, tok)));
      } else {
        throw ValidationError("body needs a 'scene' name or a 'grid'", "grid");
      }
    });
  });

  server.Get(R"(/sessions/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, service.describe(req.matches[1])); });
  });

  server.Get(R"(/sessions/([^/]+)/attention)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Point q{int_param(req, "x"), int_param(req, "y")};
      const AttentionMap map = service.attention(req.matches[1], q);
      if (req.get_param_value("format") == "ppm") {
        res.set_content(heatmap_to_ppm(map.weights()), "image/x-portable-pixmap");
        return;
      }
      json body = map_to_json(map);
      body["query"] = q;
      send_json(res, 200, body);
    });
  });

  server.Get(R"(/sessions/([^/]+)/mask)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Point h{int_param(req, "x"), int_param(req, "y")};
      const double tau = double_param(req, "tau", EditConfig{}.tau);
      const BinaryMask mask = service.preview_mask(req.matches[1], h, tau);
      if (req.get_param_value("format") == "ppm") {
        res.set_content(mask_overlay_ppm(service.input(req.matches[1]), mask), "image/x-portable-pixmap");
        return;
      }
      json body = mask_to_json(mask);
      body["handle"] = h;
      body["tau"] = tau;
      send_json(res, 200, body);
    });
  });

  server.Post(R"(/sessions/([^/]+)/edits)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      const json body = json::parse(req.body.empty() ? std::string("{}") : req.body);
      if (!body.is_object()) throw ValidationError("request body must be a JSON object");
      std::vector<DragInstruction> points;
      if (body.contains("points")) {
        const json& p = body.at("points");
        if (p.is_string()) {
          points = parse_points(p.get<std::string>());
        } else {
          try {
            points = p.get<std::vector<DragInstruction>>();
          } catch (const json::exception&) {
            throw ValidationError("points must be [{handle:{x,y}, target:{x,y}}, ...] or \"x0,y0:x1,y1;...\"", "points");
          }
        }
      }
      std::optional<BinaryMask> mask;
      if (body.contains("mask")) mask = mask_from_json(body.at("mask"));
      const std::size_t n = service.apply_edit(id, std::move(points), std::move(mask),
                                               body.contains("overrides") ? body.at("overrides") : json::object());
      const auto report = service.report(id, n);
      const std::string base = "/sessions/" + id + "/edits/" + std::to_string(n);
      send_json(res, 201,
                json{{"edit", n},
                     {"report", base},
                     {"result", base + "/result"},
                     {"result_ppm", base + "/result.ppm"},
                     {"blanks_filled", report->blanks_filled},
                     {"collisions", report->collisions},
                     {"timings", timings_to_json(report->timings)}});
    });
  });

  server.Get(R"(/sessions/([^/]+)/edits/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, report_to_json(*service.report(req.matches[1], edit_index(req.matches[2])))); });
  });

  server.Get(R"(/sessions/([^/]+)/edits/([^/]+)/result)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto bytes = service.result_bytes(req.matches[1], edit_index(req.matches[2]));
      res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
    });
  });

  server.Get(R"(/sessions/([^/]+)/edits/([^/]+)/result\.ppm)",
             [&service](const httplib::Request& req, httplib::Response& res) {
               guarded(res, [&] {
                 res.set_content(service.result_ppm(req.matches[1], edit_index(req.matches[2])),
                                 "image/x-portable-pixmap");
               });
             });
}

}  // namespace attention_drag

#endif  // ATTENTION_DRAG_SERVICE_HTTP_HPP_
