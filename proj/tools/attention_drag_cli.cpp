// Copyright 2026 The attention-drag Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: drag edits, inpainting, scenes, tau sweeps and the
// HTTP service. Exit code 0 on success, 2 on invalid input, 1 otherwise.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "attention_drag/attention_drag.hpp"
#include "attention_drag/service_http.hpp"

namespace ad = attention_drag;

namespace {

constexpr int kExitValidation = 2;

struct ConfigFlags {
  std::string config_path;
  double tau = 2.0;
  int steps = 10;
  int edit_step = 5;
  std::uint64_t seed = 0;
  int dilation = 0;
  bool per_step_fields = false;
  bool restrict_destinations = false;
  bool zero_epsilon = false;

  CLI::Option* tau_opt = nullptr;
  CLI::Option* steps_opt = nullptr;
  CLI::Option* edit_step_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* dilation_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON file with EditConfig fields");
    tau_opt = app->add_option("--tau", tau, "mask threshold ratio");
    steps_opt = app->add_option("--steps", steps, "DDIM inversion steps");
    edit_step_opt = app->add_option("--edit-step", edit_step, "inversion level at which the edit is applied");
    seed_opt = app->add_option("--seed", seed, "denoiser seed");
    dilation_opt = app->add_option("--dilation", dilation, "square mask dilation radius");
    app->add_flag("--per-step-fields", per_step_fields, "average per-timestep movement fields");
    app->add_flag("--restrict-destinations", restrict_destinations, "drop moves that leave the mask");
    app->add_flag("--zero-epsilon", zero_epsilon, "use the all-zero denoiser");
  }

  // File values first, then any flag given on the command line.
  ad::EditConfig resolve() const {
    ad::EditConfig cfg;
    if (!config_path.empty()) {
      const auto bytes = ad::read_file(config_path);
      ad::json j;
      try {
        j = ad::json::parse(bytes.begin(), bytes.end());
      } catch (const ad::json::exception& e) {
        throw ad::ValidationError(std::string("config file is not valid JSON: ") + e.what(), "config");
      }
      cfg = ad::config_from_json(j);
    }
    if (tau_opt->count()) cfg.tau = tau;
    if (steps_opt->count()) cfg.inversion_steps = steps;
    if (edit_step_opt->count()) cfg.edit_step = edit_step;
    if (seed_opt->count()) cfg.seed = seed;
    if (dilation_opt->count()) cfg.dilation_radius = dilation;
    if (per_step_fields) cfg.per_step_fields = true;
    if (restrict_destinations) cfg.restrict_destinations = true;
    if (zero_epsilon) cfg.zero_epsilon = true;
    cfg.validate();
    return cfg;
  }
};

struct Outputs {
  std::string out;
  std::string report;
  std::string ppm;

  void attach(CLI::App* app) {
    app->add_option("--out", out, "output LGRD grid")->required();
    app->add_option("--report", report, "write the edit report as JSON");
    app->add_option("--ppm", ppm, "also render the output as PPM");
  }

  void write(const ad::EditReport& r) const {
    ad::write_file(out, ad::serialize_grid(r.output));
    if (!report.empty()) ad::write_file(report, ad::report_to_json(r).dump(2));
    if (!ppm.empty()) ad::write_file(ppm, ad::grid_to_ppm(r.output));
  }
};

void print_summary(const ad::EditReport& r) {
  std::cout << "blanks_filled=" << r.blanks_filled << " collisions=" << r.collisions
            << " mask_px=" << ad::count_set(r.edit_mask) << " total_ms=" << r.timings.total_ms << "\n";
}

std::vector<double> parse_taus(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ad::ValidationError("cannot parse tau value '" + item + "'", "taus");
    out.push_back(v);
  }
  if (out.empty()) throw ad::ValidationError("no tau values given", "taus");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attention-guided one-step drag editing on a toy latent diffusion model"};
  app.require_subcommand(1);

  // edit
  auto* edit = app.add_subcommand("edit", "drag handle points toward targets");
  std::string edit_input, points;
  ConfigFlags edit_cfg;
  Outputs edit_out;
  edit->add_option("--input", edit_input, "input LGRD grid")->required();
  edit->add_option("--points", points, "x0,y0:x1,y1;... handle/target pairs")->required();
  edit_cfg.attach(edit);
  edit_out.attach(edit);

  // inpaint
  auto* inpaint = app.add_subcommand("inpaint", "refill masked positions from attention");
  std::string inpaint_input, mask_path;
  ConfigFlags inpaint_cfg;
  Outputs inpaint_out;
  inpaint->add_option("--input", inpaint_input, "input LGRD grid")->required();
  inpaint->add_option("--mask", mask_path, "mask as JSON bit rows or LGRD")->required();
  inpaint_cfg.attach(inpaint);
  inpaint_out.attach(inpaint);

  // scene
  auto* scene = app.add_subcommand("scene", "write a synthetic blob scene");
  std::string scene_name = "blob-32x32", scene_out;
  std::optional<std::uint64_t> scene_seed;
  scene->add_option("--name", scene_name, "named scene");
  scene->add_option("--random-seed", scene_seed, "random one-blob drag scene instead of a named one");
  scene->add_option("--out", scene_out, "output LGRD grid")->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "tau ablation on a random drag scene");
  std::uint64_t sweep_scene = 0;
  std::string taus_text = "1.8,1.9,2.0,2.1", sweep_json;
  ConfigFlags sweep_cfg;
  sweep->add_option("--scene-seed", sweep_scene, "random drag scene seed");
  sweep->add_option("--taus", taus_text, "comma-separated tau values");
  sweep->add_option("--json", sweep_json, "write rows as JSON");
  sweep_cfg.attach(sweep);

  // render
  auto* render = app.add_subcommand("render", "convert an LGRD grid to PPM");
  std::string render_in, render_out;
  render->add_option("--input", render_in)->required();
  render->add_option("--out", render_out)->required();

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP session service");
  std::string host = "127.0.0.1", persist;
  int port = 8080;
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--persist", persist, "directory for LGRD results and JSON reports");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*edit) {
      ad::EditRequest req{ad::load_grid(edit_input), ad::parse_points(points), std::nullopt, edit_cfg.resolve()};
      const ad::EditReport r = ad::run_edit(req);
      edit_out.write(r);
      print_summary(r);
    } else if (*inpaint) {
      ad::EditRequest req{ad::load_grid(inpaint_input), {}, ad::load_mask(mask_path), inpaint_cfg.resolve()};
      const ad::EditReport r = ad::run_inpaint(req);
      inpaint_out.write(r);
      print_summary(r);
    } else if (*scene) {
      if (scene_seed) {
        const auto ds = ad::random_drag_scene(*scene_seed);
        ad::write_file(scene_out, ad::serialize_grid(ds.scene.grid));
        const auto& i = ds.instruction;
        std::cout << i.handle.x << "," << i.handle.y << ":" << i.target.x << "," << i.target.y << "\n";
      } else {
        ad::write_file(scene_out, ad::serialize_grid(ad::named_scene(scene_name).grid));
      }
    } else if (*sweep) {
      const auto ds = ad::random_drag_scene(sweep_scene);
      const auto taus = parse_taus(taus_text);
      const auto rows = ad::tau_sweep(ds.scene, ds.instruction, taus, sweep_cfg.resolve());
      std::cout << ad::sweep_table(rows);
      if (!sweep_json.empty()) ad::write_file(sweep_json, ad::sweep_to_json(rows).dump(2));
    } else if (*render) {
      ad::write_file(render_out, ad::grid_to_ppm(ad::load_grid(render_in)));
    } else if (*serve) {
      ad::EditService service(persist.empty() ? std::nullopt : std::optional<std::filesystem::path>(persist));
      httplib::Server server;
      ad::register_routes(server, service);
      std::cout << "listening on " << host << ":" << port << std::endl;
      if (!server.listen(host, port)) {
        std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
        return 1;
      }
    }
  } catch (const ad::ValidationError& e) {
    std::cerr << "error: " << e.what();
    if (!e.field().empty()) std::cerr << " [" << e.field() << "]";
    std::cerr << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
