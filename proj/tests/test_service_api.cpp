// Copyright 2026 The attention-drag Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <thread>

#include "attention_drag/attention_drag.hpp"
#include "attention_drag/service_http.hpp"
#include "oracles.hpp"

namespace ad = attention_drag;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("attention_drag_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return std::vector<std::uint8_t>(s.begin(), s.end()); }

class HttpFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    ad::register_routes(server_, service_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(60, 0);
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  std::string create(const ad::json& body) {
    auto res = client_->Post("/sessions", body.dump(), "application/json");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 201);
    return ad::json::parse(res->body)["id"];
  }

  ad::EditService service_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

TEST(EditService, CreateNamedSceneAndIdempotentToken) {
  ad::EditService svc;
  const auto a = svc.create_scene_session("blob-8x8", {});
  EXPECT_EQ(a.status, ad::SessionStatus::created);
  EXPECT_EQ(a.height, 8);
  const auto b = svc.create_scene_session("blob-8x8", {}, "tok");
  const auto c = svc.create_scene_session("blob-16x16", {}, "tok");
  EXPECT_EQ(b.id, c.id);
  EXPECT_EQ(c.height, 8);
  EXPECT_NE(a.id, b.id);
  EXPECT_THROW(svc.create_scene_session("nope", {}), ad::ValidationError);
}

TEST(EditService, LazyInversionAndStatus) {
  ad::EditService svc;
  const auto id = svc.create_scene_session("blob-8x8", {}).id;
  EXPECT_EQ(svc.status(id), ad::SessionStatus::created);
  const auto map = svc.attention(id, {4, 4});
  EXPECT_EQ(svc.status(id), ad::SessionStatus::inverted);
  const auto scene = ad::named_scene("blob-8x8");
  const auto trace = ad::invert_for(scene.grid, {});
  EXPECT_EQ(map, ad::aggregated_row(trace.attention, {4, 4}));
  EXPECT_THROW(svc.attention(id, {8, 0}), ad::ValidationError);
  EXPECT_THROW(svc.attention("missing", {0, 0}), ad::NotFoundError);
}

TEST(EditService, UniformAttentionWithZeroHook) {
  ad::EditService svc;
  ad::EditConfig cfg;
  cfg.zero_epsilon = true;
  const auto id = svc.create_scene_session("blob-8x8", cfg).id;
  const auto map = svc.attention(id, {1, 2});
  for (double w : map.data()) EXPECT_EQ(w, 1.0 / 64.0);
}

TEST(EditService, PreviewMask) {
  ad::EditService svc;
  const auto id = svc.create_scene_session("blob-8x8", {}).id;
  const auto m = svc.preview_mask(id, {4, 4}, 1e6);
  EXPECT_EQ(ad::count_set(m), 1u);
  ad::BinaryMask prev;
  for (double tau : {0.9, 1.0, 1.05, 1.1}) {
    const auto cur = svc.preview_mask(id, {4, 4}, tau);
    if (prev.size()) {
      for (std::size_t i = 0; i < cur.size(); ++i) EXPECT_LE(cur.data()[i], prev.data()[i]);
    }
    prev = cur;
  }
  EXPECT_THROW(svc.preview_mask(id, {4, 4}, 0.0), ad::ValidationError);
  EXPECT_EQ(svc.status(id), ad::SessionStatus::inverted);
}

TEST(EditService, EditsAreVersionedAndDeterministic) {
  ad::EditService svc;
  const auto id = svc.create_scene_session("blob-8x8", {}).id;
  const auto n1 = svc.apply_edit(id, {{{4, 4}, {6, 5}}}, std::nullopt);
  const auto n2 = svc.apply_edit(id, {{{4, 4}, {6, 5}}}, std::nullopt);
  EXPECT_EQ(n1, 1u);
  EXPECT_EQ(n2, 2u);
  EXPECT_EQ(svc.status(id), ad::SessionStatus::edited);
  EXPECT_EQ(svc.result_bytes(id, 1), svc.result_bytes(id, 2));
  EXPECT_EQ(ad::canonical_report_bytes(*svc.report(id, 1)), ad::canonical_report_bytes(*svc.report(id, 2)));
  const auto direct = ad::run_edit(ad::EditRequest{ad::named_scene("blob-8x8").grid, {{{4, 4}, {6, 5}}}, std::nullopt, {}});
  EXPECT_EQ(svc.report(id, 1)->output, direct.output);
  EXPECT_THROW(svc.report(id, 3), ad::NotFoundError);
  EXPECT_THROW(svc.report(id, 0), ad::NotFoundError);
  EXPECT_EQ(svc.describe(id)["edits"], 2);
}

TEST(EditService, ZeroDragEqualsBaseline) {
  ad::EditService svc;
  const auto id = svc.create_scene_session("blob-16x16", {}).id;
  const auto n = svc.apply_edit(id, {{{6, 8}, {6, 8}}}, std::nullopt);
  EXPECT_EQ(svc.report(id, n)->output, ad::invert_sample_baseline(ad::named_scene("blob-16x16").grid, {}));
}

TEST(EditService, OverridesAndInpaint) {
  ad::EditService svc;
  const auto id = svc.create_scene_session("blob-8x8", {}).id;
  const auto n = svc.apply_edit(id, {{{4, 4}, {5, 4}}}, std::nullopt, ad::json{{"seed", 3}, {"edit_step", 2}});
  ad::EditConfig cfg;
  cfg.seed = 3;
  cfg.edit_step = 2;
  const auto direct = ad::run_edit(ad::EditRequest{ad::named_scene("blob-8x8").grid, {{{4, 4}, {5, 4}}}, std::nullopt, cfg});
  EXPECT_EQ(svc.report(id, n)->output, direct.output);

  ad::BinaryMask mask(8, 8, std::uint8_t{0});
  mask[{2, 2}] = 1;
  const auto m = svc.apply_edit(id, {}, mask);
  EXPECT_EQ(svc.report(id, m)->blanks_filled, 1u);
  EXPECT_THROW(svc.apply_edit(id, {{{0, 0}, {1, 1}}}, mask), ad::ValidationError);
  EXPECT_THROW(svc.apply_edit(id, {}, std::nullopt), ad::ValidationError);
  EXPECT_THROW(svc.apply_edit(id, {{{0, 0}, {1, 1}}}, std::nullopt, ad::json{{"bogus", 1}}), ad::ValidationError);
  EXPECT_THROW(svc.apply_edit("missing", {{{0, 0}, {1, 1}}}, std::nullopt), ad::NotFoundError);
}

TEST(EditService, Persistence) {
  const auto dir = scratch_dir("persist");
  ad::EditService svc(dir);
  const auto id = svc.create_scene_session("blob-8x8", {}).id;
  svc.apply_edit(id, {{{4, 4}, {6, 4}}}, std::nullopt);
  EXPECT_EQ(ad::load_grid(dir / id / "input.lgrd"), ad::named_scene("blob-8x8").grid);
  EXPECT_EQ(ad::read_file(dir / id / "edit-1.lgrd"), svc.result_bytes(id, 1));
  EXPECT_TRUE(fs::exists(dir / id / "edit-1.json"));
  fs::remove_all(dir);
}

TEST(EditService, ConcurrentSessions) {
  ad::EditService svc;
  std::vector<std::string> ids;
  for (int i = 0; i < 4; ++i) ids.push_back(svc.create_scene_session("blob-8x8", {}).id);
  std::vector<std::thread> workers;
  for (const auto& id : ids) {
    workers.emplace_back([&svc, id] { svc.apply_edit(id, {{{4, 4}, {6, 5}}}, std::nullopt); });
  }
  for (auto& t : workers) t.join();
  for (const auto& id : ids) EXPECT_EQ(svc.result_bytes(id, 1), svc.result_bytes(ids[0], 1));
}

TEST_F(HttpFixture, SessionLifecycle) {
  const std::string id = create({{"scene", "blob-8x8"}});
  auto res = client_->Get("/sessions/" + id);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(ad::json::parse(res->body)["status"], "created");

  res = client_->Get("/sessions/" + id + "/attention?x=4&y=4");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto att = ad::json::parse(res->body);
  double sum = 0.0;
  for (const auto& row : att["weights"]) {
    for (double w : row) sum += w;
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_EQ(att["weights"][4][5].get<double>(), service_.attention(id, {4, 4})[(ad::Point{5, 4})]);

  res = client_->Get("/sessions/" + id + "/attention?x=4&y=4&format=ppm");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->body.rfind("P6\n8 8\n255\n", 0), 0u);

  res = client_->Get("/sessions/" + id + "/mask?x=4&y=4&tau=1000000");
  ASSERT_TRUE(res);
  const auto mask = ad::mask_from_json(ad::json::parse(res->body));
  EXPECT_EQ(ad::count_set(mask), 1u);

  res = client_->Post("/sessions/" + id + "/edits", R"({"points": "4,4:6,5"})", "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201);
  const auto edit = ad::json::parse(res->body);
  EXPECT_EQ(edit["edit"], 1);
  const std::string result_url = edit["result"];

  res = client_->Get(result_url);
  ASSERT_TRUE(res);
  EXPECT_EQ(bytes_of(res->body), service_.result_bytes(id, 1));
  res = client_->Get(edit["result_ppm"].get<std::string>());
  ASSERT_TRUE(res);
  EXPECT_EQ(res->body, service_.result_ppm(id, 1));
  res = client_->Get(edit["report"].get<std::string>());
  ASSERT_TRUE(res);
  EXPECT_EQ(ad::json::parse(res->body)["blanks_filled"], edit["blanks_filled"]);

  res = client_->Post("/sessions/" + id + "/edits",
                      R"({"points": [{"handle": {"x": 4, "y": 4}, "target": {"x": 6, "y": 5}}]})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(ad::json::parse(res->body)["edit"], 2);
  EXPECT_EQ(service_.result_bytes(id, 1), service_.result_bytes(id, 2));
}

TEST_F(HttpFixture, UploadedGridEchoesDims) {
  std::mt19937_64 rng(3);
  const auto g = oracle::random_grid(rng, 3, 5, 7).quantized();
  const auto bytes = ad::serialize_grid(g);
  auto res = client_->Post("/sessions", std::string(bytes.begin(), bytes.end()), "application/octet-stream");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201);
  const auto body = ad::json::parse(res->body);
  EXPECT_EQ(body["channels"], 3);
  EXPECT_EQ(body["height"], 5);
  EXPECT_EQ(body["width"], 7);
  EXPECT_EQ(service_.input(body["id"]), g);

  const std::string id2 = create({{"grid", ad::grid_to_json(g)}, {"request_token", "abc"}});
  EXPECT_EQ(create({{"scene", "blob-8x8"}, {"request_token", "abc"}}), id2);
}

TEST_F(HttpFixture, Errors) {
  auto expect_error = [&](const httplib::Result& res, int status, const std::string& code, const std::string& field) {
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, status);
    const auto body = ad::json::parse(res->body);
    EXPECT_EQ(body["code"], code);
    EXPECT_TRUE(body.contains("message"));
    if (!field.empty()) {
      EXPECT_EQ(body["field"], field);
    }
  };
  expect_error(client_->Get("/sessions/nope"), 404, "not_found", "");
  expect_error(client_->Get("/sessions/nope/attention?x=0&y=0"), 404, "not_found", "");
  expect_error(client_->Post("/sessions", "{", "application/json"), 400, "malformed_json", "");
  expect_error(client_->Post("/sessions", "{}", "application/json"), 400, "validation_error", "grid");
  expect_error(client_->Post("/sessions", "LGRDxx", "application/octet-stream"), 400, "validation_error", "grid");
  expect_error(client_->Post("/sessions", R"({"scene": "blob-8x8", "config": {"tau": 0}})", "application/json"), 400,
               "validation_error", "tau");

  const std::string id = create({{"scene", "blob-8x8"}});
  expect_error(client_->Get("/sessions/" + id + "/attention?x=9&y=0"), 400, "validation_error", "x");
  expect_error(client_->Get("/sessions/" + id + "/attention?x=a&y=0"), 400, "validation_error", "x");
  expect_error(client_->Get("/sessions/" + id + "/mask?x=1&y=1&tau=-2"), 400, "validation_error", "tau");
  expect_error(client_->Post("/sessions/" + id + "/edits", R"({"points": "1,1"})", "application/json"), 400,
               "validation_error", "points");
  expect_error(client_->Post("/sessions/" + id + "/edits", R"({"points": "1,1:9,9"})", "application/json"), 400,
               "validation_error", "points");
  expect_error(client_->Post("/sessions/" + id + "/edits", R"({"mask": [[1]]})", "application/json"), 400,
               "validation_error", "mask");
  expect_error(client_->Get("/sessions/" + id + "/edits/1"), 404, "not_found", "");
  expect_error(client_->Get("/sessions/" + id + "/edits/x/result"), 404, "not_found", "");
}

TEST_F(HttpFixture, CliParity) {
  const auto dir = scratch_dir("parity");
  const std::string cli = ATTENTION_DRAG_CLI;
  const auto scene = dir / "scene.lgrd";
  const auto out = dir / "out.lgrd";
  ASSERT_EQ(std::system((cli + " scene --name blob-16x16 --out " + scene.string() + " > /dev/null").c_str()), 0);
  ASSERT_EQ(std::system((cli + " edit --input " + scene.string() + " --points '6,8:10,9' --tau 1.0 --seed 2 --out " +
                         out.string() + " > /dev/null")
                            .c_str()),
            0);

  const auto bytes = ad::read_file(scene);
  auto res = client_->Post("/sessions", std::string(bytes.begin(), bytes.end()), "application/octet-stream");
  ASSERT_TRUE(res);
  const std::string id = ad::json::parse(res->body)["id"];
  res = client_->Post("/sessions/" + id + "/edits", R"({"points": "6,8:10,9", "overrides": {"tau": 1.0, "seed": 2}})",
                      "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201);
  res = client_->Get("/sessions/" + id + "/edits/1/result");
  ASSERT_TRUE(res);
  EXPECT_EQ(bytes_of(res->body), ad::read_file(out));
  fs::remove_all(dir);
}
