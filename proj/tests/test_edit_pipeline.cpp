// Copyright 2026 The attention-drag Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "attention_drag/attention_drag.hpp"
#include "attention_drag/io.hpp"
#include "oracles.hpp"

namespace ad = attention_drag;

namespace {

ad::LatentGrid small_input(std::uint64_t seed, int h = 8, int w = 8) {
  std::mt19937_64 rng(seed);
  return oracle::random_grid(rng, 4, h, w).quantized();
}

ad::EditRequest drag(const ad::LatentGrid& input, std::vector<ad::DragInstruction> instrs, ad::EditConfig cfg = {}) {
  return ad::EditRequest{input, std::move(instrs), std::nullopt, cfg};
}

ad::EditRequest inpaint(const ad::LatentGrid& input, ad::BinaryMask mask, ad::EditConfig cfg = {}) {
  return ad::EditRequest{input, {}, std::move(mask), cfg};
}

}  // namespace

TEST(EditConfig, Validation) {
  ad::EditConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.edit_step = 11;
  EXPECT_THROW(cfg.validate(), ad::ValidationError);
  cfg = {};
  cfg.inversion_steps = 51;
  EXPECT_THROW(cfg.validate(), ad::ValidationError);
  cfg = {};
  cfg.tau = 0.0;
  EXPECT_THROW(cfg.validate(), ad::ValidationError);
  cfg = {};
  cfg.heads = 0;
  EXPECT_THROW(cfg.validate(), ad::ValidationError);
}

TEST(RunEdit, ZeroDragEqualsBaseline) {
  const auto input = small_input(1);
  for (int step : {1, 5, 10}) {
    ad::EditConfig cfg;
    cfg.edit_step = step;
    const auto r = ad::run_edit(drag(input, {{{3, 4}, {3, 4}}}, cfg));
    EXPECT_EQ(r.output, ad::invert_sample_baseline(input, cfg));
    EXPECT_TRUE(r.blanks.empty());
    EXPECT_EQ(r.latent_after, r.latent_before);
  }
}

TEST(RunEdit, ZeroEpsilonZeroDragReproducesInput) {
  const auto input = small_input(2);
  ad::EditConfig cfg;
  cfg.zero_epsilon = true;
  EXPECT_EQ(ad::run_edit(drag(input, {{{0, 0}, {0, 0}}}, cfg)).output, input);
}

TEST(RunEdit, ReportShapeAndTimings) {
  const auto input = small_input(3);
  const auto r = ad::run_edit(drag(input, {{{2, 2}, {5, 3}}}));
  ASSERT_EQ(r.instructions.size(), 1u);
  EXPECT_EQ(r.instructions[0].field[(ad::Point{2, 2})], (ad::Displacement{3, 1}));
  EXPECT_EQ(r.edit_mask[(ad::Point{2, 2})], 1);
  EXPECT_EQ(r.blanks_filled, r.blanks.size());
  EXPECT_GE(r.blanks_filled, 1u);
  EXPECT_EQ(r.latent_after(0, 3, 5), r.latent_before(0, 2, 2));
  for (double t : {r.timings.invert_ms, r.timings.analysis_ms, r.timings.warp_ms, r.timings.interpolate_ms,
                   r.timings.sample_ms, r.timings.total_ms}) {
    EXPECT_GE(t, 0.0);
  }
  for (double v : r.output.values()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
}

TEST(RunEdit, Deterministic) {
  const auto input = small_input(4);
  const auto req = drag(input, {{{1, 1}, {4, 6}}, {{6, 6}, {6, 2}}});
  const auto a = ad::canonical_report_bytes(ad::run_edit(req));
  EXPECT_EQ(a, ad::canonical_report_bytes(ad::run_edit(req)));
}

TEST(RunEdit, CachedTraceGivesSameReport) {
  const auto input = small_input(5);
  const auto req = drag(input, {{{2, 5}, {6, 1}}});
  const auto trace = ad::invert_for(input, req.config);
  EXPECT_EQ(ad::canonical_report_bytes(ad::run_edit(req, &trace)), ad::canonical_report_bytes(ad::run_edit(req)));
}

TEST(RunEdit, BlobMovesTowardTarget) {
  const auto scene = ad::make_scene(4, 32, 32, {ad::Blob{{12, 16}, 3.5, 2.0}});
  const ad::DragInstruction instr{{12, 16}, {18, 16}};
  const auto r = ad::run_edit(drag(scene.grid, {instr}));
  const auto baseline = ad::invert_sample_baseline(scene.grid, {});
  const auto before = ad::track_blob(baseline, scene, instr);
  const auto after = ad::track_blob(r.output, scene, instr);
  ASSERT_TRUE(before && after);
  EXPECT_GT(after->first, before->first);
  EXPECT_LT(*ad::mean_distance(r.output, scene, instr), *ad::mean_distance(baseline, scene, instr));
}

TEST(RunEdit, PerStepAndRestrictOptionsRun) {
  const auto input = small_input(6);
  ad::EditConfig cfg;
  cfg.per_step_fields = true;
  cfg.restrict_destinations = true;
  cfg.dilation_radius = 1;
  const auto r = ad::run_edit(drag(input, {{{4, 4}, {6, 4}}}, cfg));
  for (std::size_t i = 0; i < r.field.size(); ++i) {
    if (!r.edit_mask.data()[i]) {
      EXPECT_EQ(r.field.data()[i], (ad::Displacement{}));
    }
  }
  EXPECT_EQ(ad::count_set(r.edit_mask), 9u);
}

TEST(RunEdit, RejectsBadRequests) {
  const auto input = small_input(7);
  EXPECT_THROW(ad::run_edit(drag(input, {})), ad::ValidationError);
  EXPECT_THROW(ad::run_edit(drag(input, {{{0, 0}, {8, 0}}})), ad::ValidationError);
  try {
    ad::run_edit(drag(input, {{{-1, 0}, {0, 0}}}));
    FAIL();
  } catch (const ad::ValidationError& e) {
    EXPECT_EQ(e.field(), "points");
  }
  auto req = drag(input, {{{0, 0}, {1, 0}}});
  req.user_mask = ad::BinaryMask(8, 8, std::uint8_t{0});
  EXPECT_THROW(ad::run_request(req), ad::ValidationError);
  EXPECT_THROW(ad::run_request(drag(input, {})), ad::ValidationError);
}

TEST(Compose, DisjointMasksUnion) {
  ad::InstructionReport a{{{0, 0}, {1, 0}}, ad::AttentionMap(1, 4, {0.25, 0.25, 0.25, 0.25}), ad::BinaryMask(1, 4), ad::MovementField(1, 4)};
  auto b = a;
  b.instruction = {{3, 0}, {2, 0}};
  a.mask[{0, 0}] = 1;
  a.field[{0, 0}] = {1, 0};
  b.mask[{3, 0}] = 1;
  b.field[{3, 0}] = {-1, 0};
  const std::vector<ad::InstructionReport> parts{a, b};
  const auto c = ad::compose_multi_point(parts);
  EXPECT_EQ(ad::count_set(c.mask), 2u);
  EXPECT_EQ(c.field[(ad::Point{0, 0})], (ad::Displacement{1, 0}));
  EXPECT_EQ(c.field[(ad::Point{3, 0})], (ad::Displacement{-1, 0}));
}

TEST(Compose, DuplicatedInstructionIsIdempotent) {
  const auto input = small_input(8);
  const auto one = ad::run_edit(drag(input, {{{2, 3}, {5, 3}}}));
  const auto two = ad::run_edit(drag(input, {{{2, 3}, {5, 3}}, {{2, 3}, {5, 3}}}));
  EXPECT_EQ(one.output, two.output);
  EXPECT_EQ(one.field, two.field);
  EXPECT_EQ(one.edit_mask, two.edit_mask);
}

TEST(Compose, OverlapMatchesOracle) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<ad::InstructionReport> parts;
    for (int i = 0; i < 3; ++i) {
      const auto map = oracle::random_map(rng, 6, 6);
      const ad::Point h{oracle::uniform_int(rng, 0, 5), oracle::uniform_int(rng, 0, 5)};
      const ad::Point t{oracle::uniform_int(rng, 0, 5), oracle::uniform_int(rng, 0, 5)};
      ad::MaskConfig mc;
      mc.tau = 1.2;
      const auto mask = ad::generate_mask(map, h, mc);
      parts.push_back({{h, t}, map, mask, ad::compute_movement_field(map, h, ad::drag_vector({h, t}), mask)});
    }
    const auto c = ad::compose_multi_point(parts);
    const auto [field, mask] = oracle::compose(parts);
    EXPECT_EQ(c.field, field);
    EXPECT_EQ(c.mask, mask);
  }
}

TEST(RunInpaint, ConstantNeighbourhoodFilledExactly) {
  ad::LatentGrid input(2, 6, 6, 0.75);
  input(0, 2, 3) = -4.0;
  input(1, 2, 3) = 9.0;
  ad::BinaryMask mask(6, 6, std::uint8_t{0});
  mask[{3, 2}] = 1;
  ad::EditConfig cfg;
  cfg.zero_epsilon = true;
  const auto r = ad::run_inpaint(inpaint(input, mask, cfg));
  EXPECT_EQ(r.latent_after.at(0, {3, 2}), r.latent_before.at(0, {0, 0}));
  EXPECT_EQ(r.latent_after.at(1, {3, 2}), r.latent_before.at(1, {0, 0}));
  EXPECT_EQ(r.output, ad::LatentGrid(2, 6, 6, 0.75));
}

TEST(RunInpaint, EmptyMaskMatchesZeroDrag) {
  const auto input = small_input(9);
  const auto r = ad::run_inpaint(inpaint(input, ad::BinaryMask(8, 8, std::uint8_t{0})));
  EXPECT_EQ(r.output, ad::run_edit(drag(input, {{{1, 1}, {1, 1}}})).output);
  EXPECT_EQ(r.blanks_filled, 0u);
}

TEST(RunInpaint, HoleMatchesInterpolationOracle) {
  const auto input = small_input(10);
  ad::BinaryMask mask(8, 8, std::uint8_t{0});
  std::vector<ad::Point> hole;
  for (int y = 3; y <= 5; ++y) {
    for (int x = 2; x <= 4; ++x) {
      mask[{x, y}] = 1;
      hole.push_back({x, y});
    }
  }
  const ad::EditConfig cfg;
  const auto r = ad::run_inpaint(inpaint(input, mask, cfg));
  const auto trace = ad::invert_for(input, cfg);
  std::vector<ad::AttentionMap> rows;
  for (auto p : hole) rows.push_back(ad::aggregated_row(trace.attention, p));
  const auto ref = oracle::interpolate(trace.level(input, cfg.edit_step), hole, rows);
  EXPECT_EQ(r.blanks, hole);
  for (int c = 0; c < 4; ++c) {
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        if (mask[{x, y}]) {
          EXPECT_NEAR(r.latent_after(c, y, x), ref(c, y, x), 1e-12);
        } else {
          EXPECT_EQ(r.latent_after(c, y, x), r.latent_before(c, y, x));
        }
      }
    }
  }
}

TEST(RunInpaint, RejectsBadMasks) {
  const auto input = small_input(11);
  EXPECT_THROW(ad::run_inpaint(inpaint(input, ad::BinaryMask(8, 8, std::uint8_t{1}))), ad::ValidationError);
  EXPECT_THROW(ad::run_inpaint(inpaint(input, ad::BinaryMask(8, 7, std::uint8_t{0}))), ad::ValidationError);
  EXPECT_THROW(ad::run_inpaint(inpaint(input, ad::BinaryMask(8, 8, std::uint8_t{3}))), ad::ValidationError);
}
