// Copyright 2026 The attention-drag Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTENTION_DRAG_ATTENTION_DRAG_HPP_
#define ATTENTION_DRAG_ATTENTION_DRAG_HPP_

#include "attention_drag/latent_core.hpp"
#include "attention_drag/diffusion_substrate.hpp"
#include "attention_drag/attention_analysis.hpp"
#include "attention_drag/mask_generation.hpp"
#include "attention_drag/element_movement.hpp"
#include "attention_drag/semantic_interpolation.hpp"
#include "attention_drag/edit_pipeline.hpp"
#include "attention_drag/eval_harness.hpp"
#include "attention_drag/io.hpp"

#endif  // ATTENTION_DRAG_ATTENTION_DRAG_HPP_
