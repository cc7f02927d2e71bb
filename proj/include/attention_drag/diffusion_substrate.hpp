// Copyright 2026 The attention-drag Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTENTION_DRAG_DIFFUSION_SUBSTRATE_HPP_
#define ATTENTION_DRAG_DIFFUSION_SUBSTRATE_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "attention_drag/latent_core.hpp"

namespace attention_drag {

// ---------------------------------------------------------------------------
// Noise schedule
// ---------------------------------------------------------------------------

/// DDPM variance schedule over train timesteps 1..T. alpha_bar(0) is the clean
/// level and equals 1.
class NoiseSchedule {
 public:
  static NoiseSchedule linear(int train_steps = 50, double beta_start = 1e-4, double beta_end = 2e-2) {
    if (train_steps < 1) throw ValidationError("train_steps must be >= 1", "schedule.train_steps");
    if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_end < beta_start) {
      throw ValidationError("need 0 < beta_start <= beta_end < 1", "schedule");
    }
    std::vector<double> betas(static_cast<std::size_t>(train_steps));
    for (int t = 0; t < train_steps; ++t) {
      const double frac = train_steps == 1 ? 0.0 : static_cast<double>(t) / (train_steps - 1);
      betas[static_cast<std::size_t>(t)] = beta_start + frac * (beta_end - beta_start);
    }
    return NoiseSchedule(std::move(betas));
  }

  explicit NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
    if (betas_.empty()) throw ValidationError("schedule needs at least one beta", "schedule");
    alpha_bar_.resize(betas_.size() + 1);
    alpha_bar_[0] = 1.0;
    for (std::size_t t = 0; t < betas_.size(); ++t) {
      const double b = betas_[t];
      if (!(b > 0.0 && b < 1.0)) throw ValidationError("beta must lie in (0, 1)", "schedule");
      if (t > 0 && b < betas_[t - 1]) throw ValidationError("betas must be non-decreasing", "schedule");
      alpha_bar_[t + 1] = alpha_bar_[t] * (1.0 - b);
    }
  }

  int train_steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_.at(static_cast<std::size_t>(t - 1)); }
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }

  /// Train timesteps visited by an n-step DDIM run: t_k = floor(k T / n).
  std::vector<int> timesteps(int n) const {
    if (n < 0 || n > train_steps()) throw ValidationError("step count must lie in [0, T]", "inversion_steps");
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k) {
      out[static_cast<std::size_t>(k - 1)] = static_cast<int>((static_cast<long long>(k) * train_steps()) / n);
    }
    return out;
  }

  std::span<const double> betas() const { return betas_; }

 private:
  std::vector<double> betas_;
  std::vector<double> alpha_bar_;
};

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

/// Row-stochastic (H*W) x (H*W) self-attention matrix recorded at one timestep.
class AttentionRecord {
 public:
  AttentionRecord() = default;
  AttentionRecord(int timestep, int height, int width, std::vector<double> matrix)
      : timestep_(timestep), height_(height), width_(width), matrix_(std::move(matrix)) {
    if (height <= 0 || width <= 0) throw ValidationError("attention record dimensions must be positive");
    if (matrix_.size() != positions() * positions()) throw ValidationError("attention matrix size mismatch");
  }

  int timestep() const { return timestep_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t positions() const { return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_); }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(matrix_).subspan(r * positions(), positions());
  }
  double operator()(std::size_t r, std::size_t c) const { return matrix_[r * positions() + c]; }
  std::span<const double> matrix() const { return matrix_; }

  friend bool operator==(const AttentionRecord&, const AttentionRecord&) = default;

 private:
  int timestep_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> matrix_;
};

/// softmax_c(q_r . k_c / sqrt(key_dim)) for every row r. `queries` and `keys`
/// are positions x key_dim, row-major. Returns the positions x positions matrix.
inline std::vector<double> scaled_dot_product_attention(std::span<const double> queries,
                                                        std::span<const double> keys,
                                                        std::size_t positions, std::size_t key_dim) {
  if (key_dim == 0 || queries.size() != positions * key_dim || keys.size() != positions * key_dim) {
    throw ValidationError("query/key shape mismatch");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(key_dim));
  std::vector<double> out(positions * positions);
  for (std::size_t r = 0; r < positions; ++r) {
    const double* q = queries.data() + r * key_dim;
    double* row = out.data() + r * positions;
    double row_max = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < positions; ++c) {
      const double* k = keys.data() + c * key_dim;
      double dot = 0.0;
      for (std::size_t d = 0; d < key_dim; ++d) dot += q[d] * k[d];
      row[c] = dot * scale;
      row_max = std::max(row_max, row[c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < positions; ++c) {
      row[c] = std::exp(row[c] - row_max);
      sum += row[c];
    }
    for (std::size_t c = 0; c < positions; ++c) row[c] /= sum;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Toy denoiser
// ---------------------------------------------------------------------------

struct DenoiserConfig {
  int channels = 4;
  int height = 8;
  int width = 8;
  int hidden = 16;
  int key_dim = 8;
  int heads = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (channels < 1 || height < 1 || width < 1) throw ValidationError("latent dimensions must be positive", "denoiser");
    if (hidden < 1) throw ValidationError("hidden width must be >= 1", "denoiser.hidden");
    if (key_dim < 1) throw ValidationError("key_dim must be >= 1", "denoiser.key_dim");
    if (heads < 1) throw ValidationError("heads must be >= 1", "denoiser.heads");
  }
  friend bool operator==(const DenoiserConfig&, const DenoiserConfig&) = default;
};

struct NoisePrediction {
  LatentGrid epsilon;
  AttentionRecord attention;
};

/// Untrained epsilon predictor: per-position linear embedding plus a
/// sinusoidal timestep encoding, one multi-head self-attention mixing step,
/// and a linear read-out. Weights come from the seed and are float32 exact.
class ToyDenoiser {
 public:
  struct Weights {
    std::vector<double> embed;      // hidden x channels
    std::vector<double> embed_bias; // hidden
    std::vector<double> query;      // heads x key_dim x hidden
    std::vector<double> key;        // heads x key_dim x hidden
    std::vector<double> value;      // hidden x hidden
    std::vector<double> readout;    // channels x hidden
    std::vector<double> readout_bias;  // channels

    friend bool operator==(const Weights&, const Weights&) = default;
  };

  static ToyDenoiser seeded(const DenoiserConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    const auto c = static_cast<std::size_t>(config.channels);
    const auto h = static_cast<std::size_t>(config.hidden);
    const auto qk = static_cast<std::size_t>(config.heads) * static_cast<std::size_t>(config.key_dim) * h;
    Weights w;
    w.embed = uniform(rng, h * c, 1.0 / std::sqrt(static_cast<double>(c)));
    w.embed_bias = uniform(rng, h, 0.1);
    w.query = uniform(rng, qk, 1.0 / std::sqrt(static_cast<double>(h)));
    w.key = uniform(rng, qk, 1.0 / std::sqrt(static_cast<double>(h)));
    w.value = uniform(rng, h * h, 1.0 / std::sqrt(static_cast<double>(h)));
    w.readout = uniform(rng, c * h, 1.0 / std::sqrt(static_cast<double>(h)));
    w.readout_bias = uniform(rng, c, 0.05);
    return ToyDenoiser(config, std::move(w));
  }

  /// All-zero weights: epsilon is identically zero and attention uniform.
  static ToyDenoiser zero(const DenoiserConfig& config) {
    config.validate();
    const auto c = static_cast<std::size_t>(config.channels);
    const auto h = static_cast<std::size_t>(config.hidden);
    const auto qk = static_cast<std::size_t>(config.heads) * static_cast<std::size_t>(config.key_dim) * h;
    Weights w{std::vector<double>(h * c), std::vector<double>(h),     std::vector<double>(qk),
              std::vector<double>(qk),    std::vector<double>(h * h), std::vector<double>(c * h),
              std::vector<double>(c)};
    return ToyDenoiser(config, std::move(w));
  }

  ToyDenoiser(DenoiserConfig config, Weights weights) : config_(config), w_(std::move(weights)) {
    config_.validate();
    const auto c = static_cast<std::size_t>(config_.channels);
    const auto h = static_cast<std::size_t>(config_.hidden);
    const auto qk = static_cast<std::size_t>(config_.heads) * static_cast<std::size_t>(config_.key_dim) * h;
    if (w_.embed.size() != h * c || w_.embed_bias.size() != h || w_.query.size() != qk || w_.key.size() != qk ||
        w_.value.size() != h * h || w_.readout.size() != c * h || w_.readout_bias.size() != c) {
      throw ValidationError("denoiser weight shapes do not match config");
    }
  }

  const DenoiserConfig& config() const { return config_; }
  const Weights& weights() const { return w_; }

  /// Sinusoidal encoding of `timestep`: sines in the first half, cosines in
  /// the second, geometric frequencies down to 1/10000.
  std::vector<double> timestep_encoding(int timestep) const {
    const auto h = static_cast<std::size_t>(config_.hidden);
    const std::size_t half = h / 2;
    std::vector<double> out(h, 0.0);
    for (std::size_t i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
      out[i] = std::sin(timestep * freq);
      out[i + half] = std::cos(timestep * freq);
    }
    return out;
  }

  /// Hidden states (hidden channels x H x W) fed to the attention layer.
  LatentGrid hidden_states(const LatentGrid& z, int timestep) const {
    check_latent(z);
    const int hidden = config_.hidden;
    const auto temb = timestep_encoding(timestep);
    LatentGrid out(hidden, z.height(), z.width());
    const std::size_t n = z.plane_size();
    const auto zv = z.values();
    auto hv = out.values();
    for (int j = 0; j < hidden; ++j) {
      const double base = w_.embed_bias[static_cast<std::size_t>(j)] + temb[static_cast<std::size_t>(j)];
      for (std::size_t p = 0; p < n; ++p) {
        double acc = base;
        for (int c = 0; c < config_.channels; ++c) {
          acc += w_.embed[static_cast<std::size_t>(j * config_.channels + c)] * zv[static_cast<std::size_t>(c) * n + p];
        }
        hv[static_cast<std::size_t>(j) * n + p] = acc;
      }
    }
    return out;
  }

  /// Head-averaged self-attention over the hidden states.
  AttentionRecord self_attention(const LatentGrid& hidden, int timestep = 0) const {
    if (hidden.channels() != config_.hidden || hidden.height() != config_.height || hidden.width() != config_.width) {
      throw ValidationError("hidden state shape does not match denoiser config");
    }
    const std::size_t n = hidden.plane_size();
    const auto dk = static_cast<std::size_t>(config_.key_dim);
    const auto h = static_cast<std::size_t>(config_.hidden);
    const auto hv = hidden.values();
    std::vector<double> mean(n * n, 0.0);
    std::vector<double> q(n * dk), k(n * dk);
    for (int head = 0; head < config_.heads; ++head) {
      const std::size_t base = static_cast<std::size_t>(head) * dk * h;
      for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t d = 0; d < dk; ++d) {
          double qa = 0.0, ka = 0.0;
          for (std::size_t j = 0; j < h; ++j) {
            const double x = hv[j * n + p];
            qa += w_.query[base + d * h + j] * x;
            ka += w_.key[base + d * h + j] * x;
          }
          q[p * dk + d] = qa;
          k[p * dk + d] = ka;
        }
      }
      const auto a = scaled_dot_product_attention(q, k, n, dk);
      for (std::size_t i = 0; i < a.size(); ++i) mean[i] += a[i];
    }
    const double inv_heads = 1.0 / config_.heads;
    for (double& v : mean) v *= inv_heads;
    return AttentionRecord(timestep, config_.height, config_.width, std::move(mean));
  }

  NoisePrediction predict_noise(const LatentGrid& z, int timestep) const {
    const LatentGrid hidden = hidden_states(z, timestep);
    AttentionRecord attn = self_attention(hidden, timestep);
    const std::size_t n = z.plane_size();
    const auto h = static_cast<std::size_t>(config_.hidden);
    const auto hv = hidden.values();

    // values[p][j] = (W_v h_p)_j
    std::vector<double> values(n * h, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t i = 0; i < h; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < h; ++j) acc += w_.value[i * h + j] * hv[j * n + p];
        values[p * h + i] = acc;
      }
    }

    LatentGrid eps(config_.channels, config_.height, config_.width);
    auto ev = eps.values();
    std::vector<double> mixed(h);
    for (std::size_t p = 0; p < n; ++p) {
      std::fill(mixed.begin(), mixed.end(), 0.0);
      const auto row = attn.row(p);
      for (std::size_t src = 0; src < n; ++src) {
        const double a = row[src];
        const double* v = values.data() + src * h;
        for (std::size_t i = 0; i < h; ++i) mixed[i] += a * v[i];
      }
      for (std::size_t i = 0; i < h; ++i) mixed[i] = std::tanh(hv[i * n + p] + mixed[i]);
      for (int c = 0; c < config_.channels; ++c) {
        double acc = w_.readout_bias[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < h; ++i) acc += w_.readout[static_cast<std::size_t>(c) * h + i] * mixed[i];
        ev[static_cast<std::size_t>(c) * n + p] = acc;
      }
    }
    return NoisePrediction{std::move(eps), std::move(attn)};
  }

 private:
  static std::vector<double> uniform(std::mt19937_64& rng, std::size_t count, double bound) {
    // Built from raw engine bits so the weights do not depend on the
    // standard library's distribution implementation.
    std::vector<double> out(count);
    for (double& v : out) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = static_cast<double>(static_cast<float>((2.0 * u - 1.0) * bound));
    }
    return out;
  }

  void check_latent(const LatentGrid& z) const {
    if (z.channels() != config_.channels || z.height() != config_.height || z.width() != config_.width) {
      throw ValidationError("latent shape " + std::to_string(z.channels()) + "x" + std::to_string(z.height()) + "x" +
                            std::to_string(z.width()) + " does not match denoiser config");
    }
  }

  DenoiserConfig config_;
  Weights w_;
};

inline constexpr std::string_view kWeightsMagic = "DWTS";

/// "DWTS" container: magic, u32 LE channels/height/width/hidden/key_dim/heads,
/// u64 LE seed, then every tensor as float32 LE in declaration order.
inline std::vector<std::uint8_t> serialize_denoiser(const ToyDenoiser& model) {
  const auto& cfg = model.config();
  const auto& w = model.weights();
  std::vector<std::uint8_t> out;
  wire::put_magic(out, kWeightsMagic);
  for (int v : {cfg.channels, cfg.height, cfg.width, cfg.hidden, cfg.key_dim, cfg.heads}) {
    wire::put_u32(out, static_cast<std::uint32_t>(v));
  }
  wire::put_u32(out, static_cast<std::uint32_t>(cfg.seed & 0xFFFFFFFFu));
  wire::put_u32(out, static_cast<std::uint32_t>(cfg.seed >> 32));
  for (const auto* t : {&w.embed, &w.embed_bias, &w.query, &w.key, &w.value, &w.readout, &w.readout_bias}) {
    for (double v : *t) wire::put_f32(out, v);
  }
  return out;
}

inline ToyDenoiser deserialize_denoiser(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kHeader = 4 + 6 * 4 + 8;
  if (bytes.size() < kHeader || !wire::has_magic(bytes, kWeightsMagic)) throw ValidationError("not a DWTS blob");
  DenoiserConfig cfg;
  int* fields[] = {&cfg.channels, &cfg.height, &cfg.width, &cfg.hidden, &cfg.key_dim, &cfg.heads};
  for (std::size_t i = 0; i < 6; ++i) {
    const std::uint32_t v = wire::get_u32(bytes, 4 + 4 * i);
    if (v == 0 || v > (1u << 15)) throw ValidationError("DWTS dimension out of range");
    *fields[i] = static_cast<int>(v);
  }
  cfg.seed = std::uint64_t{wire::get_u32(bytes, 28)} | (std::uint64_t{wire::get_u32(bytes, 32)} << 32);
  ToyDenoiser shape = ToyDenoiser::zero(cfg);
  ToyDenoiser::Weights w = shape.weights();
  std::size_t pos = kHeader;
  for (auto* t : {&w.embed, &w.embed_bias, &w.query, &w.key, &w.value, &w.readout, &w.readout_bias}) {
    if (bytes.size() < pos + 4 * t->size()) throw ValidationError("DWTS payload truncated");
    for (double& v : *t) {
      v = wire::get_f32(bytes, pos);
      pos += 4;
    }
  }
  if (pos != bytes.size()) throw ValidationError("DWTS payload has trailing bytes");
  return ToyDenoiser(cfg, std::move(w));
}

// ---------------------------------------------------------------------------
// Deterministic DDIM (sigma = 0)
// ---------------------------------------------------------------------------

/// Latents z_1..z_N and the attention recorded while producing each of them.
struct InversionTrace {
  std::vector<LatentGrid> latents;
  std::vector<AttentionRecord> attention;
  std::vector<int> timesteps;

  std::size_t size() const { return latents.size(); }
  /// Latent at inversion level k (0 is the input).
  const LatentGrid& level(const LatentGrid& input, int k) const {
    return k == 0 ? input : latents.at(static_cast<std::size_t>(k - 1));
  }
};

namespace detail {

inline double level_alpha_bar(const NoiseSchedule& schedule, std::span<const int> timesteps, int level) {
  return level == 0 ? 1.0 : schedule.alpha_bar(timesteps[static_cast<std::size_t>(level - 1)]);
}

// Moves `z` from noise level `from_ab` to `to_ab` along the predicted noise.
inline LatentGrid ddim_transfer(const LatentGrid& z, const LatentGrid& eps, double from_ab, double to_ab) {
  LatentGrid out = z;
  const double s_from = std::sqrt(from_ab), n_from = std::sqrt(1.0 - from_ab);
  const double s_to = std::sqrt(to_ab), n_to = std::sqrt(1.0 - to_ab);
  auto ov = out.values();
  const auto ev = eps.values();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    const double x0 = (ov[i] - n_from * ev[i]) / s_from;
    ov[i] = s_to * x0 + n_to * ev[i];
  }
  return out;
}

}  // namespace detail

inline InversionTrace ddim_invert(const LatentGrid& z0, int steps, const ToyDenoiser& model,
                                  const NoiseSchedule& schedule) {
  InversionTrace trace;
  trace.timesteps = schedule.timesteps(steps);
  trace.latents.reserve(static_cast<std::size_t>(steps));
  trace.attention.reserve(static_cast<std::size_t>(steps));
  LatentGrid z = z0;
  for (int k = 1; k <= steps; ++k) {
    const int t = trace.timesteps[static_cast<std::size_t>(k - 1)];
    NoisePrediction pred = model.predict_noise(z, t);
    z = detail::ddim_transfer(z, pred.epsilon, detail::level_alpha_bar(schedule, trace.timesteps, k - 1),
                              schedule.alpha_bar(t));
    trace.latents.push_back(z);
    trace.attention.push_back(std::move(pred.attention));
  }
  return trace;
}

/// Samples from inversion level `from_step` of an `steps`-step run back to
/// level 0.
inline LatentGrid ddim_sample(const LatentGrid& zs, int from_step, int steps, const ToyDenoiser& model,
                              const NoiseSchedule& schedule) {
  const auto timesteps = schedule.timesteps(steps);
  if (from_step < 0 || from_step > steps) throw ValidationError("sampling start must lie in [0, steps]", "edit_step");
  LatentGrid z = zs;
  for (int k = from_step; k >= 1; --k) {
    const int t = timesteps[static_cast<std::size_t>(k - 1)];
    const NoisePrediction pred = model.predict_noise(z, t);
    z = detail::ddim_transfer(z, pred.epsilon, schedule.alpha_bar(t),
                              detail::level_alpha_bar(schedule, timesteps, k - 1));
  }
  return z;
}

}  // namespace attention_drag

#endif  // ATTENTION_DRAG_DIFFUSION_SUBSTRATE_HPP_
