// Copyright 2026 The attention-drag Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTENTION_DRAG_LATENT_CORE_HPP_
#define ATTENTION_DRAG_LATENT_CORE_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace attention_drag {

/// Raised for malformed inputs. `field()` names the offending request field
/// when one applies, so front ends can report it.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& message, std::string field = {})
      : std::invalid_argument(message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Grid coordinate. x is the column, y the row, origin top-left.
struct Point {
  int x = 0;
  int y = 0;

  friend constexpr bool operator==(Point, Point) = default;
  friend constexpr auto operator<=>(const Point& a, const Point& b) {
    // Row-major order, so sorted point sets match flattened indices.
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

struct Displacement {
  int dx = 0;
  int dy = 0;

  friend constexpr bool operator==(Displacement, Displacement) = default;
  constexpr bool is_zero() const { return dx == 0 && dy == 0; }
};

inline bool in_bounds(Point p, int width, int height) {
  return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height;
}

inline std::size_t flatten_index(Point p, int width, int height) {
  if (width <= 0 || height <= 0) throw ValidationError("grid dimensions must be positive");
  if (!in_bounds(p, width, height)) {
    throw ValidationError("point (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                          ") outside " + std::to_string(width) + "x" + std::to_string(height) +
                          " grid");
  }
  return static_cast<std::size_t>(p.y) * static_cast<std::size_t>(width) +
         static_cast<std::size_t>(p.x);
}

inline Point unflatten_index(std::size_t index, int width, int height) {
  if (width <= 0 || height <= 0) throw ValidationError("grid dimensions must be positive");
  const auto w = static_cast<std::size_t>(width);
  if (index >= w * static_cast<std::size_t>(height)) throw ValidationError("flat index out of range");
  return Point{static_cast<int>(index % w), static_cast<int>(index / w)};
}

/// Single-channel H x W plane, row-major. Base storage for maps, masks and
/// movement fields.
template <class T>
class Plane {
 public:
  Plane() = default;
  Plane(int height, int width, T fill = T{}) : height_(height), width_(width) {
    check_dims(height, width);
    data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
  }
  Plane(int height, int width, std::vector<T> data)
      : height_(height), width_(width), data_(std::move(data)) {
    check_dims(height, width);
    if (data_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
      throw ValidationError("plane data length does not match " + std::to_string(height) + "x" +
                            std::to_string(width));
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool contains(Point p) const { return in_bounds(p, width_, height_); }
  bool same_shape(int height, int width) const { return height_ == height && width_ == width; }
  template <class U>
  bool same_shape(const Plane<U>& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  const T& operator[](Point p) const { return data_[index(p)]; }
  T& operator[](Point p) { return data_[index(p)]; }
  const T& at(std::size_t flat) const { return data_.at(flat); }
  T& at(std::size_t flat) { return data_.at(flat); }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  static void check_dims(int height, int width) {
    if (height <= 0 || width <= 0) throw ValidationError("plane dimensions must be positive");
  }
  std::size_t index(Point p) const { return flatten_index(p, width_, height_); }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using WeightPlane = Plane<double>;
using BinaryMask = Plane<std::uint8_t>;
using MovementField = Plane<Displacement>;

inline std::size_t count_set(const BinaryMask& mask) {
  return static_cast<std::size_t>(
      std::count_if(mask.data().begin(), mask.data().end(), [](std::uint8_t b) { return b != 0; }));
}

inline void check_binary(const BinaryMask& mask) {
  for (auto b : mask.data()) {
    if (b > 1) throw ValidationError("mask entries must be 0 or 1", "mask");
  }
}

/// Row of a row-stochastic matrix reshaped to the grid. Nonnegative weights
/// summing to one.
class AttentionMap {
 public:
  static constexpr double kSumTolerance = 1e-6;

  AttentionMap(int height, int width, std::vector<double> weights)
      : weights_(height, width, std::move(weights)) {
    double sum = 0.0;
    for (double w : weights_.data()) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("attention weights must be finite and >= 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
      throw ValidationError("attention weights sum to " + std::to_string(sum) + ", expected 1");
    }
  }

  int height() const { return weights_.height(); }
  int width() const { return weights_.width(); }
  double operator[](Point p) const { return weights_[p]; }
  const WeightPlane& weights() const { return weights_; }
  std::span<const double> data() const { return weights_.data(); }

  friend bool operator==(const AttentionMap&, const AttentionMap&) = default;

 private:
  WeightPlane weights_;
};

/// C x H x W latent, channel-major, row-major within a channel. Values are
/// held in double precision; the wire format is float32.
class LatentGrid {
 public:
  LatentGrid() = default;
  LatentGrid(int channels, int height, int width, double fill = 0.0)
      : channels_(channels), height_(height), width_(width) {
    check_dims();
    if (!std::isfinite(fill)) throw ValidationError("latent values must be finite");
    values_.assign(expected_size(), fill);
  }
  LatentGrid(int channels, int height, int width, std::vector<double> values)
      : channels_(channels), height_(height), width_(width), values_(std::move(values)) {
    check_dims();
    if (values_.size() != expected_size()) throw ValidationError("latent value count does not match dimensions");
    for (double v : values_) {
      if (!std::isfinite(v)) throw ValidationError("latent values must be finite");
    }
  }

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_); }
  std::size_t size() const { return values_.size(); }
  bool contains(Point p) const { return in_bounds(p, width_, height_); }
  bool same_shape(const LatentGrid& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  double operator()(int c, int y, int x) const { return values_[offset(c, y, x)]; }
  double& operator()(int c, int y, int x) { return values_[offset(c, y, x)]; }
  double at(int c, Point p) const { return values_[offset(c, p.y, p.x)]; }
  double& at(int c, Point p) { return values_[offset(c, p.y, p.x)]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  std::vector<double> channel_vector(Point p) const {
    std::vector<double> out(static_cast<std::size_t>(channels_));
    for (int c = 0; c < channels_; ++c) out[static_cast<std::size_t>(c)] = at(c, p);
    return out;
  }

  /// Copies every channel at `src` of `from` into `dst` of this grid.
  void copy_position(const LatentGrid& from, Point src, Point dst) {
    for (int c = 0; c < channels_; ++c) at(c, dst) = from.at(c, src);
  }

  /// Rounds every value to float32, the precision of the wire format.
  LatentGrid quantized() const {
    LatentGrid out = *this;
    for (double& v : out.values_) v = static_cast<double>(static_cast<float>(v));
    return out;
  }

  friend bool operator==(const LatentGrid&, const LatentGrid&) = default;

 private:
  void check_dims() const {
    if (channels_ <= 0 || height_ <= 0 || width_ <= 0) throw ValidationError("grid dimensions must be positive");
  }
  std::size_t expected_size() const { return static_cast<std::size_t>(channels_) * plane_size(); }
  std::size_t offset(int c, int y, int x) const {
    if (c < 0 || c >= channels_ || !in_bounds(Point{x, y}, width_, height_)) {
      throw std::out_of_range("latent index out of range");
    }
    return static_cast<std::size_t>(c) * plane_size() +
           static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Binary container: 4-byte magic, three u32 LE dims, then float32 LE payload.
// ---------------------------------------------------------------------------

namespace wire {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
}

inline void put_f32(std::vector<std::uint8_t>& out, double value) {
  const float f = static_cast<float>(value);
  if (!std::isfinite(f)) throw ValidationError("value not representable as finite float32");
  std::uint32_t bits = 0;
  std::memcpy(&bits, &f, sizeof bits);
  put_u32(out, bits);
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

inline double get_f32(std::span<const std::uint8_t> in, std::size_t pos) {
  const std::uint32_t bits = get_u32(in, pos);
  float f = 0.0f;
  std::memcpy(&f, &bits, sizeof f);
  if (!std::isfinite(f)) throw ValidationError("non-finite value in payload");
  return static_cast<double>(f);
}

inline void put_magic(std::vector<std::uint8_t>& out, std::string_view magic) {
  for (char ch : magic.substr(0, 4)) out.push_back(static_cast<std::uint8_t>(ch));
}

inline bool has_magic(std::span<const std::uint8_t> in, std::string_view magic) {
  if (in.size() < 4) return false;
  for (std::size_t i = 0; i < 4; ++i) {
    if (in[i] != static_cast<std::uint8_t>(magic[i])) return false;
  }
  return true;
}

}  // namespace wire

inline constexpr std::string_view kGridMagic = "LGRD";
inline constexpr std::size_t kGridHeaderBytes = 16;

inline std::vector<std::uint8_t> serialize_grid(const LatentGrid& grid) {
  std::vector<std::uint8_t> out;
  out.reserve(kGridHeaderBytes + 4 * grid.size());
  wire::put_magic(out, kGridMagic);
  wire::put_u32(out, static_cast<std::uint32_t>(grid.channels()));
  wire::put_u32(out, static_cast<std::uint32_t>(grid.height()));
  wire::put_u32(out, static_cast<std::uint32_t>(grid.width()));
  for (double v : grid.values()) wire::put_f32(out, v);
  return out;
}

inline LatentGrid deserialize_grid(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kGridHeaderBytes || !wire::has_magic(bytes, kGridMagic)) {
    throw ValidationError("not an LGRD grid", "grid");
  }
  const std::uint32_t c = wire::get_u32(bytes, 4);
  const std::uint32_t h = wire::get_u32(bytes, 8);
  const std::uint32_t w = wire::get_u32(bytes, 12);
  constexpr std::uint32_t kMaxDim = 1u << 15;
  if (c == 0 || h == 0 || w == 0 || c > kMaxDim || h > kMaxDim || w > kMaxDim) {
    throw ValidationError("LGRD dimensions out of range", "grid");
  }
  const std::size_t count = std::size_t{c} * h * w;
  if (bytes.size() != kGridHeaderBytes + 4 * count) throw ValidationError("LGRD payload length mismatch", "grid");
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = wire::get_f32(bytes, kGridHeaderBytes + 4 * i);
  return LatentGrid(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w), std::move(values));
}

}  // namespace attention_drag

#endif  // ATTENTION_DRAG_LATENT_CORE_HPP_
