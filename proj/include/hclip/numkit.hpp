// Copyright 2026 The HClip Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense vectors and the counter-based random streams shared by every module.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hclip/error.hpp"

namespace hclip {

// Immutable dense real vector with d >= 1 finite entries.
class Vector {
 public:
  explicit Vector(std::vector<double> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) {
      throw Error(ErrorCode::kInvalidDimension, "vector dimension must be >= 1");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!std::isfinite(entries_[i])) {
        throw Error(ErrorCode::kInvalidDimension,
                    "vector entry " + std::to_string(i) + " is not finite");
      }
    }
  }
  Vector(std::initializer_list<double> entries)
      : Vector(std::vector<double>(entries)) {}

  static Vector Zeros(std::size_t d) { return Vector(std::vector<double>(d, 0.0)); }
  static Vector Filled(std::size_t d, double value) {
    return Vector(std::vector<double>(d, value));
  }

  std::size_t size() const noexcept { return entries_.size(); }
  double operator[](std::size_t i) const { return entries_[i]; }
  std::span<const double> span() const noexcept { return entries_; }
  const std::vector<double>& entries() const noexcept { return entries_; }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> entries_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Euclidean norm. Uses scaling so huge entries do not overflow before the sqrt.
inline double norm(std::span<const double> v) {
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 0.0;
  if (scale > 1e150 || scale < 1e-150) {
    double s = 0.0;
    for (double x : v) s += (x / scale) * (x / scale);
    return scale * std::sqrt(s);
  }
  return std::sqrt(dot(v, v));
}

inline double norm(const Vector& v) { return norm(v.span()); }

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::kInvalidDimension,
                std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                    " vs " + std::to_string(b) + ")");
  }
}

inline Vector operator+(const Vector& a, const Vector& b) {
  require_same_dim(a.size(), b.size(), "vector add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return Vector(std::move(out));
}

inline Vector operator-(const Vector& a, const Vector& b) {
  require_same_dim(a.size(), b.size(), "vector subtract");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return Vector(std::move(out));
}

inline Vector operator*(double t, const Vector& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = t * v[i];
  return Vector(std::move(out));
}

inline double dot(const Vector& a, const Vector& b) {
  require_same_dim(a.size(), b.size(), "dot");
  return dot(a.span(), b.span());
}

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Philox4x32-10 block function (Salmon et al., Random123).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter Block(Counter ctr, Key key) {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kW0;
      key[1] += kW1;
    }
    return ctr;
  }
};

// Counter-based random stream. The key is the seed; the 128-bit counter is
// (stream_id, position), so streams with distinct ids never overlap and any
// stream is a pure function of (seed, stream_id, number of draws).
//
// Satisfies UniformRandomBitGenerator so it can drive <random> distributions.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (buffered_ == 0) Refill();
    const std::uint64_t out = buffer_[2 - buffered_];
    --buffered_;
    ++position_;
    return out;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  // Uniform on (0, 1].
  double uniform_open_closed() { return 1.0 - uniform01(); }

  // Independent stream sharing the stream id, keyed by (seed, tag).
  RngStream fork(std::uint64_t tag) const {
    return RngStream(detail::splitmix64(seed_ ^ detail::splitmix64(tag + 0x5851F42D4C957F2DULL)),
                     stream_id_);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  // Number of 64-bit words consumed so far.
  std::uint64_t position() const noexcept { return position_; }

 private:
  void Refill() {
    const Philox4x32::Counter ctr = {
        static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
        static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
    const Philox4x32::Key key = {static_cast<std::uint32_t>(seed_),
                                 static_cast<std::uint32_t>(seed_ >> 32)};
    const auto out = Philox4x32::Block(ctr, key);
    buffer_[0] = (std::uint64_t{out[1]} << 32) | out[0];
    buffer_[1] = (std::uint64_t{out[3]} << 32) | out[2];
    buffered_ = 2;
    ++block_;
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::uint64_t position_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
};

// Fills `out` with i.i.d. N(0, sigma^2) draws using the Box-Muller transform.
// Draws are generated in pairs; an odd trailing spare is discarded, so the
// stream advances by exactly 2 * ceil(n / 2) words. sigma == 0 consumes nothing.
inline void fill_gaussian(RngStream& rng, double sigma, std::span<double> out) {
  if (sigma == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  std::size_t i = 0;
  while (i < out.size()) {
    const double u1 = rng.uniform_open_closed();
    const double u2 = rng.uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[i++] = sigma * r * std::cos(angle);
    if (i < out.size()) out[i++] = sigma * r * std::sin(angle);
  }
}

inline Vector gaussian_vector(RngStream& rng, std::size_t d, double sigma) {
  if (d == 0) throw Error(ErrorCode::kInvalidDimension, "gaussian_vector: d must be >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::kInvalidParams, "gaussian_vector: sigma must be finite and >= 0");
  }
  std::vector<double> out(d);
  fill_gaussian(rng, sigma, out);
  return Vector(std::move(out));
}

}  // namespace hclip
