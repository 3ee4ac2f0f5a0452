/******************************************************************************
 * Copyright 2026 The planarc Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "planarc/error.hpp"
#include "planarc/geometry.hpp"

namespace planarc {

/// 8-bit grayscale frame, row-major.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> intensity;
  int index = 0;

  Frame() = default;
  Frame(int w, int h, int idx = 0)
      : width(w), height(h), intensity(static_cast<std::size_t>(w) * h, 0), index(idx) {}

  std::uint8_t& at(int x, int y) { return intensity[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return intensity[static_cast<std::size_t>(y) * width + x]; }
  bool contains(const Point2& p) const {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= width - 1 && p.y() <= height - 1;
  }
};

/// Single-channel float image with clamp-to-edge bilinear lookup.
struct ImageF {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  ImageF() = default;
  ImageF(int w, int h, float fill = 0.f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  float clamped(int x, int y) const {
    return at(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1));
  }

  double sample(double x, double y) const {
    const double fx = std::floor(x), fy = std::floor(y);
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const double ax = x - fx, ay = y - fy;
    const double top = (1 - ax) * clamped(x0, y0) + ax * clamped(x0 + 1, y0);
    const double bot = (1 - ax) * clamped(x0, y0 + 1) + ax * clamped(x0 + 1, y0 + 1);
    return (1 - ay) * top + ay * bot;
  }

  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1;
  }
};

inline ImageF to_float(const Frame& f) {
  ImageF out(f.width, f.height);
  std::transform(f.intensity.begin(), f.intensity.end(), out.data.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v); });
  return out;
}

/// Coarse-to-fine image chain; level 0 is the source frame.
struct Pyramid {
  std::vector<ImageF> levels;
  int frame_index = 0;

  int size() const { return static_cast<int>(levels.size()); }
  const ImageF& level(int l) const { return levels.at(static_cast<std::size_t>(l)); }
};

namespace detail {

// 5-tap binomial smoothing followed by 2x decimation; output is ceil(n/2).
inline ImageF smooth_and_halve(const ImageF& src) {
  static constexpr float kTaps[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
  ImageF horiz(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      float acc = 0.f;
      for (int k = -2; k <= 2; ++k) acc += kTaps[k + 2] * src.clamped(x + k, y);
      horiz.at(x, y) = acc;
    }
  ImageF out((src.width + 1) / 2, (src.height + 1) / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      float acc = 0.f;
      for (int k = -2; k <= 2; ++k) acc += kTaps[k + 2] * horiz.clamped(2 * x, 2 * y + k);
      out.at(x, y) = acc;
    }
  return out;
}

}  // namespace detail

inline Pyramid build_pyramid(const Frame& frame, int levels) {
  if (levels < 1) throw Error(ErrorCode::kInvalidArgument, "pyramid needs at least one level");
  const int need = 1 << (levels - 1);
  if (frame.width < need || frame.height < need)
    throw Error(ErrorCode::kFrameTooSmall, "frame smaller than 2^(levels-1) pixels",
                std::to_string(frame.index));
  if (frame.intensity.size() != static_cast<std::size_t>(frame.width) * frame.height)
    throw Error(ErrorCode::kInvalidArgument, "frame buffer size mismatch", std::to_string(frame.index));
  Pyramid p;
  p.frame_index = frame.index;
  p.levels.push_back(to_float(frame));
  for (int l = 1; l < levels; ++l) p.levels.push_back(detail::smooth_and_halve(p.levels.back()));
  return p;
}

/// ITU-R 601 luma.
inline std::uint8_t luma601(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  return static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
}

}  // namespace planarc
