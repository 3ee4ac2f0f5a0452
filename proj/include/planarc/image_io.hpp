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
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include "planarc/error.hpp"
#include "planarc/image.hpp"

namespace planarc {

namespace detail {

inline std::string lower_extension(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

inline void skip_pnm_space(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

}  // namespace detail

/// Binary (P5) or ASCII (P2) graymap, or P6 color converted to luma.
inline Frame read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableImage, "cannot open", path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P2" && magic != "P6")
    throw Error(ErrorCode::kUnreadableImage, "not a PGM/PPM file", path.string());
  int w = 0, h = 0, maxval = 0;
  detail::skip_pnm_space(in);
  in >> w;
  detail::skip_pnm_space(in);
  in >> h;
  detail::skip_pnm_space(in);
  in >> maxval;
  if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw Error(ErrorCode::kUnreadableImage, "bad header or unsupported bit depth", path.string());
  in.get();
  Frame f(w, h);
  const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  auto rescale = [maxval](int v) {
    return static_cast<std::uint8_t>(maxval == 255 ? v : std::lround(255.0 * v / maxval));
  };
  if (magic == "P2") {
    for (std::size_t i = 0; i < n; ++i) {
      int v = -1;
      in >> v;
      if (!in || v < 0 || v > maxval) throw Error(ErrorCode::kUnreadableImage, "truncated pixel data", path.string());
      f.intensity[i] = rescale(v);
    }
    return f;
  }
  const std::size_t channels = magic == "P6" ? 3 : 1;
  std::vector<std::uint8_t> buf(n * channels);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw Error(ErrorCode::kUnreadableImage, "truncated pixel data", path.string());
  for (std::size_t i = 0; i < n; ++i)
    f.intensity[i] = channels == 1 ? rescale(buf[i])
                                   : luma601(rescale(buf[3 * i]), rescale(buf[3 * i + 1]), rescale(buf[3 * i + 2]));
  return f;
}

inline void write_pgm(const Frame& f, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write", path.string());
  out << "P5\n" << f.width << " " << f.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(f.intensity.data()), static_cast<std::streamsize>(f.intensity.size()));
}

namespace detail {

struct PngReadBuffer {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos = 0;
};

// Decodes any PNG into 8-bit gray (color through luma, alpha dropped).
inline Frame decode_png(const std::uint8_t* data, std::size_t size, const std::string& name) {
  if (size < 8 || png_sig_cmp(data, 0, 8) != 0) throw Error(ErrorCode::kUnreadableImage, "not a PNG file", name);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kUnreadableImage, "libpng initialization failed", name);
  }
  PngReadBuffer src{data, size};
  std::vector<std::uint8_t> buf;
  std::vector<png_bytep> rows;
  int w = 0, h = 0, channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kUnreadableImage, "corrupt PNG data", name);
  }
  png_set_read_fn(png, &src, [](png_structp p, png_bytep out, png_size_t n) {
    auto* b = static_cast<PngReadBuffer*>(png_get_io_ptr(p));
    if (b->pos + n > b->size) png_error(p, "read past end");
    std::copy(b->data + b->pos, b->data + b->pos + n, out);
    b->pos += n;
  });
  png_read_info(png, info);
  const int type = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  channels = png_get_channels(png, info);
  buf.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(channels));
  rows.resize(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = buf.data() + static_cast<std::size_t>(y) * w * channels;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  Frame f(w, h);
  for (std::size_t i = 0; i < f.intensity.size(); ++i) {
    const std::uint8_t* p = buf.data() + i * static_cast<std::size_t>(channels);
    f.intensity[i] = channels >= 3 ? luma601(p[0], p[1], p[2]) : p[0];
  }
  return f;
}

}  // namespace detail

inline Frame read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableImage, "cannot open", path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return detail::decode_png(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size(), path.string());
}

/// 8-bit grayscale PNG in memory.
inline std::string encode_png(const Frame& f) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIoError, "libpng initialization failed");
  }
  std::string out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIoError, "PNG encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), n);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(f.width), static_cast<png_uint_32>(f.height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < f.height; ++y)
    png_write_row(png, const_cast<png_bytep>(f.intensity.data() + static_cast<std::size_t>(y) * f.width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline void write_png(const Frame& f, const std::filesystem::path& path) {
  const std::string bytes = encode_png(f);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write", path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline bool is_image_file(const std::filesystem::path& p) {
  const std::string e = detail::lower_extension(p);
  return e == ".png" || e == ".pgm" || e == ".ppm" || e == ".pnm";
}

inline Frame read_image(const std::filesystem::path& path) {
  return detail::lower_extension(path) == ".png" ? read_png(path) : read_pnm(path);
}

/// Image files of a directory in lexicographic filename order.
inline std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw Error(ErrorCode::kIoError, "not a directory", dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

/// Loads every frame of `dir`, indexed 0..n-1 in filename order.
inline std::vector<Frame> load_frames(const std::filesystem::path& dir) {
  const auto files = list_frames(dir);
  if (files.empty()) throw Error(ErrorCode::kEmptySequence, "no PNG/PGM frames", dir.string());
  std::vector<Frame> frames;
  frames.reserve(files.size());
  for (const auto& path : files) {
    Frame f = read_image(path);
    if (!frames.empty() && (f.width != frames.front().width || f.height != frames.front().height))
      throw Error(ErrorCode::kMixedDimensions,
                  std::to_string(f.width) + "x" + std::to_string(f.height) + " differs from " +
                      std::to_string(frames.front().width) + "x" + std::to_string(frames.front().height),
                  path.filename().string());
    f.index = static_cast<int>(frames.size());
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace planarc
