// Copyright 2026 The ToOT Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "image.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "error.hpp"

namespace toot {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kUsage: return "usage error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kDegenerateMask: return "degenerate mask";
    case ErrorKind::kUndefined: return "undefined";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kProtocol: return "protocol error";
  }
  return "error";
}

PlanarImage to_planar(const RgbImage& img) {
  PlanarImage out;
  out.width = img.width;
  out.height = img.height;
  const std::size_t plane = std::size_t(img.width) * img.height;
  out.data.resize(plane * 3);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      out.data[c * plane + i] = float(img.pixels[i * 3 + c]) / 255.0f;
    }
  }
  return out;
}

GrayImage to_gray(const RgbImage& img) {
  GrayImage out;
  out.width = img.width;
  out.height = img.height;
  const std::size_t plane = std::size_t(img.width) * img.height;
  out.data.resize(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    const std::uint8_t* p = &img.pixels[i * 3];
    out.data[i] = float((0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0);
  }
  return out;
}

RgbImage resize_nearest(const RgbImage& img, int width, int height) {
  RgbImage out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(img.height - 1, int((long long)y * img.height / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(img.width - 1, int((long long)x * img.width / width));
      std::memcpy(out.at(x, y), img.at(sx, sy), 3);
    }
  }
  return out;
}

namespace {

struct PngReadCursor {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset;
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what != nullptr) *what = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void png_flush_noop(png_structp) {}

void png_read_from_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + len > cur->bytes->size()) png_error(png, "truncated PNG stream");
  std::memcpy(data, cur->bytes->data() + cur->offset, len);
  cur->offset += len;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  require(img.width > 0 && img.height > 0, ErrorKind::kUsage, "cannot encode an empty image");
  std::vector<std::uint8_t> out;
  std::string what;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &what, png_error_fn,
                                            png_warning_fn);
  if (png == nullptr) fail(ErrorKind::kIo, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(img.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::kIo, "PNG encode failed: " + what);
  }
  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    rows[y] = const_cast<png_bytep>(img.at(0, y));
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

RgbImage decode_png(const std::vector<std::uint8_t>& bytes) {
  require(bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0, ErrorKind::kParse,
          "not a PNG stream");
  std::string what;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &what, png_error_fn,
                                           png_warning_fn);
  if (png == nullptr) fail(ErrorKind::kIo, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  PngReadCursor cursor{&bytes, 0};
  RgbImage img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::kParse, "PNG decode failed: " + what);
  }
  png_set_read_fn(png, &cursor, png_read_from_vector);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  img = RgbImage(int(png_get_image_width(png, info)), int(png_get_image_height(png, info)));
  rows.resize(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = img.at(0, y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const RgbImage& img, const std::filesystem::path& path) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  require(bool(out), ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  require(bool(out), ErrorKind::kIo, "write failed: " + path.string());
}

RgbImage read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_png(bytes);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace toot
