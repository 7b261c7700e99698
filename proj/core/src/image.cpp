// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include "taxel/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace taxel {

namespace {

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

std::vector<std::uint8_t> quantize_u8(const ImageRGB& img) {
  std::vector<std::uint8_t> out(img.data.size());
  std::transform(img.data.begin(), img.data.end(), out.begin(), to_u8);
  return out;
}

ImageRGB dequantize_u8(std::span<const std::uint8_t> bytes, int height, int width) {
  if (bytes.size() != static_cast<std::size_t>(height) * width * 3)
    throw std::invalid_argument("dequantize_u8: byte count does not match dimensions");
  ImageRGB img = ImageRGB::zeros(height, width);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
  return img;
}

ImageRGB quantize_roundtrip(const ImageRGB& img) {
  return dequantize_u8(quantize_u8(img), img.height, img.width);
}

void write_png_rgb8(const std::string& path, const ImageRGB& img) {
  if (img.height <= 0 || img.width <= 0)
    throw std::invalid_argument("write_png_rgb8: empty image");
  const std::vector<std::uint8_t> bytes = quantize_u8(img);

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("write_png_rgb8: cannot open " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("write_png_rgb8: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("write_png_rgb8: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("write_png_rgb8: libpng error writing " + path);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < img.height; ++r)
    png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(r) * img.width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageRGB read_png_rgb8(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("read_png_rgb8: cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("read_png_rgb8: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("read_png_rgb8: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png_rgb8: libpng error reading " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const int height = static_cast<int>(png_get_image_height(png, info));
  const int width = static_cast<int>(png_get_image_width(png, info));
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png_rgb8: unexpected row layout in " + path);
  }

  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(height) * width * 3);
  for (int r = 0; r < height; ++r)
    png_read_row(png, bytes.data() + static_cast<std::size_t>(r) * width * 3, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  return dequantize_u8(bytes, height, width);
}

void write_raw(const std::string& path, const HeightField& hf) {
  if (hf.height <= 0 || hf.width <= 0) throw std::invalid_argument("write_raw: empty field");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_raw: cannot open " + path);
  const std::uint32_t h = static_cast<std::uint32_t>(hf.height);
  const std::uint32_t w = static_cast<std::uint32_t>(hf.width);
  out.write(reinterpret_cast<const char*>(&h), sizeof h);
  out.write(reinterpret_cast<const char*>(&w), sizeof w);
  out.write(reinterpret_cast<const char*>(&hf.pitch), sizeof hf.pitch);
  out.write(reinterpret_cast<const char*>(hf.data.data()),
            static_cast<std::streamsize>(hf.data.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write_raw: short write to " + path);
}

HeightField read_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_raw: cannot open " + path);
  std::uint32_t h = 0, w = 0;
  double pitch = 0.0;
  in.read(reinterpret_cast<char*>(&h), sizeof h);
  in.read(reinterpret_cast<char*>(&w), sizeof w);
  in.read(reinterpret_cast<char*>(&pitch), sizeof pitch);
  if (!in || h == 0 || w == 0 || !(pitch > 0.0))
    throw std::runtime_error("read_raw: malformed header in " + path);
  HeightField hf = HeightField::zeros(static_cast<int>(h), static_cast<int>(w), pitch);
  in.read(reinterpret_cast<char*>(hf.data.data()),
          static_cast<std::streamsize>(hf.data.size() * sizeof(double)));
  if (!in) throw std::runtime_error("read_raw: truncated data in " + path);
  return hf;
}

}  // namespace taxel
