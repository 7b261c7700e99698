// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0
//
// Dense image containers used across the pipeline plus PNG and raw IO.
// Pixel data is row-major; RGB frames are interleaved with channel values
// in [0, 1]. Height fields carry their physical pixel pitch in mm/px.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace taxel {

struct ImageRGB {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // height * width * 3, interleaved

  static ImageRGB zeros(int h, int w) { return {h, w, std::vector<double>(3u * h * w, 0.0)}; }

  double& at(int r, int c, int ch) { return data[(static_cast<std::size_t>(r) * width + c) * 3 + ch]; }
  double at(int r, int c, int ch) const {
    return data[(static_cast<std::size_t>(r) * width + c) * 3 + ch];
  }
  std::size_t size() const { return data.size(); }
};

struct HeightField {
  int height = 0;
  int width = 0;
  double pitch = 0.1;  // mm per pixel
  std::vector<double> data;  // height * width, mm

  static HeightField zeros(int h, int w, double pitch) {
    return {h, w, pitch, std::vector<double>(static_cast<std::size_t>(h) * w, 0.0)};
  }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
};

/// Rounds each channel to 8 bits, the storage precision of saved frames.
std::vector<std::uint8_t> quantize_u8(const ImageRGB& img);

/// Expands 8-bit interleaved RGB bytes back to [0, 1] doubles.
ImageRGB dequantize_u8(std::span<const std::uint8_t> bytes, int height, int width);

/// In-memory round trip through the 8-bit storage precision.
ImageRGB quantize_roundtrip(const ImageRGB& img);

void write_png_rgb8(const std::string& path, const ImageRGB& img);
ImageRGB read_png_rgb8(const std::string& path);

/// Raw height-field container: uint32 height, uint32 width, float64 pitch,
/// then height*width float64 samples, all little-endian.
void write_raw(const std::string& path, const HeightField& hf);
HeightField read_raw(const std::string& path);

}  // namespace taxel
