#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "knitply/vecmath.hpp"

namespace knitply {

/// Linear RGB, float per channel, rows top to bottom.
struct Image {
  int width = 0, height = 0;
  std::vector<float> data;  // interleaved rgb

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

  std::size_t index(int x, int y) const { return (static_cast<std::size_t>(y) * width + x) * 3; }
  Rgb at(int x, int y) const {
    const auto i = index(x, y);
    return {data[i], data[i + 1], data[i + 2]};
  }
  void set(int x, int y, const Rgb& c) {
    const auto i = index(x, y);
    data[i] = static_cast<float>(c.x);
    data[i + 1] = static_cast<float>(c.y);
    data[i + 2] = static_cast<float>(c.z);
  }
};

/// Box-filter downscale by an integer factor; trailing partial blocks are averaged over what exists.
Image downscale(const Image& img, int factor);

/// Mean of the squared difference over all pixels and channels.
double mean_squared_error(const Image& a, const Image& b);

// PFM: "PF\n<w> <h>\n-1.0\n" then little-endian float rgb, bottom row first.
std::string serialize_pfm(const Image& img);
Image deserialize_pfm(std::string_view bytes);
void write_pfm(const std::filesystem::path& path, const Image& img);
Image read_pfm(const std::filesystem::path& path);

/// 8-bit sRGB after multiplying by `exposure` and clamping to [0, 1].
void write_png(const std::filesystem::path& path, const Image& img, double exposure = 1.0);

}  // namespace knitply
