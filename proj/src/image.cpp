#include "knitply/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

#include "binio.hpp"
#include "knitply/errors.hpp"
#include "text_util.hpp"

namespace knitply {

Image downscale(const Image& img, int factor) {
  if (factor < 1) throw InvariantError("downscale factor must be >= 1");
  const int w = std::max(1, (img.width + factor - 1) / factor);
  const int h = std::max(1, (img.height + factor - 1) / factor);
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Rgb sum{};
      int n = 0;
      for (int sy = y * factor; sy < std::min(img.height, (y + 1) * factor); ++sy) {
        for (int sx = x * factor; sx < std::min(img.width, (x + 1) * factor); ++sx, ++n) sum += img.at(sx, sy);
      }
      out.set(x, y, n > 0 ? sum / n : Rgb{});
    }
  }
  return out;
}

double mean_squared_error(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw InvariantError("image sizes differ");
  double sum = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    sum += d * d;
  }
  return a.data.empty() ? 0.0 : sum / double(a.data.size());
}

std::string serialize_pfm(const Image& img) {
  detail::ByteWriter w;
  w.raw("PF\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n-1.0\n");
  for (int y = img.height - 1; y >= 0; --y) {
    for (int x = 0; x < img.width; ++x) {
      const auto i = img.index(x, y);
      for (int c = 0; c < 3; ++c) w.f32(img.data[i + c]);
    }
  }
  return w.take();
}

Image deserialize_pfm(std::string_view bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  if (token() != "PF") throw ParseError("PFM: bad magic (expected 'PF')");
  const auto w = detail::parse_uint(token());
  const auto h = detail::parse_uint(token());
  const double scale = detail::parse_double(token());
  if (scale >= 0) throw ParseError("PFM: only little-endian files are supported");
  if (w == 0 || h == 0 || w > 65536 || h > 65536) throw ParseError("PFM: invalid size");
  ++pos;  // single whitespace before the raster
  if (pos > bytes.size()) throw ParseError("PFM: truncated");
  detail::ByteReader r(bytes.substr(pos), "PFM");
  Image img(static_cast<int>(w), static_cast<int>(h));
  for (int y = img.height - 1; y >= 0; --y) {
    for (int x = 0; x < img.width; ++x) {
      const auto i = img.index(x, y);
      for (int c = 0; c < 3; ++c) img.data[i + c] = r.f32();
    }
  }
  r.expect_end();
  return img;
}

void write_pfm(const std::filesystem::path& path, const Image& img) { detail::write_text_file(path, serialize_pfm(img)); }

Image read_pfm(const std::filesystem::path& path) { return deserialize_pfm(detail::read_binary_file(path)); }

namespace {

std::uint8_t to_srgb8(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const double s = v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1 / 2.4) - 0.055;
  return static_cast<std::uint8_t>(std::lround(s * 255));
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& img, double exposure) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot write '" + path.string() + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed for '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_sRGB(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const auto i = img.index(x, y);
      for (int c = 0; c < 3; ++c) row[static_cast<std::size_t>(x) * 3 + c] = to_srgb8(img.data[i + c] * exposure);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace knitply
