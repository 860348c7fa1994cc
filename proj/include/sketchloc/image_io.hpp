#pragma once

// Raster decoding/encoding: binary and ASCII PGM, 8-bit PNG via libpng.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "sketchloc/error.hpp"

namespace sketchloc {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0) {}

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    const std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
  }
};

/// Rec. 601 luma, rounded to nearest.
inline std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  return static_cast<std::uint8_t>(std::lround(std::min(255.0, std::max(0.0, y))));
}

namespace detail {

class PnmReader {
 public:
  explicit PnmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || bytes_[pos_] < '0' || bytes_[pos_] > '9') {
      throw FormatError("PGM: expected an unsigned integer");
    }
    long v = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1L << 30)) throw FormatError("PGM: integer overflow");
      ++pos_;
    }
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2')) {
    throw FormatError("PGM: bad magic");
  }
  const bool binary = bytes[1] == '5';
  PnmReader r(bytes);
  r.advance(2);
  const long w = r.read_uint();
  const long h = r.read_uint();
  const long maxval = r.read_uint();
  if (maxval <= 0 || maxval > 65535) throw FormatError("PGM: bad maxval");
  GrayImage img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  img.pixels.resize(n);
  const auto rescale = [maxval](long v) {
    if (v > maxval) throw FormatError("PGM: sample exceeds maxval");
    return static_cast<std::uint8_t>(maxval == 255 ? v : std::lround(255.0 * static_cast<double>(v) / static_cast<double>(maxval)));
  };
  if (binary) {
    r.advance(1);  // single whitespace after maxval
    const std::size_t bps = maxval > 255 ? 2 : 1;
    if (r.pos() > bytes.size() || bytes.size() - r.pos() < n * bps) throw FormatError("PGM: truncated raster");
    const std::uint8_t* p = bytes.data() + r.pos();
    for (std::size_t i = 0; i < n; ++i) {
      const long v = bps == 2 ? (static_cast<long>(p[2 * i]) << 8) | p[2 * i + 1] : static_cast<long>(p[i]);
      img.pixels[i] = rescale(v);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = rescale(r.read_uint());
  }
  return img;
}

inline GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError(std::string("PNG: ") + image.message);
  }
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("PNG: " + msg);
  }
  GrayImage img;
  img.width = static_cast<int>(image.width);
  img.height = static_cast<int>(image.height);
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* px = &rgba[4 * i];
    const double a = px[3] / 255.0;
    // Transparent regions are treated as blank paper.
    const auto over_white = [a](std::uint8_t c) {
      return static_cast<std::uint8_t>(std::lround(c * a + 255.0 * (1.0 - a)));
    };
    img.pixels[i] = luma(over_white(px[0]), over_white(px[1]), over_white(px[2]));
  }
  return img;
}

inline std::vector<std::uint8_t> encode_png(int width, int height, png_uint_32 format, const std::uint8_t* data) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, data, 0, nullptr)) {
    throw FormatError(std::string("PNG encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, data, 0, nullptr)) {
    throw FormatError(std::string("PNG encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace detail

/// Decodes PGM (P5/P2) or PNG, selected by magic bytes. Color input is converted with luma().
inline GrayImage decode_gray_image(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t png_magic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  GrayImage img;
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), png_magic, 8) == 0) {
    img = detail::decode_png(bytes);
  } else if (bytes.size() >= 2 && bytes[0] == 'P') {
    img = detail::decode_pgm(bytes);
  } else {
    throw FormatError("unrecognized image format");
  }
  return img;
}

inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  const std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

inline std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  return detail::encode_png(img.width, img.height, PNG_FORMAT_GRAY, img.pixels.data());
}

inline std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  return detail::encode_png(img.width, img.height, PNG_FORMAT_RGB, img.pixels.data());
}

}  // namespace sketchloc
