#pragma once

#include <png.h>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "depthfill/errors.hpp"
#include "depthfill/tensor.hpp"

namespace depthfill::png_io {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) raise<IoError>("cannot open '", path, "' (mode ", mode, ")");
  return f;
}

struct ReadCtx {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~ReadCtx() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct WriteCtx {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~WriteCtx() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

// Decodes a PNG into tightly packed rows. Checks bit depth and color type
// against what the caller expects before reading pixel data.
inline std::vector<std::uint8_t> read_png(const std::string& path,
                                          int expect_bit_depth,
                                          int expect_color_type,
                                          int bytes_per_pixel, int& width,
                                          int& height) {
  FilePtr fp = open_file(path, "rb");
  ReadCtx ctx;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;

  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) raise<IoError>("libpng: failed to create read struct");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) raise<IoError>("libpng: failed to create info struct");

  if (setjmp(png_jmpbuf(ctx.png)))
    raise<FormatError>("'", path, "' is not a readable PNG");

  png_init_io(ctx.png, fp.get());
  png_read_info(ctx.png, ctx.info);

  width = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
  height = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
  const int bit_depth = png_get_bit_depth(ctx.png, ctx.info);
  const int color_type = png_get_color_type(ctx.png, ctx.info);
  if (bit_depth != expect_bit_depth || color_type != expect_color_type)
    raise<FormatError>("'", path, "': expected bit depth ", expect_bit_depth,
                       " color type ", expect_color_type, ", file has bit depth ",
                       bit_depth, " color type ", color_type);

  if (bit_depth == 16 && std::endian::native == std::endian::little)
    png_set_swap(ctx.png);
  png_set_interlace_handling(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  const std::size_t stride = static_cast<std::size_t>(width) * bytes_per_pixel;
  pixels.resize(stride * height);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = pixels.data() + y * stride;

  if (setjmp(png_jmpbuf(ctx.png)))
    raise<FormatError>("'", path, "': truncated or corrupt PNG data");
  png_read_image(ctx.png, rows.data());
  return pixels;
}

inline void write_png(const std::string& path, const std::uint8_t* pixels,
                      int width, int height, int bit_depth, int color_type,
                      int bytes_per_pixel) {
  FilePtr fp = open_file(path, "wb");
  WriteCtx ctx;
  std::vector<png_bytep> rows(height);
  const std::size_t stride = static_cast<std::size_t>(width) * bytes_per_pixel;
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(pixels + y * stride);

  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) raise<IoError>("libpng: failed to create write struct");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) raise<IoError>("libpng: failed to create info struct");

  if (setjmp(png_jmpbuf(ctx.png)))
    raise<IoError>("failed to write PNG '", path, "'");

  png_init_io(ctx.png, fp.get());
  png_set_IHDR(ctx.png, ctx.info, width, height, bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);
  if (bit_depth == 16 && std::endian::native == std::endian::little)
    png_set_swap(ctx.png);
  png_write_image(ctx.png, rows.data());
  png_write_end(ctx.png, ctx.info);
}

}  // namespace detail

/// 16-bit single-channel PNG -> host-order values.
inline Grid<std::uint16_t> read_gray16(const std::string& path) {
  int w = 0, h = 0;
  auto bytes = detail::read_png(path, 16, PNG_COLOR_TYPE_GRAY, 2, w, h);
  Grid<std::uint16_t> g(h, w);
  std::memcpy(g.data(), bytes.data(), bytes.size());
  return g;
}

inline void write_gray16(const std::string& path, const Grid<std::uint16_t>& g) {
  detail::write_png(path, reinterpret_cast<const std::uint8_t*>(g.data()),
                    g.width(), g.height(), 16, PNG_COLOR_TYPE_GRAY, 2);
}

/// 8-bit 3-channel PNG -> 3 x H x W byte tensor.
inline Tensor<std::uint8_t> read_rgb8(const std::string& path) {
  int w = 0, h = 0;
  auto bytes = detail::read_png(path, 8, PNG_COLOR_TYPE_RGB, 3, w, h);
  Tensor<std::uint8_t> t(3, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        t(c, y, x) = bytes[(static_cast<std::size_t>(y) * w + x) * 3 + c];
  return t;
}

inline void write_rgb8(const std::string& path, const Tensor<std::uint8_t>& t) {
  if (t.channels() != 3)
    raise<ShapeError>("write_rgb8 requires 3 channels, got ", t.channels());
  std::vector<std::uint8_t> bytes(t.size());
  const int h = t.height(), w = t.width();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        bytes[(static_cast<std::size_t>(y) * w + x) * 3 + c] = t(c, y, x);
  detail::write_png(path, bytes.data(), w, h, 8, PNG_COLOR_TYPE_RGB, 3);
}

inline void write_gray8(const std::string& path, const Grid<std::uint8_t>& g) {
  detail::write_png(path, g.data(), g.width(), g.height(), 8,
                    PNG_COLOR_TYPE_GRAY, 1);
}

}  // namespace depthfill::png_io
