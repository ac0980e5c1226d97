#include "rift/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace rift::io {

using datagen::ImageGrid;

std::uint8_t quantize(float v) noexcept {
  const float u = std::round((v + 1.0f) * 127.5f);
  return static_cast<std::uint8_t>(std::clamp(u, 0.0f, 255.0f));
}

float dequantize(std::uint8_t u) noexcept { return static_cast<float>(u) / 127.5f - 1.0f; }

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw RuntimeFailure("cannot open image file " + path.string());
  return f;
}

}  // namespace

void write_png(const std::filesystem::path& path, const ImageGrid& img) {
  if (img.channels != 1 && img.channels != 3) throw RuntimeFailure("write_png: only 1 or 3 channels supported");
  auto f = open_file(path, "wb");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw RuntimeFailure("libpng: cannot allocate write structs");
  }
  std::vector<std::uint8_t> bytes(img.data.size());
  std::transform(img.data.begin(), img.data.end(), bytes.begin(), quantize);
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[y] = bytes.data() + static_cast<std::size_t>(y) * img.width * img.channels;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw RuntimeFailure("libpng: write failed for " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width, img.height, 8, img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageGrid read_png(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw RuntimeFailure("libpng: cannot allocate read structs");
  }
  ImageGrid img;
  std::vector<std::uint8_t> bytes;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw RuntimeFailure("libpng: cannot decode " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) != 8 || (color != PNG_COLOR_TYPE_RGB && color != PNG_COLOR_TYPE_GRAY)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw RuntimeFailure("unsupported PNG layout in " + path.string() + " (need 8-bit RGB or gray)");
  }
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int c = color == PNG_COLOR_TYPE_RGB ? 3 : 1;
  bytes.resize(static_cast<std::size_t>(w) * h * c);
  rows.resize(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[y] = bytes.data() + static_cast<std::size_t>(y) * w * c;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img = ImageGrid(h, w, c);
  std::transform(bytes.begin(), bytes.end(), img.data.begin(), dequantize);
  return img;
}

ImageGrid tile(const std::vector<ImageGrid>& images, int cols) {
  if (images.empty() || cols < 1) throw RuntimeFailure("tile: need at least one image and one column");
  const int h = images.front().height, w = images.front().width, c = images.front().channels;
  const int n = static_cast<int>(images.size());
  const int rows = (n + cols - 1) / cols;
  ImageGrid out(rows * (h + 1) - 1, cols * (w + 1) - 1, c, 1.0f);
  for (int i = 0; i < n; ++i) {
    const auto& im = images[static_cast<std::size_t>(i)];
    if (im.height != h || im.width != w || im.channels != c) throw RuntimeFailure("tile: images differ in shape");
    const int oy = (i / cols) * (h + 1), ox = (i % cols) * (w + 1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < c; ++ch) out.at(oy + y, ox + x, ch) = im.at(y, x, ch);
  }
  return out;
}

}  // namespace rift::io
