#pragma once

#include <filesystem>
#include <vector>

#include "rift/datagen.hpp"

namespace rift::io {

/// 8-bit quantization: round((v + 1) * 127.5), clamped to [0, 255].
[[nodiscard]] std::uint8_t quantize(float v) noexcept;
[[nodiscard]] float dequantize(std::uint8_t u) noexcept;

/// Lossless 8-bit PNG (RGB for 3 channels, gray for 1).
void write_png(const std::filesystem::path& path, const datagen::ImageGrid& img);
[[nodiscard]] datagen::ImageGrid read_png(const std::filesystem::path& path);

/// Tiles equally sized images row-major into one image with `cols` columns and a 1-pixel gap.
[[nodiscard]] datagen::ImageGrid tile(const std::vector<datagen::ImageGrid>& images, int cols);

}  // namespace rift::io
