#pragma once

#include <filesystem>

#include "panelvit/image.hpp"

namespace panelvit {

/// Decodes PNG, JPEG, or binary/ASCII portable pixmap (P2/P3/P5/P6) into
/// RGB with values in [0, 1]. Gray inputs are replicated to three
/// channels and alpha is dropped. The container is detected from the
/// leading bytes, not the extension.
///
/// Throws IoError when the file cannot be read and DataError when its
/// contents cannot be decoded.
Image decode_image(const std::filesystem::path& path);

/// Extensions the dataset scanner treats as images (case-insensitive).
bool has_image_extension(const std::filesystem::path& path);

/// 8-bit writers. Values are clamped to [0, 1] and rounded.
void write_ppm(const std::filesystem::path& path, const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace panelvit
