#include <algorithm>
#include <cmath>
#include <numbers>

#include "panelvit/data.hpp"
#include "panelvit/error.hpp"

namespace panelvit {

AugmentConfig AugmentConfig::disabled() {
  AugmentConfig cfg;
  cfg.flip_horizontal = false;
  cfg.rotation_factor = 0.0;
  cfg.zoom_height = 0.0;
  cfg.zoom_width = 0.0;
  return cfg;
}

void AugmentConfig::validate() const {
  if (!(rotation_factor >= 0.0) || !(zoom_height >= 0.0) || !(zoom_width >= 0.0)) {
    throw ConfigError("augmentation factors must be non-negative");
  }
  if (zoom_height >= 1.0 || zoom_width >= 1.0) {
    throw ConfigError("augmentation zoom factors must be below 1");
  }
}

Image flip_horizontal(const Image& image) {
  Image out(image.height, image.width, image.channels);
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x)
      for (std::size_t c = 0; c < image.channels; ++c) out.at(y, image.width - 1 - x, c) = image.at(y, x, c);
  return out;
}

Image rotate_zoom(const Image& image, double angle, double zoom_height, double zoom_width) {
  Image out(image.height, image.width, image.channels);
  if (image.height == 0 || image.width == 0) return out;
  const double cy = (static_cast<double>(image.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(image.width) - 1.0) / 2.0;
  const double cs = std::cos(angle), sn = std::sin(angle);
  const auto maxy = static_cast<double>(image.height - 1);
  const auto maxx = static_cast<double>(image.width - 1);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      // Inverse map: undo the rotation of the zoomed offset.
      const double dx = (static_cast<double>(x) - cx) * zoom_width;
      const double dy = (static_cast<double>(y) - cy) * zoom_height;
      const double sx = std::clamp(cx + dx * cs - dy * sn, 0.0, maxx);
      const double sy = std::clamp(cy + dx * sn + dy * cs, 0.0, maxy);
      const auto x0 = static_cast<std::size_t>(sx);
      const auto y0 = static_cast<std::size_t>(sy);
      const std::size_t x1 = std::min(x0 + 1, image.width - 1);
      const std::size_t y1 = std::min(y0 + 1, image.height - 1);
      const double wx = sx - static_cast<double>(x0);
      const double wy = sy - static_cast<double>(y0);
      for (std::size_t c = 0; c < image.channels; ++c) {
        const double top = image.at(y0, x0, c) * (1.0 - wx) + image.at(y0, x1, c) * wx;
        const double bottom = image.at(y1, x0, c) * (1.0 - wx) + image.at(y1, x1, c) * wx;
        out.at(y, x, c) = std::clamp(top * (1.0 - wy) + bottom * wy, 0.0, 1.0);
      }
    }
  }
  return out;
}

LabeledImage augment(const LabeledImage& image, const AugmentConfig& config, Rng& rng) {
  LabeledImage out = image;
  if (config.flip_horizontal && rng.bernoulli(0.5)) {
    out.image = flip_horizontal(out.image);
  }
  const double max_angle = config.rotation_factor * 2.0 * std::numbers::pi;
  const double angle = max_angle > 0.0 ? rng.uniform(-max_angle, max_angle) : 0.0;
  const double zh = config.zoom_height > 0.0 ? rng.uniform(1.0 - config.zoom_height, 1.0 + config.zoom_height) : 1.0;
  const double zw = config.zoom_width > 0.0 ? rng.uniform(1.0 - config.zoom_width, 1.0 + config.zoom_width) : 1.0;
  if (angle != 0.0 || zh != 1.0 || zw != 1.0) {
    out.image = rotate_zoom(out.image, angle, zh, zw);
  }
  return out;
}

}  // namespace panelvit
