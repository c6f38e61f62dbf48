#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "panelvit/image.hpp"
#include "panelvit/image_io.hpp"
#include "panelvit/rng.hpp"

namespace support {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("panelvit_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline panelvit::Image solid(std::size_t size, double r, double g, double b) {
  panelvit::Image img(size, size, 3);
  for (std::size_t i = 0; i < size * size; ++i) {
    img.pixels[3 * i] = r;
    img.pixels[3 * i + 1] = g;
    img.pixels[3 * i + 2] = b;
  }
  return img;
}

// Solid base color with mild per-pixel noise.
inline panelvit::Image textured(std::size_t size, const double (&rgb)[3], double noise, panelvit::Rng& rng) {
  panelvit::Image img = solid(size, rgb[0], rgb[1], rgb[2]);
  for (auto& p : img.pixels) {
    p += rng.uniform(-noise, noise);
    p = p < 0 ? 0 : (p > 1 ? 1 : p);
  }
  return img;
}

struct ClassSpec {
  std::string name;
  std::size_t count;
  double rgb[3];
};

// Writes <root>/<class>/img_<k>.png for every class.
inline void write_dataset(const fs::path& root, const std::vector<ClassSpec>& classes, std::size_t size,
                          double noise = 0.05, std::uint64_t seed = 7) {
  panelvit::Rng rng(seed);
  for (const auto& c : classes) {
    fs::create_directories(root / c.name);
    for (std::size_t k = 0; k < c.count; ++k) {
      char name[32];
      std::snprintf(name, sizeof(name), "img_%03zu.png", k);
      panelvit::write_png(root / c.name / name, textured(size, c.rgb, noise, rng));
    }
  }
}

inline std::vector<ClassSpec> two_colors(std::size_t each) {
  return {{"dark", each, {0.15, 0.2, 0.6}}, {"light", each, {0.9, 0.8, 0.2}}};
}

}  // namespace support
