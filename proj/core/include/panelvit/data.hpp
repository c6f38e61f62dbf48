#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "panelvit/image.hpp"
#include "panelvit/rng.hpp"

namespace panelvit {

struct LabeledImage {
  Image image;  // values in [0, 1]
  std::size_t label = 0;
  std::string source;
};

struct Dataset {
  std::vector<LabeledImage> images;
  std::vector<std::string> class_names;

  std::size_t size() const { return images.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  std::vector<std::size_t> class_counts() const;
  /// Throws DataError when a label is out of range or names repeat.
  void validate() const;
};

/// Image files per class, in the order `load_dataset` assigns labels.
struct DatasetIndex {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::filesystem::path>> files;

  std::size_t total() const;
};

/// Lists `<root>/<class>/*` image files without decoding them. Classes are
/// the sorted subdirectory names; files are sorted by name.
DatasetIndex scan_dataset(const std::filesystem::path& root);

struct LoadOptions {
  /// Square side to resize every image to right after decoding.
  std::optional<std::size_t> resize_to;
  /// Receives one line per skipped file; null silences it.
  std::ostream* log = nullptr;
};

/// Decodes every class directory under `root`. Undecodable files are
/// skipped and logged; a class left empty is a DataError.
Dataset load_dataset(const std::filesystem::path& root, const LoadOptions& options = {});

/// Bilinear resize to target×target with half-pixel centers, clamped to [0, 1].
Image resize(const Image& image, std::size_t target);
LabeledImage resize(const LabeledImage& image, std::size_t target);

struct DatasetSplit {
  Dataset train;
  Dataset val;
};

/// Stratified split: per class, floor(train_fraction·n) images go to
/// train after a seeded shuffle; the rest go to validation.
DatasetSplit split(const Dataset& dataset, double train_fraction, std::uint64_t seed);

/// Per-class train counts the split produces, without shuffling anything.
std::vector<std::size_t> split_train_counts(const std::vector<std::size_t>& class_counts, double train_fraction);

/// Random flip / rotation / zoom augmentation.
///
/// rotation_factor is a fraction of a full turn: angles are drawn from
/// [−factor·2π, +factor·2π]. Zoom factors are drawn independently per axis
/// from [1 − zoom, 1 + zoom]; a factor above 1 samples a larger source
/// window (zoom out).
struct AugmentConfig {
  bool flip_horizontal = true;
  double rotation_factor = 0.02;
  double zoom_height = 0.2;
  double zoom_width = 0.2;
  std::uint64_t seed = 0;

  static AugmentConfig disabled();
  void validate() const;
  bool operator==(const AugmentConfig&) const = default;
};

Image flip_horizontal(const Image& image);

/// Rotation by `angle` radians (counter-clockwise as displayed, y axis
/// pointing down) about the image center, combined with per-axis zoom.
/// Samples bilinearly; coordinates outside the frame replicate the
/// nearest edge pixel.
Image rotate_zoom(const Image& image, double angle, double zoom_height, double zoom_width);

/// Flip (p = 0.5 if enabled), then rotation and zoom. Labels are untouched.
LabeledImage augment(const LabeledImage& image, const AugmentConfig& config, Rng& rng);

/// Per-channel standardization statistics over the training split.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  static NormStats identity(std::size_t channels);
  static NormStats compute(const Dataset& dataset);

  Image apply(const Image& image) const;
  bool operator==(const NormStats&) const = default;
};

}  // namespace panelvit
