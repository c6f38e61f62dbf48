#include "panelvit/data.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "panelvit/error.hpp"
#include "panelvit/image_io.hpp"

namespace panelvit {

namespace fs = std::filesystem;

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (const auto& img : images) {
    if (img.label < counts.size()) ++counts[img.label];
  }
  return counts;
}

void Dataset::validate() const {
  std::set<std::string> names(class_names.begin(), class_names.end());
  if (names.size() != class_names.size()) throw DataError("dataset: class names are not unique");
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].label >= class_names.size()) {
      throw DataError("dataset: sample " + std::to_string(i) + " has label " + std::to_string(images[i].label) +
                      " but only " + std::to_string(class_names.size()) + " classes exist");
    }
  }
}

std::size_t DatasetIndex::total() const {
  std::size_t n = 0;
  for (const auto& f : files) n += f.size();
  return n;
}

DatasetIndex scan_dataset(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw DataError("dataset root " + root.string() + " is not a directory");
  }
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root, ec)) {
    if (entry.is_directory() && entry.path().filename().string().front() != '.') {
      class_dirs.push_back(entry.path());
    }
  }
  if (ec) throw IoError("cannot list " + root.string() + ": " + ec.message());
  if (class_dirs.empty()) throw DataError("dataset root " + root.string() + " contains no class directories");
  std::sort(class_dirs.begin(), class_dirs.end());

  DatasetIndex index;
  std::vector<std::string> empty;
  for (const auto& dir : class_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
      const auto name = entry.path().filename().string();
      if (entry.is_regular_file() && name.front() != '.' && has_image_extension(entry.path())) {
        files.push_back(entry.path());
      }
    }
    if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
    std::sort(files.begin(), files.end());
    if (files.empty()) empty.push_back(dir.filename().string());
    index.class_names.push_back(dir.filename().string());
    index.files.push_back(std::move(files));
  }
  if (!empty.empty()) {
    std::string list;
    for (const auto& e : empty) list += (list.empty() ? "" : ", ") + e;
    throw DataError("dataset classes with no images: " + list);
  }
  return index;
}

Dataset load_dataset(const fs::path& root, const LoadOptions& options) {
  const DatasetIndex index = scan_dataset(root);
  Dataset ds;
  ds.class_names = index.class_names;
  std::vector<std::string> emptied;
  for (std::size_t c = 0; c < index.files.size(); ++c) {
    std::size_t loaded = 0;
    for (const auto& path : index.files[c]) {
      try {
        Image img = decode_image(path);
        if (options.resize_to) img = resize(img, *options.resize_to);
        ds.images.push_back({std::move(img), c, path.string()});
        ++loaded;
      } catch (const DataError& e) {
        if (options.log) *options.log << "skipping " << path.string() << ": " << e.what() << '\n';
      }
    }
    if (loaded == 0) emptied.push_back(index.class_names[c]);
  }
  if (!emptied.empty()) {
    std::string list;
    for (const auto& e : emptied) list += (list.empty() ? "" : ", ") + e;
    throw DataError("dataset classes with no decodable images: " + list);
  }
  return ds;
}

Image resize(const Image& image, std::size_t target) {
  if (target == 0) throw ParameterError("resize: target size must be positive");
  if (image.height == 0 || image.width == 0) throw DataError("resize: empty image");
  Image out(target, target, image.channels);
  const double sy = static_cast<double>(image.height) / static_cast<double>(target);
  const double sx = static_cast<double>(image.width) / static_cast<double>(target);
  const auto maxy = static_cast<double>(image.height - 1);
  const auto maxx = static_cast<double>(image.width - 1);
  for (std::size_t y = 0; y < target; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, maxy);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < target; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, maxx);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < image.channels; ++c) {
        const double top = image.at(y0, x0, c) * (1.0 - wx) + image.at(y0, x1, c) * wx;
        const double bottom = image.at(y1, x0, c) * (1.0 - wx) + image.at(y1, x1, c) * wx;
        out.at(y, x, c) = std::clamp(top * (1.0 - wy) + bottom * wy, 0.0, 1.0);
      }
    }
  }
  return out;
}

LabeledImage resize(const LabeledImage& image, std::size_t target) {
  return {resize(image.image, target), image.label, image.source};
}

std::vector<std::size_t> split_train_counts(const std::vector<std::size_t>& class_counts, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ParameterError("split: train_fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> train(class_counts.size());
  for (std::size_t c = 0; c < class_counts.size(); ++c) {
    train[c] = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(class_counts[c])));
  }
  return train;
}

DatasetSplit split(const Dataset& dataset, double train_fraction, std::uint64_t seed) {
  dataset.validate();
  const std::size_t C = dataset.num_classes();
  std::vector<std::vector<std::size_t>> members(C);
  for (std::size_t i = 0; i < dataset.images.size(); ++i) members[dataset.images[i].label].push_back(i);

  std::vector<std::size_t> counts(C);
  for (std::size_t c = 0; c < C; ++c) {
    counts[c] = members[c].size();
    if (counts[c] < 2) {
      throw DataError("split: class '" + dataset.class_names[c] + "' has " + std::to_string(counts[c]) +
                      " image(s); at least 2 are required");
    }
  }
  const auto train_counts = split_train_counts(counts, train_fraction);

  DatasetSplit out;
  out.train.class_names = dataset.class_names;
  out.val.class_names = dataset.class_names;
  for (std::size_t c = 0; c < C; ++c) {
    auto rng = Rng::substream(seed, {c});
    rng.shuffle(std::span<std::size_t>(members[c]));
    for (std::size_t k = 0; k < members[c].size(); ++k) {
      auto& dst = k < train_counts[c] ? out.train : out.val;
      dst.images.push_back(dataset.images[members[c][k]]);
    }
  }
  return out;
}

NormStats NormStats::identity(std::size_t channels) {
  return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
}

NormStats NormStats::compute(const Dataset& dataset) {
  if (dataset.images.empty()) throw DataError("normalization statistics need at least one image");
  const std::size_t ch = dataset.images.front().image.channels;
  std::vector<double> sum(ch, 0.0), sq(ch, 0.0);
  std::size_t count = 0;
  for (const auto& li : dataset.images) {
    const auto& img = li.image;
    if (img.channels != ch) throw DataError("normalization: mixed channel counts in " + li.source);
    for (std::size_t i = 0; i < img.height * img.width; ++i) {
      for (std::size_t c = 0; c < ch; ++c) {
        const double v = img.pixels[i * ch + c];
        sum[c] += v;
        sq[c] += v * v;
      }
    }
    count += img.height * img.width;
  }
  NormStats stats;
  for (std::size_t c = 0; c < ch; ++c) {
    const double m = sum[c] / static_cast<double>(count);
    const double var = std::max(0.0, sq[c] / static_cast<double>(count) - m * m);
    const double sd = std::sqrt(var);
    stats.mean.push_back(m);
    stats.stddev.push_back(sd > 1e-12 ? sd : 1.0);
  }
  return stats;
}

Image NormStats::apply(const Image& image) const {
  if (image.channels != mean.size()) {
    throw DimensionError("normalization has " + std::to_string(mean.size()) + " channels, image has " +
                         std::to_string(image.channels));
  }
  Image out = image;
  const std::size_t ch = image.channels;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const std::size_t c = i % ch;
    out.pixels[i] = (out.pixels[i] - mean[c]) / stddev[c];
  }
  return out;
}

}  // namespace panelvit
