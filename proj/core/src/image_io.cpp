#include "panelvit/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

// jpeglib.h expects FILE and size_t to be declared already.
#include <jpeglib.h>

#include "panelvit/error.hpp"

namespace panelvit {

namespace {

using Bytes = std::vector<unsigned char>;

Bytes read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("cannot read " + path.string());
  return bytes;
}

Image from_8bit(const unsigned char* src, std::size_t h, std::size_t w, std::size_t src_channels) {
  Image img(h, w, 3);
  for (std::size_t i = 0; i < h * w; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t sc = src_channels >= 3 ? c : 0;
      img.pixels[i * 3 + c] = src[i * src_channels + sc] / 255.0;
    }
  }
  return img;
}

Image decode_png(const Bytes& bytes, const std::string& name) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw DataError("undecodable PNG " + name + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError("undecodable PNG " + name + ": " + msg);
  }
  return from_8bit(buffer.data(), image.height, image.width, 3);
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Kept free of objects with destructors between setjmp and longjmp.
bool decode_jpeg_raw(const Bytes& bytes, std::vector<unsigned char>& out, std::size_t& h, std::size_t& w,
                     std::size_t& ch, std::string& message) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    message = err.message;
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.jpeg_color_space != JCS_GRAYSCALE) cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  h = cinfo.output_height;
  w = cinfo.output_width;
  ch = static_cast<std::size_t>(cinfo.output_components);
  out.resize(h * w * ch);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * ch;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

Image decode_jpeg(const Bytes& bytes, const std::string& name) {
  std::vector<unsigned char> raw;
  std::size_t h = 0, w = 0, ch = 0;
  std::string message;
  if (!decode_jpeg_raw(bytes, raw, h, w, ch, message)) {
    throw DataError("undecodable JPEG " + name + ": " + message);
  }
  return from_8bit(raw.data(), h, w, ch);
}

// Netpbm header tokens, skipping '#' comments.
class PnmReader {
 public:
  explicit PnmReader(const Bytes& b) : b_(b) {}

  long number() {
    skip_space();
    if (pos_ >= b_.size() || !std::isdigit(b_[pos_])) throw std::runtime_error("expected a number");
    long v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > 1'000'000'000) throw std::runtime_error("number too large");
    }
    return v;
  }
  void single_whitespace() { ++pos_; }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

 private:
  void skip_space() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }
  const Bytes& b_;
  std::size_t pos_ = 0;
};

Image decode_pnm(const Bytes& bytes, const std::string& name) {
  const char kind = static_cast<char>(bytes[1]);
  const bool ascii = kind == '2' || kind == '3';
  const std::size_t channels = (kind == '3' || kind == '6') ? 3 : 1;
  try {
    PnmReader r(bytes);
    r.seek(2);
    const long w = r.number(), h = r.number(), maxval = r.number();
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw std::runtime_error("bad header");
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;
    std::vector<double> samples(n);
    if (ascii) {
      for (auto& s : samples) s = static_cast<double>(r.number());
    } else {
      r.single_whitespace();
      const std::size_t bps = maxval > 255 ? 2 : 1;
      if (bytes.size() < r.pos() + n * bps) throw std::runtime_error("truncated raster");
      const unsigned char* p = bytes.data() + r.pos();
      for (std::size_t i = 0; i < n; ++i) {
        samples[i] = bps == 1 ? p[i] : static_cast<double>((p[2 * i] << 8) | p[2 * i + 1]);
      }
    }
    Image img(static_cast<std::size_t>(h), static_cast<std::size_t>(w), 3);
    for (std::size_t i = 0; i < img.height * img.width; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = samples[i * channels + (channels == 3 ? c : 0)] / static_cast<double>(maxval);
        img.pixels[i * 3 + c] = std::clamp(v, 0.0, 1.0);
      }
    }
    return img;
  } catch (const std::runtime_error& e) {
    throw DataError("undecodable PNM " + name + ": " + e.what());
  }
}

std::vector<unsigned char> to_8bit(const Image& image) {
  std::vector<unsigned char> out(image.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<unsigned char>(std::lround(std::clamp(image.pixels[i], 0.0, 1.0) * 255.0));
  }
  return out;
}

}  // namespace

Image decode_image(const std::filesystem::path& path) {
  const Bytes bytes = read_bytes(path);
  const std::string name = path.string();
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes, name);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return decode_jpeg(bytes, name);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '3' || bytes[1] == '5' || bytes[1] == '6')) {
    return decode_pnm(bytes, name);
  }
  throw DataError("unrecognized image format: " + name);
}

bool has_image_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3) throw ContractError("write_ppm needs a 3-channel image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  const auto raw = to_8bit(image);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3) throw ContractError("write_png needs a 3-channel image");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  const auto raw = to_8bit(image);
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, raw.data(), 0, nullptr)) {
    throw IoError("cannot write " + path.string() + ": " + png.message);
  }
}

}  // namespace panelvit
