#include "panelvit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "panelvit/error.hpp"

namespace panelvit {

namespace {

constexpr char kMagic[8] = {'P', 'V', 'I', 'T', 'C', 'K', 'P', 'T'};
constexpr char kTrailer[8] = {'P', 'V', 'I', 'T', 'E', 'N', 'D', '!'};
// Guards allocations driven by corrupt length fields.
constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 32;

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void f64s(std::span<const double> v) {
    for (const double x : v) f64(x);
  }
  std::vector<unsigned char> take() { return std::move(out_); }

 private:
  std::vector<unsigned char> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> b) : b_(b) {}

  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw CheckpointError("checkpoint is truncated");
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, b_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t count(const char* what) {
    const auto n = u64();
    if (n > kMaxCount) throw CheckpointError(std::string("checkpoint: implausible ") + what + " count");
    return n;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = count("string length");
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<double> f64s(std::size_t n) {
    need(n * 8);
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  bool at_end() const { return pos_ == b_.size(); }

 private:
  std::span<const unsigned char> b_;
  std::size_t pos_ = 0;
};

void write_config(Writer& w, const ModelConfig& c) {
  w.u64(c.image_size);
  w.u64(c.channels);
  w.u64(c.patch_size);
  w.u64(c.model_dim);
  w.u64(c.num_heads);
  w.u64(c.num_layers);
  w.u64(c.ffn_dim);
  w.f64(c.dropout_rate);
  w.u64(c.head_hidden.size());
  for (const auto h : c.head_hidden) w.u64(h);
  w.u64(c.num_classes);
  w.f64(c.ln_eps);
}

ModelConfig read_config(Reader& r) {
  ModelConfig c;
  c.image_size = r.u64();
  c.channels = r.u64();
  c.patch_size = r.u64();
  c.model_dim = r.u64();
  c.num_heads = r.u64();
  c.num_layers = r.u64();
  c.ffn_dim = r.u64();
  c.dropout_rate = r.f64();
  c.head_hidden.resize(r.count("head layer"));
  for (auto& h : c.head_hidden) h = r.u64();
  c.num_classes = r.u64();
  c.ln_eps = r.f64();
  return c;
}

// Rebuilds ModelParams from the tensors in layout order.
ModelParams assemble(const ModelConfig& c, std::vector<Tensor> t) {
  std::size_t k = 0;
  auto next = [&]() { return t[k++]; };
  ModelParams p;
  p.patch_projection.weight = next();
  p.patch_projection.bias = next();
  p.class_token = next();
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    EncoderLayerParams L;
    L.wq = next();
    L.wk = next();
    L.wv = next();
    L.wo = next();
    L.w1 = next();
    L.b1 = next();
    L.w2 = next();
    L.b2 = next();
    L.ln1_gain = next();
    L.ln1_bias = next();
    L.ln2_gain = next();
    L.ln2_bias = next();
    p.layers.push_back(std::move(L));
  }
  for (std::size_t h = 0; h <= c.head_hidden.size(); ++h) {
    LinearParams lin;
    lin.weight = next();
    lin.bias = next();
    p.head.push_back(std::move(lin));
  }
  return p;
}

}  // namespace

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ck) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  write_config(w, ck.config);
  w.u64(ck.class_names.size());
  for (const auto& n : ck.class_names) w.str(n);
  w.u64(ck.norm.mean.size());
  w.f64s(ck.norm.mean);
  w.f64s(ck.norm.stddev);
  w.f64(ck.train_fraction);
  w.u64(ck.split_seed);
  w.u64(ck.rng.seed);
  w.u64(ck.rng.epochs_completed);

  const auto named = ck.params.named();
  w.u64(named.size());
  for (const auto& [name, tensor] : named) {
    w.str(name);
    w.u64(tensor.rank());
    for (const auto d : tensor.shape()) w.u64(d);
    w.f64s(tensor.data());
  }

  w.u8(ck.optimizer ? 1 : 0);
  if (ck.optimizer) {
    const auto& o = *ck.optimizer;
    if (o.m.size() != named.size() || o.v.size() != named.size()) {
      throw ContractError("checkpoint: optimizer state does not cover every parameter");
    }
    w.f64(o.config.lr);
    w.f64(o.config.beta1);
    w.f64(o.config.beta2);
    w.f64(o.config.eps);
    w.f64(o.config.weight_decay);
    w.u64(o.step);
    for (std::size_t k = 0; k < named.size(); ++k) {
      if (o.m[k].size() != named[k].tensor.numel() || o.v[k].size() != named[k].tensor.numel()) {
        throw ContractError("checkpoint: optimizer moments for '" + named[k].name + "' have the wrong size");
      }
      w.f64s(o.m[k]);
      w.f64s(o.v[k]);
    }
  }
  w.raw(kTrailer, sizeof(kTrailer));
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  char magic[8];
  if (bytes.size() < sizeof(magic)) throw CheckpointError("not a panelvit checkpoint (too short)");
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw CheckpointError("not a panelvit checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint format version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }

  Checkpoint ck;
  ck.config = read_config(r);
  try {
    ck.config.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint holds an invalid configuration: ") + e.what());
  }
  ck.class_names.resize(r.count("class name"));
  for (auto& n : ck.class_names) n = r.str();
  if (ck.class_names.size() != ck.config.num_classes) {
    throw CheckpointError("checkpoint lists " + std::to_string(ck.class_names.size()) + " class names for " +
                          std::to_string(ck.config.num_classes) + " classes");
  }
  const auto channels = r.count("normalization channel");
  ck.norm.mean = r.f64s(channels);
  ck.norm.stddev = r.f64s(channels);
  if (channels != ck.config.channels) throw CheckpointError("checkpoint normalization channel count mismatch");
  ck.train_fraction = r.f64();
  ck.split_seed = r.u64();
  ck.rng.seed = r.u64();
  ck.rng.epochs_completed = r.u64();

  const auto layout = parameter_layout(ck.config);
  const auto count = r.count("tensor");
  if (count != layout.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, configuration expects " +
                          std::to_string(layout.size()));
  }
  std::vector<Tensor> tensors;
  for (const auto& [expected_name, expected_shape] : layout) {
    const std::string name = r.str();
    if (name != expected_name) {
      throw CheckpointError("checkpoint tensor '" + name + "' found where '" + expected_name + "' was expected");
    }
    Shape shape(r.count("rank"));
    for (auto& d : shape) d = r.u64();
    if (shape != expected_shape) {
      throw CheckpointError("checkpoint tensor '" + name + "' has shape " + shape_string(shape) +
                            ", configuration expects " + shape_string(expected_shape));
    }
    tensors.push_back(Tensor::from(shape, r.f64s(shape_numel(shape)), true));
  }
  ck.params = assemble(ck.config, std::move(tensors));

  if (r.u8() != 0) {
    OptimizerState o;
    o.config.lr = r.f64();
    o.config.beta1 = r.f64();
    o.config.beta2 = r.f64();
    o.config.eps = r.f64();
    o.config.weight_decay = r.f64();
    o.step = r.u64();
    for (const auto& [name, shape] : layout) {
      o.m.push_back(r.f64s(shape_numel(shape)));
      o.v.push_back(r.f64s(shape_numel(shape)));
    }
    ck.optimizer = std::move(o);
  }
  char trailer[8];
  r.raw(trailer, sizeof(trailer));
  if (std::memcmp(trailer, kTrailer, sizeof(trailer)) != 0 || !r.at_end()) {
    throw CheckpointError("checkpoint trailer is missing or followed by extra bytes");
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace panelvit
