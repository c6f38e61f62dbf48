#include "panelvit/model.hpp"

#include <cmath>

#include "panelvit/error.hpp"

namespace panelvit {

namespace {

std::string idx(std::size_t i) { return std::to_string(i); }

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(fan_in * fan_out);
  for (auto& x : w) x = rng.uniform(-limit, limit);
  return Tensor::from({fan_in, fan_out}, std::move(w), true);
}

Tensor zeros_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }
Tensor ones_param(Shape shape) { return Tensor::full(std::move(shape), 1.0, true); }

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (image_size == 0) fail("image_size must be positive");
  if (channels == 0) fail("channels must be positive");
  if (patch_size == 0) fail("patch_size must be positive");
  if (image_size % patch_size != 0) {
    fail("image_size " + idx(image_size) + " is not divisible by patch_size " + idx(patch_size));
  }
  if (model_dim == 0 || model_dim % 2 != 0) fail("model_dim must be a positive even number, got " + idx(model_dim));
  if (num_heads == 0 || model_dim % num_heads != 0) {
    fail("model_dim " + idx(model_dim) + " is not divisible by num_heads " + idx(num_heads));
  }
  if (num_layers < 1) fail("num_layers must be at least 1");
  if (ffn_dim == 0) fail("ffn_dim must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
  for (const auto w : head_hidden) {
    if (w == 0) fail("head_hidden widths must be positive");
  }
  if (num_classes < 2) fail("num_classes must be at least 2, got " + idx(num_classes));
  if (!(ln_eps > 0.0)) fail("ln_eps must be positive");
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& c) {
  const std::size_t D = c.model_dim;
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("patch_projection.weight", Shape{c.patch_dim(), D});
  out.emplace_back("patch_projection.bias", Shape{D});
  out.emplace_back("class_token", Shape{1, D});
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const std::string p = "encoder." + idx(l) + ".";
    out.emplace_back(p + "attn.wq", Shape{D, D});
    out.emplace_back(p + "attn.wk", Shape{D, D});
    out.emplace_back(p + "attn.wv", Shape{D, D});
    out.emplace_back(p + "attn.wo", Shape{D, D});
    out.emplace_back(p + "ffn.w1", Shape{D, c.ffn_dim});
    out.emplace_back(p + "ffn.b1", Shape{c.ffn_dim});
    out.emplace_back(p + "ffn.w2", Shape{c.ffn_dim, D});
    out.emplace_back(p + "ffn.b2", Shape{D});
    out.emplace_back(p + "norm1.gain", Shape{D});
    out.emplace_back(p + "norm1.bias", Shape{D});
    out.emplace_back(p + "norm2.gain", Shape{D});
    out.emplace_back(p + "norm2.bias", Shape{D});
  }
  std::size_t in = D;
  for (std::size_t h = 0; h <= c.head_hidden.size(); ++h) {
    const std::size_t width = h < c.head_hidden.size() ? c.head_hidden[h] : c.num_classes;
    out.emplace_back("head." + idx(h) + ".weight", Shape{in, width});
    out.emplace_back("head." + idx(h) + ".bias", Shape{width});
    in = width;
  }
  return out;
}

std::size_t parameter_count(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& [name, shape] : parameter_layout(config)) n += shape_numel(shape);
  return n;
}

std::vector<NamedTensor> ModelParams::named() const {
  std::vector<NamedTensor> out;
  out.push_back({"patch_projection.weight", patch_projection.weight});
  out.push_back({"patch_projection.bias", patch_projection.bias});
  out.push_back({"class_token", class_token});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const std::string p = "encoder." + idx(l) + ".";
    out.push_back({p + "attn.wq", L.wq});
    out.push_back({p + "attn.wk", L.wk});
    out.push_back({p + "attn.wv", L.wv});
    out.push_back({p + "attn.wo", L.wo});
    out.push_back({p + "ffn.w1", L.w1});
    out.push_back({p + "ffn.b1", L.b1});
    out.push_back({p + "ffn.w2", L.w2});
    out.push_back({p + "ffn.b2", L.b2});
    out.push_back({p + "norm1.gain", L.ln1_gain});
    out.push_back({p + "norm1.bias", L.ln1_bias});
    out.push_back({p + "norm2.gain", L.ln2_gain});
    out.push_back({p + "norm2.bias", L.ln2_bias});
  }
  for (std::size_t h = 0; h < head.size(); ++h) {
    out.push_back({"head." + idx(h) + ".weight", head[h].weight});
    out.push_back({"head." + idx(h) + ".bias", head[h].bias});
  }
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : named()) n += p.tensor.numel();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& p : named()) p.tensor.zero_grad();
}

ModelParams init_params(const ModelConfig& c, std::uint64_t seed, HeadInit head) {
  c.validate();
  Rng rng(seed);
  const std::size_t D = c.model_dim;
  ModelParams p;
  p.patch_projection = {glorot(c.patch_dim(), D, rng), zeros_param({D})};
  p.class_token = zeros_param({1, D});
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    EncoderLayerParams L;
    L.wq = glorot(D, D, rng);
    L.wk = glorot(D, D, rng);
    L.wv = glorot(D, D, rng);
    L.wo = glorot(D, D, rng);
    L.w1 = glorot(D, c.ffn_dim, rng);
    L.b1 = zeros_param({c.ffn_dim});
    L.w2 = glorot(c.ffn_dim, D, rng);
    L.b2 = zeros_param({D});
    L.ln1_gain = ones_param({D});
    L.ln1_bias = zeros_param({D});
    L.ln2_gain = ones_param({D});
    L.ln2_bias = zeros_param({D});
    p.layers.push_back(std::move(L));
  }
  std::size_t in = D;
  for (std::size_t h = 0; h <= c.head_hidden.size(); ++h) {
    const std::size_t width = h < c.head_hidden.size() ? c.head_hidden[h] : c.num_classes;
    p.head.push_back({glorot(in, width, rng), zeros_param({width})});
    in = width;
  }
  if (head == HeadInit::zero) {
    for (auto& w : p.head.back().weight.mutable_data()) w = 0.0;
  }
  return p;
}

Tensor extract_patches(const Image& image, std::size_t P) {
  if (P == 0 || image.height % P != 0 || image.width % P != 0) {
    throw ConfigError("extract_patches: " + idx(image.height) + "x" + idx(image.width) +
                      " image is not divisible into " + idx(P) + "x" + idx(P) + " patches");
  }
  const std::size_t gh = image.height / P, gw = image.width / P, ch = image.channels;
  const std::size_t len = P * P * ch;
  std::vector<double> out(gh * gw * len);
  std::size_t o = 0;
  for (std::size_t py = 0; py < gh; ++py)
    for (std::size_t px = 0; px < gw; ++px)
      for (std::size_t y = 0; y < P; ++y)
        for (std::size_t x = 0; x < P; ++x)
          for (std::size_t c = 0; c < ch; ++c) out[o++] = image.at(py * P + y, px * P + x, c);
  return Tensor::from({gh * gw, len}, std::move(out));
}

Image assemble_patches(const Tensor& patches, std::size_t height, std::size_t width, std::size_t channels,
                       std::size_t P) {
  if (P == 0 || height % P != 0 || width % P != 0) {
    throw ConfigError("assemble_patches: " + idx(height) + "x" + idx(width) + " is not divisible by " + idx(P));
  }
  const std::size_t gh = height / P, gw = width / P;
  if (patches.shape() != Shape{gh * gw, P * P * channels}) {
    throw DimensionError("assemble_patches: expected " + shape_string({gh * gw, P * P * channels}) + ", got " +
                         shape_string(patches.shape()));
  }
  Image img(height, width, channels);
  const auto src = patches.data();
  std::size_t o = 0;
  for (std::size_t py = 0; py < gh; ++py)
    for (std::size_t px = 0; px < gw; ++px)
      for (std::size_t y = 0; y < P; ++y)
        for (std::size_t x = 0; x < P; ++x)
          for (std::size_t c = 0; c < channels; ++c) img.at(py * P + y, px * P + x, c) = src[o++];
  return img;
}

Tensor positional_encoding(std::size_t seq_len, std::size_t width) {
  if (width == 0 || width % 2 != 0) {
    throw ConfigError("positional_encoding: width must be a positive even number, got " + idx(width));
  }
  std::vector<double> pe(seq_len * width);
  for (std::size_t pos = 0; pos < seq_len; ++pos) {
    for (std::size_t k = 0; k < width / 2; ++k) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(2 * k) / static_cast<double>(width));
      pe[pos * width + 2 * k] = std::sin(angle);
      pe[pos * width + 2 * k + 1] = std::cos(angle);
    }
  }
  return Tensor::from({seq_len, width}, std::move(pe));
}

Tensor embed(const Tensor& patches, const ModelParams& params, const ModelConfig& config) {
  const auto& W = params.patch_projection.weight;
  if (patches.rank() != 2 || patches.dim(1) != W.dim(0)) {
    throw DimensionError("embed: patches " + shape_string(patches.shape()) + " do not match projection " +
                         shape_string(W.shape()));
  }
  const Tensor projected = add_bias(matmul(patches, W), params.patch_projection.bias);
  const Tensor rows[] = {params.class_token, projected};
  const Tensor tokens = concat_rows(rows);
  return add(tokens, positional_encoding(tokens.dim(0), config.model_dim));
}

Tensor self_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.rank() != 2 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw DimensionError("self_attention: operand shapes differ: " + shape_string(q.shape()) + ", " +
                         shape_string(k.shape()) + ", " + shape_string(v.shape()));
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  const Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_d);
  return matmul(softmax(scores), v);
}

Tensor multi_head_attention(const Tensor& x, const EncoderLayerParams& layer, std::size_t num_heads,
                            std::size_t seq_len, std::vector<AttentionProbs>* probs) {
  if (x.rank() != 2) throw DimensionError("multi_head_attention: expected rank-2 input, got " + shape_string(x.shape()));
  if (num_heads == 0 || x.dim(1) % num_heads != 0) {
    throw ConfigError("multi_head_attention: width " + idx(x.dim(1)) + " is not divisible by " + idx(num_heads) +
                      " heads");
  }
  if (seq_len == 0) seq_len = x.dim(0);
  const Tensor q = matmul(x, layer.wq);
  const Tensor k = matmul(x, layer.wk);
  const Tensor v = matmul(x, layer.wv);
  const Tensor heads = multi_head_scaled_attention(q, k, v, seq_len, num_heads, probs);
  return matmul(heads, layer.wo);
}

Tensor feed_forward(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2, const Tensor& b2) {
  return add_bias(matmul(relu(add_bias(matmul(x, w1), b1)), w2), b2);
}

Tensor encoder_layer(const Tensor& x, const EncoderLayerParams& layer, const ModelConfig& config,
                     std::size_t seq_len, const ForwardOptions& options, std::vector<AttentionProbs>* probs) {
  const bool training = options.mode == Mode::train;
  if (training && !options.rng) throw ContractError("train-mode forward needs an rng");
  Rng unused(0);
  Rng& rng = options.rng ? *options.rng : unused;

  Tensor attn = multi_head_attention(x, layer, config.num_heads, seq_len, probs);
  attn = dropout(attn, config.dropout_rate, training, rng);
  const Tensor y = layer_norm(add(x, attn), layer.ln1_gain, layer.ln1_bias, config.ln_eps);

  Tensor ffn = feed_forward(y, layer.w1, layer.b1, layer.w2, layer.b2);
  ffn = dropout(ffn, config.dropout_rate, training, rng);
  return layer_norm(add(y, ffn), layer.ln2_gain, layer.ln2_bias, config.ln_eps);
}

Tensor forward(std::span<const Image> images, const ModelParams& params, const ModelConfig& config,
               const ForwardOptions& options) {
  const bool training = options.mode == Mode::train;
  if (training && !options.rng) throw ContractError("train-mode forward needs an rng");
  if (images.empty()) throw ContractError("forward: empty batch");
  for (const auto& img : images) {
    if (img.height != config.image_size || img.width != config.image_size || img.channels != config.channels) {
      throw ConfigError("forward: image is " + idx(img.height) + "x" + idx(img.width) + "x" + idx(img.channels) +
                        ", model expects " + idx(config.image_size) + "x" + idx(config.image_size) + "x" +
                        idx(config.channels));
    }
  }

  const std::size_t S = config.seq_len();
  std::vector<Tensor> sequences;
  sequences.reserve(images.size());
  for (const auto& img : images) {
    sequences.push_back(embed(extract_patches(img, config.patch_size), params, config));
  }
  Tensor tokens = concat_rows(sequences);

  if (options.trace) options.trace->layers.assign(params.layers.size(), {});
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto* probs = options.trace ? &options.trace->layers[l] : nullptr;
    tokens = encoder_layer(tokens, params.layers[l], config, S, options, probs);
  }

  std::vector<std::size_t> class_rows(images.size());
  for (std::size_t b = 0; b < images.size(); ++b) class_rows[b] = b * S;
  Tensor h = take_rows(tokens, class_rows);

  Rng unused(0);
  Rng& rng = options.rng ? *options.rng : unused;
  for (std::size_t i = 0; i < params.head.size(); ++i) {
    h = add_bias(matmul(h, params.head[i].weight), params.head[i].bias);
    if (i + 1 < params.head.size()) {
      h = dropout(relu(h), config.dropout_rate, training, rng);
    }
  }
  return h;
}

}  // namespace panelvit
