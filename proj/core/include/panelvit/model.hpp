#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "panelvit/image.hpp"
#include "panelvit/rng.hpp"
#include "panelvit/tensor.hpp"

namespace panelvit {

/// Architecture hyperparameters of the ViT classifier.
///
/// Defaults are the solar-panel experiment: 72×72 RGB input cut into 8×8
/// patches (81 tokens + class token), width 64, 8 heads, 8 encoder
/// layers, dropout 0.5.
struct ModelConfig {
  std::size_t image_size = 72;
  std::size_t channels = 3;
  std::size_t patch_size = 8;
  std::size_t model_dim = 64;
  std::size_t num_heads = 8;
  std::size_t num_layers = 8;
  std::size_t ffn_dim = 128;
  double dropout_rate = 0.5;
  std::vector<std::size_t> head_hidden{128, 64};
  std::size_t num_classes = 8;
  double ln_eps = 1e-6;

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  std::size_t patches_per_side() const { return image_size / patch_size; }
  std::size_t num_patches() const { return patches_per_side() * patches_per_side(); }
  std::size_t seq_len() const { return num_patches() + 1; }
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }
  std::size_t head_dim() const { return model_dim / num_heads; }

  bool operator==(const ModelConfig&) const = default;
};

struct LinearParams {
  Tensor weight;  // [in × out]
  Tensor bias;    // [out]
};

/// One encoder block. The per-head query/key/value projections are stored
/// side by side: head h owns columns [h·d, (h+1)·d) of wq, wk and wv, with
/// d = model_dim / num_heads.
struct EncoderLayerParams {
  Tensor wq, wk, wv;  // [D × D]
  Tensor wo;          // [D × D]
  Tensor w1, b1;      // [D × ffn], [ffn]
  Tensor w2, b2;      // [ffn × D], [D]
  Tensor ln1_gain, ln1_bias;
  Tensor ln2_gain, ln2_bias;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct ModelParams {
  LinearParams patch_projection;  // [patch_dim × D]
  Tensor class_token;             // [1 × D]
  std::vector<EncoderLayerParams> layers;
  std::vector<LinearParams> head;  // hidden layers, then the C-way output layer

  /// Every trainable tensor with a stable, checkpoint-facing name.
  std::vector<NamedTensor> named() const;
  std::size_t parameter_count() const;
  void zero_grad();
};

/// Names and shapes `named()` produces for a configuration, without
/// allocating any parameters.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& config);
std::size_t parameter_count(const ModelConfig& config);

/// How the final classifier layer starts out. `zero` makes every class
/// equally likely for any input, so the untrained loss is exactly ln C.
enum class HeadInit { glorot, zero };

/// Glorot-uniform weights, zero biases and class token, unit layer-norm gains.
/// The random stream is the same for both head modes.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed, HeadInit head = HeadInit::glorot);

enum class Mode { train, eval };

/// Attention probabilities captured during a forward pass, one entry per
/// encoder layer.
struct AttentionTrace {
  std::vector<std::vector<AttentionProbs>> layers;
};

struct ForwardOptions {
  Mode mode = Mode::eval;
  Rng* rng = nullptr;  // required in train mode, feeds dropout
  AttentionTrace* trace = nullptr;
};

/// Cuts the image into non-overlapping P×P patches in row-major patch-grid
/// order. Each row is one patch flattened as (row, col, channel).
Tensor extract_patches(const Image& image, std::size_t patch_size);

/// Exact inverse of `extract_patches`.
Image assemble_patches(const Tensor& patches, std::size_t height, std::size_t width, std::size_t channels,
                       std::size_t patch_size);

/// Fixed sinusoidal table: sin at even columns, cos at odd ones, with
/// frequency 10000^(-2k/width) for column pair k.
Tensor positional_encoding(std::size_t seq_len, std::size_t width);

/// Patch projection, class token at row 0, plus the positional table.
Tensor embed(const Tensor& patches, const ModelParams& params, const ModelConfig& config);

/// softmax(Q·Kᵀ / sqrt(d)) · V for operands of width d.
Tensor self_attention(const Tensor& q, const Tensor& k, const Tensor& v);

/// Multi-head attention over `x` holding one or more stacked sequences of
/// length `seq_len` (0 means a single sequence spanning all rows).
Tensor multi_head_attention(const Tensor& x, const EncoderLayerParams& layer, std::size_t num_heads,
                            std::size_t seq_len = 0, std::vector<AttentionProbs>* probs = nullptr);

/// relu(x·W1 + b1)·W2 + b2, row by row.
Tensor feed_forward(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2, const Tensor& b2);

/// Post-norm block: Y = LN(X + MHA(X)); Z = LN(Y + FFN(Y)), with dropout on
/// both sub-layer outputs in train mode.
Tensor encoder_layer(const Tensor& x, const EncoderLayerParams& layer, const ModelConfig& config,
                     std::size_t seq_len, const ForwardOptions& options,
                     std::vector<AttentionProbs>* probs = nullptr);

/// Classifier forward pass. Images must already be normalized. Returns
/// [batch × num_classes] logits.
Tensor forward(std::span<const Image> images, const ModelParams& params, const ModelConfig& config,
               const ForwardOptions& options);

}  // namespace panelvit
