#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "panelvit/data.hpp"
#include "panelvit/model.hpp"
#include "panelvit/tensor.hpp"

namespace panelvit {

/// Mean over the batch of −log softmax(logits)[label], via log-sum-exp.
/// Throws DataError naming the first sample whose label is out of range.
Tensor sparse_ce_loss(const Tensor& logits, std::span<const std::size_t> labels);

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;

  void validate() const;
  bool operator==(const AdamWConfig&) const = default;
};

/// AdamW with decoupled weight decay:
///   m ← β1·m + (1−β1)·g,  v ← β2·v + (1−β2)·g²
///   p ← p − lr·( m̂ / (sqrt(v̂) + eps) + weight_decay·p )
/// with bias-corrected m̂ = m/(1−β1ᵗ), v̂ = v/(1−β2ᵗ).
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig config);

  /// Applies one update from the parameters' accumulated gradients.
  void step();
  void zero_grad();

  std::uint64_t step_count() const noexcept { return step_; }
  const AdamWConfig& config() const noexcept { return config_; }
  const std::vector<std::vector<double>>& first_moments() const noexcept { return m_; }
  const std::vector<std::vector<double>>& second_moments() const noexcept { return v_; }

  /// Reinstates serialized state; shapes must mirror the parameters.
  void restore(std::uint64_t step, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

 private:
  std::vector<Tensor> params_;
  AdamWConfig config_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// In-place update of one parameter buffer at step `t` (1-based).
void adamw_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, std::uint64_t t, const AdamWConfig& config);

struct TrainOptions {
  std::size_t batch_size = 32;
  AugmentConfig augment;
  std::uint64_t seed = 0;
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// [begin, end) ranges covering n items in batches; the last may be short.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch_size);

/// One pass over `train`: seeded shuffle, then per batch augment → forward
/// (train mode) → loss → backward → step → zero grads. All randomness comes
/// from substreams of (seed, epoch), so the result does not depend on
/// anything that ran before. Returns the sample-weighted mean loss and the
/// train-mode accuracy.
EpochStats train_epoch(ModelParams& params, const ModelConfig& config, const Dataset& train, AdamW& optimizer,
                       const NormStats& norm, const TrainOptions& options, std::uint64_t epoch);

struct EvalResult {
  std::vector<std::vector<double>> logits;
  std::vector<std::size_t> predictions;
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Eval-mode pass without graph recording.
EvalResult evaluate(const ModelParams& params, const ModelConfig& config, const Dataset& dataset,
                    const NormStats& norm, std::size_t batch_size = 32);

std::size_t argmax(std::span<const double> values);

}  // namespace panelvit
