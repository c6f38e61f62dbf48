#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "panelvit/rng.hpp"

namespace panelvit {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

namespace detail {

// One recorded value in the define-by-run graph. Leaves have no backward
// function; op results keep their inputs alive until backward() releases
// them.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until something is accumulated
  bool requires_grad = false;
  bool released = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer();
};

}  // namespace detail

/// Dense row-major tensor of doubles; a shared handle onto a graph node.
///
/// Copies alias the same storage. Values are immutable once an op has
/// produced them. Only leaves (parameters) are mutated in place, by the
/// optimizer, through `mutable_data()`.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  /// Element of a rank-2 tensor.
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  /// Gradient accumulator; all zeros when nothing has been accumulated.
  std::vector<double> grad() const;
  std::span<const double> grad_view() const;
  void zero_grad();

  /// Reverse-mode sweep from this scalar. Gradients accumulate into every
  /// reachable tensor that requires them; the recorded graph is released.
  void backward() const;

  /// Same storage, cut from the graph.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

// ---------------------------------------------------------------------------
// Differentiable operations. Rank-2 operations name their shapes rows×cols.

/// [m×k] · [k×n] -> [m×n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// x[..., n] + bias[n], broadcast over leading axes.
Tensor add_bias(const Tensor& x, const Tensor& bias);

/// max(0, x); the subgradient at exactly 0 is 0.
Tensor relu(const Tensor& x);

/// Softmax over the last axis, max-subtracted.
Tensor softmax(const Tensor& x);

/// gain ⊙ (x − mean) / sqrt(var + eps) + bias over the last axis, biased variance.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

/// Inverted dropout. Identity when `training` is false or `rate` is 0.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
/// Rows of `x` at `indices`, in that order; repeated indices accumulate.
Tensor take_rows(const Tensor& x, std::span<const std::size_t> indices);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);

/// Per-row softmax probabilities of one attention head, exported for
/// inspection. `probs` is [heads·seq_len × seq_len] for one sequence.
struct AttentionProbs {
  std::size_t heads = 0;
  std::size_t seq_len = 0;
  std::vector<double> probs;
};

/// Fused multi-head scaled dot-product attention over a batch of
/// sequences stacked along rows.
///
/// q, k, v are [(batch·seq_len) × width]; head h owns columns
/// [h·width/heads, (h+1)·width/heads). Each head computes
/// softmax(Q_h·K_hᵀ / sqrt(width/heads)) · V_h within its own sequence.
/// When `probs_out` is non-null it receives one entry per sequence.
Tensor multi_head_scaled_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                   std::size_t seq_len, std::size_t heads,
                                   std::vector<AttentionProbs>* probs_out = nullptr);

}  // namespace panelvit
