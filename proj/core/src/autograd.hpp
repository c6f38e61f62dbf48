#pragma once

// Helpers shared by op implementations; not installed.

#include <initializer_list>
#include <vector>

#include "panelvit/tensor.hpp"

namespace panelvit::detail {

std::uint64_t next_sequence() noexcept;

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> data, bool requires_grad);

/// Wraps an op result. The backward closure and input links are kept only
/// when recording is enabled and some input requires a gradient.
Tensor make_result(Shape shape, std::vector<double> data, std::initializer_list<Tensor> inputs,
                   std::function<void(Node&)> backward);
Tensor make_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                   std::function<void(Node&)> backward);

inline bool wants_grad(const Node& n) noexcept { return n.requires_grad; }

}  // namespace panelvit::detail
