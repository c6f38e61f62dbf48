#include <algorithm>
#include <atomic>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "autograd.hpp"
#include "panelvit/error.hpp"

namespace panelvit {

namespace {

thread_local bool t_grad_enabled = true;
std::atomic<std::uint64_t> g_sequence{0};

const detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) {
    throw ContractError("use of an undefined tensor");
  }
  return *node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << "x";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

std::vector<double>& Node::grad_buffer() {
  if (grad.size() != data.size()) {
    grad.assign(data.size(), 0.0);
  }
  return grad;
}

std::uint64_t next_sequence() noexcept { return g_sequence.fetch_add(1, std::memory_order_relaxed); }

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_string(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " elements, got " +
                         std::to_string(data.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  node->seq = next_sequence();
  return node;
}

Tensor make_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                   std::function<void(Node&)> backward) {
  auto node = make_leaf(std::move(shape), std::move(data), false);
  if (t_grad_enabled) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.node()->requires_grad; });
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (const auto& t : inputs) node->inputs.push_back(t.node());
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

Tensor make_result(Shape shape, std::vector<double> data, std::initializer_list<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  return make_result(std::move(shape), std::move(data), std::vector<Tensor>(inputs),
                     std::move(backward));
}

}  // namespace detail

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(detail::make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(detail::make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(node_).data.size(); }

std::span<const double> Tensor::data() const { return checked(node_).data; }

std::span<double> Tensor::mutable_data() {
  checked(node_);
  return node_->data;
}

double Tensor::item() const {
  const auto& n = checked(node_);
  if (n.data.size() != 1) {
    throw ContractError("item() on tensor of shape " + shape_string(n.shape));
  }
  return n.data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  const auto& n = checked(node_);
  if (n.shape.size() != 2 || row >= n.shape[0] || col >= n.shape[1]) {
    throw DimensionError("at(" + std::to_string(row) + "," + std::to_string(col) + ") on shape " +
                         shape_string(n.shape));
  }
  return n.data[row * n.shape[1] + col];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

void Tensor::set_requires_grad(bool value) {
  checked(node_);
  if (node_->backward) {
    throw ContractError("requires_grad can only be set on leaf tensors");
  }
  node_->requires_grad = value;
}

bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }

std::vector<double> Tensor::grad() const {
  const auto& n = checked(node_);
  if (n.grad.empty()) return std::vector<double>(n.data.size(), 0.0);
  return n.grad;
}

std::span<const double> Tensor::grad_view() const { return checked(node_).grad; }

void Tensor::zero_grad() {
  checked(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  const auto& n = checked(node_);
  return Tensor::from(n.shape, n.data, false);
}

void Tensor::backward() const {
  const auto& root = checked(node_);
  if (root.data.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(root.shape));
  }
  if (root.released) {
    throw ContractError("backward() called twice on the same graph");
  }
  if (!root.requires_grad) {
    throw ContractError("backward() on a tensor that does not require grad");
  }

  // Gather everything reachable, then replay in reverse creation order;
  // creation order is a topological order of the tape.
  // Owning handles keep every node alive while the graph is torn down.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<const detail::Node*> seen;
  std::vector<std::shared_ptr<detail::Node>> stack{node_};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto n = std::move(stack.back());
    stack.pop_back();
    for (const auto& in : n->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) {
        stack.push_back(in);
      }
    }
    order.push_back(std::move(n));
  }
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a->seq > b->seq; });

  node_->grad_buffer()[0] += 1.0;
  for (const auto& n : order) {
    if (n->backward && !n->grad.empty()) {
      n->backward(*n);
    }
  }
  for (const auto& n : order) {
    if (n->backward) {
      n->backward = nullptr;
      n->inputs.clear();
      n->released = true;
      if (n != node_) {
        std::vector<double>().swap(n->grad);
      }
    }
  }
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() noexcept { return t_grad_enabled; }

}  // namespace panelvit
