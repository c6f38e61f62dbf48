#include "panelvit/optim.hpp"

#include <algorithm>
#include <cmath>

#include "autograd.hpp"
#include "panelvit/error.hpp"

namespace panelvit {

Tensor sparse_ce_loss(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2) {
    throw DimensionError("sparse_ce_loss: logits must be [batch x classes], got " + shape_string(logits.shape()));
  }
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  if (labels.size() != B) {
    throw DimensionError("sparse_ce_loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(B) +
                         " logit rows");
  }
  if (B == 0) throw ContractError("sparse_ce_loss: empty batch");
  for (std::size_t i = 0; i < B; ++i) {
    if (labels[i] >= C) {
      throw DataError("sparse_ce_loss: sample " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                      " outside [0, " + std::to_string(C) + ")");
    }
  }
  const auto Z = logits.data();
  std::vector<double> probs(B * C);
  double total = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    const double* z = Z.data() + i * C;
    const double mx = *std::max_element(z, z + C);
    double s = 0.0;
    for (std::size_t j = 0; j < C; ++j) s += std::exp(z[j] - mx);
    const double lse = mx + std::log(s);
    total += lse - z[labels[i]];
    for (std::size_t j = 0; j < C; ++j) probs[i * C + j] = std::exp(z[j] - lse);
  }
  std::vector<std::size_t> y(labels.begin(), labels.end());
  return detail::make_result({}, {total / static_cast<double>(B)}, {logits},
                             [B, C, probs = std::move(probs), y = std::move(y)](detail::Node& self) {
                               auto& d = self.inputs[0]->grad_buffer();
                               const double g = self.grad[0] / static_cast<double>(B);
                               for (std::size_t i = 0; i < B; ++i) {
                                 for (std::size_t j = 0; j < C; ++j) {
                                   const double onehot = j == y[i] ? 1.0 : 0.0;
                                   d[i * C + j] += g * (probs[i * C + j] - onehot);
                                 }
                               }
                             });
}

void AdamWConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("optimizer: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("optimizer: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("optimizer: eps must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("optimizer: weight_decay must be non-negative");
}

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig config) : params_(std::move(params)), config_(config) {
  config_.validate();
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void adamw_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                  std::uint64_t t, const AdamWConfig& c) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw ContractError("adamw_update: parameter, gradient and moment sizes differ");
  }
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    param[i] -= c.lr * (m_hat / (std::sqrt(v_hat) + c.eps) + c.weight_decay * param[i]);
  }
}

void AdamW::step() {
  ++step_;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    const std::vector<double> g = p.grad();
    adamw_update(p.mutable_data(), g, m_[k], v_[k], step_, config_);
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void AdamW::restore(std::uint64_t step, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v) {
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw ContractError("AdamW::restore: state covers " + std::to_string(m.size()) + " tensors, optimizer has " +
                        std::to_string(params_.size()));
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (m[k].size() != params_[k].numel() || v[k].size() != params_[k].numel()) {
      throw ContractError("AdamW::restore: moment size mismatch for tensor " + std::to_string(k));
    }
  }
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace panelvit
