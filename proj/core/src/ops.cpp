#include <algorithm>
#include <cmath>
#include <limits>

#include "autograd.hpp"
#include "panelvit/error.hpp"

namespace panelvit {

using detail::make_result;
using detail::Node;

namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a rank-2 tensor, got " + shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// Rows × last-axis view used by the last-axis reductions.
std::pair<std::size_t, std::size_t> rows_and_width(const Tensor& x, const char* op) {
  if (x.rank() == 0) {
    throw DimensionError(std::string(op) + ": needs at least one axis");
  }
  const std::size_t width = x.shape().back();
  return {width == 0 ? 0 : x.numel() / width, width};
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = A[i * k + p];
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const auto& G = self.grad;
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    if (na.requires_grad) {
      auto& dA = na.grad_buffer();
      // dA = dC · Bᵀ
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = nb.data.data() + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          dA[i * k + p] += acc;
        }
      }
    }
    if (nb.requires_grad) {
      auto& dB = nb.grad_buffer();
      // dB = Aᵀ · dC
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double s = na.data[i * k + p];
          double* drow = dB.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) drow[j] += s * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto A = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  return make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
    auto& in = *self.inputs[0];
    auto& d = in.grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] += self.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      auto& d = in->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const double sign[2] = {1.0, -1.0};
    for (std::size_t s = 0; s < 2; ++s) {
      auto& in = *self.inputs[s];
      if (!in.requires_grad) continue;
      auto& d = in.grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += sign[s] * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    if (na.requires_grad) {
      auto& d = na.grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * nb.data[i];
    }
    if (nb.requires_grad) {
      auto& d = nb.grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * na.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    auto& d = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * self.grad[i];
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const auto [rows, width] = rows_and_width(x, "add_bias");
  if (bias.numel() != width) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) + " does not match last axis of " +
                         shape_string(x.shape()));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto b = bias.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < width; ++j) out[r * width + j] += b[j];
  return make_result(x.shape(), std::move(out), {x, bias}, [rows, width](Node& self) {
    auto& nx = *self.inputs[0];
    auto& nb = *self.inputs[1];
    if (nx.requires_grad) {
      auto& d = nx.grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
    }
    if (nb.requires_grad) {
      auto& d = nb.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < width; ++j) d[j] += self.grad[r * width + j];
    }
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    auto& in = *self.inputs[0];
    auto& d = in.grad_buffer();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (in.data[i] > 0.0) d[i] += self.grad[i];
  });
}

Tensor softmax(const Tensor& x) {
  const auto [rows, width] = rows_and_width(x, "softmax");
  const auto X = x.data();
  std::vector<double> out(X.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = X.data() + r * width;
    double* o = out.data() + r * width;
    const double mx = *std::max_element(in, in + width);
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < width; ++j) o[j] /= total;
  }
  auto probs = out;
  return make_result(x.shape(), std::move(out), {x},
                     [rows, width, probs = std::move(probs)](Node& self) {
                       auto& d = self.inputs[0]->grad_buffer();
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* y = probs.data() + r * width;
                         const double* g = self.grad.data() + r * width;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < width; ++j) dot += g[j] * y[j];
                         for (std::size_t j = 0; j < width; ++j) d[r * width + j] += y[j] * (g[j] - dot);
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const auto [rows, width] = rows_and_width(x, "layer_norm");
  if (width == 0) throw DimensionError("layer_norm: last axis must be non-empty");
  if (!(eps > 0.0)) throw ParameterError("layer_norm: eps must be positive");
  if (gain.numel() != width || bias.numel() != width) {
    throw DimensionError("layer_norm: gain " + shape_string(gain.shape()) + " / bias " +
                         shape_string(bias.shape()) + " do not match last axis of " + shape_string(x.shape()));
  }
  const auto X = x.data();
  const auto G = gain.data();
  const auto B = bias.data();
  std::vector<double> out(X.size());
  std::vector<double> xhat(X.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = X.data() + r * width;
    double mu = 0.0;
    for (std::size_t j = 0; j < width; ++j) mu += in[j];
    mu /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t j = 0; j < width; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(width);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < width; ++j) {
      const double h = (in[j] - mu) * is;
      xhat[r * width + j] = h;
      out[r * width + j] = G[j] * h + B[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [rows, width, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        auto& nx = *self.inputs[0];
        auto& ng = *self.inputs[1];
        auto& nb = *self.inputs[2];
        const auto& g = self.grad;
        if (ng.requires_grad) {
          auto& d = ng.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < width; ++j) d[j] += g[r * width + j] * xhat[r * width + j];
        }
        if (nb.requires_grad) {
          auto& d = nb.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < width; ++j) d[j] += g[r * width + j];
        }
        if (nx.requires_grad) {
          auto& d = nx.grad_buffer();
          const double inv_w = 1.0 / static_cast<double>(width);
          for (std::size_t r = 0; r < rows; ++r) {
            const double* h = xhat.data() + r * width;
            const double* gr = g.data() + r * width;
            double mean_dh = 0.0, mean_dh_h = 0.0;
            for (std::size_t j = 0; j < width; ++j) {
              const double dh = gr[j] * ng.data[j];
              mean_dh += dh;
              mean_dh_h += dh * h[j];
            }
            mean_dh *= inv_w;
            mean_dh_h *= inv_w;
            for (std::size_t j = 0; j < width; ++j) {
              const double dh = gr[j] * ng.data[j];
              d[r * width + j] += inv_std[r] * (dh - mean_dh - h[j] * mean_dh_h);
            }
          }
        }
      });
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) {
    return x;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  const auto X = x.data();
  std::vector<double> out(X.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * mask[i];
  return make_result(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    auto& d = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * mask[i];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (const double v : x.data()) total += v;
  return make_result({}, {total}, {x}, [](Node& self) {
    auto& d = self.inputs[0]->grad_buffer();
    const double g = self.grad[0];
    for (auto& v : d) v += g;
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    auto& d = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t width = parts.front().rank() == 2 ? parts.front().dim(1) : 0;
  std::size_t rows = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.dim(1) != width) {
      throw DimensionError("concat_rows: column mismatch " + shape_string(parts.front().shape()) + " vs " +
                           shape_string(p.shape()));
    }
    offsets.push_back(rows * width);
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * width);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result({rows, width}, std::move(out), inputs, [offsets = std::move(offsets)](Node& self) {
    for (std::size_t s = 0; s < self.inputs.size(); ++s) {
      auto& in = *self.inputs[s];
      if (!in.requires_grad) continue;
      auto& d = in.grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[offsets[s] + i];
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank2(x, "slice_rows");
  if (begin + count > x.dim(0)) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(x.shape()));
  }
  const std::size_t width = x.dim(1);
  const auto X = x.data();
  std::vector<double> out(X.begin() + begin * width, X.begin() + (begin + count) * width);
  return make_result({count, width}, std::move(out), {x}, [begin, width](Node& self) {
    auto& d = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) d[begin * width + i] += self.grad[i];
  });
}

Tensor take_rows(const Tensor& x, std::span<const std::size_t> indices) {
  require_rank2(x, "take_rows");
  const std::size_t rows = x.dim(0), width = x.dim(1);
  const auto X = x.data();
  std::vector<double> out;
  out.reserve(indices.size() * width);
  for (const auto r : indices) {
    if (r >= rows) {
      throw DimensionError("take_rows: row " + std::to_string(r) + " out of range for " + shape_string(x.shape()));
    }
    out.insert(out.end(), X.begin() + r * width, X.begin() + (r + 1) * width);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result({idx.size(), width}, std::move(out), {x}, [idx, width](Node& self) {
    auto& d = self.inputs[0]->grad_buffer();
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t j = 0; j < width; ++j) d[idx[k] * width + j] += self.grad[k * width + j];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  require_rank2(parts.front(), "concat_cols");
  const std::size_t rows = parts.front().dim(0);
  std::vector<std::size_t> col_offset;
  std::size_t width = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.dim(0) != rows) {
      throw DimensionError("concat_cols: row mismatch " + shape_string(parts.front().shape()) + " vs " +
                           shape_string(p.shape()));
    }
    col_offset.push_back(width);
    width += p.dim(1);
  }
  std::vector<double> out(rows * width);
  for (std::size_t s = 0; s < parts.size(); ++s) {
    const auto P = parts[s].data();
    const std::size_t w = parts[s].dim(1);
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(P.begin() + r * w, w, out.begin() + r * width + col_offset[s]);
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result({rows, width}, std::move(out), inputs,
                     [rows, width, col_offset = std::move(col_offset)](Node& self) {
                       for (std::size_t s = 0; s < self.inputs.size(); ++s) {
                         auto& in = *self.inputs[s];
                         if (!in.requires_grad) continue;
                         auto& d = in.grad_buffer();
                         const std::size_t w = in.shape[1];
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < w; ++j)
                             d[r * w + j] += self.grad[r * width + col_offset[s] + j];
                       }
                     });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank2(x, "slice_cols");
  if (begin + count > x.dim(1)) {
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " + shape_string(x.shape()));
  }
  const std::size_t rows = x.dim(0), width = x.dim(1);
  const auto X = x.data();
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(X.begin() + r * width + begin, count, out.begin() + r * count);
  return make_result({rows, count}, std::move(out), {x}, [rows, width, begin, count](Node& self) {
    auto& d = self.inputs[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < count; ++j) d[r * width + begin + j] += self.grad[r * count + j];
  });
}

}  // namespace panelvit
