#include <algorithm>
#include <cmath>
#include <limits>

#include "autograd.hpp"
#include "panelvit/error.hpp"

namespace panelvit {

using detail::make_result;
using detail::Node;

namespace {

struct Layout {
  std::size_t batch;
  std::size_t seq;
  std::size_t width;
  std::size_t heads;
  std::size_t head_dim;
  double scale;
};

// Row-softmax of (Q_h K_hᵀ)·scale for one (sequence, head) block into `p`.
void head_probs(const double* q, const double* k, const Layout& L, std::size_t col0, double* p) {
  const std::size_t S = L.seq, W = L.width, dh = L.head_dim;
  for (std::size_t i = 0; i < S; ++i) {
    const double* qi = q + i * W + col0;
    double* prow = p + i * S;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < S; ++j) {
      const double* kj = k + j * W + col0;
      double s = 0.0;
      for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
      s *= L.scale;
      prow[j] = s;
      mx = std::max(mx, s);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < S; ++j) {
      prow[j] = std::exp(prow[j] - mx);
      total += prow[j];
    }
    for (std::size_t j = 0; j < S; ++j) prow[j] /= total;
  }
}

}  // namespace

Tensor multi_head_scaled_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t seq_len,
                                   std::size_t heads, std::vector<AttentionProbs>* probs_out) {
  if (q.rank() != 2 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw DimensionError("attention: q/k/v shapes must agree, got " + shape_string(q.shape()) + ", " +
                         shape_string(k.shape()) + ", " + shape_string(v.shape()));
  }
  if (seq_len == 0 || q.dim(0) % seq_len != 0) {
    throw DimensionError("attention: " + std::to_string(q.dim(0)) + " rows are not a whole number of length-" +
                         std::to_string(seq_len) + " sequences");
  }
  if (heads == 0 || q.dim(1) % heads != 0) {
    throw ConfigError("attention: width " + std::to_string(q.dim(1)) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  Layout L{q.dim(0) / seq_len, seq_len, q.dim(1), heads, q.dim(1) / heads, 0.0};
  L.scale = 1.0 / std::sqrt(static_cast<double>(L.head_dim));

  const auto Q = q.data();
  const auto K = k.data();
  const auto V = v.data();
  const std::size_t S = L.seq, W = L.width, dh = L.head_dim;
  std::vector<double> out(Q.size(), 0.0);
  std::vector<double> p(S * S);
  if (probs_out) probs_out->clear();

  for (std::size_t b = 0; b < L.batch; ++b) {
    const std::size_t base = b * S * W;
    AttentionProbs trace;
    if (probs_out) {
      trace.heads = heads;
      trace.seq_len = S;
      trace.probs.resize(heads * S * S);
    }
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t col0 = h * dh;
      head_probs(Q.data() + base, K.data() + base, L, col0, p.data());
      for (std::size_t i = 0; i < S; ++i) {
        double* orow = out.data() + base + i * W + col0;
        for (std::size_t j = 0; j < S; ++j) {
          const double pij = p[i * S + j];
          const double* vj = V.data() + base + j * W + col0;
          for (std::size_t c = 0; c < dh; ++c) orow[c] += pij * vj[c];
        }
      }
      if (probs_out) std::copy(p.begin(), p.end(), trace.probs.begin() + h * S * S);
    }
    if (probs_out) probs_out->push_back(std::move(trace));
  }

  // Probabilities are recomputed during backward rather than stored.
  return make_result(q.shape(), std::move(out), {q, k, v}, [L](Node& self) {
    auto& nq = *self.inputs[0];
    auto& nk = *self.inputs[1];
    auto& nv = *self.inputs[2];
    const std::size_t S = L.seq, W = L.width, dh = L.head_dim;
    std::vector<double> p(S * S), dp(S * S);
    double* dQ = nq.requires_grad ? nq.grad_buffer().data() : nullptr;
    double* dK = nk.requires_grad ? nk.grad_buffer().data() : nullptr;
    double* dV = nv.requires_grad ? nv.grad_buffer().data() : nullptr;
    const double* G = self.grad.data();

    for (std::size_t b = 0; b < L.batch; ++b) {
      const std::size_t base = b * S * W;
      const double* Qb = nq.data.data() + base;
      const double* Kb = nk.data.data() + base;
      const double* Vb = nv.data.data() + base;
      for (std::size_t h = 0; h < L.heads; ++h) {
        const std::size_t col0 = h * dh;
        head_probs(Qb, Kb, L, col0, p.data());
        // dP = dO · Vᵀ ; dV += Pᵀ · dO
        for (std::size_t i = 0; i < S; ++i) {
          const double* gi = G + base + i * W + col0;
          for (std::size_t j = 0; j < S; ++j) {
            const double* vj = Vb + j * W + col0;
            double acc = 0.0;
            for (std::size_t c = 0; c < dh; ++c) acc += gi[c] * vj[c];
            dp[i * S + j] = acc;
            if (dV) {
              const double pij = p[i * S + j];
              double* dvj = dV + base + j * W + col0;
              for (std::size_t c = 0; c < dh; ++c) dvj[c] += pij * gi[c];
            }
          }
        }
        // Softmax backward: dS = P ⊙ (dP − rowsum(P ⊙ dP)), then fold in the scale.
        for (std::size_t i = 0; i < S; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < S; ++j) dot += p[i * S + j] * dp[i * S + j];
          for (std::size_t j = 0; j < S; ++j) dp[i * S + j] = p[i * S + j] * (dp[i * S + j] - dot) * L.scale;
        }
        for (std::size_t i = 0; i < S; ++i) {
          const double* qi = Qb + i * W + col0;
          double* dqi = dQ ? dQ + base + i * W + col0 : nullptr;
          for (std::size_t j = 0; j < S; ++j) {
            const double ds = dp[i * S + j];
            const double* kj = Kb + j * W + col0;
            if (dqi)
              for (std::size_t c = 0; c < dh; ++c) dqi[c] += ds * kj[c];
            if (dK) {
              double* dkj = dK + base + j * W + col0;
              for (std::size_t c = 0; c < dh; ++c) dkj[c] += ds * qi[c];
            }
          }
        }
      }
    }
  });
}

}  // namespace panelvit
