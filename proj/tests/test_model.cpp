#include <doctest.h>

#include <cmath>

#include "oracles/attention_oracle.hpp"
#include "panelvit/error.hpp"
#include "panelvit/model.hpp"
#include "panelvit/optim.hpp"
#include "support/grad_suite.hpp"

using namespace panelvit;

namespace {

oracle::Matrix rows(const Tensor& t) {
  oracle::Matrix m(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t r = 0; r < t.dim(0); ++r)
    for (std::size_t c = 0; c < t.dim(1); ++c) m[r][c] = t.at(r, c);
  return m;
}

Tensor tensor(const oracle::Matrix& m) {
  std::vector<double> v;
  for (const auto& r : m) v.insert(v.end(), r.begin(), r.end());
  return Tensor::from({m.size(), m[0].size()}, v);
}

Image ramp(std::size_t h, std::size_t w, std::size_t c) {
  Image img(h, w, c);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<double>(i) / 7.0;
  return img;
}

}  // namespace

TEST_CASE("patch grid sizes") {
  CHECK(extract_patches(ramp(72, 72, 3), 8).shape() == Shape{81, 192});
  CHECK(extract_patches(ramp(256, 256, 3), 16).shape() == Shape{256, 768});
  CHECK_THROWS_AS(extract_patches(ramp(10, 10, 3), 4), ConfigError);
}

TEST_CASE("patches reassemble losslessly") {
  for (const auto& [size, p] : {std::pair<std::size_t, std::size_t>{72, 8}, {256, 16}, {12, 4}}) {
    const Image img = ramp(size, size, 3);
    CHECK(assemble_patches(extract_patches(img, p), size, size, 3, p) == img);
  }
}

TEST_CASE("patch layout is row-major over the grid") {
  const Image img = ramp(4, 4, 1);
  const auto p = extract_patches(img, 2);
  // second patch is the top-right block
  CHECK(p.at(1, 0) == img.at(0, 2, 0));
  CHECK(p.at(1, 3) == img.at(1, 3, 0));
  CHECK(p.at(2, 0) == img.at(2, 0, 0));
}

TEST_CASE("sinusoidal positions") {
  const auto pe = positional_encoding(82, 64);
  CHECK(pe.shape() == Shape{82, 64});
  CHECK(pe.at(1, 0) == doctest::Approx(0.8414709848078965).epsilon(1e-12));
  CHECK(pe.at(10, 2) == doctest::Approx(0.937632744137416).epsilon(1e-12));
  CHECK(pe.at(10, 3) == doctest::Approx(0.3476274401156199).epsilon(1e-12));
  CHECK(pe.at(0, 0) == 0.0);
  CHECK(pe.at(0, 1) == 1.0);
  CHECK_THROWS_AS(positional_encoding(4, 7), ConfigError);
}

TEST_CASE("attention against the scalar oracle") {
  const oracle::Matrix q2{{1, 0}, {0, 1}}, k2{{1, 2}, {3, -1}}, v2{{2, 0}, {-1, 4}};
  const oracle::Matrix q3{{1, 2}, {0, -1}, {3, 1}}, k3{{2, 1}, {-1, 0}, {1, 1}}, v3{{1, 0}, {0, 1}, {5, -2}};
  for (const auto& [q, k, v] : {std::tuple{q2, k2, v2}, std::tuple{q3, k3, v3}}) {
    const auto expect = oracle::attention(q, k, v);
    const auto composed = rows(self_attention(tensor(q), tensor(k), tensor(v)));
    const auto fused = rows(multi_head_scaled_attention(tensor(q), tensor(k), tensor(v), q.size(), 1));
    for (std::size_t i = 0; i < q.size(); ++i)
      for (std::size_t c = 0; c < 2; ++c) {
        CHECK(std::abs(composed[i][c] - expect[i][c]) < 1e-12);
        CHECK(std::abs(fused[i][c] - expect[i][c]) < 1e-12);
      }
  }
}

TEST_CASE("fused heads equal per-head composition") {
  Rng rng(8);
  const std::size_t S = 5, D = 8, H = 4, d = D / H;
  const auto q = support::random_tensor({2 * S, D}, rng, false);
  const auto k = support::random_tensor({2 * S, D}, rng, false);
  const auto v = support::random_tensor({2 * S, D}, rng, false);
  std::vector<AttentionProbs> probs;
  const auto fused = multi_head_scaled_attention(q, k, v, S, H, &probs);
  REQUIRE(probs.size() == 2);
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      auto part = [&](const Tensor& t) { return slice_cols(slice_rows(t, b * S, S), h * d, d); };
      const auto ref = self_attention(part(q), part(k), part(v));
      const auto got = part(fused);
      for (std::size_t i = 0; i < ref.numel(); ++i) CHECK(std::abs(ref.data()[i] - got.data()[i]) < 1e-12);
    }
    for (std::size_t r = 0; r < H * S; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < S; ++c) s += probs[b].probs[r * S + c];
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(multi_head_scaled_attention(q, k, v, S, 3), ConfigError);
  CHECK_THROWS_AS(multi_head_scaled_attention(q, k, v, 3, 2), DimensionError);
}

TEST_CASE("parameter layout and count") {
  ModelConfig c;
  c.num_classes = 5;
  const std::size_t D = 64, F = 128, P = 192, L = 8;
  const std::size_t expected = P * D + D + D + L * (4 * D * D + D * F + F + F * D + D + 4 * D) +
                               (D * 128 + 128) + (128 * 64 + 64) + (64 * 5 + 5);
  CHECK(parameter_count(c) == expected);
  const auto p = init_params(c, 1);
  CHECK(p.parameter_count() == expected);
  const auto names = p.named();
  const auto layout = parameter_layout(c);
  REQUIRE(names.size() == layout.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    CHECK(names[i].name == layout[i].first);
    CHECK(names[i].tensor.shape() == layout[i].second);
  }
  CHECK(init_params(c, 1).named()[4].tensor.data()[7] == p.named()[4].tensor.data()[7]);
}

TEST_CASE("config validation") {
  ModelConfig c;
  c.patch_size = 7;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.num_heads = 6;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.num_classes = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.dropout_rate = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_NOTHROW(ModelConfig{}.validate());
}

TEST_CASE("forward shapes and modes") {
  const auto c = support::small_model_config();
  const auto params = init_params(c, 2);
  Rng rng(3);
  const auto images = support::random_images(4, c.image_size, 3, rng);
  const auto logits = forward(images, params, c, {});
  CHECK(logits.shape() == Shape{4, 3});

  // eval mode is deterministic and independent of batch composition
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto one = forward(std::span<const Image>(&images[i], 1), params, c, {});
    for (std::size_t j = 0; j < 3; ++j) CHECK(one.at(0, j) == logits.at(i, j));
  }

  ForwardOptions train;
  train.mode = Mode::train;
  CHECK_THROWS_AS(forward(images, params, c, train), ContractError);
  Rng r1(5), r2(5);
  train.rng = &r1;
  const auto a = forward(images, params, c, train);
  train.rng = &r2;
  const auto b = forward(images, params, c, train);
  CHECK(std::vector<double>(a.data().begin(), a.data().end()) == std::vector<double>(b.data().begin(), b.data().end()));

  const auto wrong = support::random_images(1, 12, 3, rng);
  CHECK_THROWS_AS(forward(wrong, params, c, {}), ConfigError);

  AttentionTrace trace;
  ForwardOptions traced;
  traced.trace = &trace;
  forward(images, params, c, traced);
  CHECK(trace.layers.size() == 2);
}

TEST_CASE("two-layer model gradients match finite differences") {
  for (const auto& r : support::model_gradient_suite(3)) {
    CAPTURE(r.name);
    CHECK(r.rel_error < 1e-3);
  }
}

TEST_CASE("untrained loss is at chance with a zeroed head") {
  auto c = support::small_model_config();
  c.num_classes = 5;
  Rng rng(10);
  const auto images = support::random_images(64, c.image_size, 3, rng);
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < images.size(); ++i) labels.push_back(rng.below(5));

  const auto sym = init_params(c, 9, HeadInit::zero);
  const double loss = sparse_ce_loss(forward(images, sym, c, {}), labels).item();
  CHECK(std::abs(loss - std::log(5.0)) < 1e-12);

  // only the final weight differs; the random stream is shared
  const auto glorot = init_params(c, 9);
  CHECK(glorot.head[0].weight.data()[3] == sym.head[0].weight.data()[3]);
  CHECK(glorot.layers[1].wq.data()[3] == sym.layers[1].wq.data()[3]);
  const double g = sparse_ce_loss(forward(images, glorot, c, {}), labels).item();
  CHECK(g > 0.9 * std::log(5.0));
}

namespace {

Tensor fill(Shape shape, double scale, double phase) {
  std::vector<double> v(shape_numel(shape));
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = scale * std::sin(phase + 0.37 * static_cast<double>(k));
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor plus_one(Tensor t) {
  for (auto& x : t.mutable_data()) x += 1.0;
  return t;
}

}  // namespace

TEST_CASE("one encoder layer against a frozen reference") {
  // reference values from an independent array-library implementation
  const std::vector<double> golden{-1.5655744901170825, -0.36376326664797426, 0.6111926114722523, 1.178475954022248,
                                   1.2115491746743072,  0.7259675584539765,   -0.26435374388184296, -1.5710553050426794,
                                   1.5524246069628804,  0.4361574007752243,   -0.5794597518970529, -1.309214702978929};
  ModelConfig c;
  c.model_dim = 4;
  c.num_heads = 2;
  c.ffn_dim = 8;
  EncoderLayerParams L;
  L.wq = fill({4, 4}, 0.5, 0.2);
  L.wk = fill({4, 4}, 0.5, 0.9);
  L.wv = fill({4, 4}, 0.5, 1.3);
  L.wo = fill({4, 4}, 0.5, 2.1);
  L.w1 = fill({4, 8}, 0.5, 0.4);
  L.b1 = fill({8}, 0.1, 0.6);
  L.w2 = fill({8, 4}, 0.5, 1.7);
  L.b2 = fill({4}, 0.1, 2.5);
  L.ln1_gain = plus_one(fill({4}, 0.1, 0.3));
  L.ln1_bias = fill({4}, 0.05, 1.1);
  L.ln2_gain = plus_one(fill({4}, 0.1, 1.9));
  L.ln2_bias = fill({4}, 0.05, 2.7);
  const auto z = encoder_layer(fill({3, 4}, 1.0, 0.1), L, c, 3, {});
  CHECK(z.shape() == Shape{3, 4});
  for (std::size_t i = 0; i < golden.size(); ++i) CHECK(std::abs(z.data()[i] - golden[i]) < 1e-12);
}

TEST_CASE("encoder with zero sub-layers keeps the residual") {
  ModelConfig c;
  c.model_dim = 4;
  c.num_heads = 2;
  c.ffn_dim = 6;
  EncoderLayerParams L;
  L.wq = L.wk = L.wv = L.wo = Tensor::zeros({4, 4});
  L.w1 = Tensor::zeros({4, 6});
  L.b1 = Tensor::zeros({6});
  L.w2 = Tensor::zeros({6, 4});
  L.b2 = Tensor::zeros({4});
  L.ln1_gain = L.ln2_gain = Tensor::full({4}, 1.0);
  L.ln1_bias = L.ln2_bias = Tensor::zeros({4});
  const auto x = fill({5, 4}, 2.0, 0.4);
  const auto z = encoder_layer(x, L, c, 5, {});
  const auto ref = layer_norm(layer_norm(x, L.ln1_gain, L.ln1_bias, c.ln_eps), L.ln2_gain, L.ln2_bias, c.ln_eps);
  for (std::size_t i = 0; i < z.numel(); ++i) CHECK(z.data()[i] == doctest::Approx(ref.data()[i]).epsilon(1e-12));
}

TEST_CASE("attention corner cases") {
  const auto v1 = Tensor::from({1, 3}, {4, -2, 7});
  const auto one = self_attention(Tensor::from({1, 3}, {1, 2, 3}), Tensor::from({1, 3}, {0, 1, 0}), v1);
  for (std::size_t c = 0; c < 3; ++c) CHECK(one.at(0, c) == v1.at(0, c));

  Rng rng(13);
  const auto k = support::random_tensor({4, 3}, rng, false);
  const auto v = support::random_tensor({4, 3}, rng, false);
  const auto uni = self_attention(Tensor::zeros({4, 3}), k, v);
  for (std::size_t c = 0; c < 3; ++c) {
    const double mean = (v.at(0, c) + v.at(1, c) + v.at(2, c) + v.at(3, c)) / 4;
    for (std::size_t r = 0; r < 4; ++r) CHECK(uni.at(r, c) == doctest::Approx(mean).epsilon(1e-14));
  }

  // outputs stay inside the convex hull of V's rows
  const auto q = support::random_tensor({4, 3}, rng, false, -5, 5);
  const auto out = self_attention(q, k, v);
  for (std::size_t c = 0; c < 3; ++c) {
    double lo = 1e9, hi = -1e9;
    for (std::size_t r = 0; r < 4; ++r) lo = std::min(lo, v.at(r, c)), hi = std::max(hi, v.at(r, c));
    for (std::size_t r = 0; r < 4; ++r) {
      CHECK(out.at(r, c) >= lo - 1e-9);
      CHECK(out.at(r, c) <= hi + 1e-9);
    }
  }
}

TEST_CASE("multi-head attention structure") {
  ModelConfig wide;
  wide.model_dim = 512;
  CHECK(wide.head_dim() == 64);

  Rng rng(14);
  EncoderLayerParams L;
  L.wq = support::random_tensor({4, 4}, rng, false);
  L.wk = support::random_tensor({4, 4}, rng, false);
  L.wv = support::random_tensor({4, 4}, rng, false);
  L.wo = Tensor::from({4, 4}, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
  const auto x = support::random_tensor({4, 4}, rng, false);
  const auto single = multi_head_attention(x, L, 1);
  const auto ref = self_attention(matmul(x, L.wq), matmul(x, L.wk), matmul(x, L.wv));
  for (std::size_t i = 0; i < ref.numel(); ++i) CHECK(std::abs(single.data()[i] - ref.data()[i]) < 1e-12);

  // permutation equivariance
  const std::size_t perm[] = {2, 0, 3, 1};
  const auto a = take_rows(multi_head_attention(x, L, 2), perm);
  const auto b = multi_head_attention(take_rows(x, perm), L, 2);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(std::abs(a.data()[i] - b.data()[i]) < 1e-12);
}

TEST_CASE("feed-forward") {
  Rng rng(15);
  const auto x = support::random_tensor({2, 4}, rng, false);
  const auto w1 = support::random_tensor({4, 8}, rng, false), b1 = support::random_tensor({8}, rng, false);
  const auto w2 = support::random_tensor({8, 4}, rng, false), b2 = support::random_tensor({4}, rng, false);
  const auto y = feed_forward(x, w1, b1, w2, b2);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t o = 0; o < 4; ++o) {
      double acc = b2.data()[o];
      for (std::size_t h = 0; h < 8; ++h) {
        double pre = b1.data()[h];
        for (std::size_t i = 0; i < 4; ++i) pre += x.at(r, i) * w1.at(i, h);
        acc += std::max(pre, 0.0) * w2.at(h, o);
      }
      CHECK(std::abs(y.at(r, o) - acc) < 1e-12);
    }
  }
  const auto zero = feed_forward(x, Tensor::zeros({4, 8}), Tensor::zeros({8}), Tensor::zeros({8, 4}), Tensor::zeros({4}));
  for (const double v : zero.data()) CHECK(v == 0.0);
  const auto dead = feed_forward(x, w1, Tensor::full({8}, -100.0), w2, b2);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t o = 0; o < 4; ++o) CHECK(dead.at(r, o) == b2.data()[o]);
}

TEST_CASE("embedding") {
  ModelConfig c;
  c.num_classes = 2;
  auto p = init_params(c, 3);
  const auto patches = extract_patches(ramp(72, 72, 3), 8);
  const auto e = embed(patches, p, c);
  CHECK(e.shape() == Shape{82, 64});

  for (auto& w : p.patch_projection.weight.mutable_data()) w = 0.0;
  const auto pe = positional_encoding(82, 64);
  const auto only_pe = embed(patches, p, c);
  for (std::size_t i = 0; i < pe.numel(); ++i) CHECK(only_pe.data()[i] == pe.data()[i]);

  // identity projection: row i+1 is patch i plus its position
  ModelConfig s;
  s.image_size = 8;
  s.patch_size = 4;
  s.channels = 1;
  s.model_dim = 16;
  s.num_heads = 2;
  s.num_classes = 2;
  auto q = init_params(s, 1);
  auto w = q.patch_projection.weight.mutable_data();
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j) w[i * 16 + j] = i == j ? 1.0 : 0.0;
  const auto sp = extract_patches(ramp(8, 8, 1), 4);
  const auto se = embed(sp, q, s);
  const auto spe = positional_encoding(5, 16);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 16; ++j) CHECK(se.at(r + 1, j) - spe.at(r + 1, j) == doctest::Approx(sp.at(r, j)));

  const auto single = extract_patches(ramp(8, 8, 3), 8);
  CHECK(single.shape() == Shape{1, 192});
  const auto img = ramp(8, 8, 3);
  for (std::size_t i = 0; i < 192; ++i) CHECK(single.data()[i] == img.pixels[i]);

  const auto big = positional_encoding(300, 64);
  for (const double v : big.data()) CHECK((v >= -1.0 && v <= 1.0));
}

TEST_CASE("batch order and logits shape") {
  auto c = support::small_model_config();
  c.num_classes = 5;
  const auto params = init_params(c, 6);
  Rng rng(16);
  auto images = support::random_images(3, c.image_size, 3, rng);
  const auto z = forward(images, params, c, {});
  CHECK(forward(std::span<const Image>(images.data(), 2), params, c, {}).shape() == Shape{2, 5});
  std::swap(images[0], images[2]);
  const auto zp = forward(images, params, c, {});
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(zp.at(0, j) == z.at(2, j));
    CHECK(zp.at(2, j) == z.at(0, j));
  }
  CHECK(parameter_count(c) == init_params(c, 99).parameter_count());
}
