#include <doctest.h>

#include <cmath>

#include "panelvit/error.hpp"
#include "panelvit/tensor.hpp"
#include "support/grad_suite.hpp"

using namespace panelvit;

TEST_CASE("every op matches central differences") {
  for (const auto& r : support::op_gradient_suite(1)) {
    CAPTURE(r.name);
    CHECK(r.rel_error < 1e-4);
  }
  for (const auto& r : support::op_gradient_suite(2)) {
    CAPTURE(r.name);
    CHECK(r.rel_error < 1e-4);
  }
}

TEST_CASE("matmul shapes") {
  const auto a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto b = Tensor::from({3, 2}, {7, 8, 9, 10, 11, 12});
  const auto c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 2});
  CHECK(c.at(0, 0) == 58);
  CHECK(c.at(1, 1) == 154);

  const auto z = matmul(Tensor::zeros({3, 0}), Tensor::zeros({0, 2}));
  CHECK(z.shape() == Shape{3, 2});
  for (const double x : z.data()) CHECK(x == 0.0);

  CHECK_THROWS_AS(matmul(a, a), DimensionError);
  CHECK_THROWS_AS(add(a, b), DimensionError);
  CHECK_THROWS_AS(add_bias(a, Tensor::zeros({2})), DimensionError);
}

TEST_CASE("backward contract") {
  auto x = Tensor::from({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(mul(x, x).backward(), ContractError);
  CHECK_THROWS_AS(sum(Tensor::from({2}, {1.0, 2.0})).backward(), ContractError);

  const auto y = sum(mul(x, x));
  y.backward();
  CHECK(x.grad() == std::vector<double>{2.0, 4.0});
  CHECK_THROWS_AS(y.backward(), ContractError);
}

TEST_CASE("gradients accumulate across a diamond") {
  auto x = Tensor::scalar(3.0, true);
  const auto a = scale(x, 2.0);
  const auto b = mul(x, x);
  add(a, b).backward();
  CHECK(x.grad()[0] == doctest::Approx(8.0).epsilon(1e-15));

  // a second, separate graph adds onto the existing gradient
  scale(x, 5.0).backward();
  CHECK(x.grad()[0] == doctest::Approx(13.0).epsilon(1e-15));
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("no-grad guard records nothing") {
  auto x = Tensor::scalar(1.0, true);
  Tensor y;
  {
    NoGradGuard g;
    CHECK_FALSE(grad_enabled());
    y = mul(x, x);
  }
  CHECK(grad_enabled());
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("layer norm of 1 2 3") {
  const auto x = Tensor::from({1, 3}, {1, 2, 3});
  const auto y = layer_norm(x, Tensor::full({3}, 1.0), Tensor::zeros({3}), 1e-5);
  CHECK(y.at(0, 0) == doctest::Approx(-1.2247356859083902).epsilon(1e-12));
  CHECK(std::abs(y.at(0, 1)) < 1e-15);
  CHECK(y.at(0, 2) == doctest::Approx(1.2247356859083902).epsilon(1e-12));
  CHECK_THROWS_AS(layer_norm(x, Tensor::full({3}, 1.0), Tensor::zeros({3}), 0.0), ParameterError);
}

TEST_CASE("softmax rows are distributions") {
  Rng rng(4);
  const auto x = support::random_tensor({5, 7}, rng, false, -30.0, 30.0);
  const auto p = softmax(x);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 7; ++c) {
      CHECK(p.at(r, c) >= 0.0);
      s += p.at(r, c);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  // large logits do not overflow
  const auto big = softmax(Tensor::from({1, 2}, {1000.0, 1000.0}));
  CHECK(big.at(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("dropout") {
  Rng rng(1);
  const auto x = Tensor::full({100, 100}, 1.0);
  CHECK(dropout(x, 0.5, false, rng).node() == x.node());
  CHECK(dropout(x, 0.0, true, rng).node() == x.node());
  CHECK_THROWS_AS(dropout(x, 1.0, true, rng), ParameterError);
  CHECK_THROWS_AS(dropout(x, -0.1, true, rng), ParameterError);

  const auto y = dropout(x, 0.5, true, rng);
  double s = 0;
  for (const double v : y.data()) {
    CHECK((v == 0.0 || v == 2.0));
    s += v;
  }
  CHECK(s / 10000.0 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("row and column slicing") {
  const auto x = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
  CHECK(slice_rows(x, 1, 2).data()[0] == 3);
  CHECK(slice_cols(x, 1, 1).data()[2] == 6);
  CHECK_THROWS_AS(slice_rows(x, 2, 2), DimensionError);
  const std::size_t idx[] = {2, 2, 0};
  const auto t = take_rows(x, idx);
  CHECK(t.shape() == Shape{3, 2});
  CHECK(t.at(1, 1) == 6);
  CHECK_THROWS_AS(reshape(x, {4, 2}), DimensionError);
  CHECK(transpose(x).at(1, 2) == 6);
}

TEST_CASE("small worked examples") {
  const auto m = Tensor::from({2, 2}, {3, -1, 4, 2});
  const auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  const auto im = matmul(eye, m);
  CHECK(std::vector<double>(im.data().begin(), im.data().end()) == std::vector<double>{3, -1, 4, 2});
  const auto mv = matmul(Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::from({2, 1}, {5, 6}));
  CHECK(mv.at(0, 0) == 17);
  CHECK(mv.at(1, 0) == 39);

  const auto s1 = softmax(Tensor::from({1, 3}, {1, 1, 1}));
  for (std::size_t c = 0; c < 3; ++c) CHECK(s1.at(0, c) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  const auto s2 = softmax(Tensor::from({1, 2}, {0, std::log(2.0)}));
  CHECK(s2.at(0, 0) == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(s2.at(0, 1) == doctest::Approx(2.0 / 3).epsilon(1e-14));
  const auto shifted = softmax(Tensor::from({1, 3}, {0.5 + 7, -1.0 + 7, 2.0 + 7}));
  const auto base = softmax(Tensor::from({1, 3}, {0.5, -1.0, 2.0}));
  for (std::size_t c = 0; c < 3; ++c) CHECK(shifted.at(0, c) == doctest::Approx(base.at(0, c)).epsilon(1e-14));

  const auto ones = Tensor::full({4}, 1.0), zeros = Tensor::zeros({4});
  const auto flat = layer_norm(Tensor::from({1, 4}, {5, 5, 5, 5}), ones, zeros, 1e-6);
  for (const double v : flat.data()) CHECK(v == 0.0);
  const auto bias = Tensor::from({4}, {0.1, -0.2, 0.3, 0.4});
  const auto ann = layer_norm(Tensor::from({2, 4}, {1, 5, 2, 8, -3, 0, 4, 1}), zeros, bias, 1e-6);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 4; ++c) CHECK(ann.at(r, c) == bias.data()[c]);

  const auto r = relu(Tensor::from({3}, {-1, 0, 2}));
  CHECK(std::vector<double>(r.data().begin(), r.data().end()) == std::vector<double>{0, 0, 2});
  const auto rr = relu(r);
  CHECK(std::vector<double>(rr.data().begin(), rr.data().end()) == std::vector<double>{0, 0, 2});
  auto x = Tensor::from({2}, {-3, 5}, true);
  sum(relu(x)).backward();
  CHECK(x.grad() == std::vector<double>{0, 1});

  auto w = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  sum(w).backward();
  CHECK(w.grad() == std::vector<double>(6, 1.0));
  auto w2 = Tensor::from({2}, {1, -2}, true);
  sum(mul(w2, w2)).backward();
  CHECK(w2.grad() == std::vector<double>{2, -4});
}

TEST_CASE("dropout survival statistics") {
  Rng rng(123);
  const auto x = Tensor::full({100000}, 1.0);
  const auto y = dropout(x, 0.5, true, rng);
  std::size_t kept = 0;
  double total = 0;
  for (const double v : y.data()) {
    kept += v != 0.0;
    total += v;
  }
  CHECK(std::abs(kept / 1e5 - 0.5) <= 0.01);
  CHECK(std::abs(total / 1e5 - 1.0) <= 0.02);
}
