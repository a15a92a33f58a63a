#include <doctest.h>

#include <random>

#include "boxref/fusion.hpp"
#include "oracles.hpp"

using namespace boxref;
using doctest::Approx;

namespace {

Shape random_dims(std::mt19937& rng, int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return {d(rng), d(rng), d(rng)};
}

}  // namespace

TEST_SUITE("fusion") {

TEST_CASE("pixelwise identity kernel reproduces the search feature") {
  Tensor<double> k({1, 1, 1});
  k[0] = 1.0;
  std::mt19937 rng(1);
  Tensor<double> s({1, 4, 5});
  oracle::fill_uniform(s, rng);
  const Tensor<double> out = pixelwise_correlation(k, s);
  REQUIRE(out.shape() == Shape{1, 4, 5});
  for (std::size_t i = 0; i < s.numel(); ++i) CHECK(out[i] == Approx(s[i]));
}

TEST_CASE("output channel counts follow the operator") {
  std::mt19937 rng(2);
  Tensor<float> k({64, 8, 8}), s({64, 16, 16});
  oracle::fill_uniform(k, rng);
  oracle::fill_uniform(s, rng);
  CHECK(pixelwise_correlation(k, s).shape() == Shape{64, 16, 16});  // 8*8 kernels
  CHECK(depthwise_correlation(k, s).shape() == Shape{64, 16, 16});
  CHECK(naive_correlation(k, s).shape() == Shape{1, 16, 16});
  CHECK(fusion_output_channels(FusionKind::kPixelwise, 64, 8, 8) == 64);
  CHECK(fusion_output_channels(FusionKind::kDepthwise, 64, 8, 8) == 64);
  CHECK(fusion_output_channels(FusionKind::kNaive, 64, 8, 8) == 1);
}

TEST_CASE("depthwise 1x1 kernel scales each channel") {
  std::mt19937 rng(3);
  Tensor<double> k({3, 1, 1}), s({3, 4, 4});
  oracle::fill_uniform(k, rng);
  oracle::fill_uniform(s, rng);
  const Tensor<double> out = depthwise_correlation(k, s);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) CHECK(out(c, y, x) == Approx(k(c, 0, 0) * s(c, y, x)));
}

TEST_CASE("zero kernels give zero maps") {
  Tensor<double> k({2, 3, 3});
  std::mt19937 rng(4);
  Tensor<double> s({2, 5, 5});
  oracle::fill_uniform(s, rng);
  for (double v : depthwise_correlation(k, s)) CHECK(v == 0.0);
  for (double v : naive_correlation(k, s)) CHECK(v == 0.0);
}

TEST_CASE("naive equals the channel sum of depthwise") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape kd = random_dims(rng, 1, 5);
    std::uniform_int_distribution<int> d(1, 6);
    Tensor<double> k(kd), s({kd[0], std::max(kd[1], d(rng)), std::max(kd[2], d(rng))});
    oracle::fill_uniform(k, rng);
    oracle::fill_uniform(s, rng);
    const Tensor<double> dw = depthwise_correlation(k, s);
    const Tensor<double> nv = naive_correlation(k, s);
    for (int y = 0; y < s.dim(1); ++y)
      for (int x = 0; x < s.dim(2); ++x) {
        double sum = 0;
        for (int c = 0; c < kd[0]; ++c) sum += dw(c, y, x);
        CHECK(std::abs(nv(0, y, x) - sum) < 1e-6);
      }
  }
}

TEST_CASE("pixelwise is bilinear in the template") {
  std::mt19937 rng(6);
  Tensor<double> k1({3, 2, 2}), k2({3, 2, 2}), s({3, 4, 4});
  oracle::fill_uniform(k1, rng);
  oracle::fill_uniform(k2, rng);
  oracle::fill_uniform(s, rng);
  const double a = 1.7, b = -0.4;
  Tensor<double> mix({3, 2, 2});
  for (std::size_t i = 0; i < mix.numel(); ++i) mix[i] = a * k1[i] + b * k2[i];
  const Tensor<double> lhs = pixelwise_correlation(mix, s);
  const Tensor<double> r1 = pixelwise_correlation(k1, s);
  const Tensor<double> r2 = pixelwise_correlation(k2, s);
  for (std::size_t i = 0; i < lhs.numel(); ++i)
    CHECK(lhs[i] == Approx(a * r1[i] + b * r2[i]).epsilon(1e-10));
}

TEST_CASE("100 random instances match the brute-force oracles") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> d(1, 6);
  for (int trial = 0; trial < 100; ++trial) {
    const int c = d(rng);
    const int kh = d(rng), kw = d(rng);
    const int h = std::max(kh, d(rng)), w = std::max(kw, d(rng));
    Tensor<double> k({c, kh, kw}), s({c, h, w});
    oracle::fill_uniform(k, rng);
    oracle::fill_uniform(s, rng);

    CHECK(oracle::rel_err(pixelwise_correlation(k, s), oracle::pixelwise_correlation(k, s)) <=
          1e-5);
    CHECK(oracle::rel_err(depthwise_correlation(k, s), oracle::depthwise_correlation(k, s)) <=
          1e-5);
    CHECK(oracle::rel_err(naive_correlation(k, s), oracle::naive_correlation(k, s)) <= 1e-5);
  }
}

TEST_CASE("float32 path matches the oracles too") {
  std::mt19937 rng(8);
  std::uniform_int_distribution<int> d(1, 6);
  for (int trial = 0; trial < 30; ++trial) {
    const int c = d(rng), kh = d(rng), kw = d(rng);
    const int h = std::max(kh, d(rng)), w = std::max(kw, d(rng));
    Tensor<float> k({c, kh, kw}), s({c, h, w});
    oracle::fill_uniform(k, rng);
    oracle::fill_uniform(s, rng);
    CHECK(oracle::rel_err(pixelwise_correlation(k, s), oracle::pixelwise_correlation(k, s)) <=
          1e-5);
    CHECK(oracle::rel_err(depthwise_correlation(k, s), oracle::depthwise_correlation(k, s)) <=
          1e-5);
    CHECK(oracle::rel_err(naive_correlation(k, s), oracle::naive_correlation(k, s)) <= 1e-5);
  }
}

TEST_CASE("gradients match central differences at f64") {
  std::mt19937 rng(9);
  std::uniform_int_distribution<int> d(1, 5);
  for (FusionKind kind :
       {FusionKind::kNaive, FusionKind::kDepthwise, FusionKind::kPixelwise}) {
    for (int trial = 0; trial < 5; ++trial) {
      const int c = d(rng), kh = d(rng), kw = d(rng);
      const int h = std::max(kh, d(rng)), w = std::max(kw, d(rng));
      Tensor<double> k({c, kh, kw}), s({c, h, w});
      oracle::fill_uniform(k, rng);
      oracle::fill_uniform(s, rng);
      Tensor<double> r(correlate(kind, k, s).shape());
      oracle::fill_uniform(r, rng);

      // scalar objective: <r, correlate(k, s)>
      auto loss = [&]() {
        const Tensor<double> out = correlate(kind, k, s);
        double acc = 0;
        for (std::size_t i = 0; i < out.numel(); ++i) acc += r[i] * out[i];
        return acc;
      };
      Tensor<double> dk, ds;
      correlate_backward(kind, k, s, r, dk, ds);
      CHECK(oracle::rel_err(dk, oracle::fd_grad(loss, k)) < 1e-4);
      CHECK(oracle::rel_err(ds, oracle::fd_grad(loss, s)) < 1e-4);
    }
  }
}

TEST_CASE("input validation") {
  Tensor<float> k({2, 2, 2}), s({3, 4, 4});
  CHECK_THROWS_AS((void)pixelwise_correlation(k, s), std::invalid_argument);  // channel mismatch
  CHECK_THROWS_AS((void)depthwise_correlation(k, s), std::invalid_argument);
  Tensor<float> big({3, 6, 6}), small({3, 4, 4});
  CHECK_THROWS_AS((void)depthwise_correlation(big, small), std::invalid_argument);
  CHECK_THROWS_AS((void)naive_correlation(big, small), std::invalid_argument);
  CHECK_THROWS_AS(fusion_kind_from_name("bogus"), std::invalid_argument);
  CHECK(fusion_kind_from_name("pixelwise") == FusionKind::kPixelwise);
}

}  // TEST_SUITE
