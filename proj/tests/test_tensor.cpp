#include <doctest.h>

#include "boxref/tensor.hpp"

using namespace boxref;

TEST_SUITE("tensor") {

TEST_CASE("row-major layout and variadic indexing") {
  Tensor<float> t({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.ndim() == 3);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(i);
  CHECK(t(0, 0, 0) == 0.0f);
  CHECK(t(0, 0, 3) == 3.0f);
  CHECK(t(0, 1, 0) == 4.0f);
  CHECK(t(1, 0, 0) == 12.0f);
  CHECK(t(1, 2, 3) == 23.0f);
}

TEST_CASE("fill and zero") {
  Tensor<double> t({3, 3}, 7.0);
  CHECK(t(2, 2) == 7.0);
  t.set_zero();
  for (std::size_t i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0);
}

TEST_CASE("reshape preserves data, rejects bad element counts") {
  Tensor<int> t({2, 6});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<int>(i);
  Tensor<int> r = t.reshaped({3, 4});
  CHECK(r(0, 0) == 0);
  CHECK(r(2, 3) == 11);
  CHECK_THROWS_AS((void)t.reshaped({5, 5}), std::invalid_argument);
}

TEST_CASE("negative dimension rejected") {
  CHECK_THROWS_AS(Tensor<float>({2, -1}), std::invalid_argument);
}

TEST_CASE("batch sample helpers") {
  Tensor<float> batch({3, 2, 2});
  for (std::size_t i = 0; i < batch.numel(); ++i) batch[i] = static_cast<float>(i);

  Tensor<float> s1 = take_sample(batch, 1);
  CHECK(s1.shape() == Shape{2, 2});
  CHECK(s1(0, 0) == 4.0f);
  CHECK(s1(1, 1) == 7.0f);

  Tensor<float> repl({2, 2}, -1.0f);
  put_sample(batch, 2, repl);
  CHECK(batch(2, 0, 0) == -1.0f);
  CHECK(batch(2, 1, 1) == -1.0f);
  CHECK(batch(1, 1, 1) == 7.0f);

  add_sample(batch, 2, repl);
  CHECK(batch(2, 0, 0) == -2.0f);
}

TEST_CASE("map_matrix views the same memory") {
  Tensor<double> t({2, 3});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<double>(i + 1);
  auto m = map_matrix(t, 2, 3);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(1, 2) == 6.0);
  m(1, 2) = 42.0;
  CHECK(t(1, 2) == 42.0);
}

}  // TEST_SUITE
