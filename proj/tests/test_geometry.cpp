#include <doctest.h>

#include <cmath>
#include <random>

#include "boxref/geometry.hpp"
#include "oracles.hpp"

using namespace boxref;
using doctest::Approx;

TEST_SUITE("geometry") {

TEST_CASE("iou fixtures") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == Approx(1.0));
  CHECK(iou({0, 0, 5, 5}, {10, 10, 5, 5}) == Approx(0.0));
  // intersection 1, union 7
  CHECK(iou({0, 0, 2, 2}, {1, 1, 2, 2}) == Approx(1.0 / 7.0));
}

TEST_CASE("iou properties on random boxes") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-20, 20), sz(0.5, 30);
  for (int i = 0; i < 500; ++i) {
    const Box a{u(rng), u(rng), sz(rng), sz(rng)};
    const Box b{u(rng), u(rng), sz(rng), sz(rng)};
    const double v = iou(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == Approx(iou(b, a)));
    CHECK(iou(a, a) == Approx(1.0));
    CHECK(v == Approx(oracle::iou(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("search region fixtures") {
  CropSpec s = make_search_region({10, 10, 20, 40}, 2.0);
  CHECK(s.cx == Approx(20));
  CHECK(s.cy == Approx(30));
  CHECK(s.h == Approx(80));
  CHECK(s.w == Approx(40));
  CHECK(s.out_size == 256);

  s = make_search_region({0, 0, 1, 1}, 2.0);
  CHECK(s.cx == Approx(0.5));
  CHECK(s.cy == Approx(0.5));
  CHECK(s.h == Approx(2));
  CHECK(s.w == Approx(2));

  s = make_search_region({5, 5, 10, 10}, 1.0);
  CHECK(s.cx == Approx(10));
  CHECK(s.cy == Approx(10));
  CHECK(s.h == Approx(10));
  CHECK(s.w == Approx(10));
}

TEST_CASE("box transform fixtures") {
  const CropTransform ident{};
  const Box b{1, 2, 3, 4};
  const Box bi = box_image_to_crop(b, ident);
  CHECK(bi.x == Approx(1));
  CHECK(bi.h == Approx(4));

  const CropTransform scale2{0, 0, 2, 2};
  const Box s = box_image_to_crop({1, 1, 2, 2}, scale2);
  CHECK(s.x == Approx(2));
  CHECK(s.y == Approx(2));
  CHECK(s.w == Approx(4));
  CHECK(s.h == Approx(4));
}

TEST_CASE("transform round-trips under 1e-6 over 1000 random cases") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> off(-300, 300), sc(0.05, 20), pos(-500, 500),
      sz(0.01, 400);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const CropTransform t{off(rng), off(rng), sc(rng), sc(rng)};
    const double px = pos(rng), py = pos(rng);
    double qx, qy, rx, ry;
    t.image_to_crop(px, py, qx, qy);
    t.crop_to_image(qx, qy, rx, ry);
    worst = std::max({worst, std::abs(rx - px), std::abs(ry - py)});

    const Box b{pos(rng), pos(rng), sz(rng), sz(rng)};
    const Box rb = box_crop_to_image(box_image_to_crop(b, t), t);
    worst = std::max({worst, std::abs(rb.x - b.x), std::abs(rb.y - b.y), std::abs(rb.w - b.w),
                      std::abs(rb.h - b.h)});
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("crop covering the whole frame resamples it") {
  std::mt19937 rng(3);
  Image frame({3, 8, 8});
  oracle::fill_uniform(frame, rng, 0.0, 1.0);
  // same output resolution: resampling at pixel centers returns the input
  CropSpec spec{4.0, 4.0, 8.0, 8.0, 8};
  const CropResult res = crop_and_resize(frame, spec);
  REQUIRE(res.crop.shape() == Shape{3, 8, 8});
  for (std::size_t i = 0; i < frame.numel(); ++i)
    CHECK(res.crop[i] == Approx(frame[i]).epsilon(1e-6));
  // transform scale = out/size
  CHECK(res.transform.sx == Approx(1.0));
  CHECK(res.transform.sy == Approx(1.0));

  CropSpec up{4.0, 4.0, 8.0, 8.0, 16};
  const CropResult res2 = crop_and_resize(frame, up);
  CHECK(res2.transform.sx == Approx(2.0));
  CHECK(res2.transform.sy == Approx(2.0));
}

TEST_CASE("out-of-frame samples use the per-channel frame mean") {
  Image frame({3, 4, 4});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) frame(c, y, x) = 0.25f * (c + 1);
  // crop centered far outside the frame: every sample is padding
  const CropResult res = crop_and_resize(frame, {100.0, 100.0, 4.0, 4.0, 4});
  for (int c = 0; c < 3; ++c) CHECK(res.crop(c, 0, 0) == Approx(0.25f * (c + 1)));

  // explicit pad value wins
  const CropResult res2 = crop_and_resize(frame, {100.0, 100.0, 4.0, 4.0, 4}, {0.f, 0.5f, 1.f});
  CHECK(res2.crop(0, 0, 0) == Approx(0.0f));
  CHECK(res2.crop(1, 0, 0) == Approx(0.5f));
  CHECK(res2.crop(2, 0, 0) == Approx(1.0f));
}

TEST_CASE("degenerate crop spec rejected") {
  Image frame({3, 4, 4});
  CHECK_THROWS_AS((void)crop_and_resize(frame, {2.0, 2.0, 0.0, 4.0, 4}), std::invalid_argument);
  CHECK_THROWS_AS((void)crop_and_resize(frame, {2.0, 2.0, 4.0, -1.0, 4}), std::invalid_argument);
}

TEST_CASE("mask crop is nearest-neighbour and zero outside") {
  Mask m({4, 4});
  m(1, 1) = 1.0f;
  m(2, 2) = 1.0f;
  // identity-resolution crop reproduces the mask
  Mask c = crop_mask_nearest(m, {2.0, 2.0, 4.0, 4.0, 4});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(c(y, x) == m(y, x));
  // crop fully outside -> all zeros
  Mask z = crop_mask_nearest(m, {50.0, 50.0, 4.0, 4.0, 4});
  for (std::size_t i = 0; i < z.numel(); ++i) CHECK(z[i] == 0.0f);
  // values stay binary under upscaling
  Mask u = crop_mask_nearest(m, {2.0, 2.0, 4.0, 4.0, 9});
  for (std::size_t i = 0; i < u.numel(); ++i) CHECK((u[i] == 0.0f || u[i] == 1.0f));
}

TEST_CASE("jitter zero-noise fixture") {
  const Box gt{0, 0, 10, 20};
  const CropSpec s = jitter_crop_spec(gt, {0.25, 0.25}, JitterDraws{});
  CHECK(s.cx == Approx(5));
  CHECK(s.cy == Approx(10));
  CHECK(s.h == Approx(40));  // 2 * h_gt
  CHECK(s.w == Approx(20));  // 2 * w_gt
}

TEST_CASE("zero jitter factors reduce to the x2 search region") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-50, 50), sz(1, 40);
  for (int i = 0; i < 100; ++i) {
    const Box gt{u(rng), u(rng), sz(rng), sz(rng)};
    const CropSpec a = jitter_crop_spec(gt, {0.0, 0.0}, rng);
    const CropSpec b = make_search_region(gt, 2.0);
    CHECK(a.cx == Approx(b.cx));
    CHECK(a.cy == Approx(b.cy));
    CHECK(a.h == Approx(b.h));
    CHECK(a.w == Approx(b.w));
  }
}

TEST_CASE("jitter center offset hard bound") {
  const Box gt{10, 10, 16, 24};
  std::mt19937 rng(17);
  for (int i = 0; i < 2000; ++i) {
    const CropSpec s = jitter_crop_spec(gt, {0.25, 0.25}, rng);
    const double o_max = std::sqrt(s.h * s.w) * 0.25;
    CHECK(std::abs(s.cx - gt.cx()) <= o_max / 2 + 1e-9);
    CHECK(std::abs(s.cy - gt.cy()) <= o_max / 2 + 1e-9);
  }
}

TEST_CASE("jitter Monte-Carlo moments within 3 standard errors") {
  const Box gt{0, 0, 12, 18};
  const double f_s = 0.25, f_c = 0.25;
  const int n = 10000;
  std::mt19937 rng(23);
  std::vector<double> log_h, log_w, off_x, off_y;
  for (int i = 0; i < n; ++i) {
    const CropSpec s = jitter_crop_spec(gt, {f_s, f_c}, rng);
    log_h.push_back(std::log(s.h / (2 * gt.h)));
    log_w.push_back(std::log(s.w / (2 * gt.w)));
    off_x.push_back(s.cx - gt.cx());
    off_y.push_back(s.cy - gt.cy());
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto stdev = [&](const std::vector<double>& v, double m) {
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };

  // log-size deviations: normal with mean 0, std f_s
  for (const auto* v : {&log_h, &log_w}) {
    const double m = mean(*v);
    const double se_mean = f_s / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(m) <= 3 * se_mean);
    const double sd = stdev(*v, m);
    // SE of the sample std of a normal ~ sigma / sqrt(2n)
    const double se_sd = f_s / std::sqrt(2.0 * n);
    CHECK(std::abs(sd - f_s) <= 3 * se_sd);
  }
  // center offsets: symmetric around 0 (mean within 3 empirical SE)
  for (const auto* v : {&off_x, &off_y}) {
    const double m = mean(*v);
    const double se = stdev(*v, m) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(m) <= 3 * se);
  }
}

TEST_CASE("seeded jitter draws are reproducible") {
  const Box gt{3, 4, 10, 10};
  std::mt19937 a(99), b(99);
  for (int i = 0; i < 20; ++i) {
    const CropSpec sa = jitter_crop_spec(gt, {0.25, 0.25}, a);
    const CropSpec sb = jitter_crop_spec(gt, {0.25, 0.25}, b);
    CHECK(sa.cx == sb.cx);
    CHECK(sa.cy == sb.cy);
    CHECK(sa.h == sb.h);
    CHECK(sa.w == sb.w);
  }
}

}  // TEST_SUITE
