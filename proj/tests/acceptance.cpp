// Release acceptance gate: nine end-to-end checks, one PASS/FAIL line each.
// Exit code is nonzero when any check fails. Budgets assume a single
// commodity CPU core.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "boxref/config.hpp"
#include "boxref/eval.hpp"
#include "boxref/fusion.hpp"
#include "boxref/geometry.hpp"
#include "boxref/losses.hpp"
#include "boxref/model.hpp"
#include "boxref/refine.hpp"
#include "boxref/synthetic.hpp"
#include "boxref/training.hpp"
#include "oracles.hpp"

using namespace boxref;
using Clock = std::chrono::steady_clock;

namespace {

double secs_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return std::string(buf);
}

struct Outcome {
  bool ok = false;
  std::string detail;
};

double vec_rel_err(const std::vector<double>& got, const std::vector<double>& ref) {
  double scale = 1e-12, diff = 0;
  for (double v : ref) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < got.size(); ++i)
    diff = std::max(diff, std::abs(got[i] - ref[i]));
  return diff / scale;
}

Image random_image(int size, unsigned seed) {
  Image img({3, size, size});
  std::mt19937 rng(seed);
  oracle::fill_uniform(img, rng, 0.0, 1.0);
  return img;
}

// The short-budget end-to-end configuration used by the training-dependent
// checks: 128 px inputs, 10 sequences of 30 frames, 3 x 80 x 8 schedule,
// and a coarse tracker tuned so its mean IoU sits near 0.5.
SyntheticSpec short_budget_data(std::uint64_t seed) {
  SyntheticSpec d;
  d.num_sequences = 10;
  d.frames_per_sequence = 30;
  d.image_size = 128;
  d.seed = seed;
  return d;
}

TrainConfig short_budget_train(std::uint64_t seed) {
  TrainConfig t;
  t.epochs = 3;
  t.iterations_per_epoch = 80;
  t.batch_size = 8;
  t.base_learning_rate = 2e-3;
  t.seed = seed;
  return t;
}

ModelConfig short_budget_model() {
  ModelConfig m;
  m.input_size = 128;
  m.head_kind = HeadKind::kCorner;
  m.fusion_kind = FusionKind::kPixelwise;
  return m;
}

SimulatedTrackerSpec noisy_tracker(std::uint64_t seed) {
  SimulatedTrackerSpec t;
  t.sigma_translation = 0.2;
  t.sigma_log_scale = 0.1;
  t.seed = seed;
  return t;
}

/// State shared between the training check and the later checks that reuse
/// its trained model.
struct Artifacts {
  std::optional<Model<float>> model;
  std::vector<Sequence> data;
  std::vector<std::vector<Box>> gts;
};

double mean_coarse_iou(const std::vector<RunResult>& results,
                       const std::vector<std::vector<Box>>& gts) {
  double acc = 0;
  int n = 0;
  for (std::size_t s = 0; s < results.size(); ++s)
    for (std::size_t f = 1; f < results[s].coarse.size(); ++f) {
      acc += oracle::iou(results[s].coarse[f], gts[s][f]);
      ++n;
    }
  return n ? acc / n : 0.0;
}

// ---------------------------------------------------------------------------
// 1. Correlation ops match a brute-force reference
// ---------------------------------------------------------------------------

Outcome correlation_vs_reference() {
  const auto t0 = Clock::now();
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> dim(1, 6);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    int c = dim(rng), kh = dim(rng), kw = dim(rng), h = dim(rng), w = dim(rng);
    if (kh > h) std::swap(kh, h);
    if (kw > w) std::swap(kw, w);
    Tensor<double> k({c, kh, kw}), s({c, h, w});
    oracle::fill_uniform(k, rng);
    oracle::fill_uniform(s, rng);
    worst = std::max(worst, oracle::rel_err(naive_correlation(k, s),
                                            oracle::naive_correlation(k, s)));
    worst = std::max(worst, oracle::rel_err(depthwise_correlation(k, s),
                                            oracle::depthwise_correlation(k, s)));
    worst = std::max(worst, oracle::rel_err(pixelwise_correlation(k, s),
                                            oracle::pixelwise_correlation(k, s)));
  }
  const double secs = secs_since(t0);
  return {worst <= 1e-5 && secs < 10.0,
          fmt("max rel err %.2e (tol 1e-5) over 300 cases in %.2fs (budget 10s)", worst, secs)};
}

// ---------------------------------------------------------------------------
// 2. Analytic gradients match central finite differences
// ---------------------------------------------------------------------------

Outcome gradients_vs_finite_differences() {
  const auto t0 = Clock::now();
  std::mt19937 rng(7);
  double worst_op = 0;

  // Correlations: objective = <out, R> for a fixed random R.
  for (FusionKind kind :
       {FusionKind::kNaive, FusionKind::kDepthwise, FusionKind::kPixelwise}) {
    Tensor<double> k({3, 2, 3}), s({3, 4, 5});
    oracle::fill_uniform(k, rng);
    oracle::fill_uniform(s, rng);
    Tensor<double> r(correlate(kind, k, s).shape());
    oracle::fill_uniform(r, rng);
    auto objective = [&]() {
      Tensor<double> y = correlate(kind, k, s);
      double acc = 0;
      for (std::size_t i = 0; i < y.numel(); ++i) acc += y[i] * r[i];
      return acc;
    };
    Tensor<double> dk, ds;
    correlate_backward(kind, k, s, r, dk, ds);
    worst_op = std::max(worst_op, oracle::rel_err(dk, oracle::fd_grad(objective, k)));
    worst_op = std::max(worst_op, oracle::rel_err(ds, oracle::fd_grad(objective, s)));
  }

  // Soft-argmax: objective = 0.7 x + 1.3 y.
  {
    Tensor<double> h({5, 6});
    oracle::fill_uniform(h, rng);
    const double stride = 16.0, temp = 1.3;
    auto objective = [&]() {
      auto [x, y] = soft_argmax(h, stride, temp);
      return 0.7 * x + 1.3 * y;
    };
    SoftArgmaxCache<double> cache;
    soft_argmax(h, stride, temp, &cache);
    Tensor<double> dh = soft_argmax_backward(0.7, 1.3, stride, temp, cache);
    worst_op = std::max(worst_op, oracle::rel_err(dh, oracle::fd_grad(objective, h)));
  }

  // Box MSE.
  {
    Tensor<double> pred({3, 4}), target({3, 4});
    oracle::fill_uniform(pred, rng, 0.0, 1.0);
    oracle::fill_uniform(target, rng, 0.0, 1.0);
    auto objective = [&]() { return box_loss(pred, target); };
    worst_op = std::max(
        worst_op, oracle::rel_err(box_loss_grad(pred, target), oracle::fd_grad(objective, pred)));
  }

  // Mask BCE with respect to the logits.
  {
    Tensor<double> z({1, 1, 4, 4}), t({1, 1, 4, 4});
    oracle::fill_uniform(z, rng, -2.0, 2.0);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = (i % 3 == 0) ? 1.0 : 0.0;
    auto objective = [&]() { return mask_loss(nn::sigmoid(z), t); };
    Tensor<double> dz = mask_loss_grad_logits(nn::sigmoid(z), t);
    worst_op = std::max(worst_op, oracle::rel_err(dz, oracle::fd_grad(objective, z)));
  }

  // End-to-end training path of a tiny f64 model: weighted sum of the four
  // predicted corner coordinates, checked at two sampled components of every
  // parameter tensor.
  double worst_e2e = 0;
  {
    ModelConfig mc;
    mc.backbone.stage_channels = {4, 8};
    mc.input_size = 16;
    mc.fused_channels = 4;
    mc.head_kind = HeadKind::kCorner;
    mc.fusion_kind = FusionKind::kPixelwise;
    Model<double> model(mc, 99);
    Tensor<double> ref({1, 3, 16, 16}), test({1, 3, 16, 16});
    oracle::fill_uniform(ref, rng, 0.0, 1.0);
    oracle::fill_uniform(test, rng, 0.0, 1.0);
    const double a[4] = {0.3, -0.7, 0.55, 0.2};
    auto objective = [&]() {
      ForwardCache<double> c;
      TrainOutputs<double> o = model.forward_train(ref, test, c, false);
      double acc = 0;
      for (int i = 0; i < 4; ++i) acc += a[i] * o.corners(0, i);
      return acc;
    };
    model.zero_grads();
    ForwardCache<double> cache;
    model.forward_train(ref, test, cache, false);
    TrainGrads<double> g;
    g.dcorners = Tensor<double>({1, 4});
    for (int i = 0; i < 4; ++i) g.dcorners(0, i) = a[i];
    model.backward_train(cache, g);

    std::vector<double> analytic, fd;
    for (auto& p : model.params()) {
      std::vector<std::size_t> picks = {0};
      if (p.value->numel() > 1) picks.push_back(p.value->numel() / 2);
      for (std::size_t idx : picks) {
        analytic.push_back((*p.grad)[idx]);
        const double saved = (*p.value)[idx], step = 1e-5;
        (*p.value)[idx] = saved + step;
        const double fp = objective();
        (*p.value)[idx] = saved - step;
        const double fm = objective();
        (*p.value)[idx] = saved;
        fd.push_back((fp - fm) / (2 * step));
      }
    }
    worst_e2e = vec_rel_err(analytic, fd);
  }

  const double secs = secs_since(t0);
  return {worst_op < 1e-4 && worst_e2e < 1e-3 && secs < 60.0,
          fmt("ops rel err %.2e (tol 1e-4), end-to-end %.2e (tol 1e-3) in %.1fs (budget 60s)",
              worst_op, worst_e2e, secs)};
}

// ---------------------------------------------------------------------------
// 3. Crop geometry: round-trips, zero-noise determinism, jitter moments
// ---------------------------------------------------------------------------

Outcome crop_geometry_properties() {
  std::mt19937 rng(1234);
  std::uniform_real_distribution<double> uc(-5.0, 13.0), us(0.5, 20.0);
  std::uniform_real_distribution<double> ux(-10.0, 10.0), uw(0.1, 15.0);
  const Image frame = random_image(8, 11);

  double worst_rt = 0;
  for (int i = 0; i < 1000; ++i) {
    CropSpec spec;
    spec.cx = uc(rng);
    spec.cy = uc(rng);
    spec.h = us(rng);
    spec.w = us(rng);
    spec.out_size = 7 + 9 * (i % 3);
    const CropTransform t = crop_and_resize(frame, spec).transform;
    const Box b{ux(rng), ux(rng), uw(rng), uw(rng)};
    const Box b2 = box_crop_to_image(box_image_to_crop(b, t), t);
    worst_rt = std::max({worst_rt, std::abs(b2.x - b.x), std::abs(b2.y - b.y),
                         std::abs(b2.w - b.w), std::abs(b2.h - b.h)});
    double qx, qy, px, py;
    t.image_to_crop(b.x, b.y, qx, qy);
    t.crop_to_image(qx, qy, px, py);
    worst_rt = std::max({worst_rt, std::abs(px - b.x), std::abs(py - b.y)});
  }

  bool deterministic = true;
  for (int i = 0; i < 50; ++i) {
    const Box gt{ux(rng) + 20, ux(rng) + 20, uw(rng) + 1, uw(rng) + 1};
    const CropSpec spec = jitter_crop_spec(gt, JitterParams{}, JitterDraws{});
    deterministic = deterministic && spec.h == 2 * gt.h && spec.w == 2 * gt.w &&
                    spec.cx == gt.cx() && spec.cy == gt.cy();
  }
  {
    std::mt19937 r1(99), r2(99);
    const Box gt{30, 40, 24, 18};
    for (int i = 0; i < 100; ++i) {
      const CropSpec a = jitter_crop_spec(gt, JitterParams{}, r1);
      const CropSpec b = jitter_crop_spec(gt, JitterParams{}, r2);
      deterministic = deterministic && a.cx == b.cx && a.cy == b.cy && a.h == b.h && a.w == b.w;
    }
  }

  // Monte-Carlo moments of the jitter model over 10^4 draws, each within
  // 3 standard errors of its analytic value.
  const int N = 10000;
  const Box gt{30, 40, 24, 18};
  const JitterParams jp;  // f_s = f_c = 0.25
  std::mt19937 jrng(555);
  double sh = 0, sh2 = 0, sw = 0, sw2 = 0, uxm = 0, ux2 = 0, uym = 0, uy2 = 0;
  for (int i = 0; i < N; ++i) {
    const CropSpec spec = jitter_crop_spec(gt, jp, jrng);
    const double zh = std::log(spec.h / (2 * gt.h)) / jp.f_s;
    const double zw = std::log(spec.w / (2 * gt.w)) / jp.f_s;
    const double omax = std::sqrt(spec.h * spec.w) * jp.f_c;
    const double du = (spec.cx - gt.cx()) / omax;
    const double dv = (spec.cy - gt.cy()) / omax;
    sh += zh;
    sh2 += zh * zh;
    sw += zw;
    sw2 += zw * zw;
    uxm += du;
    ux2 += du * du;
    uym += dv;
    uy2 += dv * dv;
  }
  const double se_mean = 3.0 / std::sqrt((double)N);            // N(0,1) mean
  const double se_m2 = 3.0 * std::sqrt(2.0 / N);                // N(0,1) second moment
  const double se_umean = 3.0 / std::sqrt(12.0) / std::sqrt((double)N);
  const double se_u2 = 3.0 * std::sqrt(1.0 / 80.0 - 1.0 / 144.0) / std::sqrt((double)N);
  const bool moments_ok =
      std::abs(sh / N) < se_mean && std::abs(sh2 / N - 1) < se_m2 &&
      std::abs(sw / N) < se_mean && std::abs(sw2 / N - 1) < se_m2 &&
      std::abs(uxm / N) < se_umean && std::abs(ux2 / N - 1.0 / 12) < se_u2 &&
      std::abs(uym / N) < se_umean && std::abs(uy2 / N - 1.0 / 12) < se_u2;

  return {worst_rt < 1e-6 && deterministic && moments_ok,
          fmt("round-trip err %.2e (tol 1e-6); zero-noise exact: %s; moments within 3 SE: %s",
              worst_rt, deterministic ? "yes" : "NO", moments_ok ? "yes" : "NO")};
}

// ---------------------------------------------------------------------------
// 4. Short-budget training lifts refined AUC over the coarse tracker
// ---------------------------------------------------------------------------

Outcome training_lifts_auc(Artifacts& art) {
  const auto t0 = Clock::now();
  double sum_refined = 0, sum_coarse = 0, sum_iou = 0;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const std::vector<Sequence> data = generate_synthetic_dataset(short_budget_data(seed));
    Model<float> model(short_budget_model(), seed);
    train(model, data, short_budget_train(seed), LossConfig{}, JitterParams{}, nullptr);

    EvalSetup es;
    es.tracker = noisy_tracker(seed ^ 0x51edULL);
    const std::vector<RunResult> results = evaluate_dataset(data, &model, RefineConfig{}, es);
    std::vector<std::vector<Box>> gts;
    for (const Sequence& s : data) gts.push_back(s.gt);
    sum_refined += compute_metrics(results, gts, true, "refined").auc;
    sum_coarse += compute_metrics(results, gts, false, "coarse").auc;
    sum_iou += mean_coarse_iou(results, gts);
    if (seed == 3) {
      art.model.emplace(std::move(model));
      art.data = data;
      art.gts = gts;
    }
  }
  const double refined = sum_refined / 3, coarse = sum_coarse / 3, iou = sum_iou / 3;
  const double secs = secs_since(t0);
  const bool ok = refined - coarse >= 0.10 && iou > 0.3 && iou < 0.7 && secs <= 1200.0;
  return {ok, fmt("refined AUC %.3f vs coarse %.3f (delta %+.3f, need >= +0.10); "
                  "coarse IoU %.2f; 3 seeds in %.0fs (budget 1200s)",
                  refined, coarse, refined - coarse, iou, secs)};
}

// ---------------------------------------------------------------------------
// 5. Ground-truth-centered runs score at least standard runs
// ---------------------------------------------------------------------------

Outcome centered_runs_vs_standard(Artifacts& art) {
  if (!art.model) return {false, "no trained model available (previous check aborted)"};
  const std::vector<RunResult> oracle_results =
      oracle_evaluate_dataset(art.data, &*art.model, RefineConfig{}, 1);
  const double oracle_auc = compute_metrics(oracle_results, art.gts, true, "centered").auc;

  bool ok = true;
  std::ostringstream per_seed;
  for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    EvalSetup es;
    es.tracker = noisy_tracker(seed);
    es.tracker.sigma_translation = 0.3;
    es.tracker.sigma_log_scale = 0.15;
    const std::vector<RunResult> results =
        evaluate_dataset(art.data, &*art.model, RefineConfig{}, es);
    const double standard_auc = compute_metrics(results, art.gts, true, "standard").auc;
    ok = ok && oracle_auc >= standard_auc - 1e-12;
    per_seed << fmt(" %.3f", standard_auc);
  }
  return {ok, fmt("centered AUC %.3f >= standard AUC per tracker seed:%s (10 sequences)",
                  oracle_auc, per_seed.str().c_str())};
}

// ---------------------------------------------------------------------------
// 6. Mask head leaves boxes bit-identical and costs nothing when off
// ---------------------------------------------------------------------------

Outcome mask_head_invariants() {
  SyntheticSpec dspec;
  dspec.num_sequences = 1;
  dspec.frames_per_sequence = 20;
  dspec.image_size = 128;
  dspec.seed = 66;
  const Sequence seq = generate_sequence(dspec, 0);

  ModelConfig mc = short_budget_model();
  mc.with_mask = true;
  Model<float> model(mc, 2026);

  RefineConfig off, on;
  on.mask_enabled = true;
  Refiner r_off(&model, off), r_on(&model, on);
  r_off.initialize(seq.frames[0], seq.gt[0]);
  r_on.initialize(seq.frames[0], seq.gt[0]);

  bool identical = true;
  bool mask_flags_ok = true;
  double t_off = 0, t_on = 0;
  int timed = 0;
  std::vector<Box> boxes_off, boxes_on;
  for (int f = 1; f < seq.length(); ++f) {
    const auto a0 = Clock::now();
    const Refiner::Refined a = r_off.refine(seq.frames[f], seq.gt[f]);
    const double da = secs_since(a0);
    boxes_off.push_back(a.box);
    mask_flags_ok = mask_flags_ok && !a.mask.has_value();
    const auto b0 = Clock::now();
    const Refiner::Refined b = r_on.refine(seq.frames[f], seq.gt[f]);
    const double db = secs_since(b0);
    boxes_on.push_back(b.box);
    mask_flags_ok = mask_flags_ok && b.mask.has_value();
    if (f > 3) {
      t_off += da;
      t_on += db;
      ++timed;
    }
  }
  for (std::size_t i = 0; i < boxes_off.size(); ++i)
    identical = identical && boxes_off[i].x == boxes_on[i].x &&
                boxes_off[i].y == boxes_on[i].y && boxes_off[i].w == boxes_on[i].w &&
                boxes_off[i].h == boxes_on[i].h;
  const double ms_off = 1e3 * t_off / timed, ms_on = 1e3 * t_on / timed;
  return {identical && mask_flags_ok && ms_off <= ms_on,
          fmt("boxes bit-identical over %zu frames: %s; mean refine %.1fms off <= %.1fms on",
              boxes_off.size(), identical ? "yes" : "NO", ms_off, ms_on)};
}

// ---------------------------------------------------------------------------
// 7. Metric fixtures match hand counts
// ---------------------------------------------------------------------------

Outcome metric_hand_fixtures() {
  bool ok = true;
  std::ostringstream why;

  // Predictions equal to ground truth.
  {
    const std::vector<Box> gt = {{3, 4, 10, 12}, {20, 8, 6, 6}, {1, 1, 30, 22},
                                 {7, 9, 11, 13}, {2, 2, 5, 8}};
    ok = ok && success_auc(gt, gt).value == 20.0 / 21.0;
    ok = ok && precision(gt, gt).value == 1.0;
    ok = ok && normalized_precision(gt, gt).value == 1.0;
    if (!ok) why << " perfect-prediction values off;";
  }

  // Three frames with IoU 0.2 / 0.5 / 0.95 against a 10x10 target: the
  // success curve is a strict-inequality count at each of the 21 thresholds.
  {
    const std::vector<Box> gt(3, Box{0, 0, 10, 10});
    const std::vector<Box> pred = {{0, 0, 2, 10}, {0, 0, 5, 10}, {0, 0, 9.5, 10}};
    const int counts[21] = {3, 3, 3, 3, 2, 2, 2, 2, 2, 2, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0};
    const CurveMetric m = success_auc(pred, gt);
    bool curve_ok = m.curve.size() == 21;
    double sum = 0;
    for (int t = 0; t < 21 && curve_ok; ++t) {
      curve_ok = m.curve[(std::size_t)t] == counts[t] / 3.0;
      sum += counts[t] / 3.0;
    }
    ok = ok && curve_ok && std::abs(m.value - sum / 21.0) <= 1e-14 &&
         std::abs(m.value - 11.0 / 21.0) <= 1e-14;
    if (!curve_ok) why << " success curve mismatch;";
  }

  // Center distances 20 / 50 / 0.5 px: the 20 px threshold is inclusive.
  {
    const std::vector<Box> gt(3, Box{0, 0, 10, 10});
    const std::vector<Box> pred = {Box::from_center(17, 21, 10, 10),
                                   Box::from_center(35, 45, 10, 10),
                                   Box::from_center(5.3, 5.4, 10, 10)};
    const CurveMetric p = precision(pred, gt);
    ok = ok && p.value == 2.0 / 3.0 && p.curve[40] == 2.0 / 3.0 && p.curve[39] == 1.0 / 3.0;
    if (!(p.value == 2.0 / 3.0)) why << " inclusive 20px precision off;";
  }

  // Normalized center error: offsets (2,1) of a 20x10 box -> error
  // hypot(0.1, 0.1), first satisfied at threshold index 29.
  {
    const std::vector<Box> gt(2, Box{0, 0, 20, 10});
    const std::vector<Box> pred = {{2, 1, 20, 10}, {0, 0, 20, 10}};
    const CurveMetric np = normalized_precision(pred, gt);
    ok = ok && np.curve[28] == 0.5 && np.curve[29] == 1.0 &&
         std::abs(np.value - 86.5 / 101.0) <= 1e-14;
    if (!(np.curve[28] == 0.5 && np.curve[29] == 1.0)) why << " normalized curve off;";
  }

  return {ok, ok ? std::string("perfect = 20/21 and 1.0; strict/inclusive curves exact")
                 : "mismatch:" + why.str()};
}

// ---------------------------------------------------------------------------
// 8. Full fusion x head x mask grid completes with a well-formed table
// ---------------------------------------------------------------------------

Outcome ablation_grid_completes() {
  const auto t0 = Clock::now();
  SyntheticSpec dspec;
  dspec.num_sequences = 6;
  dspec.frames_per_sequence = 20;
  dspec.image_size = 64;
  dspec.seed = 8;
  const std::vector<Sequence> data = generate_synthetic_dataset(dspec);

  AblationSetup setup;
  setup.model.input_size = 64;
  setup.train.epochs = 1;
  setup.train.iterations_per_epoch = 30;
  setup.train.batch_size = 4;
  setup.train.base_learning_rate = 2e-3;
  setup.train.seed = 5;
  setup.tracker = noisy_tracker(99);

  const std::vector<AblationRow> rows = ablation_grid(data, data, setup, nullptr);

  std::set<std::tuple<int, int, int>> combos;
  bool finite = true;
  for (const AblationRow& r : rows) {
    combos.insert({(int)r.fusion, (int)r.head, r.with_mask ? 1 : 0});
    finite = finite && std::isfinite(r.auc) && r.auc >= 0 && r.auc <= 1 &&
             std::isfinite(r.precision20) && std::isfinite(r.normalized_precision) &&
             std::isfinite(r.delta_ms) && r.delta_ms >= 0 && r.train_seconds > 0;
  }

  const std::string csv_path = "/tmp/boxref_acceptance_ablation.csv";
  write_ablation_csv(csv_path, rows);
  std::ifstream csv(csv_path);
  std::string line;
  int lines = 0;
  bool header_ok = false;
  while (std::getline(csv, line)) {
    if (lines == 0)
      header_ok = line ==
                  "fusion,head,with_mask,auc,precision20,normalized_precision,delta_ms,"
                  "train_seconds";
    ++lines;
  }
  std::ostringstream table;
  write_ablation_text(table, rows);
  // header + 18 data rows, then a blank line and a free-form context footer
  int table_lines = 0;
  std::istringstream ts(table.str());
  while (std::getline(ts, line) && !line.empty()) ++table_lines;

  const double secs = secs_since(t0);
  const bool ok = rows.size() == 18 && combos.size() == 18 && finite && header_ok &&
                  lines == 19 && table_lines == 19;
  return {ok, fmt("%zu/18 rows, %zu unique combos, finite metrics: %s, csv+table well-formed: "
                  "%s, in %.0fs",
                  rows.size(), combos.size(), finite ? "yes" : "NO",
                  (header_ok && lines == 19 && table_lines == 19) ? "yes" : "NO", secs)};
}

// ---------------------------------------------------------------------------
// 9. Per-frame total time decomposes into base + refinement
// ---------------------------------------------------------------------------

Outcome latency_decomposition() {
  SyntheticSpec dspec;
  dspec.num_sequences = 3;
  dspec.frames_per_sequence = 20;
  dspec.image_size = 128;
  dspec.seed = 12;
  const std::vector<Sequence> data = generate_synthetic_dataset(dspec);
  Model<float> model(short_budget_model(), 4);

  EvalSetup es;
  es.tracker = noisy_tracker(21);
  const std::vector<RunResult> results = evaluate_dataset(data, &model, RefineConfig{}, es);
  std::vector<std::vector<Box>> gts;
  for (const Sequence& s : data) gts.push_back(s.gt);
  const MetricReport rep = compute_metrics(results, gts, true, "latency");

  const double sum = rep.mean_base_ms + rep.mean_refine_ms;
  const bool ok = rep.mean_total_ms > 0 && rep.mean_refine_ms > 0 &&
                  std::abs(rep.mean_total_ms - sum) <= 0.05 * rep.mean_total_ms;
  return {ok, fmt("mean base %.2fms + refine delta %.2fms = %.2fms vs total %.2fms "
                  "(within 5%%)",
                  rep.mean_base_ms, rep.mean_refine_ms, sum, rep.mean_total_ms)};
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    std::function<Outcome()> run;
  };
  Artifacts art;
  const std::vector<Entry> entries = {
      {"correlation ops match a brute-force reference", correlation_vs_reference},
      {"analytic gradients match finite differences", gradients_vs_finite_differences},
      {"crop geometry round-trips, determinism, jitter moments", crop_geometry_properties},
      {"short-budget training lifts refined AUC by >= 0.10", [&] { return training_lifts_auc(art); }},
      {"ground-truth-centered runs score at least standard runs",
       [&] { return centered_runs_vs_standard(art); }},
      {"mask head leaves boxes bit-identical, off-mode no slower", mask_head_invariants},
      {"metric fixtures match hand counts", metric_hand_fixtures},
      {"18-cell fusion/head/mask grid emits a well-formed table", ablation_grid_completes},
      {"per-frame total time = base + refinement within 5%", latency_decomposition},
  };

  int failures = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = entries[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%zu/9] %s  %s — %s  [%.1fs]\n", i + 1, o.ok ? "PASS" : "FAIL",
                entries[i].name, o.detail.c_str(), secs_since(t0));
    std::fflush(stdout);
    if (!o.ok) ++failures;
  }
  std::printf("acceptance: %d/9 passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
