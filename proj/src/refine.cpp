#include "boxref/refine.hpp"

#include <cmath>
#include <stdexcept>

namespace boxref {

Box mask_to_box(const Mask& mask, double threshold) {
  if (mask.ndim() != 2) throw std::invalid_argument("mask_to_box: need (H,W)");
  const int h = mask.dim(0), w = mask.dim(1);
  int minx = w, maxx = -1, miny = h, maxy = -1;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask(y, x) >= threshold) {
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
      }
  if (maxx < 0) throw std::runtime_error("empty mask");
  return Box{static_cast<double>(minx), static_cast<double>(miny),
             static_cast<double>(maxx - minx + 1), static_cast<double>(maxy - miny + 1)};
}

void Refiner::initialize(const Image& frame, const Box& gt) {
  if (!gt.valid()) throw std::invalid_argument("refiner: degenerate ground-truth box");
  const CropSpec spec = make_search_region(gt, cfg_.crop_factor, model_->config().input_size);
  const CropResult res = crop_and_resize(frame, spec);
  auto [feat, skips] = model_->extract_features(res.crop);
  (void)skips;
  ref_feat_ = std::move(feat);
  ++ref_extractions_;
  initialized_ = true;
}

Refiner::Refined Refiner::refine(const Image& frame, const Box& coarse) {
  if (!(coarse.w > 0 && coarse.h > 0))
    throw std::invalid_argument("refiner: degenerate coarse box");
  return refine_with_spec(frame, make_search_region(coarse, cfg_.crop_factor,
                                                    model_->config().input_size));
}

Refiner::Refined Refiner::refine_with_spec(const Image& frame, const CropSpec& spec) {
  if (!initialized_) throw std::logic_error("refiner: refine called before initialize");
  const CropResult res = crop_and_resize(frame, spec);
  HeadOutput<float> out = model_->forward_with_ref(ref_feat_, res.crop, cfg_.mask_enabled);

  const double img_w = image_width(frame), img_h = image_height(frame);
  Box b = box_crop_to_image(out.box_crop.valid() ? out.box_crop
                                                 : Box{spec.cx - spec.w / 4, spec.cy - spec.h / 4,
                                                       spec.w / 2, spec.h / 2},
                            res.transform);
  // clamp to image bounds with a minimum side of 1 px
  double l = std::clamp(b.left(), 0.0, img_w - 1.0);
  double t = std::clamp(b.top(), 0.0, img_h - 1.0);
  double r = std::clamp(b.right(), l + 1.0, img_w);
  double bt = std::clamp(b.bottom(), t + 1.0, img_h);
  if (r <= l) r = l + 1.0;
  if (bt <= t) bt = t + 1.0;

  Refined refined;
  refined.box = Box::from_ltrb(l, t, r, bt);
  if (cfg_.mask_enabled && out.mask.has_value()) {
    // resample the crop-space mask back into image coordinates
    const Mask& cm = *out.mask;
    Mask im({static_cast<int>(img_h), static_cast<int>(img_w)});
    const int ch = cm.dim(0), cw = cm.dim(1);
    for (int y = 0; y < im.dim(0); ++y)
      for (int x = 0; x < im.dim(1); ++x) {
        double qx, qy;
        res.transform.image_to_crop(x + 0.5, y + 0.5, qx, qy);
        const double px = qx - 0.5, py = qy - 0.5;
        if (px < -0.5 || py < -0.5 || px > cw - 0.5 || py > ch - 0.5) continue;
        const int x0 = static_cast<int>(std::floor(px)), y0 = static_cast<int>(std::floor(py));
        const double fx = px - x0, fy = py - y0;
        auto at = [&](int yy, int xx) -> double {
          yy = std::clamp(yy, 0, ch - 1);
          xx = std::clamp(xx, 0, cw - 1);
          return cm(yy, xx);
        };
        im(y, x) = static_cast<float>((1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                                      fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1)));
      }
    refined.mask = std::move(im);
  }
  return refined;
}

// ---------------------------------------------------------------------------
// Simulated tracker
// ---------------------------------------------------------------------------

SimulatedTracker::SimulatedTracker(const SimulatedTrackerSpec& spec, const std::vector<Box>& gt)
    : spec_(spec), gt_(&gt) {
  spec_.validate();
  if (gt.empty()) throw std::invalid_argument("simulated tracker: empty ground truth");
}

void SimulatedTracker::init(const Image& frame, const Box& gt) {
  (void)frame;
  (void)gt;
  rng_.seed(static_cast<std::uint32_t>(spec_.seed));
  next_idx_ = 1;
  drift_x_ = drift_y_ = 0;
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  drift_dir_ = ang(rng_);
  last_refined_.reset();
}

Box SimulatedTracker::track(const Image& frame) {
  (void)frame;
  if (next_idx_ <= 0) throw std::logic_error("simulated tracker: track before init");
  if (next_idx_ >= static_cast<int>(gt_->size()))
    throw std::logic_error("simulated tracker: ran past the ground truth");
  const Box& g = (*gt_)[static_cast<std::size_t>(next_idx_)];
  const Box& g_prev = (*gt_)[static_cast<std::size_t>(next_idx_ - 1)];
  const double scale = std::sqrt(g.w * g.h);

  auto gauss = [&](double sigma) {
    if (sigma <= 0) return 0.0;
    std::normal_distribution<double> d(0.0, sigma);
    return d(rng_);
  };

  double base_cx = g.cx(), base_cy = g.cy(), base_w = g.w, base_h = g.h;
  if (last_refined_) {
    // feedback: carry the previous refined box's error forward through the
    // ground-truth motion, instead of re-anchoring at ground truth
    base_cx = g.cx() + (last_refined_->cx() - g_prev.cx());
    base_cy = g.cy() + (last_refined_->cy() - g_prev.cy());
    base_w = g.w * (last_refined_->w / g_prev.w);
    base_h = g.h * (last_refined_->h / g_prev.h);
    last_refined_.reset();
  }

  if (spec_.drift_rate > 0) {
    drift_x_ += spec_.drift_rate * scale * std::cos(drift_dir_);
    drift_y_ += spec_.drift_rate * scale * std::sin(drift_dir_);
  }
  double jump_x = 0, jump_y = 0;
  if (spec_.failure_prob > 0) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (u01(rng_) < spec_.failure_prob) {
      std::uniform_real_distribution<double> mag(0.75, 1.5);
      std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
      const double m = mag(rng_) * scale, a = ang(rng_);
      jump_x = m * std::cos(a);
      jump_y = m * std::sin(a);
    }
  }

  const double cx = base_cx + drift_x_ + jump_x + gauss(spec_.sigma_translation * scale);
  const double cy = base_cy + drift_y_ + jump_y + gauss(spec_.sigma_translation * scale);
  const double w = std::max(1.0, base_w * std::exp(gauss(spec_.sigma_log_scale)));
  const double h = std::max(1.0, base_h * std::exp(gauss(spec_.sigma_log_scale)));
  ++next_idx_;
  return Box::from_center(cx, cy, w, h);
}

void SimulatedTracker::observe_refined(const Box& refined) { last_refined_ = refined; }

std::unique_ptr<BaseTracker> make_simulated_tracker(const SimulatedTrackerSpec& spec,
                                                    const std::vector<Box>& gt) {
  return std::make_unique<SimulatedTracker>(spec, gt);
}

}  // namespace boxref
