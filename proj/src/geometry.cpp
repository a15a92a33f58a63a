#include "boxref/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace boxref {

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

double center_distance(const Box& a, const Box& b) {
  return std::hypot(a.cx() - b.cx(), a.cy() - b.cy());
}

Box box_image_to_crop(const Box& box, const CropTransform& t) {
  double l, tp, r, bt;
  t.image_to_crop(box.left(), box.top(), l, tp);
  t.image_to_crop(box.right(), box.bottom(), r, bt);
  return Box::from_ltrb(l, tp, r, bt);
}

Box box_crop_to_image(const Box& box, const CropTransform& t) {
  double l, tp, r, bt;
  t.crop_to_image(box.left(), box.top(), l, tp);
  t.crop_to_image(box.right(), box.bottom(), r, bt);
  return Box::from_ltrb(l, tp, r, bt);
}

CropSpec make_search_region(const Box& box, double factor, int out_size) {
  CropSpec spec;
  spec.cx = box.cx();
  spec.cy = box.cy();
  spec.h = factor * box.h;
  spec.w = factor * box.w;
  spec.out_size = out_size;
  return spec;
}

static CropTransform transform_for(const CropSpec& spec) {
  CropTransform t;
  t.dx = spec.cx - spec.w / 2;
  t.dy = spec.cy - spec.h / 2;
  t.sx = spec.out_size / spec.w;
  t.sy = spec.out_size / spec.h;
  return t;
}

CropResult crop_and_resize(const Image& frame, const CropSpec& spec,
                           const std::vector<float>& pad) {
  if (frame.empty() || frame.ndim() != 3) throw std::invalid_argument("crop_and_resize: empty frame");
  if (!(spec.w > 0 && spec.h > 0 && spec.out_size > 0))
    throw std::invalid_argument("crop_and_resize: degenerate crop spec");

  const int ch = frame.dim(0);
  const int fh = frame.dim(1);
  const int fw = frame.dim(2);
  const int out = spec.out_size;

  std::vector<float> fill(static_cast<std::size_t>(ch), 0.f);
  if (!pad.empty()) {
    if (static_cast<int>(pad.size()) != ch)
      throw std::invalid_argument("crop_and_resize: pad channel mismatch");
    fill = pad;
  } else {
    const std::size_t plane = static_cast<std::size_t>(fh) * fw;
    for (int c = 0; c < ch; ++c) {
      double sum = 0;
      const float* p = frame.data() + static_cast<std::size_t>(c) * plane;
      for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      fill[static_cast<std::size_t>(c)] = static_cast<float>(sum / static_cast<double>(plane));
    }
  }

  CropResult res;
  res.transform = transform_for(spec);
  res.crop = Image({ch, out, out});

  // Pixel (i,j) has its center at (j+0.5, i+0.5) in its own coordinate frame.
  for (int oy = 0; oy < out; ++oy) {
    for (int ox = 0; ox < out; ++ox) {
      double px, py;
      res.transform.crop_to_image(ox + 0.5, oy + 0.5, px, py);
      const double u = px - 0.5;
      const double v = py - 0.5;
      const int x0 = static_cast<int>(std::floor(u));
      const int y0 = static_cast<int>(std::floor(v));
      const double fx = u - x0;
      const double fy = v - y0;
      for (int c = 0; c < ch; ++c) {
        auto sample = [&](int yy, int xx) -> double {
          if (xx < 0 || xx >= fw || yy < 0 || yy >= fh) return fill[static_cast<std::size_t>(c)];
          return frame(c, yy, xx);
        };
        const double val = (1 - fy) * ((1 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
                           fy * ((1 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1));
        res.crop(c, oy, ox) = static_cast<float>(val);
      }
    }
  }
  return res;
}

Mask crop_mask_nearest(const Mask& mask, const CropSpec& spec) {
  if (mask.empty() || mask.ndim() != 2) throw std::invalid_argument("crop_mask_nearest: empty mask");
  if (!(spec.w > 0 && spec.h > 0 && spec.out_size > 0))
    throw std::invalid_argument("crop_mask_nearest: degenerate crop spec");

  const int fh = mask.dim(0);
  const int fw = mask.dim(1);
  const int out = spec.out_size;
  const CropTransform t = transform_for(spec);

  Mask res({out, out});
  for (int oy = 0; oy < out; ++oy) {
    for (int ox = 0; ox < out; ++ox) {
      double px, py;
      t.crop_to_image(ox + 0.5, oy + 0.5, px, py);
      const int xx = static_cast<int>(std::floor(px));
      const int yy = static_cast<int>(std::floor(py));
      res(oy, ox) = (xx < 0 || xx >= fw || yy < 0 || yy >= fh) ? 0.f : mask(yy, xx);
    }
  }
  return res;
}

CropSpec jitter_crop_spec(const Box& gt, const JitterParams& params, const JitterDraws& draws,
                          int out_size) {
  CropSpec spec;
  spec.h = 2.0 * gt.h * std::exp(draws.n_h * params.f_s);
  spec.w = 2.0 * gt.w * std::exp(draws.n_w * params.f_s);
  const double o_max = std::sqrt(spec.h * spec.w) * params.f_c;
  spec.cx = gt.cx() + (draws.u_x - 0.5) * o_max;
  spec.cy = gt.cy() + (draws.u_y - 0.5) * o_max;
  spec.out_size = out_size;
  return spec;
}

CropSpec jitter_crop_spec(const Box& gt, const JitterParams& params, std::mt19937& rng,
                          int out_size) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  JitterDraws d;
  d.n_h = normal(rng);
  d.n_w = normal(rng);
  d.u_x = uniform(rng);
  d.u_y = uniform(rng);
  return jitter_crop_spec(gt, params, d, out_size);
}

}  // namespace boxref
