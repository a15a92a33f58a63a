#pragma once

#include <random>

#include "boxref/tensor.hpp"

namespace boxref {

/// RGB image, CxHxW, values in [0,1].
using Image = Tensor<float>;
/// Single-channel HxW mask, values {0,1}.
using Mask = Tensor<float>;

inline int image_height(const Image& img) { return img.dim(1); }
inline int image_width(const Image& img) { return img.dim(2); }

/// Axis-aligned box in image pixel coordinates, (x,y) = top-left corner.
struct Box {
  double x = 0, y = 0, w = 0, h = 0;

  static Box from_ltrb(double l, double t, double r, double b) { return {l, t, r - l, b - t}; }
  static Box from_center(double cx, double cy, double w, double h) {
    return {cx - w / 2, cy - h / 2, w, h};
  }

  double left() const { return x; }
  double top() const { return y; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double cx() const { return x + w / 2; }
  double cy() const { return y + h / 2; }
  double area() const { return w * h; }
  bool valid() const { return w > 0 && h > 0; }
};

double iou(const Box& a, const Box& b);
double center_distance(const Box& a, const Box& b);

/// Square crop request: a (possibly out-of-frame) region of the source image,
/// resampled to out_size x out_size. Size is stored (h, w), matching the
/// sampler's size ordering.
struct CropSpec {
  double cx = 0, cy = 0;
  double h = 0, w = 0;
  int out_size = 256;
};

/// Per-axis affine map between image and crop coordinates:
///   crop = (image - offset) * scale
struct CropTransform {
  double dx = 0, dy = 0;
  double sx = 1, sy = 1;

  void image_to_crop(double px, double py, double& qx, double& qy) const {
    qx = (px - dx) * sx;
    qy = (py - dy) * sy;
  }
  void crop_to_image(double qx, double qy, double& px, double& py) const {
    px = qx / sx + dx;
    py = qy / sy + dy;
  }
};

Box box_image_to_crop(const Box& box, const CropTransform& t);
Box box_crop_to_image(const Box& box, const CropTransform& t);

/// Concentric search region: same center, per-dimension size scaled by factor.
CropSpec make_search_region(const Box& box, double factor = 2.0, int out_size = 256);

struct CropResult {
  Image crop;
  CropTransform transform;
};

/// Bilinear crop+resize. Out-of-frame samples use pad (per-channel frame mean
/// when pad is empty).
CropResult crop_and_resize(const Image& frame, const CropSpec& spec,
                           const std::vector<float>& pad = {});

/// Nearest-neighbour variant for {0,1} masks; out-of-frame samples are 0.
Mask crop_mask_nearest(const Mask& mask, const CropSpec& spec);

/// Crop-sampler randomness factors: scale jitter f_s and center jitter f_c.
struct JitterParams {
  double f_s = 0.25;
  double f_c = 0.25;
};

/// One draw of the sampler's randomness: n ~ N(0,I_2), u ~ U([0,1]^2).
struct JitterDraws {
  double n_h = 0, n_w = 0;
  double u_x = 0.5, u_y = 0.5;
};

/// Jittered crop region around a ground-truth box:
///   [h,w]   = [2*h_gt, 2*w_gt] .* exp(n * f_s)
///   o_max   = sqrt(h*w) * f_c
///   [cx,cy] = gt center + (u - 0.5) * o_max
CropSpec jitter_crop_spec(const Box& gt, const JitterParams& params, const JitterDraws& draws,
                          int out_size = 256);
CropSpec jitter_crop_spec(const Box& gt, const JitterParams& params, std::mt19937& rng,
                          int out_size = 256);

}  // namespace boxref
