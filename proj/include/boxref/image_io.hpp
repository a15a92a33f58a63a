#pragma once

#include <string>

#include "boxref/geometry.hpp"

namespace boxref {

/// PNG I/O. Images are (3,H,W) float tensors in [0,1], RGB channel order.
void save_image_png(const std::string& path, const Image& img);
Image load_image_png(const std::string& path);

/// Masks are (H,W) float tensors; saved thresholded at 0.5 into {0,255}.
void save_mask_png(const std::string& path, const Mask& mask);
Mask load_mask_png(const std::string& path);

}  // namespace boxref
