// Small plotting helpers rendered with OpenCV drawing primitives.
#pragma once

#include <string>
#include <vector>

#include "boxref/geometry.hpp"
#include "boxref/tensor.hpp"

namespace boxref {

struct CurveSeries {
  std::string label;
  std::vector<double> y;  // sampled at uniform x positions
};

// Line plot of one or more series sharing an x grid; y axis is [0, 1].
void plot_curves(const std::string& path, const std::string& title,
                 const std::string& x_label, const std::vector<double>& x,
                 const std::vector<CurveSeries>& series);

// Writes `frame` with boxes drawn on top (coarse in red, refined in green,
// ground truth in white). Boxes with nonpositive size are skipped.
void draw_boxes_png(const std::string& path, const Tensor<float>& frame,
                    const std::vector<std::pair<Box, int>>& boxes);

// Color id for draw_boxes_png.
inline constexpr int kBoxWhite = 0;
inline constexpr int kBoxRed = 1;
inline constexpr int kBoxGreen = 2;
inline constexpr int kBoxBlue = 3;

// Renders a single-channel map (any range; normalized internally) as a
// blue-to-red heatmap PNG, optionally scaled up by an integer factor.
void save_heatmap_png(const std::string& path, const Tensor<float>& map2d, int upscale = 1);

// Same normalization/colormap, but returned as a (3,H,W) float image so the
// heatmap can be composed into a tile grid.
Tensor<float> colorize_heatmap(const Tensor<float>& map2d, int upscale = 1);

// Lays out (3,H,W) tiles left to right, `cols` per row, each with its label
// drawn underneath. Tiles may have different sizes; each cell fits the
// largest.
void save_image_grid_png(const std::string& path, const std::vector<Tensor<float>>& tiles,
                         const std::vector<std::string>& labels, int cols);

}  // namespace boxref
