#include "boxref/plot.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace boxref {

namespace {

const cv::Scalar kPalette[] = {
    cv::Scalar(80, 80, 220),   // red-ish (BGR)
    cv::Scalar(90, 170, 60),   // green
    cv::Scalar(200, 120, 40),  // blue
    cv::Scalar(40, 160, 220),  // orange
    cv::Scalar(160, 60, 160),  // purple
    cv::Scalar(60, 60, 60),    // gray
};

cv::Scalar box_color(int id) {
  switch (id) {
    case kBoxWhite: return cv::Scalar(255, 255, 255);
    case kBoxRed: return cv::Scalar(40, 40, 230);
    case kBoxGreen: return cv::Scalar(60, 200, 60);
    case kBoxBlue: return cv::Scalar(230, 120, 40);
    default: return cv::Scalar(0, 0, 0);
  }
}

}  // namespace

void plot_curves(const std::string& path, const std::string& title,
                 const std::string& x_label, const std::vector<double>& x,
                 const std::vector<CurveSeries>& series) {
  if (x.size() < 2) throw std::invalid_argument("plot_curves: need at least 2 x samples");
  const int w = 720, h = 540;
  const int ml = 70, mr = 30, mt = 50, mb = 60;  // margins
  cv::Mat img(h, w, CV_8UC3, cv::Scalar(255, 255, 255));

  const double x_lo = x.front(), x_hi = x.back();
  auto px = [&](double xv) {
    return ml + static_cast<int>(std::lround((xv - x_lo) / (x_hi - x_lo) * (w - ml - mr)));
  };
  auto py = [&](double yv) {
    yv = std::clamp(yv, 0.0, 1.0);
    return h - mb - static_cast<int>(std::lround(yv * (h - mt - mb)));
  };

  // Grid and axes.
  for (int i = 0; i <= 10; ++i) {
    const double yv = i / 10.0;
    cv::line(img, {ml, py(yv)}, {w - mr, py(yv)}, cv::Scalar(230, 230, 230), 1);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.1f", yv);
    cv::putText(img, buf, {ml - 42, py(yv) + 5}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
                cv::Scalar(60, 60, 60), 1, cv::LINE_AA);
  }
  for (int i = 0; i <= 5; ++i) {
    const double xv = x_lo + (x_hi - x_lo) * i / 5.0;
    cv::line(img, {px(xv), mt}, {px(xv), h - mb}, cv::Scalar(230, 230, 230), 1);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2g", xv);
    cv::putText(img, buf, {px(xv) - 14, h - mb + 22}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
                cv::Scalar(60, 60, 60), 1, cv::LINE_AA);
  }
  cv::rectangle(img, {ml, mt}, {w - mr, h - mb}, cv::Scalar(70, 70, 70), 1);
  cv::putText(img, title, {ml, mt - 18}, cv::FONT_HERSHEY_SIMPLEX, 0.7,
              cv::Scalar(20, 20, 20), 1, cv::LINE_AA);
  cv::putText(img, x_label, {w / 2 - 60, h - 14}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
              cv::Scalar(60, 60, 60), 1, cv::LINE_AA);

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    if (ser.y.size() != x.size())
      throw std::invalid_argument("plot_curves: series '" + ser.label + "' length mismatch");
    const cv::Scalar color = kPalette[s % std::size(kPalette)];
    for (std::size_t i = 1; i < x.size(); ++i)
      cv::line(img, {px(x[i - 1]), py(ser.y[i - 1])}, {px(x[i]), py(ser.y[i])}, color, 2,
               cv::LINE_AA);
    const int ly = mt + 22 + static_cast<int>(s) * 22;
    cv::line(img, {w - mr - 150, ly - 5}, {w - mr - 120, ly - 5}, color, 3);
    cv::putText(img, ser.label, {w - mr - 112, ly}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
                cv::Scalar(20, 20, 20), 1, cv::LINE_AA);
  }
  if (!cv::imwrite(path, img)) throw std::runtime_error("cannot write plot " + path);
}

void draw_boxes_png(const std::string& path, const Tensor<float>& frame,
                    const std::vector<std::pair<Box, int>>& boxes) {
  const auto& s = frame.shape();
  if (s.size() != 3 || s[0] != 3) throw std::invalid_argument("draw_boxes_png: want (3,H,W)");
  const int hh = s[1], ww = s[2];
  cv::Mat img(hh, ww, CV_8UC3);
  for (int y = 0; y < hh; ++y)
    for (int x = 0; x < ww; ++x) {
      auto to8 = [&](int c) {
        return static_cast<unsigned char>(std::clamp(frame(c, y, x), 0.0f, 1.0f) * 255.0f + 0.5f);
      };
      img.at<cv::Vec3b>(y, x) = cv::Vec3b(to8(2), to8(1), to8(0));
    }
  for (const auto& [b, color_id] : boxes) {
    if (b.w <= 0 || b.h <= 0) continue;
    cv::rectangle(img,
                  cv::Rect(static_cast<int>(std::lround(b.x)), static_cast<int>(std::lround(b.y)),
                           static_cast<int>(std::lround(b.w)), static_cast<int>(std::lround(b.h))),
                  box_color(color_id), 2);
  }
  if (!cv::imwrite(path, img)) throw std::runtime_error("cannot write " + path);
}

namespace {

cv::Mat heatmap_to_mat(const Tensor<float>& map2d, int upscale) {
  const auto& s = map2d.shape();
  if (s.size() != 2) throw std::invalid_argument("heatmap: want 2-d map");
  float lo = map2d.data()[0], hi = lo;
  for (std::size_t i = 0; i < map2d.numel(); ++i) {
    lo = std::min(lo, map2d.data()[i]);
    hi = std::max(hi, map2d.data()[i]);
  }
  const float range = (hi - lo) > 1e-12f ? (hi - lo) : 1.0f;
  cv::Mat gray(s[0], s[1], CV_8UC1);
  for (int r = 0; r < s[0]; ++r)
    for (int c = 0; c < s[1]; ++c)
      gray.at<unsigned char>(r, c) =
          static_cast<unsigned char>((map2d(r, c) - lo) / range * 255.0f + 0.5f);
  cv::Mat color;
  cv::applyColorMap(gray, color, cv::COLORMAP_JET);
  if (upscale > 1)
    cv::resize(color, color, cv::Size(s[1] * upscale, s[0] * upscale), 0, 0, cv::INTER_NEAREST);
  return color;
}

cv::Mat tile_to_mat(const Tensor<float>& tile) {
  const auto& s = tile.shape();
  if (s.size() != 3 || s[0] != 3) throw std::invalid_argument("tile: want (3,H,W)");
  cv::Mat img(s[1], s[2], CV_8UC3);
  for (int y = 0; y < s[1]; ++y)
    for (int x = 0; x < s[2]; ++x) {
      auto to8 = [&](int c) {
        return static_cast<unsigned char>(std::clamp(tile(c, y, x), 0.0f, 1.0f) * 255.0f + 0.5f);
      };
      img.at<cv::Vec3b>(y, x) = cv::Vec3b(to8(2), to8(1), to8(0));
    }
  return img;
}

}  // namespace

void save_heatmap_png(const std::string& path, const Tensor<float>& map2d, int upscale) {
  if (!cv::imwrite(path, heatmap_to_mat(map2d, upscale)))
    throw std::runtime_error("cannot write " + path);
}

Tensor<float> colorize_heatmap(const Tensor<float>& map2d, int upscale) {
  cv::Mat color = heatmap_to_mat(map2d, upscale);
  Tensor<float> out({3, color.rows, color.cols});
  for (int y = 0; y < color.rows; ++y)
    for (int x = 0; x < color.cols; ++x) {
      const cv::Vec3b px = color.at<cv::Vec3b>(y, x);
      out(0, y, x) = px[2] / 255.0f;
      out(1, y, x) = px[1] / 255.0f;
      out(2, y, x) = px[0] / 255.0f;
    }
  return out;
}

void save_image_grid_png(const std::string& path, const std::vector<Tensor<float>>& tiles,
                         const std::vector<std::string>& labels, int cols) {
  if (tiles.empty()) throw std::invalid_argument("save_image_grid_png: no tiles");
  if (labels.size() != tiles.size())
    throw std::invalid_argument("save_image_grid_png: labels/tiles size mismatch");
  cols = std::clamp(cols, 1, static_cast<int>(tiles.size()));
  const int rows = (static_cast<int>(tiles.size()) + cols - 1) / cols;
  int cell_w = 0, cell_h = 0;
  std::vector<cv::Mat> mats;
  for (const auto& t : tiles) {
    mats.push_back(tile_to_mat(t));
    cell_w = std::max(cell_w, mats.back().cols);
    cell_h = std::max(cell_h, mats.back().rows);
  }
  const int pad = 12, label_h = 26;
  cv::Mat canvas(rows * (cell_h + label_h + pad) + pad, cols * (cell_w + pad) + pad, CV_8UC3,
                 cv::Scalar(245, 245, 245));
  for (std::size_t i = 0; i < mats.size(); ++i) {
    const int r = static_cast<int>(i) / cols, c = static_cast<int>(i) % cols;
    const int x0 = pad + c * (cell_w + pad), y0 = pad + r * (cell_h + label_h + pad);
    mats[i].copyTo(canvas(cv::Rect(x0, y0, mats[i].cols, mats[i].rows)));
    cv::putText(canvas, labels[i], {x0, y0 + cell_h + 19}, cv::FONT_HERSHEY_SIMPLEX, 0.55,
                cv::Scalar(20, 20, 20), 1, cv::LINE_AA);
  }
  if (!cv::imwrite(path, canvas)) throw std::runtime_error("cannot write " + path);
}

}  // namespace boxref
