#include "boxref/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <stdexcept>

namespace boxref {

void save_image_png(const std::string& path, const Image& img) {
  if (img.ndim() != 3 || img.dim(0) != 3) throw std::invalid_argument("save_image_png: need (3,H,W)");
  const int h = img.dim(1), w = img.dim(2);
  cv::Mat m(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto q = [&](int c) {
        const float v = std::clamp(img(c, y, x), 0.0f, 1.0f);
        return static_cast<unsigned char>(std::lround(v * 255.0f));
      };
      m.at<cv::Vec3b>(y, x) = cv::Vec3b(q(2), q(1), q(0));  // BGR on disk
    }
  if (!cv::imwrite(path, m)) throw std::runtime_error("failed to write " + path);
}

Image load_image_png(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
  if (m.empty()) throw std::runtime_error("failed to read " + path);
  Image img({3, m.rows, m.cols});
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) {
      const cv::Vec3b px = m.at<cv::Vec3b>(y, x);
      img(0, y, x) = px[2] / 255.0f;
      img(1, y, x) = px[1] / 255.0f;
      img(2, y, x) = px[0] / 255.0f;
    }
  return img;
}

void save_mask_png(const std::string& path, const Mask& mask) {
  if (mask.ndim() != 2) throw std::invalid_argument("save_mask_png: need (H,W)");
  cv::Mat m(mask.dim(0), mask.dim(1), CV_8UC1);
  for (int y = 0; y < mask.dim(0); ++y)
    for (int x = 0; x < mask.dim(1); ++x)
      m.at<unsigned char>(y, x) = mask(y, x) >= 0.5f ? 255 : 0;
  if (!cv::imwrite(path, m)) throw std::runtime_error("failed to write " + path);
}

Mask load_mask_png(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw std::runtime_error("failed to read " + path);
  Mask mask({m.rows, m.cols});
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) mask(y, x) = m.at<unsigned char>(y, x) >= 128 ? 1.0f : 0.0f;
  return mask;
}

}  // namespace boxref
