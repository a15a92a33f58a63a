#pragma once

#include "boxref/tensor.hpp"

namespace boxref {

/// Feature fusion between a template feature map K (C x H0 x W0) and a search
/// feature map S (C x H x W). All three operators use zero padding when the
/// kernel extends past S so the output keeps S's spatial size; padding splits
/// floor-centered ((k-1)/2 before, the rest after).
///
/// Pixel-wise correlation treats every spatial position of K as a 1x1 kernel;
/// output channel j = j_y * W0 + j_x (row-major over K's grid).

namespace detail {

template <typename T>
void check_fusion_inputs(const Tensor<T>& k, const Tensor<T>& s, bool spatial_bound) {
  if (k.ndim() != 3 || s.ndim() != 3)
    throw std::invalid_argument("correlation: feature maps must be CxHxW");
  if (k.dim(0) != s.dim(0))
    throw std::invalid_argument("correlation: channel mismatch " + shape_str(k.shape()) + " vs " +
                                shape_str(s.shape()));
  if (spatial_bound && (k.dim(1) > s.dim(1) || k.dim(2) > s.dim(2)))
    throw std::invalid_argument("correlation: kernel larger than search feature");
}

}  // namespace detail

/// out[j,y,x] = sum_c K[c, j/W0, j%W0] * S[c,y,x];  shape (H0*W0) x H x W.
template <typename T>
Tensor<T> pixelwise_correlation(const Tensor<T>& k, const Tensor<T>& s) {
  detail::check_fusion_inputs(k, s, false);
  const int c = k.dim(0), kh = k.dim(1), kw = k.dim(2);
  const int h = s.dim(1), w = s.dim(2);
  Tensor<T> out({kh * kw, h, w});
  // (H0W0 x C) . (C x HW): K stored CxH0W0 maps to the transposed left factor.
  auto km = map_matrix(k, c, kh * kw);
  auto sm = map_matrix(s, c, h * w);
  auto om = map_matrix(out, kh * kw, h * w);
  om.noalias() = km.transpose() * sm;
  return out;
}

template <typename T>
void pixelwise_correlation_backward(const Tensor<T>& k, const Tensor<T>& s,
                                    const Tensor<T>& d_out, Tensor<T>& d_k, Tensor<T>& d_s) {
  const int c = k.dim(0), kh = k.dim(1), kw = k.dim(2);
  const int h = s.dim(1), w = s.dim(2);
  d_k = Tensor<T>(k.shape());
  d_s = Tensor<T>(s.shape());
  auto km = map_matrix(k, c, kh * kw);
  auto sm = map_matrix(s, c, h * w);
  auto dom = map_matrix(d_out, kh * kw, h * w);
  map_matrix(d_k, c, kh * kw).noalias() = sm * dom.transpose();
  map_matrix(d_s, c, h * w).noalias() = km * dom;
}

/// Per-channel "same" cross-correlation of S with kernel K[c].
template <typename T>
Tensor<T> depthwise_correlation(const Tensor<T>& k, const Tensor<T>& s) {
  detail::check_fusion_inputs(k, s, true);
  const int c = k.dim(0), kh = k.dim(1), kw = k.dim(2);
  const int h = s.dim(1), w = s.dim(2);
  const int pt = (kh - 1) / 2, pl = (kw - 1) / 2;
  Tensor<T> out({c, h, w});
  for (int cc = 0; cc < c; ++cc) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        T acc = 0;
        for (int ky = 0; ky < kh; ++ky) {
          const int sy = y + ky - pt;
          if (sy < 0 || sy >= h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int sx = x + kx - pl;
            if (sx < 0 || sx >= w) continue;
            acc += k(cc, ky, kx) * s(cc, sy, sx);
          }
        }
        out(cc, y, x) = acc;
      }
    }
  }
  return out;
}

template <typename T>
void depthwise_correlation_backward(const Tensor<T>& k, const Tensor<T>& s,
                                    const Tensor<T>& d_out, Tensor<T>& d_k, Tensor<T>& d_s) {
  const int c = k.dim(0), kh = k.dim(1), kw = k.dim(2);
  const int h = s.dim(1), w = s.dim(2);
  const int pt = (kh - 1) / 2, pl = (kw - 1) / 2;
  d_k = Tensor<T>(k.shape());
  d_s = Tensor<T>(s.shape());
  for (int cc = 0; cc < c; ++cc) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const T g = d_out(cc, y, x);
        if (g == T(0)) continue;
        for (int ky = 0; ky < kh; ++ky) {
          const int sy = y + ky - pt;
          if (sy < 0 || sy >= h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int sx = x + kx - pl;
            if (sx < 0 || sx >= w) continue;
            d_k(cc, ky, kx) += g * s(cc, sy, sx);
            d_s(cc, sy, sx) += g * k(cc, ky, kx);
          }
        }
      }
    }
  }
}

/// Full-channel cross-correlation: single response map, the channel sum of the
/// depth-wise outputs.
template <typename T>
Tensor<T> naive_correlation(const Tensor<T>& k, const Tensor<T>& s) {
  detail::check_fusion_inputs(k, s, true);
  const int c = k.dim(0), kh = k.dim(1), kw = k.dim(2);
  const int h = s.dim(1), w = s.dim(2);
  const int pt = (kh - 1) / 2, pl = (kw - 1) / 2;
  Tensor<T> out({1, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      T acc = 0;
      for (int ky = 0; ky < kh; ++ky) {
        const int sy = y + ky - pt;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int sx = x + kx - pl;
          if (sx < 0 || sx >= w) continue;
          for (int cc = 0; cc < c; ++cc) acc += k(cc, ky, kx) * s(cc, sy, sx);
        }
      }
      out(0, y, x) = acc;
    }
  }
  return out;
}

template <typename T>
void naive_correlation_backward(const Tensor<T>& k, const Tensor<T>& s, const Tensor<T>& d_out,
                                Tensor<T>& d_k, Tensor<T>& d_s) {
  const int c = k.dim(0), kh = k.dim(1), kw = k.dim(2);
  const int h = s.dim(1), w = s.dim(2);
  const int pt = (kh - 1) / 2, pl = (kw - 1) / 2;
  d_k = Tensor<T>(k.shape());
  d_s = Tensor<T>(s.shape());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const T g = d_out(0, y, x);
      if (g == T(0)) continue;
      for (int ky = 0; ky < kh; ++ky) {
        const int sy = y + ky - pt;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int sx = x + kx - pl;
          if (sx < 0 || sx >= w) continue;
          for (int cc = 0; cc < c; ++cc) {
            d_k(cc, ky, kx) += g * s(cc, sy, sx);
            d_s(cc, sy, sx) += g * k(cc, ky, kx);
          }
        }
      }
    }
  }
}

enum class FusionKind { kNaive, kDepthwise, kPixelwise };

inline const char* fusion_kind_name(FusionKind kind) {
  switch (kind) {
    case FusionKind::kNaive: return "naive";
    case FusionKind::kDepthwise: return "depthwise";
    case FusionKind::kPixelwise: return "pixelwise";
  }
  return "?";
}

FusionKind fusion_kind_from_name(const std::string& name);

/// Output channel count of a fusion kind for the given template feature shape.
inline int fusion_output_channels(FusionKind kind, int channels, int kh, int kw) {
  switch (kind) {
    case FusionKind::kNaive: return 1;
    case FusionKind::kDepthwise: return channels;
    case FusionKind::kPixelwise: return kh * kw;
  }
  return 0;
}

template <typename T>
Tensor<T> correlate(FusionKind kind, const Tensor<T>& k, const Tensor<T>& s) {
  switch (kind) {
    case FusionKind::kNaive: return naive_correlation(k, s);
    case FusionKind::kDepthwise: return depthwise_correlation(k, s);
    case FusionKind::kPixelwise: return pixelwise_correlation(k, s);
  }
  throw std::invalid_argument("correlate: invalid fusion kind");
}

template <typename T>
void correlate_backward(FusionKind kind, const Tensor<T>& k, const Tensor<T>& s,
                        const Tensor<T>& d_out, Tensor<T>& d_k, Tensor<T>& d_s) {
  switch (kind) {
    case FusionKind::kNaive: naive_correlation_backward(k, s, d_out, d_k, d_s); return;
    case FusionKind::kDepthwise: depthwise_correlation_backward(k, s, d_out, d_k, d_s); return;
    case FusionKind::kPixelwise: pixelwise_correlation_backward(k, s, d_out, d_k, d_s); return;
  }
  throw std::invalid_argument("correlate_backward: invalid fusion kind");
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> correlate_backward(FusionKind kind, const Tensor<T>& k,
                                                   const Tensor<T>& s, const Tensor<T>& d_out) {
  Tensor<T> d_k, d_s;
  correlate_backward(kind, k, s, d_out, d_k, d_s);
  return {std::move(d_k), std::move(d_s)};
}

}  // namespace boxref
