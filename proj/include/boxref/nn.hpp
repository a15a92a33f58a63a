#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "boxref/tensor.hpp"

namespace boxref {
namespace nn {

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
};

template <typename T>
void he_normal_init(Tensor<T>& w, int fan_in, std::mt19937& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (auto& v : w) v = static_cast<T>(dist(rng));
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2dCache {
  Tensor<T> cols;  // (N, in_ch*k*k, oh*ow); empty for the 1x1 fast path
  Shape in_shape;
};

template <typename T>
struct Conv2d {
  int in_ch = 0, out_ch = 0, k = 3, stride = 1, pad = 1;
  Tensor<T> w, b, gw, gb;  // w: (out_ch, in_ch*k*k)

  Conv2d() = default;
  Conv2d(int in_c, int out_c, int kernel, int stride_, int pad_)
      : in_ch(in_c), out_ch(out_c), k(kernel), stride(stride_), pad(pad_) {
    w = Tensor<T>({out_ch, in_ch * k * k});
    b = Tensor<T>({out_ch});
    gw = Tensor<T>::zeros_like(w);
    gb = Tensor<T>::zeros_like(b);
  }

  void init(std::mt19937& rng) { he_normal_init(w, in_ch * k * k, rng); b.set_zero(); }

  int out_extent(int in) const { return (in + 2 * pad - k) / stride + 1; }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".weight", &w, &gw});
    out.push_back({prefix + ".bias", &b, &gb});
  }

  bool is_pointwise() const { return k == 1 && stride == 1 && pad == 0; }

  Tensor<T> forward(const Tensor<T>& x, Conv2dCache<T>* cache) const {
    const int n = x.dim(0), h = x.dim(2), wd = x.dim(3);
    if (x.dim(1) != in_ch) throw std::invalid_argument("conv2d: channel mismatch");
    const int oh = out_extent(h), ow = out_extent(wd);
    Tensor<T> y({n, out_ch, oh, ow});
    const int ckk = in_ch * k * k;
    auto wm = map_matrix(w, out_ch, ckk);

    if (is_pointwise()) {
      if (cache) cache->in_shape = x.shape();
      for (int i = 0; i < n; ++i) {
        auto xm = map_matrix(x.data() + offset_n(x, i), in_ch, h * wd);
        auto ym = map_matrix(y.data() + offset_n(y, i), out_ch, oh * ow);
        ym.noalias() = wm * xm;
      }
    } else {
      Tensor<T> cols({n, ckk, oh * ow});
      for (int i = 0; i < n; ++i) {
        im2col(x, i, cols.data() + static_cast<std::size_t>(i) * ckk * oh * ow, oh, ow);
        auto cm = map_matrix(cols.data() + static_cast<std::size_t>(i) * ckk * oh * ow, ckk, oh * ow);
        auto ym = map_matrix(y.data() + offset_n(y, i), out_ch, oh * ow);
        ym.noalias() = wm * cm;
      }
      if (cache) {
        cache->cols = std::move(cols);
        cache->in_shape = x.shape();
      }
    }
    for (int i = 0; i < n; ++i) {
      T* yp = y.data() + offset_n(y, i);
      for (int c = 0; c < out_ch; ++c) {
        const T bias = b[static_cast<std::size_t>(c)];
        T* row = yp + static_cast<std::size_t>(c) * oh * ow;
        for (int j = 0; j < oh * ow; ++j) row[j] += bias;
      }
    }
    return y;
  }

  /// Needs the forward cache; accumulates into gw/gb and the returned dx. For
  /// the 1x1 fast path the cache only records the input shape, so callers must
  /// pass the original input x.
  Tensor<T> backward(const Tensor<T>& dy, const Tensor<T>& x, const Conv2dCache<T>& cache) {
    const Shape& xs = cache.in_shape;
    const int n = xs[0], h = xs[2], wd = xs[3];
    const int oh = dy.dim(2), ow = dy.dim(3);
    const int ckk = in_ch * k * k;
    Tensor<T> dx(xs);
    auto wm = map_matrix(w, out_ch, ckk);
    auto gwm = map_matrix(gw, out_ch, ckk);

    Tensor<T> dcols_buf;
    if (!is_pointwise()) dcols_buf = Tensor<T>({ckk, oh * ow});

    for (int i = 0; i < n; ++i) {
      auto dym = map_matrix(dy.data() + offset_n(dy, i), out_ch, oh * ow);
      if (is_pointwise()) {
        auto xm = map_matrix(x.data() + offset_n(x, i), in_ch, h * wd);
        gwm.noalias() += dym * xm.transpose();
        auto dxm = map_matrix(dx.data() + offset_n(dx, i), in_ch, h * wd);
        dxm.noalias() += wm.transpose() * dym;
      } else {
        auto cm = map_matrix(cache.cols.data() + static_cast<std::size_t>(i) * ckk * oh * ow, ckk,
                             oh * ow);
        gwm.noalias() += dym * cm.transpose();
        auto dcm = map_matrix(dcols_buf, ckk, oh * ow);
        dcm.noalias() = wm.transpose() * dym;
        col2im(dcols_buf.data(), dx, i, oh, ow);
      }
      for (int c = 0; c < out_ch; ++c) {
        const T* row = dy.data() + offset_n(dy, i) + static_cast<std::size_t>(c) * oh * ow;
        T acc = 0;
        for (int j = 0; j < oh * ow; ++j) acc += row[j];
        gb[static_cast<std::size_t>(c)] += acc;
      }
    }
    return dx;
  }

 private:
  static std::size_t offset_n(const Tensor<T>& t, int i) {
    return static_cast<std::size_t>(i) * t.dim(1) * t.dim(2) * t.dim(3);
  }

  void im2col(const Tensor<T>& x, int n, T* cols, int oh, int ow) const {
    const int h = x.dim(2), wd = x.dim(3);
    std::size_t r = 0;
    for (int c = 0; c < in_ch; ++c) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx, ++r) {
          T* dst = cols + r * oh * ow;
          for (int oy = 0; oy < oh; ++oy) {
            const int sy = oy * stride + ky - pad;
            if (sy < 0 || sy >= h) {
              for (int ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = 0;
              continue;
            }
            for (int ox = 0; ox < ow; ++ox) {
              const int sx = ox * stride + kx - pad;
              dst[oy * ow + ox] = (sx < 0 || sx >= wd) ? T(0) : x(n, c, sy, sx);
            }
          }
        }
      }
    }
  }

  void col2im(const T* dcols, Tensor<T>& dx, int n, int oh, int ow) const {
    const int h = dx.dim(2), wd = dx.dim(3);
    std::size_t r = 0;
    for (int c = 0; c < in_ch; ++c) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx, ++r) {
          const T* src = dcols + r * oh * ow;
          for (int oy = 0; oy < oh; ++oy) {
            const int sy = oy * stride + ky - pad;
            if (sy < 0 || sy >= h) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int sx = ox * stride + kx - pad;
              if (sx < 0 || sx >= wd) continue;
              dx(n, c, sy, sx) += src[oy * ow + ox];
            }
          }
        }
      }
    }
  }
};

// ---------------------------------------------------------------------------
// BatchNorm2d
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNormCache {
  Tensor<T> xhat;
  Tensor<T> invstd;  // per channel
};

template <typename T>
struct BatchNorm2d {
  int ch = 0;
  T momentum = T(0.1);
  T eps = T(1e-5);
  Tensor<T> gamma, beta, g_gamma, g_beta;
  Tensor<T> running_mean, running_var;

  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels) : ch(channels) {
    gamma = Tensor<T>({ch}, T(1));
    beta = Tensor<T>({ch});
    g_gamma = Tensor<T>({ch});
    g_beta = Tensor<T>({ch});
    running_mean = Tensor<T>({ch});
    running_var = Tensor<T>({ch}, T(1));
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".gamma", &gamma, &g_gamma});
    out.push_back({prefix + ".beta", &beta, &g_beta});
  }

  Tensor<T> forward(const Tensor<T>& x, bool train, BatchNormCache<T>* cache) {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t m = static_cast<std::size_t>(n) * plane;
    Tensor<T> y(x.shape());
    Tensor<T> invstd({ch});

    for (int c = 0; c < ch; ++c) {
      T mean, var;
      if (train) {
        double sum = 0, sq = 0;
        for (int i = 0; i < n; ++i) {
          const T* p = plane_ptr(x, i, c, plane);
          for (std::size_t j = 0; j < plane; ++j) {
            sum += p[j];
            sq += static_cast<double>(p[j]) * p[j];
          }
        }
        mean = static_cast<T>(sum / m);
        var = static_cast<T>(sq / m - static_cast<double>(mean) * mean);
        if (var < 0) var = 0;
        running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mean;
        running_var[c] = (T(1) - momentum) * running_var[c] + momentum * var;
      } else {
        mean = running_mean[c];
        var = running_var[c];
      }
      const T is = T(1) / std::sqrt(var + eps);
      invstd[c] = is;
      for (int i = 0; i < n; ++i) {
        const T* p = plane_ptr(x, i, c, plane);
        T* q = plane_ptr(y, i, c, plane);
        for (std::size_t j = 0; j < plane; ++j) q[j] = (p[j] - mean) * is;
      }
    }
    if (cache) {
      cache->xhat = y;
      cache->invstd = invstd;
    }
    for (int c = 0; c < ch; ++c) {
      const T g = gamma[c], bb = beta[c];
      for (int i = 0; i < n; ++i) {
        T* q = plane_ptr(y, i, c, plane);
        for (std::size_t j = 0; j < plane; ++j) q[j] = g * q[j] + bb;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, const BatchNormCache<T>& cache) {
    const int n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const T m = static_cast<T>(static_cast<std::size_t>(n) * plane);
    Tensor<T> dx(dy.shape());
    for (int c = 0; c < ch; ++c) {
      double sum_dy = 0, sum_dy_xhat = 0;
      for (int i = 0; i < n; ++i) {
        const T* d = plane_ptr(dy, i, c, plane);
        const T* xh = plane_ptr(cache.xhat, i, c, plane);
        for (std::size_t j = 0; j < plane; ++j) {
          sum_dy += d[j];
          sum_dy_xhat += static_cast<double>(d[j]) * xh[j];
        }
      }
      g_gamma[c] += static_cast<T>(sum_dy_xhat);
      g_beta[c] += static_cast<T>(sum_dy);
      const T scale = gamma[c] * cache.invstd[c] / m;
      const T sdy = static_cast<T>(sum_dy);
      const T sdyx = static_cast<T>(sum_dy_xhat);
      for (int i = 0; i < n; ++i) {
        const T* d = plane_ptr(dy, i, c, plane);
        const T* xh = plane_ptr(cache.xhat, i, c, plane);
        T* o = plane_ptr(dx, i, c, plane);
        for (std::size_t j = 0; j < plane; ++j) o[j] = scale * (m * d[j] - sdy - xh[j] * sdyx);
      }
    }
    return dx;
  }

 private:
  template <typename U>
  static U* plane_ptr(Tensor<U>& t, int i, int c, std::size_t plane) {
    return t.data() + (static_cast<std::size_t>(i) * t.dim(1) + c) * plane;
  }
  template <typename U>
  static const U* plane_ptr(const Tensor<U>& t, int i, int c, std::size_t plane) {
    return t.data() + (static_cast<std::size_t>(i) * t.dim(1) + c) * plane;
  }
};

// ---------------------------------------------------------------------------
// Stateless ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& dy, const Tensor<T>& y) {
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = y[i] > T(0) ? dy[i] : T(0);
  return dx;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
  return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& dy, const Tensor<T>& y) {
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * y[i] * (T(1) - y[i]);
  return dx;
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T v = x[i];
    y[i] = v > T(20) ? v : std::log1p(std::exp(v));
  }
  return y;
}

template <typename T>
Tensor<T> softplus_backward(const Tensor<T>& dy, const Tensor<T>& x) {
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.numel(); ++i)
    dx[i] = dy[i] / (T(1) + std::exp(-x[i]));
  return dx;
}

/// (N,C,H,W) -> (N,C,2H,2W)
template <typename T>
Tensor<T> upsample_nearest_2x(const Tensor<T>& x) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y({n, c, 2 * h, 2 * w});
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc)
      for (int yy = 0; yy < 2 * h; ++yy)
        for (int xx = 0; xx < 2 * w; ++xx) y(i, cc, yy, xx) = x(i, cc, yy / 2, xx / 2);
  return y;
}

template <typename T>
Tensor<T> upsample_nearest_2x_backward(const Tensor<T>& dy) {
  const int n = dy.dim(0), c = dy.dim(1), h = dy.dim(2) / 2, w = dy.dim(3) / 2;
  Tensor<T> dx({n, c, h, w});
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc)
      for (int yy = 0; yy < 2 * h; ++yy)
        for (int xx = 0; xx < 2 * w; ++xx) dx(i, cc, yy / 2, xx / 2) += dy(i, cc, yy, xx);
  return dx;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2), w = a.dim(3);
  if (b.dim(0) != n || b.dim(2) != h || b.dim(3) != w)
    throw std::invalid_argument("concat_channels: spatial mismatch");
  Tensor<T> y({n, ca + cb, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    std::copy(a.data() + i * ca * plane, a.data() + (i + 1) * ca * plane,
              y.data() + static_cast<std::size_t>(i) * (ca + cb) * plane);
    std::copy(b.data() + i * cb * plane, b.data() + (i + 1) * cb * plane,
              y.data() + static_cast<std::size_t>(i) * (ca + cb) * plane + ca * plane);
  }
  return y;
}

template <typename T>
void split_channels(const Tensor<T>& dy, int ca, Tensor<T>& da, Tensor<T>& db) {
  const int n = dy.dim(0), c = dy.dim(1), h = dy.dim(2), w = dy.dim(3);
  const int cb = c - ca;
  da = Tensor<T>({n, ca, h, w});
  db = Tensor<T>({n, cb, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    const T* src = dy.data() + static_cast<std::size_t>(i) * c * plane;
    std::copy(src, src + ca * plane, da.data() + static_cast<std::size_t>(i) * ca * plane);
    std::copy(src + ca * plane, src + c * plane,
              db.data() + static_cast<std::size_t>(i) * cb * plane);
  }
}

/// (N,C,H,W) -> (N,C)
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor<T> y({n, c});
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc) {
      const T* p = x.data() + (static_cast<std::size_t>(i) * c + cc) * plane;
      double s = 0;
      for (std::size_t j = 0; j < plane; ++j) s += p[j];
      y(i, cc) = static_cast<T>(s / static_cast<double>(plane));
    }
  return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& dy, const Shape& in_shape) {
  const int n = in_shape[0], c = in_shape[1], h = in_shape[2], w = in_shape[3];
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor<T> dx(in_shape);
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc) {
      const T g = dy(i, cc) / static_cast<T>(plane);
      T* p = dx.data() + (static_cast<std::size_t>(i) * c + cc) * plane;
      for (std::size_t j = 0; j < plane; ++j) p[j] = g;
    }
  return dx;
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

template <typename T>
struct Linear {
  int in = 0, out = 0;
  Tensor<T> w, b, gw, gb;  // w: (out, in)

  Linear() = default;
  Linear(int in_, int out_) : in(in_), out(out_) {
    w = Tensor<T>({out, in});
    b = Tensor<T>({out});
    gw = Tensor<T>::zeros_like(w);
    gb = Tensor<T>::zeros_like(b);
  }

  void init(std::mt19937& rng) { he_normal_init(w, in, rng); b.set_zero(); }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out_params) {
    out_params.push_back({prefix + ".weight", &w, &gw});
    out_params.push_back({prefix + ".bias", &b, &gb});
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    const int n = x.dim(0);
    Tensor<T> y({n, out});
    map_matrix(y, n, out).noalias() = map_matrix(x, n, in) * map_matrix(w, out, in).transpose();
    for (int i = 0; i < n; ++i)
      for (int o = 0; o < out; ++o) y(i, o) += b[o];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, const Tensor<T>& x) {
    const int n = x.dim(0);
    map_matrix(gw, out, in).noalias() += map_matrix(dy, n, out).transpose() * map_matrix(x, n, in);
    for (int i = 0; i < n; ++i)
      for (int o = 0; o < out; ++o) gb[o] += dy(i, o);
    Tensor<T> dx({n, in});
    map_matrix(dx, n, in).noalias() = map_matrix(dy, n, out) * map_matrix(w, out, in);
    return dx;
  }
};

// ---------------------------------------------------------------------------
// Conv-BN-ReLU block
// ---------------------------------------------------------------------------

template <typename T>
struct ConvBlockCache {
  Conv2dCache<T> conv;
  BatchNormCache<T> bn;
  Tensor<T> conv_in;   // kept for the pointwise conv backward
  Tensor<T> relu_out;
};

template <typename T>
struct ConvBlock {
  Conv2d<T> conv;
  BatchNorm2d<T> bn;

  ConvBlock() = default;
  ConvBlock(int in_c, int out_c, int kernel, int stride, int pad)
      : conv(in_c, out_c, kernel, stride, pad), bn(out_c) {}

  void init(std::mt19937& rng) { conv.init(rng); }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    conv.collect_params(prefix + ".conv", out);
    bn.collect_params(prefix + ".bn", out);
  }

  Tensor<T> forward(const Tensor<T>& x, bool train, ConvBlockCache<T>* cache) {
    Tensor<T> y = conv.forward(x, cache ? &cache->conv : nullptr);
    y = bn.forward(y, train, cache ? &cache->bn : nullptr);
    y = relu(y);
    if (cache) {
      cache->conv_in = x;
      cache->relu_out = y;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, ConvBlockCache<T>& cache) {
    Tensor<T> d = relu_backward(dy, cache.relu_out);
    d = bn.backward(d, cache.bn);
    return conv.backward(d, cache.conv_in, cache.conv);
  }
};

}  // namespace nn
}  // namespace boxref
