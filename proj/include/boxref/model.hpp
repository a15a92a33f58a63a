#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "boxref/fusion.hpp"
#include "boxref/geometry.hpp"
#include "boxref/nn.hpp"
#include "boxref/tensor.hpp"

namespace boxref {

enum class HeadKind { kRpn, kRcnn, kCorner };

const char* head_kind_name(HeadKind k);
HeadKind head_kind_from_name(const std::string& name);

struct BackboneSpec {
  std::vector<int> stage_channels = {16, 32, 64, 64};  // stride 2 per stage
  int total_stride() const { return 1 << static_cast<int>(stage_channels.size()); }
  int out_channels() const { return stage_channels.back(); }
};

struct ModelConfig {
  BackboneSpec backbone;
  FusionKind fusion_kind = FusionKind::kPixelwise;
  HeadKind head_kind = HeadKind::kCorner;
  bool with_mask = false;
  int input_size = 256;
  double softargmax_temperature = 1.0;
  int fused_channels = 64;

  int feature_grid() const { return input_size / backbone.total_stride(); }
  void validate() const {
    if (backbone.stage_channels.empty()) throw std::invalid_argument("backbone needs stages");
    if (input_size <= 0 || input_size % backbone.total_stride() != 0)
      throw std::invalid_argument("input_size must be a positive multiple of the total stride");
    if (softargmax_temperature <= 0) throw std::invalid_argument("temperature must be positive");
    if (fused_channels <= 0) throw std::invalid_argument("fused_channels must be positive");
  }
};

/// Inference result. box_crop is in crop pixel coordinates, clamped to [0, input_size].
template <typename T>
struct HeadOutput {
  Box box_crop;
  std::optional<double> score;
  std::optional<std::pair<Tensor<T>, Tensor<T>>> heatmaps;  // (tl, br), feature-grid size
  std::optional<Tensor<T>> mask;                            // (input, input) probabilities
};

// ---------------------------------------------------------------------------
// soft-argmax: expectation of grid-cell centers under softmax(h / temperature)
// ---------------------------------------------------------------------------

template <typename T>
struct SoftArgmaxCache {
  Tensor<T> p;  // softmax probabilities, heatmap shape
  T x = 0, y = 0;
};

/// h is (H, W); cell (r, c) maps to crop pixel ((c+0.5)*stride, (r+0.5)*stride).
template <typename T>
std::pair<T, T> soft_argmax(const Tensor<T>& h, double stride, double temperature,
                            SoftArgmaxCache<T>* cache = nullptr) {
  if (h.ndim() != 2) throw std::invalid_argument("soft_argmax: heatmap must be 2-d");
  if (temperature <= 0) throw std::invalid_argument("soft_argmax: temperature must be positive");
  const int rows = h.dim(0), cols = h.dim(1);
  Tensor<T> p(h.shape());
  T hmax = h[0];
  for (std::size_t i = 1; i < h.numel(); ++i) hmax = std::max(hmax, h[i]);
  double z = 0;
  for (std::size_t i = 0; i < h.numel(); ++i) {
    p[i] = std::exp((h[i] - hmax) / static_cast<T>(temperature));
    z += p[i];
  }
  for (auto& v : p) v = static_cast<T>(v / z);
  double x = 0, y = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double w = p(r, c);
      x += w * (c + 0.5) * stride;
      y += w * (r + 0.5) * stride;
    }
  if (cache) {
    cache->p = p;
    cache->x = static_cast<T>(x);
    cache->y = static_cast<T>(y);
  }
  return {static_cast<T>(x), static_cast<T>(y)};
}

template <typename T>
Tensor<T> soft_argmax_backward(T dx, T dy, double stride, double temperature,
                               const SoftArgmaxCache<T>& cache) {
  const int rows = cache.p.dim(0), cols = cache.p.dim(1);
  Tensor<T> dh(cache.p.shape());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const T gx = static_cast<T>((c + 0.5) * stride);
      const T gy = static_cast<T>((r + 0.5) * stride);
      dh(r, c) = static_cast<T>(cache.p(r, c) / temperature *
                                (dx * (gx - cache.x) + dy * (gy - cache.y)));
    }
  return dh;
}

// ---------------------------------------------------------------------------
// Stacked 3x3 Conv-BN-ReLU trunk shared by the box heads
// ---------------------------------------------------------------------------

template <typename T>
struct HeadTrunkCache {
  std::vector<nn::ConvBlockCache<T>> blocks;
};

template <typename T>
struct HeadTrunk {
  std::vector<nn::ConvBlock<T>> blocks;

  HeadTrunk() = default;
  HeadTrunk(int depth, int ch) {
    for (int i = 0; i < depth; ++i) blocks.emplace_back(ch, ch, 3, 1, 1);
  }

  void init(std::mt19937& rng) {
    for (auto& b : blocks) b.init(rng);
  }
  void collect_params(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks[i].collect_params(prefix + ".block" + std::to_string(i), out);
  }
  Tensor<T> forward(const Tensor<T>& x, bool train, HeadTrunkCache<T>* cache) {
    if (cache) cache->blocks.resize(blocks.size());
    Tensor<T> y = x;
    for (std::size_t i = 0; i < blocks.size(); ++i)
      y = blocks[i].forward(y, train, cache ? &cache->blocks[i] : nullptr);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, HeadTrunkCache<T>& cache) {
    Tensor<T> d = dy;
    for (std::size_t i = blocks.size(); i-- > 0;) d = blocks[i].backward(d, cache.blocks[i]);
    return d;
  }
};

// ---------------------------------------------------------------------------
// Corner head: trunk + conv -> two heatmaps (no upsampling)
// ---------------------------------------------------------------------------

template <typename T>
struct CornerHeadCache {
  HeadTrunkCache<T> trunk;
  nn::Conv2dCache<T> out_conv;
  Tensor<T> out_conv_in;
};

template <typename T>
struct CornerHead {
  HeadTrunk<T> trunk;
  nn::Conv2d<T> out_conv;

  CornerHead() = default;
  explicit CornerHead(int ch) : trunk(4, ch), out_conv(ch, 2, 3, 1, 1) {}

  void init(std::mt19937& rng) {
    trunk.init(rng);
    out_conv.init(rng);
  }
  void collect_params(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
    trunk.collect_params(prefix + ".trunk", out);
    out_conv.collect_params(prefix + ".out", out);
  }

  /// fused (N,C,h,w) -> heatmaps (N,2,h,w); channel 0 top-left, channel 1 bottom-right.
  Tensor<T> forward(const Tensor<T>& fused, bool train, CornerHeadCache<T>* cache) {
    Tensor<T> t = trunk.forward(fused, train, cache ? &cache->trunk : nullptr);
    Tensor<T> hm = out_conv.forward(t, cache ? &cache->out_conv : nullptr);
    if (cache) cache->out_conv_in = std::move(t);
    return hm;
  }
  Tensor<T> backward(const Tensor<T>& dheat, CornerHeadCache<T>& cache) {
    Tensor<T> d = out_conv.backward(dheat, cache.out_conv_in, cache.out_conv);
    return trunk.backward(d, cache.trunk);
  }
};

// ---------------------------------------------------------------------------
// RPN head: trunk + conv -> per-cell (l,t,r,b) distances in crop pixels + score logit
// ---------------------------------------------------------------------------

template <typename T>
struct RpnHeadCache {
  HeadTrunkCache<T> trunk;
  nn::Conv2dCache<T> out_conv;
  Tensor<T> out_conv_in;
  Tensor<T> raw;  // pre-softplus map (N,5,h,w)
};

template <typename T>
struct RpnHead {
  HeadTrunk<T> trunk;
  nn::Conv2d<T> out_conv;
  int input_size = 256;

  RpnHead() = default;
  RpnHead(int ch, int input_size_)
      : trunk(4, ch), out_conv(ch, 5, 3, 1, 1), input_size(input_size_) {}

  void init(std::mt19937& rng) {
    trunk.init(rng);
    out_conv.init(rng);
  }
  void collect_params(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
    trunk.collect_params(prefix + ".trunk", out);
    out_conv.collect_params(prefix + ".out", out);
  }

  /// Returns (N,5,h,w): channels 0..3 nonnegative edge distances in crop pixels
  /// (input_size * softplus(raw)), channel 4 raw score logit.
  Tensor<T> forward(const Tensor<T>& fused, bool train, RpnHeadCache<T>* cache) {
    Tensor<T> t = trunk.forward(fused, train, cache ? &cache->trunk : nullptr);
    Tensor<T> raw = out_conv.forward(t, cache ? &cache->out_conv : nullptr);
    Tensor<T> y = raw;
    const int n = y.dim(0), h = y.dim(2), w = y.dim(3);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 4; ++c)
        for (int r = 0; r < h; ++r)
          for (int cc = 0; cc < w; ++cc) {
            const T v = raw(i, c, r, cc);
            const T sp = v > T(20) ? v : std::log1p(std::exp(v));
            y(i, c, r, cc) = static_cast<T>(input_size) * sp;
          }
    if (cache) {
      cache->out_conv_in = std::move(t);
      cache->raw = std::move(raw);
    }
    return y;
  }

  /// dmap: grad w.r.t. the forward output; score channel grad taken w.r.t. the logit.
  Tensor<T> backward(const Tensor<T>& dmap, RpnHeadCache<T>& cache) {
    Tensor<T> draw = dmap;
    const int n = dmap.dim(0), h = dmap.dim(2), w = dmap.dim(3);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 4; ++c)
        for (int r = 0; r < h; ++r)
          for (int cc = 0; cc < w; ++cc) {
            const T v = cache.raw(i, c, r, cc);
            draw(i, c, r, cc) = dmap(i, c, r, cc) * static_cast<T>(input_size) /
                                (T(1) + std::exp(-v));
          }
    Tensor<T> d = out_conv.backward(draw, cache.out_conv_in, cache.out_conv);
    return trunk.backward(d, cache.trunk);
  }
};

/// Picks the highest-score cell (row-major scan, first index wins ties) and
/// rebuilds the box from its pixel-distance channels. map is (5,h,w).
template <typename T>
HeadOutput<T> decode_rpn(const Tensor<T>& map, double stride) {
  if (map.ndim() != 3 || map.dim(0) != 5) throw std::invalid_argument("decode_rpn: map must be (5,h,w)");
  const int h = map.dim(1), w = map.dim(2);
  int br = 0, bc = 0;
  T best = map(4, 0, 0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (map(4, r, c) > best) {
        best = map(4, r, c);
        br = r;
        bc = c;
      }
  const double cx = (bc + 0.5) * stride, cy = (br + 0.5) * stride;
  HeadOutput<T> out;
  out.box_crop = Box::from_ltrb(cx - map(0, br, bc), cy - map(1, br, bc), cx + map(2, br, bc),
                                cy + map(3, br, bc));
  out.score = 1.0 / (1.0 + std::exp(-static_cast<double>(best)));
  return out;
}

// ---------------------------------------------------------------------------
// RCNN head: conv trunk + global average pool + linear -> sigmoid ltrb in [0,1]
// ---------------------------------------------------------------------------

template <typename T>
struct RcnnHeadCache {
  HeadTrunkCache<T> trunk;
  Shape gap_in_shape;
  Tensor<T> gap_out;
  Tensor<T> norm;  // sigmoid output (N,4)
};

template <typename T>
struct RcnnHead {
  HeadTrunk<T> trunk;
  nn::Linear<T> fc;

  RcnnHead() = default;
  explicit RcnnHead(int ch) : trunk(2, ch), fc(ch, 4) {}

  void init(std::mt19937& rng) {
    trunk.init(rng);
    fc.init(rng);
  }
  void collect_params(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
    trunk.collect_params(prefix + ".trunk", out);
    fc.collect_params(prefix + ".fc", out);
  }

  /// fused (N,C,h,w) -> (N,4) normalized (l,t,r,b) in [0,1].
  Tensor<T> forward(const Tensor<T>& fused, bool train, RcnnHeadCache<T>* cache) {
    Tensor<T> t = trunk.forward(fused, train, cache ? &cache->trunk : nullptr);
    Tensor<T> g = nn::global_avg_pool(t);
    Tensor<T> y = nn::sigmoid(fc.forward(g));
    if (cache) {
      cache->gap_in_shape = t.shape();
      cache->gap_out = std::move(g);
      cache->norm = y;
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dnorm, RcnnHeadCache<T>& cache) {
    Tensor<T> d = nn::sigmoid_backward(dnorm, cache.norm);
    d = fc.backward(d, cache.gap_out);
    d = nn::global_avg_pool_backward(d, cache.gap_in_shape);
    return trunk.backward(d, cache.trunk);
  }
};

// ---------------------------------------------------------------------------
// Mask head: decoder that upsamples the fused map, concatenating test-branch
// skip features at each resolution, ending in a 1x1 conv + sigmoid
// ---------------------------------------------------------------------------

template <typename T>
struct MaskHeadCache {
  std::vector<Tensor<T>> up_in;       // input to each 2x upsample
  std::vector<nn::ConvBlockCache<T>> dec;
  std::vector<int> skip_ch;
  nn::ConvBlockCache<T> final_block;
  nn::Conv2dCache<T> out_conv;
  Tensor<T> out_conv_in;
  Tensor<T> probs;
};

template <typename T>
struct MaskHead {
  std::vector<nn::ConvBlock<T>> dec;  // one per skip level, deepest first
  nn::ConvBlock<T> final_block;
  nn::Conv2d<T> out_conv;
  int n_skips = 0;

  MaskHead() = default;
  MaskHead(int fused_ch, const std::vector<int>& stage_channels) {
    n_skips = static_cast<int>(stage_channels.size()) - 1;
    int prev = fused_ch;
    for (int i = n_skips - 1; i >= 0; --i) {
      const int sc = stage_channels[static_cast<std::size_t>(i)];
      const int oc = std::max(8, sc / 2);
      dec.emplace_back(prev + sc, oc, 3, 1, 1);
      prev = oc;
    }
    final_block = nn::ConvBlock<T>(prev, 8, 3, 1, 1);
    out_conv = nn::Conv2d<T>(8, 1, 1, 1, 0);
  }

  void init(std::mt19937& rng) {
    for (auto& b : dec) b.init(rng);
    final_block.init(rng);
    out_conv.init(rng);
  }
  void collect_params(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
    for (std::size_t i = 0; i < dec.size(); ++i)
      dec[i].collect_params(prefix + ".dec" + std::to_string(i), out);
    final_block.collect_params(prefix + ".final", out);
    out_conv.collect_params(prefix + ".out", out);
  }

  /// fused (N,C,h,w), skips = per-stage backbone outputs of the test branch
  /// (stride 2,4,...). Returns per-pixel probabilities (N,1,input,input).
  Tensor<T> forward(const Tensor<T>& fused, const std::vector<Tensor<T>>& skips, bool train,
                    MaskHeadCache<T>* cache) {
    if (static_cast<int>(skips.size()) < n_skips + 1)
      throw std::invalid_argument("mask head: skip pyramid too small");
    if (cache) {
      cache->up_in.clear();
      cache->dec.resize(dec.size());
      cache->skip_ch.clear();
    }
    Tensor<T> d = fused;
    for (int i = 0; i < n_skips; ++i) {
      if (cache) cache->up_in.push_back(d);
      d = nn::upsample_nearest_2x(d);
      const Tensor<T>& skip = skips[static_cast<std::size_t>(n_skips - 1 - i)];
      const int dch = d.dim(1);
      d = nn::concat_channels(d, skip);
      if (cache) cache->skip_ch.push_back(dch);
      d = dec[static_cast<std::size_t>(i)].forward(d, train, cache ? &cache->dec[i] : nullptr);
    }
    if (cache) cache->up_in.push_back(d);
    d = nn::upsample_nearest_2x(d);
    d = final_block.forward(d, train, cache ? &cache->final_block : nullptr);
    Tensor<T> logits = out_conv.forward(d, cache ? &cache->out_conv : nullptr);
    Tensor<T> probs = nn::sigmoid(logits);
    if (cache) {
      cache->out_conv_in = std::move(d);
      cache->probs = probs;
    }
    return probs;
  }

  /// dlogits: grad w.r.t. the pre-sigmoid logits. Returns (dfused, dskips).
  std::pair<Tensor<T>, std::vector<Tensor<T>>> backward(const Tensor<T>& dlogits,
                                                        MaskHeadCache<T>& cache) {
    std::vector<Tensor<T>> dskips(static_cast<std::size_t>(n_skips) + 1);
    Tensor<T> d = out_conv.backward(dlogits, cache.out_conv_in, cache.out_conv);
    d = final_block.backward(d, cache.final_block);
    d = nn::upsample_nearest_2x_backward(d);
    for (int i = n_skips - 1; i >= 0; --i) {
      d = dec[static_cast<std::size_t>(i)].backward(d, cache.dec[static_cast<std::size_t>(i)]);
      Tensor<T> dmain, dskip;
      nn::split_channels(d, cache.skip_ch[static_cast<std::size_t>(i)], dmain, dskip);
      dskips[static_cast<std::size_t>(n_skips - 1 - i)] = std::move(dskip);
      d = nn::upsample_nearest_2x_backward(dmain);
    }
    return {std::move(d), std::move(dskips)};
  }
};

// ---------------------------------------------------------------------------
// Backbone: one stride-2 Conv-BN-ReLU stage per entry in stage_channels
// ---------------------------------------------------------------------------

template <typename T>
struct BackboneCache {
  std::vector<nn::ConvBlockCache<T>> stages;
};

template <typename T>
struct Backbone {
  std::vector<nn::ConvBlock<T>> stages;

  Backbone() = default;
  explicit Backbone(const BackboneSpec& spec) {
    int in_ch = 3;
    for (int c : spec.stage_channels) {
      stages.emplace_back(in_ch, c, 3, 2, 1);
      in_ch = c;
    }
  }

  void init(std::mt19937& rng) {
    for (auto& s : stages) s.init(rng);
  }
  void collect_params(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
    for (std::size_t i = 0; i < stages.size(); ++i)
      stages[i].collect_params(prefix + ".stage" + std::to_string(i), out);
  }

  /// x (N,3,S,S) -> deepest feature; skips (if given) holds every stage output.
  Tensor<T> forward(const Tensor<T>& x, bool train, BackboneCache<T>* cache,
                    std::vector<Tensor<T>>* skips) {
    if (cache) cache->stages.resize(stages.size());
    if (skips) skips->clear();
    Tensor<T> y = x;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      y = stages[i].forward(y, train, cache ? &cache->stages[i] : nullptr);
      if (skips) skips->push_back(y);
    }
    return y;
  }

  /// dskips[i] (optional, may hold empty tensors) is the gradient w.r.t. stage
  /// i's output arriving from outside the main chain (mask decoder path).
  Tensor<T> backward(const Tensor<T>& dfeat, const std::vector<Tensor<T>>* dskips,
                     BackboneCache<T>& cache) {
    auto skip_grad = [&](std::size_t i) -> const Tensor<T>* {
      if (!dskips || i >= dskips->size() || (*dskips)[i].empty()) return nullptr;
      return &(*dskips)[i];
    };
    Tensor<T> d = dfeat;
    if (const Tensor<T>* g = skip_grad(stages.size() - 1))
      for (std::size_t k = 0; k < d.numel(); ++k) d[k] += (*g)[k];
    for (std::size_t i = stages.size(); i-- > 0;) {
      d = stages[i].backward(d, cache.stages[i]);
      if (i > 0)
        if (const Tensor<T>* g = skip_grad(i - 1))
          for (std::size_t k = 0; k < d.numel(); ++k) d[k] += (*g)[k];
    }
    return d;
  }
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

template <typename T>
struct ForwardCache {
  BackboneCache<T> ref_bb, test_bb;
  std::vector<Tensor<T>> ref_skips, test_skips;
  Tensor<T> ref_feat, test_feat;
  Tensor<T> corr;
  nn::ConvBlockCache<T> fuse_cb;
  Tensor<T> fused;
  CornerHeadCache<T> corner;
  std::vector<SoftArgmaxCache<T>> sam;  // 2 per sample (tl, br)
  RpnHeadCache<T> rpn;
  RcnnHeadCache<T> rcnn;
  MaskHeadCache<T> mask;
  bool has_mask = false;
};

/// Raw training-path outputs; only the fields of the configured head are set.
template <typename T>
struct TrainOutputs {
  Tensor<T> heatmaps;    // corner: (N,2,h,w)
  Tensor<T> corners;     // corner: (N,4) = (x_tl, y_tl, x_br, y_br) crop px
  Tensor<T> rpn_map;     // rpn: (N,5,h,w) distances px + score logit
  Tensor<T> rcnn_norm;   // rcnn: (N,4) in [0,1]
  Tensor<T> mask_probs;  // (N,1,S,S) when the mask head ran
};

/// Gradients w.r.t. TrainOutputs fields; logit-space for score/mask channels.
template <typename T>
struct TrainGrads {
  Tensor<T> dcorners;     // (N,4)
  Tensor<T> drpn_map;     // (N,5,h,w); channel 4 is d/dlogit
  Tensor<T> drcnn_norm;   // (N,4)
  Tensor<T> dmask_logits;  // (N,1,S,S); empty to skip the mask path
};

template <typename T>
class Model {
 public:
  Model() = default;
  Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    const int c = cfg_.backbone.out_channels();
    const int g = cfg_.feature_grid();
    backbone_ = Backbone<T>(cfg_.backbone);
    corr_ch_ = fusion_output_channels(cfg_.fusion_kind, c, g, g);
    fuse_conv_ = nn::ConvBlock<T>(corr_ch_, cfg_.fused_channels, 1, 1, 0);
    switch (cfg_.head_kind) {
      case HeadKind::kCorner: corner_.emplace(cfg_.fused_channels); break;
      case HeadKind::kRpn: rpn_.emplace(cfg_.fused_channels, cfg_.input_size); break;
      case HeadKind::kRcnn: rcnn_.emplace(cfg_.fused_channels); break;
    }
    if (cfg_.with_mask) mask_.emplace(cfg_.fused_channels, cfg_.backbone.stage_channels);
    std::mt19937 rng(static_cast<std::uint32_t>(seed ^ (seed >> 32)));
    backbone_.init(rng);
    fuse_conv_.init(rng);
    if (corner_) corner_->init(rng);
    if (rpn_) rpn_->init(rng);
    if (rcnn_) rcnn_->init(rng);
    if (mask_) mask_->init(rng);
  }

  const ModelConfig& config() const { return cfg_; }
  int stride() const { return cfg_.backbone.total_stride(); }

  std::vector<nn::ParamRef<T>> params() {
    std::vector<nn::ParamRef<T>> out;
    backbone_.collect_params("backbone", out);
    fuse_conv_.collect_params("fuse", out);
    if (corner_) corner_->collect_params("corner", out);
    if (rpn_) rpn_->collect_params("rpn", out);
    if (rcnn_) rcnn_->collect_params("rcnn", out);
    if (mask_) mask_->collect_params("mask", out);
    return out;
  }

  /// Every persistent tensor (trainable parameters plus batch-norm statistics).
  std::vector<std::pair<std::string, Tensor<T>*>> named_state() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (auto& p : params()) out.emplace_back(p.name, p.value);
    collect_bn_stats("backbone", backbone_.stages, out);
    collect_block_stats("fuse", fuse_conv_, out);
    if (corner_) {
      collect_bn_stats("corner.trunk.block", corner_->trunk.blocks, out, true);
    }
    if (rpn_) collect_bn_stats("rpn.trunk.block", rpn_->trunk.blocks, out, true);
    if (rcnn_) collect_bn_stats("rcnn.trunk.block", rcnn_->trunk.blocks, out, true);
    if (mask_) {
      for (std::size_t i = 0; i < mask_->dec.size(); ++i)
        collect_block_stats("mask.dec" + std::to_string(i), mask_->dec[i], out);
      collect_block_stats("mask.final", mask_->final_block, out);
    }
    return out;
  }

  void zero_grads() {
    for (auto& p : params()) p.grad->set_zero();
  }

  // -- single-sample inference pieces (eval-mode batch statistics) ----------

  /// image (3,S,S) in [0,1] -> (deepest feature (C,g,g), per-stage skip pyramid).
  std::pair<Tensor<T>, std::vector<Tensor<T>>> extract_features(const Tensor<T>& image) {
    check_image(image);
    Tensor<T> x = image.reshaped({1, 3, cfg_.input_size, cfg_.input_size});
    std::vector<Tensor<T>> skips;
    Tensor<T> f = backbone_.forward(x, false, nullptr, &skips);
    for (auto& s : skips) s = drop_batch(s);
    return {drop_batch(f), std::move(skips)};
  }

  /// ref_feat/test_feat (C,g,g) -> fused (fused_channels,g,g).
  Tensor<T> fuse(const Tensor<T>& ref_feat, const Tensor<T>& test_feat) {
    Tensor<T> corr = correlate(cfg_.fusion_kind, ref_feat, test_feat);
    Tensor<T> c4 = corr.reshaped({1, corr.dim(0), corr.dim(1), corr.dim(2)});
    return drop_batch(fuse_conv_.forward(c4, false, nullptr));
  }

  /// fused (F,g,g) -> (tl heatmap, br heatmap), each (g,g).
  std::pair<Tensor<T>, Tensor<T>> corner_heatmaps(const Tensor<T>& fused) {
    require(corner_.has_value(), "corner head not configured");
    Tensor<T> hm = corner_->forward(batched(fused), false, nullptr);
    const int h = hm.dim(2), w = hm.dim(3);
    Tensor<T> tl({h, w}), br({h, w});
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        tl(r, c) = hm(0, 0, r, c);
        br(r, c) = hm(0, 1, r, c);
      }
    return {std::move(tl), std::move(br)};
  }

  /// fused (F,g,g) -> (5,g,g) rpn map (pixel distances + score logit).
  Tensor<T> rpn_map(const Tensor<T>& fused) {
    require(rpn_.has_value(), "rpn head not configured");
    return drop_batch(rpn_->forward(batched(fused), false, nullptr));
  }

  /// fused (F,g,g) -> (4,) normalized ltrb.
  Tensor<T> rcnn_norm(const Tensor<T>& fused) {
    require(rcnn_.has_value(), "rcnn head not configured");
    Tensor<T> y = rcnn_->forward(batched(fused), false, nullptr);
    return y.reshaped({4});
  }

  /// fused (F,g,g) + test-branch skips -> (S,S) probabilities.
  Tensor<T> mask_probs(const Tensor<T>& fused, const std::vector<Tensor<T>>& skips) {
    require(mask_.has_value(), "mask head not configured");
    std::vector<Tensor<T>> skips4;
    skips4.reserve(skips.size());
    for (const auto& s : skips) skips4.push_back(batched(s));
    Tensor<T> p = mask_->forward(batched(fused), skips4, false, nullptr);
    return p.reshaped({cfg_.input_size, cfg_.input_size});
  }

  /// Full inference composition. with_mask only controls whether the mask head
  /// runs; the box path never depends on it.
  HeadOutput<T> forward(const Tensor<T>& ref_crop, const Tensor<T>& test_crop, bool with_mask) {
    auto [ref_feat, ref_skips] = extract_features(ref_crop);
    (void)ref_skips;
    return forward_with_ref(ref_feat, test_crop, with_mask);
  }

  HeadOutput<T> forward(const Tensor<T>& ref_crop, const Tensor<T>& test_crop) {
    return forward(ref_crop, test_crop, cfg_.with_mask);
  }

  /// Inference with precomputed reference features (the per-sequence cache).
  HeadOutput<T> forward_with_ref(const Tensor<T>& ref_feat, const Tensor<T>& test_crop,
                                 bool with_mask) {
    auto [test_feat, test_skips] = extract_features(test_crop);
    Tensor<T> fused = fuse(ref_feat, test_feat);
    HeadOutput<T> out;
    const double s = stride();
    switch (cfg_.head_kind) {
      case HeadKind::kCorner: {
        auto [tl, br] = corner_heatmaps(fused);
        auto [xt, yt] = soft_argmax(tl, s, cfg_.softargmax_temperature);
        auto [xb, yb] = soft_argmax(br, s, cfg_.softargmax_temperature);
        out.box_crop = Box::from_ltrb(xt, yt, xb, yb);
        out.heatmaps = std::make_pair(std::move(tl), std::move(br));
        break;
      }
      case HeadKind::kRpn: {
        HeadOutput<T> d = decode_rpn(rpn_map(fused), s);
        out.box_crop = d.box_crop;
        out.score = d.score;
        break;
      }
      case HeadKind::kRcnn: {
        Tensor<T> nrm = rcnn_norm(fused);
        const double S = cfg_.input_size;
        out.box_crop = Box::from_ltrb(nrm[0] * S, nrm[1] * S, nrm[2] * S, nrm[3] * S);
        break;
      }
    }
    out.box_crop = clamp_box(out.box_crop, cfg_.input_size);
    if (with_mask && mask_) out.mask = mask_probs(fused, test_skips);
    return out;
  }

  // -- batched training path ------------------------------------------------

  /// ref/test (N,3,S,S); runs batch-statistics batch norm and fills the cache.
  TrainOutputs<T> forward_train(const Tensor<T>& ref, const Tensor<T>& test,
                                ForwardCache<T>& cache, bool run_mask = true) {
    const int n = ref.dim(0);
    cache.ref_feat = backbone_.forward(ref, true, &cache.ref_bb, &cache.ref_skips);
    cache.test_feat = backbone_.forward(test, true, &cache.test_bb, &cache.test_skips);
    const int g = cfg_.feature_grid();
    cache.corr = Tensor<T>({n, corr_ch_, g, g});
    for (int i = 0; i < n; ++i) {
      Tensor<T> k = take_sample(cache.ref_feat, i);
      Tensor<T> s = take_sample(cache.test_feat, i);
      put_sample(cache.corr, i, correlate(cfg_.fusion_kind, k, s));
    }
    cache.fused = fuse_conv_.forward(cache.corr, true, &cache.fuse_cb);

    TrainOutputs<T> out;
    const double s = stride();
    switch (cfg_.head_kind) {
      case HeadKind::kCorner: {
        out.heatmaps = corner_->forward(cache.fused, true, &cache.corner);
        out.corners = Tensor<T>({n, 4});
        cache.sam.assign(static_cast<std::size_t>(n) * 2, {});
        const int gh = out.heatmaps.dim(2), gw = out.heatmaps.dim(3);
        for (int i = 0; i < n; ++i) {
          Tensor<T> tl({gh, gw}), br({gh, gw});
          for (int r = 0; r < gh; ++r)
            for (int c = 0; c < gw; ++c) {
              tl(r, c) = out.heatmaps(i, 0, r, c);
              br(r, c) = out.heatmaps(i, 1, r, c);
            }
          auto [xt, yt] =
              soft_argmax(tl, s, cfg_.softargmax_temperature, &cache.sam[2 * i]);
          auto [xb, yb] =
              soft_argmax(br, s, cfg_.softargmax_temperature, &cache.sam[2 * i + 1]);
          out.corners(i, 0) = xt;
          out.corners(i, 1) = yt;
          out.corners(i, 2) = xb;
          out.corners(i, 3) = yb;
        }
        break;
      }
      case HeadKind::kRpn:
        out.rpn_map = rpn_->forward(cache.fused, true, &cache.rpn);
        break;
      case HeadKind::kRcnn:
        out.rcnn_norm = rcnn_->forward(cache.fused, true, &cache.rcnn);
        break;
    }
    cache.has_mask = run_mask && mask_.has_value();
    if (cache.has_mask)
      out.mask_probs = mask_->forward(cache.fused, cache.test_skips, true, &cache.mask);
    return out;
  }

  /// Accumulates parameter gradients for the batch in `cache`.
  void backward_train(ForwardCache<T>& cache, const TrainGrads<T>& grads) {
    const int n = cache.fused.dim(0);
    Tensor<T> dfused = Tensor<T>(cache.fused.shape());
    std::vector<Tensor<T>> dtest_skips;

    switch (cfg_.head_kind) {
      case HeadKind::kCorner: {
        const int gh = cfg_.feature_grid(), gw = cfg_.feature_grid();
        Tensor<T> dheat({n, 2, gh, gw});
        const double s = stride();
        for (int i = 0; i < n; ++i) {
          Tensor<T> dtl = soft_argmax_backward(grads.dcorners(i, 0), grads.dcorners(i, 1), s,
                                               cfg_.softargmax_temperature, cache.sam[2 * i]);
          Tensor<T> dbr = soft_argmax_backward(grads.dcorners(i, 2), grads.dcorners(i, 3), s,
                                               cfg_.softargmax_temperature, cache.sam[2 * i + 1]);
          for (int r = 0; r < gh; ++r)
            for (int c = 0; c < gw; ++c) {
              dheat(i, 0, r, c) = dtl(r, c);
              dheat(i, 1, r, c) = dbr(r, c);
            }
        }
        dfused = corner_->backward(dheat, cache.corner);
        break;
      }
      case HeadKind::kRpn:
        dfused = rpn_->backward(grads.drpn_map, cache.rpn);
        break;
      case HeadKind::kRcnn:
        dfused = rcnn_->backward(grads.drcnn_norm, cache.rcnn);
        break;
    }

    if (cache.has_mask && !grads.dmask_logits.empty()) {
      auto [dfused_m, dskips] = mask_->backward(grads.dmask_logits, cache.mask);
      for (std::size_t k = 0; k < dfused.numel(); ++k) dfused[k] += dfused_m[k];
      dtest_skips = std::move(dskips);
    }

    Tensor<T> dcorr = fuse_conv_.backward(dfused, cache.fuse_cb);
    Tensor<T> dref_feat(cache.ref_feat.shape());
    Tensor<T> dtest_feat(cache.test_feat.shape());
    for (int i = 0; i < n; ++i) {
      Tensor<T> k = take_sample(cache.ref_feat, i);
      Tensor<T> s = take_sample(cache.test_feat, i);
      Tensor<T> dout = take_sample(dcorr, i);
      auto [dk, ds] = correlate_backward(cfg_.fusion_kind, k, s, dout);
      put_sample(dref_feat, i, dk);
      put_sample(dtest_feat, i, ds);
    }
    backbone_.backward(dref_feat, nullptr, cache.ref_bb);
    backbone_.backward(dtest_feat, dtest_skips.empty() ? nullptr : &dtest_skips, cache.test_bb);
  }

  static Box clamp_box(const Box& b, double size) {
    const double l = std::clamp(b.left(), 0.0, size);
    const double t = std::clamp(b.top(), 0.0, size);
    const double r = std::clamp(b.right(), 0.0, size);
    const double bt = std::clamp(b.bottom(), 0.0, size);
    return Box::from_ltrb(l, t, std::max(r, l), std::max(bt, t));
  }

 private:
  static void require(bool ok, const char* msg) {
    if (!ok) throw std::logic_error(msg);
  }
  void check_image(const Tensor<T>& image) const {
    if (image.ndim() != 3 || image.dim(0) != 3 || image.dim(1) != cfg_.input_size ||
        image.dim(2) != cfg_.input_size)
      throw std::invalid_argument("model: expected (3," + std::to_string(cfg_.input_size) + "," +
                                  std::to_string(cfg_.input_size) + ") image");
  }
  static Tensor<T> drop_batch(const Tensor<T>& t) {
    Shape s(t.shape().begin() + 1, t.shape().end());
    return t.reshaped(s);
  }
  static Tensor<T> batched(const Tensor<T>& t) {
    Shape s;
    s.push_back(1);
    for (int d : t.shape()) s.push_back(d);
    return t.reshaped(s);
  }

  template <typename Blocks>
  static void collect_bn_stats(const std::string& prefix, Blocks& blocks,
                               std::vector<std::pair<std::string, Tensor<T>*>>& out,
                               bool indexed_prefix = false) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string p =
          indexed_prefix ? prefix + std::to_string(i) : prefix + ".stage" + std::to_string(i);
      out.emplace_back(p + ".bn.running_mean", &blocks[i].bn.running_mean);
      out.emplace_back(p + ".bn.running_var", &blocks[i].bn.running_var);
    }
  }
  static void collect_block_stats(const std::string& prefix, nn::ConvBlock<T>& block,
                                  std::vector<std::pair<std::string, Tensor<T>*>>& out) {
    out.emplace_back(prefix + ".bn.running_mean", &block.bn.running_mean);
    out.emplace_back(prefix + ".bn.running_var", &block.bn.running_var);
  }

  ModelConfig cfg_;
  int corr_ch_ = 0;
  Backbone<T> backbone_;
  nn::ConvBlock<T> fuse_conv_;
  std::optional<CornerHead<T>> corner_;
  std::optional<RpnHead<T>> rpn_;
  std::optional<RcnnHead<T>> rcnn_;
  std::optional<MaskHead<T>> mask_;
};

}  // namespace boxref
