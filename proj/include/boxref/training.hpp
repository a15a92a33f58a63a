#pragma once

#include <array>
#include <cmath>
#include <iosfwd>
#include <random>
#include <vector>

#include "boxref/losses.hpp"
#include "boxref/model.hpp"
#include "boxref/sequence.hpp"

namespace boxref {

/// One training example: reference crop, jittered test crop, and targets
/// expressed in the test crop's frame.
struct SamplePair {
  Image ref_crop;                      // (3,S,S)
  Image test_crop;                     // (3,S,S)
  std::array<double, 4> target_ltrb{};  // normalized to [0,1] of the crop
  Mask target_mask;                    // (S,S) in {0,1}; empty when unavailable
  CropTransform transform_test;
};

struct TrainConfig {
  int epochs = 10;
  int iterations_per_epoch = 200;
  int batch_size = 16;
  double base_learning_rate = 1e-3;
  int lr_halving_period_epochs = 8;
  int max_frame_interval = 50;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1 || iterations_per_epoch < 1 || batch_size < 1 ||
        lr_halving_period_epochs < 1 || max_frame_interval < 1)
      throw std::invalid_argument("train config counts must be >= 1");
    if (base_learning_rate <= 0) throw std::invalid_argument("learning rate must be positive");
  }
};

/// Learning rate multiplied by 0.5 every `period` epochs; epoch is 1-based.
inline double lr_at_epoch(double base, int epoch, int period) {
  return base * std::pow(0.5, (epoch - 1) / period);
}

/// Reference crop: ground-truth-centered, twice the ground-truth size.
/// Test crop: jittered around the test frame's ground truth. Frame indices
/// always satisfy |i_test - i_ref| < max_interval.
SamplePair build_pair(const Sequence& seq, std::mt19937& rng, const JitterParams& jitter,
                      int max_interval, int out_size);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<nn::ParamRef<T>> params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& p : params_) {
      m_.push_back(Tensor<T>::zeros_like(*p.value));
      v_.push_back(Tensor<T>::zeros_like(*p.value));
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.grad->set_zero();
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor<T>& w = *params_[i].value;
      const Tensor<T>& g = *params_[i].grad;
      for (std::size_t k = 0; k < w.numel(); ++k) {
        m_[i][k] = static_cast<T>(beta1_ * m_[i][k] + (1.0 - beta1_) * g[k]);
        v_[i][k] = static_cast<T>(beta2_ * v_[i][k] + (1.0 - beta2_) * g[k] * g[k]);
        const double mhat = m_[i][k] / bc1;
        const double vhat = v_[i][k] / bc2;
        w[k] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

 private:
  std::vector<nn::ParamRef<T>> params_;
  std::vector<Tensor<T>> m_, v_;
  long t_ = 0;
  double beta1_, beta2_, eps_;
};

// ---------------------------------------------------------------------------
// Per-batch loss glue: computes the scalar losses and the gradients that feed
// Model::backward_train. Score/mask gradients are taken w.r.t. logits.
// ---------------------------------------------------------------------------

template <typename T>
struct BatchLoss {
  double box_l = 0;
  double score_l = 0;  // rpn score BCE; 0 for other heads
  double mask_l = 0;
  double total = 0;
  TrainGrads<T> grads;
};

/// targets_ltrb (N,4) normalized; target_masks (N,1,S,S) or empty.
template <typename T>
BatchLoss<T> compute_losses(const ModelConfig& cfg, const TrainOutputs<T>& out,
                            const Tensor<T>& targets_ltrb, const Tensor<T>& target_masks,
                            const LossConfig& lc) {
  BatchLoss<T> bl;
  const T S = static_cast<T>(cfg.input_size);
  const int n = targets_ltrb.dim(0);

  switch (cfg.head_kind) {
    case HeadKind::kCorner: {
      Tensor<T> pred_norm(out.corners.shape());
      for (std::size_t i = 0; i < pred_norm.numel(); ++i) pred_norm[i] = out.corners[i] / S;
      bl.box_l = box_loss(pred_norm, targets_ltrb);
      Tensor<T> dnorm = box_loss_grad(pred_norm, targets_ltrb);
      bl.grads.dcorners = Tensor<T>(dnorm.shape());
      for (std::size_t i = 0; i < dnorm.numel(); ++i) bl.grads.dcorners[i] = dnorm[i] / S;
      break;
    }
    case HeadKind::kRcnn: {
      bl.box_l = box_loss(out.rcnn_norm, targets_ltrb);
      bl.grads.drcnn_norm = box_loss_grad(out.rcnn_norm, targets_ltrb);
      break;
    }
    case HeadKind::kRpn: {
      const int gh = out.rpn_map.dim(2), gw = out.rpn_map.dim(3);
      const double stride = static_cast<double>(cfg.input_size) / gh;
      bl.grads.drpn_map = Tensor<T>(out.rpn_map.shape());
      // positive cells: centers inside the half-scaled target box
      std::vector<std::vector<std::pair<int, int>>> pos(static_cast<std::size_t>(n));
      std::size_t total_pos = 0;
      for (int i = 0; i < n; ++i) {
        const double l = targets_ltrb(i, 0) * S, t = targets_ltrb(i, 1) * S;
        const double r = targets_ltrb(i, 2) * S, b = targets_ltrb(i, 3) * S;
        const double cx = (l + r) / 2, cy = (t + b) / 2;
        const double hw = (r - l) / 4, hh = (b - t) / 4;  // half of the 50%-scaled box
        for (int rr = 0; rr < gh; ++rr)
          for (int cc = 0; cc < gw; ++cc) {
            const double px = (cc + 0.5) * stride, py = (rr + 0.5) * stride;
            if (std::abs(px - cx) <= hw && std::abs(py - cy) <= hh)
              pos[static_cast<std::size_t>(i)].push_back({rr, cc});
          }
        if (pos[static_cast<std::size_t>(i)].empty()) {
          int bestr = 0, bestc = 0;
          double bestd = 1e30;
          for (int rr = 0; rr < gh; ++rr)
            for (int cc = 0; cc < gw; ++cc) {
              const double px = (cc + 0.5) * stride, py = (rr + 0.5) * stride;
              const double d = std::hypot(px - cx, py - cy);
              if (d < bestd) {
                bestd = d;
                bestr = rr;
                bestc = cc;
              }
            }
          pos[static_cast<std::size_t>(i)].push_back({bestr, bestc});
        }
        total_pos += pos[static_cast<std::size_t>(i)].size();
      }
      // distance MSE at positive cells, normalized units
      double mse = 0;
      const double denom = static_cast<double>(total_pos) * 4.0;
      for (int i = 0; i < n; ++i) {
        const double l = targets_ltrb(i, 0) * S, t = targets_ltrb(i, 1) * S;
        const double r = targets_ltrb(i, 2) * S, b = targets_ltrb(i, 3) * S;
        for (auto [rr, cc] : pos[static_cast<std::size_t>(i)]) {
          const double px = (cc + 0.5) * stride, py = (rr + 0.5) * stride;
          const double tgt[4] = {(px - l) / S, (py - t) / S, (r - px) / S, (b - py) / S};
          for (int k = 0; k < 4; ++k) {
            const double pred = out.rpn_map(i, k, rr, cc) / S;
            const double diff = pred - tgt[k];
            mse += diff * diff / denom;
            bl.grads.drpn_map(i, k, rr, cc) = static_cast<T>(2.0 * diff / denom / S);
          }
        }
      }
      bl.box_l = mse;
      // score BCE over every cell (logit-space gradient)
      double bce = 0;
      const double m = static_cast<double>(n) * gh * gw;
      for (int i = 0; i < n; ++i) {
        for (int rr = 0; rr < gh; ++rr)
          for (int cc = 0; cc < gw; ++cc) {
            const double logit = out.rpn_map(i, 4, rr, cc);
            const double p = 1.0 / (1.0 + std::exp(-logit));
            double tgt = 0;
            for (auto [pr, pc] : pos[static_cast<std::size_t>(i)])
              if (pr == rr && pc == cc) tgt = 1;
            const double pc_ = std::clamp(p, 1e-7, 1.0 - 1e-7);
            bce -= (tgt * std::log(pc_) + (1 - tgt) * std::log(1 - pc_)) / m;
            bl.grads.drpn_map(i, 4, rr, cc) = static_cast<T>((p - tgt) / m);
          }
      }
      bl.score_l = bce;
      break;
    }
  }

  if (!out.mask_probs.empty() && !target_masks.empty()) {
    bl.mask_l = mask_loss(out.mask_probs, target_masks);
    Tensor<T> g = mask_loss_grad_logits(out.mask_probs, target_masks);
    bl.grads.dmask_logits = Tensor<T>(g.shape());
    for (std::size_t i = 0; i < g.numel(); ++i)
      bl.grads.dmask_logits[i] = static_cast<T>(lc.lambda_mask) * g[i];
  }
  bl.total = bl.box_l + bl.score_l + lc.lambda_mask * bl.mask_l;
  return bl;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainSummary {
  std::vector<double> val_mean_iou;  // one entry per epoch
  double final_loss = 0;
  int iterations = 0;
};

/// Optimizes the model in place. Writes one structured record per iteration
/// (iter, loss, box_loss, mask_loss, lr) plus one per epoch (val_mean_iou) to
/// metrics_log when given. Throws on non-finite loss.
TrainSummary train(Model<float>& model, const std::vector<Sequence>& dataset,
                   const TrainConfig& tc, const LossConfig& lc, const JitterParams& jitter,
                   std::ostream* metrics_log);

}  // namespace boxref
