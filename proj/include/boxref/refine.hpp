#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "boxref/model.hpp"

namespace boxref {

struct RefineConfig {
  double crop_factor = 2.0;
  bool mask_enabled = false;
  double mask_threshold = 0.5;
};

/// Bounding rectangle of pixels >= threshold, inclusive pixel extents.
/// Throws std::runtime_error("empty mask") when no pixel passes.
Box mask_to_box(const Mask& mask, double threshold);

/// Per-sequence refinement state. The reference branch is computed exactly
/// once, from the first frame's ground truth, and reused for every later frame.
class Refiner {
 public:
  Refiner(Model<float>* model, const RefineConfig& cfg) : model_(model), cfg_(cfg) {}

  void initialize(const Image& frame, const Box& gt);

  struct Refined {
    Box box;                    // image coordinates, clamped, min side 1 px
    std::optional<Mask> mask;   // image-resolution probabilities when enabled
  };

  /// Crops a crop_factor x coarse concentric region, runs the model, and maps
  /// the prediction back to image coordinates. Rejects degenerate coarse boxes.
  Refined refine(const Image& frame, const Box& coarse);

  /// Same, but with a caller-supplied search region (oracle-centered runs).
  Refined refine_with_spec(const Image& frame, const CropSpec& spec);

  bool initialized() const { return initialized_; }
  int reference_extractions() const { return ref_extractions_; }
  const RefineConfig& config() const { return cfg_; }
  Model<float>* model() const { return model_; }

 private:
  Model<float>* model_ = nullptr;
  RefineConfig cfg_;
  Tensor<float> ref_feat_;
  bool initialized_ = false;
  int ref_extractions_ = 0;
};

// ---------------------------------------------------------------------------
// Base trackers
// ---------------------------------------------------------------------------

/// Behavioral contract: init on frame 1 with ground truth, then track each
/// subsequent frame in order. observe_refined is an optional feedback hook
/// called after refinement when the harness runs in feedback mode.
class BaseTracker {
 public:
  virtual ~BaseTracker() = default;
  virtual void init(const Image& frame, const Box& gt) = 0;
  virtual Box track(const Image& frame) = 0;
  virtual void observe_refined(const Box& refined) { (void)refined; }
};

struct SimulatedTrackerSpec {
  double sigma_translation = 0.0;  // per-frame center noise, fraction of sqrt(w*h)
  double sigma_log_scale = 0.0;    // per-frame log-size noise
  double drift_rate = 0.0;         // cumulative drift per frame, fraction of sqrt(w*h)
  double failure_prob = 0.0;       // chance of a large displacement per frame
  std::uint64_t seed = 1;

  void validate() const {
    if (sigma_translation < 0 || sigma_log_scale < 0 || drift_rate < 0 || failure_prob < 0 ||
        failure_prob > 1)
      throw std::invalid_argument("simulated tracker spec out of range");
  }
};

/// Emits the ground truth perturbed by translation noise, log-scale noise,
/// cumulative drift, and occasional failure jumps; deterministic per seed.
/// In detached mode (default) errors are drawn fresh around ground truth each
/// frame. After observe_refined, the next frame's error is anchored at the
/// refined box's offset instead, so good refinement feeds back into the
/// tracker (feedback mode).
class SimulatedTracker : public BaseTracker {
 public:
  SimulatedTracker(const SimulatedTrackerSpec& spec, const std::vector<Box>& gt);

  void init(const Image& frame, const Box& gt) override;
  Box track(const Image& frame) override;
  void observe_refined(const Box& refined) override;

 private:
  SimulatedTrackerSpec spec_;
  const std::vector<Box>* gt_;
  std::mt19937 rng_;
  int next_idx_ = 0;
  double drift_x_ = 0, drift_y_ = 0, drift_dir_ = 0;
  std::optional<Box> last_refined_;
};

std::unique_ptr<BaseTracker> make_simulated_tracker(const SimulatedTrackerSpec& spec,
                                                    const std::vector<Box>& gt);

}  // namespace boxref
