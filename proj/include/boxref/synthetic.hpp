#pragma once

#include <cstdint>
#include <vector>

#include "boxref/sequence.hpp"

namespace boxref {

enum class ObjectKind { kEllipse, kRectangle, kPolygon };

/// Controls the synthetic moving-object sequence generator. Every sequence
/// carries exact per-frame masks; the ground-truth box is the mask's bounding
/// rectangle by construction.
struct SyntheticSpec {
  int num_sequences = 8;
  int frames_per_sequence = 40;
  int image_size = 256;
  std::vector<ObjectKind> kinds = {ObjectKind::kEllipse, ObjectKind::kRectangle,
                                   ObjectKind::kPolygon};
  double min_object_frac = 0.18;   // object extent relative to image size
  double max_object_frac = 0.38;
  double motion_frac = 0.02;       // per-frame velocity noise / image size
  double scale_wobble = 0.02;      // per-frame log-size noise
  double deform_wobble = 0.03;     // per-frame shape-deformation noise
  double background_noise = 0.05;  // additive pixel noise amplitude
  std::uint64_t seed = 1;

  void validate() const;
};

/// Deterministic in (spec.seed, index); regenerating is bit-identical.
Sequence generate_sequence(const SyntheticSpec& spec, int index);
std::vector<Sequence> generate_synthetic_dataset(const SyntheticSpec& spec);

}  // namespace boxref
