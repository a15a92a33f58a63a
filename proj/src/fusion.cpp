#include "boxref/fusion.hpp"

#include <stdexcept>

namespace boxref {

FusionKind fusion_kind_from_name(const std::string& name) {
  if (name == "naive") return FusionKind::kNaive;
  if (name == "depthwise") return FusionKind::kDepthwise;
  if (name == "pixelwise") return FusionKind::kPixelwise;
  throw std::invalid_argument("unknown fusion kind: " + name);
}

}  // namespace boxref
