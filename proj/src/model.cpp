#include "boxref/model.hpp"

#include <stdexcept>

namespace boxref {

const char* head_kind_name(HeadKind k) {
  switch (k) {
    case HeadKind::kRpn: return "rpn";
    case HeadKind::kRcnn: return "rcnn";
    case HeadKind::kCorner: return "corner";
  }
  return "?";
}

HeadKind head_kind_from_name(const std::string& name) {
  if (name == "rpn") return HeadKind::kRpn;
  if (name == "rcnn") return HeadKind::kRcnn;
  if (name == "corner") return HeadKind::kCorner;
  throw std::invalid_argument("unknown head kind: " + name);
}

}  // namespace boxref
