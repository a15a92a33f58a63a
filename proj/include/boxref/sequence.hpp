#pragma once

#include <string>
#include <vector>

#include "boxref/geometry.hpp"

namespace boxref {

/// One tracking sequence: frames, per-frame ground-truth boxes, and (optionally)
/// per-frame binary object masks.
struct Sequence {
  std::string id;
  std::vector<Image> frames;
  std::vector<Box> gt;
  std::vector<Mask> masks;  // empty when the sequence carries no masks

  int length() const { return static_cast<int>(frames.size()); }
  bool has_masks() const { return !masks.empty(); }
};

/// On-disk layout per sequence directory:
///   00000001.png, 00000002.png, ...   frames, 1-based
///   groundtruth.txt                   one "x,y,w,h" line per frame
///   masks/00000001.png, ...           optional binary masks
void save_sequence(const std::string& dir, const Sequence& seq);
Sequence load_sequence(const std::string& dir);

/// A dataset directory holds one subdirectory per sequence; loaded in sorted order.
void save_dataset(const std::string& dir, const std::vector<Sequence>& seqs);
std::vector<Sequence> load_dataset(const std::string& dir);

/// Parses a ground-truth file; malformed lines are reported with file and line number.
std::vector<Box> load_groundtruth(const std::string& path);

}  // namespace boxref
