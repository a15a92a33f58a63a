#include "boxref/sequence.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "boxref/image_io.hpp"

namespace fs = std::filesystem;

namespace boxref {

namespace {
std::string frame_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08d.png", i + 1);
  return buf;
}
}  // namespace

void save_sequence(const std::string& dir, const Sequence& seq) {
  if (seq.frames.size() != seq.gt.size())
    throw std::invalid_argument("save_sequence: frame/gt count mismatch");
  fs::create_directories(dir);
  std::ofstream gt(fs::path(dir) / "groundtruth.txt");
  if (!gt) throw std::runtime_error("cannot write " + dir + "/groundtruth.txt");
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    save_image_png((fs::path(dir) / frame_name(static_cast<int>(i))).string(), seq.frames[i]);
    const Box& b = seq.gt[i];
    gt << b.x << "," << b.y << "," << b.w << "," << b.h << "\n";
  }
  if (seq.has_masks()) {
    fs::create_directories(fs::path(dir) / "masks");
    for (std::size_t i = 0; i < seq.masks.size(); ++i)
      save_mask_png((fs::path(dir) / "masks" / frame_name(static_cast<int>(i))).string(),
                    seq.masks[i]);
  }
}

std::vector<Box> load_groundtruth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Box> boxes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    Box b;
    if (!(ss >> b.x >> b.y >> b.w >> b.h))
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed ground-truth line");
    std::string rest;
    if (ss >> rest)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed ground-truth line");
    boxes.push_back(b);
  }
  return boxes;
}

Sequence load_sequence(const std::string& dir) {
  Sequence seq;
  seq.id = fs::path(dir).filename().string();
  seq.gt = load_groundtruth((fs::path(dir) / "groundtruth.txt").string());
  for (std::size_t i = 0; i < seq.gt.size(); ++i) {
    const fs::path p = fs::path(dir) / frame_name(static_cast<int>(i));
    if (!fs::exists(p))
      throw std::runtime_error("missing frame " + p.string());
    seq.frames.push_back(load_image_png(p.string()));
  }
  const fs::path mask_dir = fs::path(dir) / "masks";
  if (fs::exists(mask_dir)) {
    for (std::size_t i = 0; i < seq.gt.size(); ++i) {
      const fs::path p = mask_dir / frame_name(static_cast<int>(i));
      if (!fs::exists(p)) throw std::runtime_error("missing mask " + p.string());
      seq.masks.push_back(load_mask_png(p.string()));
    }
  }
  return seq;
}

void save_dataset(const std::string& dir, const std::vector<Sequence>& seqs) {
  fs::create_directories(dir);
  for (const Sequence& s : seqs) save_sequence((fs::path(dir) / s.id).string(), s);
}

std::vector<Sequence> load_dataset(const std::string& dir) {
  if (!fs::exists(dir)) throw std::runtime_error("dataset directory not found: " + dir);
  std::vector<std::string> subdirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) subdirs.push_back(e.path().string());
  std::sort(subdirs.begin(), subdirs.end());
  if (subdirs.empty()) throw std::runtime_error("dataset directory has no sequences: " + dir);
  std::vector<Sequence> seqs;
  seqs.reserve(subdirs.size());
  for (const auto& d : subdirs) seqs.push_back(load_sequence(d));
  return seqs;
}

}  // namespace boxref
