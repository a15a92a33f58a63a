#include "boxref/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace boxref {

namespace {

constexpr char kMagic[8] = {'B', 'O', 'X', 'R', 'E', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

json model_config_to_json(const ModelConfig& cfg) {
  return json{{"backbone_channels", cfg.backbone.stage_channels},
              {"fusion", fusion_kind_name(cfg.fusion_kind)},
              {"head", head_kind_name(cfg.head_kind)},
              {"with_mask", cfg.with_mask},
              {"input_size", cfg.input_size},
              {"softargmax_temperature", cfg.softargmax_temperature},
              {"fused_channels", cfg.fused_channels}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  j.at("backbone_channels").get_to(cfg.backbone.stage_channels);
  cfg.fusion_kind = fusion_kind_from_name(j.at("fusion"));
  cfg.head_kind = head_kind_from_name(j.at("head"));
  j.at("with_mask").get_to(cfg.with_mask);
  j.at("input_size").get_to(cfg.input_size);
  j.at("softargmax_temperature").get_to(cfg.softargmax_temperature);
  j.at("fused_channels").get_to(cfg.fused_channels);
  return cfg;
}

struct Header {
  ModelConfig config;
  json tensors;  // array of {name, shape, offset}
};

Header read_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error(path + ": not a checkpoint file");
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in) throw std::runtime_error(path + ": truncated checkpoint header");
  if (version != kVersion)
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error(path + ": truncated checkpoint header");
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": bad checkpoint header: " + e.what());
  }
  Header h;
  h.config = model_config_from_json(j.at("config"));
  h.tensors = j.at("tensors");
  return h;
}

void load_tensors(std::ifstream& in, const std::string& path, const Header& h,
                  Model<float>& model) {
  auto state = model.named_state();
  if (state.size() != h.tensors.size())
    throw std::runtime_error(path + ": checkpoint has " + std::to_string(h.tensors.size()) +
                             " tensors, model expects " + std::to_string(state.size()));
  const std::streampos data_start = in.tellg();
  for (std::size_t i = 0; i < state.size(); ++i) {
    const json& entry = h.tensors.at(i);
    const std::string name = entry.at("name");
    if (name != state[i].first)
      throw std::runtime_error(path + ": tensor " + std::to_string(i) + " is '" + name +
                               "', model expects '" + state[i].first + "'");
    std::vector<int> shape;
    entry.at("shape").get_to(shape);
    Tensor<float>& dst = *state[i].second;
    if (shape != dst.shape())
      throw std::runtime_error(path + ": shape mismatch for tensor '" + name + "'");
    const std::uint64_t offset = entry.at("offset");
    in.seekg(data_start + static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(dst.data()),
            static_cast<std::streamsize>(dst.numel() * sizeof(float)));
    if (!in) throw std::runtime_error(path + ": truncated tensor data for '" + name + "'");
  }
}

}  // namespace

void save_checkpoint(const std::string& path, Model<float>& model) {
  auto state = model.named_state();
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& p : state) {
    tensors.push_back(
        json{{"name", p.first}, {"shape", p.second->shape()}, {"offset", offset}});
    offset += p.second->numel() * sizeof(float);
  }
  const json header = {{"config", model_config_to_json(model.config())}, {"tensors", tensors}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(kMagic, 8);
  const std::uint32_t version = kVersion;
  const std::uint64_t header_len = text.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : state)
    out.write(reinterpret_cast<const char*>(p.second->data()),
              static_cast<std::streamsize>(p.second->numel() * sizeof(float)));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

Model<float> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  Header h = read_header(in, path);
  Model<float> model(h.config, /*seed=*/0);
  load_tensors(in, path, h, model);
  return model;
}

void load_checkpoint_into(const std::string& path, Model<float>& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  Header h = read_header(in, path);
  const json want = model_config_to_json(model.config());
  const json have = model_config_to_json(h.config);
  if (want != have)
    throw std::runtime_error(path + ": checkpoint config does not match model config");
  load_tensors(in, path, h, model);
}

}  // namespace boxref
