#include "boxref/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace boxref {

FeedbackMode RunConfig::feedback_mode() const {
  if (feedback == "detached") return FeedbackMode::kDetached;
  if (feedback == "feedback") return FeedbackMode::kFeedback;
  throw std::invalid_argument("feedback must be 'detached' or 'feedback'");
}

void RunConfig::propagate_seed() {
  train.seed = seed;
  data.seed = seed;
  tracker.seed = seed ^ 0x51edULL;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  loss.validate();
  tracker.validate();
  data.validate();
  (void)feedback_mode();
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (jitter.f_s < 0 || jitter.f_c < 0)
    throw std::invalid_argument("jitter factors must be nonnegative");
  if (refine.crop_factor <= 0) throw std::invalid_argument("crop_factor must be positive");
}

void apply_preset(RunConfig& cfg, const std::string& name) {
  if (name.empty()) return;
  if (name == "micro") {
    cfg.model.input_size = 128;
    cfg.train.epochs = 3;
    cfg.train.iterations_per_epoch = 80;
    cfg.train.batch_size = 8;
    cfg.train.base_learning_rate = 2e-3;
    cfg.data.num_sequences = 10;
    cfg.data.frames_per_sequence = 30;
    cfg.data.image_size = 128;
    cfg.tracker.sigma_translation = 0.2;
    cfg.tracker.sigma_log_scale = 0.1;
  } else if (name == "small") {
    cfg.model.input_size = 256;
    cfg.train.epochs = 8;
    cfg.train.iterations_per_epoch = 150;
    cfg.train.batch_size = 16;
    cfg.train.base_learning_rate = 1e-3;
    cfg.data.num_sequences = 16;
    cfg.data.frames_per_sequence = 40;
    cfg.data.image_size = 256;
    cfg.tracker.sigma_translation = 0.2;
    cfg.tracker.sigma_log_scale = 0.1;
  } else {
    throw std::invalid_argument("unknown preset: " + name + " (expected micro or small)");
  }
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k))
      throw std::invalid_argument("config: unknown key '" + k + "' in " + where);
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

ObjectKind object_kind_from_name(const std::string& s) {
  if (s == "ellipse") return ObjectKind::kEllipse;
  if (s == "rectangle") return ObjectKind::kRectangle;
  if (s == "polygon") return ObjectKind::kPolygon;
  throw std::invalid_argument("unknown object kind: " + s);
}

const char* object_kind_name(ObjectKind k) {
  switch (k) {
    case ObjectKind::kEllipse: return "ellipse";
    case ObjectKind::kRectangle: return "rectangle";
    case ObjectKind::kPolygon: return "polygon";
  }
  return "?";
}

void parse_model(const json& j, ModelConfig& m) {
  check_keys(j,
             {"backbone_channels", "fusion", "head", "with_mask", "input_size",
              "softargmax_temperature", "fused_channels"},
             "model");
  if (j.contains("backbone_channels"))
    j.at("backbone_channels").get_to(m.backbone.stage_channels);
  if (j.contains("fusion")) m.fusion_kind = fusion_kind_from_name(j.at("fusion"));
  if (j.contains("head")) m.head_kind = head_kind_from_name(j.at("head"));
  get_to(j, "with_mask", m.with_mask);
  get_to(j, "input_size", m.input_size);
  get_to(j, "softargmax_temperature", m.softargmax_temperature);
  get_to(j, "fused_channels", m.fused_channels);
}

void parse_train(const json& j, TrainConfig& t) {
  check_keys(j,
             {"epochs", "iterations_per_epoch", "batch_size", "base_learning_rate",
              "lr_halving_period_epochs", "max_frame_interval"},
             "train");
  get_to(j, "epochs", t.epochs);
  get_to(j, "iterations_per_epoch", t.iterations_per_epoch);
  get_to(j, "batch_size", t.batch_size);
  get_to(j, "base_learning_rate", t.base_learning_rate);
  get_to(j, "lr_halving_period_epochs", t.lr_halving_period_epochs);
  get_to(j, "max_frame_interval", t.max_frame_interval);
}

void parse_data(const json& j, SyntheticSpec& d) {
  check_keys(j,
             {"num_sequences", "frames_per_sequence", "image_size", "kinds", "min_object_frac",
              "max_object_frac", "motion_frac", "scale_wobble", "deform_wobble",
              "background_noise"},
             "data");
  get_to(j, "num_sequences", d.num_sequences);
  get_to(j, "frames_per_sequence", d.frames_per_sequence);
  get_to(j, "image_size", d.image_size);
  if (j.contains("kinds")) {
    d.kinds.clear();
    for (const auto& k : j.at("kinds")) d.kinds.push_back(object_kind_from_name(k));
  }
  get_to(j, "min_object_frac", d.min_object_frac);
  get_to(j, "max_object_frac", d.max_object_frac);
  get_to(j, "motion_frac", d.motion_frac);
  get_to(j, "scale_wobble", d.scale_wobble);
  get_to(j, "deform_wobble", d.deform_wobble);
  get_to(j, "background_noise", d.background_noise);
}

}  // namespace

RunConfig load_run_config(const std::string& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config " + path + ": " + e.what());
  }
  check_keys(j,
             {"model", "train", "jitter", "loss", "tracker", "data", "refine", "dataset_dir",
              "eval_dataset_dir", "out_dir", "checkpoint", "feedback", "seed", "workers"},
             "top level");
  RunConfig cfg = base;
  if (j.contains("model")) parse_model(j.at("model"), cfg.model);
  if (j.contains("train")) parse_train(j.at("train"), cfg.train);
  if (j.contains("jitter")) {
    check_keys(j.at("jitter"), {"f_s", "f_c"}, "jitter");
    get_to(j.at("jitter"), "f_s", cfg.jitter.f_s);
    get_to(j.at("jitter"), "f_c", cfg.jitter.f_c);
  }
  if (j.contains("loss")) {
    check_keys(j.at("loss"), {"lambda_mask"}, "loss");
    get_to(j.at("loss"), "lambda_mask", cfg.loss.lambda_mask);
  }
  if (j.contains("tracker")) {
    const json& t = j.at("tracker");
    check_keys(t, {"sigma_translation", "sigma_log_scale", "drift_rate", "failure_prob"},
               "tracker");
    get_to(t, "sigma_translation", cfg.tracker.sigma_translation);
    get_to(t, "sigma_log_scale", cfg.tracker.sigma_log_scale);
    get_to(t, "drift_rate", cfg.tracker.drift_rate);
    get_to(t, "failure_prob", cfg.tracker.failure_prob);
  }
  if (j.contains("data")) parse_data(j.at("data"), cfg.data);
  if (j.contains("refine")) {
    const json& r = j.at("refine");
    check_keys(r, {"crop_factor", "mask_enabled", "mask_threshold"}, "refine");
    get_to(r, "crop_factor", cfg.refine.crop_factor);
    get_to(r, "mask_enabled", cfg.refine.mask_enabled);
    get_to(r, "mask_threshold", cfg.refine.mask_threshold);
  }
  get_to(j, "dataset_dir", cfg.dataset_dir);
  get_to(j, "eval_dataset_dir", cfg.eval_dataset_dir);
  get_to(j, "out_dir", cfg.out_dir);
  get_to(j, "checkpoint", cfg.checkpoint);
  get_to(j, "feedback", cfg.feedback);
  get_to(j, "seed", cfg.seed);
  get_to(j, "workers", cfg.workers);
  return cfg;
}

std::string run_config_to_json_string(const RunConfig& cfg) {
  json j;
  j["model"] = {{"backbone_channels", cfg.model.backbone.stage_channels},
                {"fusion", fusion_kind_name(cfg.model.fusion_kind)},
                {"head", head_kind_name(cfg.model.head_kind)},
                {"with_mask", cfg.model.with_mask},
                {"input_size", cfg.model.input_size},
                {"softargmax_temperature", cfg.model.softargmax_temperature},
                {"fused_channels", cfg.model.fused_channels}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"iterations_per_epoch", cfg.train.iterations_per_epoch},
                {"batch_size", cfg.train.batch_size},
                {"base_learning_rate", cfg.train.base_learning_rate},
                {"lr_halving_period_epochs", cfg.train.lr_halving_period_epochs},
                {"max_frame_interval", cfg.train.max_frame_interval}};
  j["jitter"] = {{"f_s", cfg.jitter.f_s}, {"f_c", cfg.jitter.f_c}};
  j["loss"] = {{"lambda_mask", cfg.loss.lambda_mask}};
  j["tracker"] = {{"sigma_translation", cfg.tracker.sigma_translation},
                  {"sigma_log_scale", cfg.tracker.sigma_log_scale},
                  {"drift_rate", cfg.tracker.drift_rate},
                  {"failure_prob", cfg.tracker.failure_prob}};
  std::vector<std::string> kind_names;
  for (ObjectKind k : cfg.data.kinds) kind_names.push_back(object_kind_name(k));
  j["data"] = {{"num_sequences", cfg.data.num_sequences},
               {"frames_per_sequence", cfg.data.frames_per_sequence},
               {"image_size", cfg.data.image_size},
               {"kinds", kind_names},
               {"min_object_frac", cfg.data.min_object_frac},
               {"max_object_frac", cfg.data.max_object_frac},
               {"motion_frac", cfg.data.motion_frac},
               {"scale_wobble", cfg.data.scale_wobble},
               {"deform_wobble", cfg.data.deform_wobble},
               {"background_noise", cfg.data.background_noise}};
  j["refine"] = {{"crop_factor", cfg.refine.crop_factor},
                 {"mask_enabled", cfg.refine.mask_enabled},
                 {"mask_threshold", cfg.refine.mask_threshold}};
  j["dataset_dir"] = cfg.dataset_dir;
  j["eval_dataset_dir"] = cfg.eval_dataset_dir;
  j["out_dir"] = cfg.out_dir;
  j["checkpoint"] = cfg.checkpoint;
  j["feedback"] = cfg.feedback;
  j["seed"] = cfg.seed;
  j["workers"] = cfg.workers;
  return j.dump(2) + "\n";
}

void write_resolved_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << run_config_to_json_string(cfg);
}

}  // namespace boxref
