#pragma once

#include <string>

#include "boxref/eval.hpp"
#include "boxref/model.hpp"
#include "boxref/refine.hpp"
#include "boxref/synthetic.hpp"
#include "boxref/training.hpp"

namespace boxref {

/// Everything a command needs, resolvable from defaults -> preset -> config
/// file -> command-line flags (later layers win). The master seed feeds every
/// per-component seed so one value reproduces a whole run.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  JitterParams jitter;
  LossConfig loss;
  SimulatedTrackerSpec tracker;
  SyntheticSpec data;
  RefineConfig refine;
  std::string dataset_dir = "data/synth";
  std::string eval_dataset_dir;  // empty: reuse dataset_dir
  std::string out_dir = "runs/out";
  std::string checkpoint;
  std::string feedback = "detached";
  std::uint64_t seed = 1;
  int workers = 1;

  FeedbackMode feedback_mode() const;
  void propagate_seed();  // copies the master seed into train/data/tracker
  void validate() const;
};

/// Built-in budget presets: "micro" (minutes) and "small" (tens of minutes).
void apply_preset(RunConfig& cfg, const std::string& name);

/// Strict parse: unknown keys anywhere are an error.
RunConfig load_run_config(const std::string& path, const RunConfig& base);

std::string run_config_to_json_string(const RunConfig& cfg);
void write_resolved_config(const std::string& path, const RunConfig& cfg);

}  // namespace boxref
