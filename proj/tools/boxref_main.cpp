// Command-line entry point: dataset generation, training, evaluation, the
// ground-truth-centered oracle experiment, the fusion/head ablation grid,
// correlation-response demos, and report merging.
//
// Option resolution order: built-in defaults, then --preset, then --config,
// then explicit flags. The fully resolved configuration is echoed to
// <out>/config.resolved.json and every output lands under <out>.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "boxref/checkpoint.hpp"
#include "boxref/config.hpp"
#include "boxref/eval.hpp"
#include "boxref/plot.hpp"
#include "boxref/synthetic.hpp"
#include "boxref/training.hpp"

namespace fs = std::filesystem;
using namespace boxref;

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void add_common(CLI::App* cmd, CommonFlags& fl) {
  cmd->add_option("--config", fl.config, "JSON config file (unknown keys are rejected)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", fl.out, "run directory for all outputs");
  cmd->add_option("--preset", fl.preset, "size preset applied before the config file")
      ->check(CLI::IsMember({"micro", "small"}));
  cmd->add_option("--seed", fl.seed, "master seed (propagated to data/train/tracker)");
  cmd->add_option("--workers", fl.workers, "parallel sequence evaluation cap");
}

RunConfig resolve(const CommonFlags& fl) {
  RunConfig cfg;
  if (!fl.preset.empty()) apply_preset(cfg, fl.preset);
  if (!fl.config.empty()) cfg = load_run_config(fl.config, cfg);
  if (!fl.out.empty()) cfg.out_dir = fl.out;
  if (fl.seed) cfg.seed = *fl.seed;
  if (fl.workers) cfg.workers = *fl.workers;
  cfg.propagate_seed();
  cfg.validate();
  return cfg;
}

// Relative data/checkpoint paths live inside the run directory.
std::string in_run_dir(const RunConfig& cfg, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(cfg.out_dir) / p).string();
}

std::string prepare_run_dir(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  for (const char* sub : {"checkpoints", "results", "reports", "plots"})
    fs::create_directories(fs::path(cfg.out_dir) / sub);
  const std::string resolved = (fs::path(cfg.out_dir) / "config.resolved.json").string();
  write_resolved_config(resolved, cfg);
  return resolved;
}

std::string default_checkpoint(const RunConfig& cfg) {
  if (!cfg.checkpoint.empty()) return in_run_dir(cfg, cfg.checkpoint);
  return (fs::path(cfg.out_dir) / "checkpoints" / "model.ckpt").string();
}

std::vector<Sequence> load_eval_dataset(const RunConfig& cfg) {
  const std::string dir =
      cfg.eval_dataset_dir.empty() ? cfg.dataset_dir : cfg.eval_dataset_dir;
  return load_dataset(in_run_dir(cfg, dir));
}

std::vector<std::vector<Box>> gts_of(const std::vector<Sequence>& seqs) {
  std::vector<std::vector<Box>> gts;
  gts.reserve(seqs.size());
  for (const auto& s : seqs) gts.push_back(s.gt);
  return gts;
}

std::vector<std::vector<Box>> gts_of(const std::vector<RunResult>& results) {
  std::vector<std::vector<Box>> gts;
  gts.reserve(results.size());
  for (const auto& r : results) gts.push_back(r.gt);
  return gts;
}

void save_results(const RunConfig& cfg, const std::vector<RunResult>& results,
                  const std::string& prefix) {
  for (const auto& r : results)
    save_run_result(
        (fs::path(cfg.out_dir) / "results" / (prefix + r.sequence_id + ".result.txt")).string(),
        r);
}

void plot_reports(const RunConfig& cfg, const std::vector<MetricReport>& reports,
                  const std::string& stem) {
  std::vector<CurveSeries> succ, prec;
  for (const auto& r : reports) {
    succ.push_back({r.tag, r.success_curve});
    prec.push_back({r.tag, r.precision_curve});
  }
  plot_curves((fs::path(cfg.out_dir) / "plots" / (stem + "_success.png")).string(),
              "Success (fraction of frames with IoU > t)", "IoU threshold",
              success_thresholds(), succ);
  plot_curves((fs::path(cfg.out_dir) / "plots" / (stem + "_precision.png")).string(),
              "Precision (fraction of frames within d px)", "center error (px)",
              precision_grid(), prec);
}

void emit_reports(const RunConfig& cfg, const std::vector<MetricReport>& reports,
                  const std::string& stem) {
  write_metric_report_csv(
      (fs::path(cfg.out_dir) / "reports" / (stem + ".csv")).string(), reports);
  std::ofstream txt(fs::path(cfg.out_dir) / "reports" / (stem + ".txt"));
  write_metric_report_text(txt, reports);
  write_metric_report_text(std::cout, reports);
  plot_reports(cfg, reports, stem);
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const RunConfig& cfg) {
  const auto dataset = generate_synthetic_dataset(cfg.data);
  const std::string dir = in_run_dir(cfg, cfg.dataset_dir);
  save_dataset(dir, dataset);
  std::cout << "wrote " << dataset.size() << " sequences x " << cfg.data.frames_per_sequence
            << " frames to " << dir << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const auto dataset = load_dataset(in_run_dir(cfg, cfg.dataset_dir));
  Model<float> model(cfg.model, cfg.seed);
  std::ofstream log(fs::path(cfg.out_dir) / "train_log.jsonl");
  const TrainSummary s = train(model, dataset, cfg.train, cfg.loss, cfg.jitter, &log);
  const std::string ckpt = default_checkpoint(cfg);
  save_checkpoint(ckpt, model);
  std::cout << "trained " << s.iterations << " iterations, final loss " << s.final_loss
            << ", val mean IoU " << (s.val_mean_iou.empty() ? 0.0 : s.val_mean_iou.back())
            << "\nsaved checkpoint to " << ckpt << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, bool no_refine, const std::string& ckpt_flag) {
  const auto dataset = load_eval_dataset(cfg);
  std::optional<Model<float>> model;
  if (!no_refine) {
    const std::string ckpt = ckpt_flag.empty() ? default_checkpoint(cfg) : ckpt_flag;
    model.emplace(load_checkpoint(ckpt));
  }
  const EvalSetup setup{cfg.tracker, cfg.feedback_mode(), cfg.workers};
  const auto results =
      evaluate_dataset(dataset, model ? &*model : nullptr, cfg.refine, setup);
  save_results(cfg, results, "");
  const auto gts = gts_of(dataset);
  std::vector<MetricReport> reports;
  reports.push_back(compute_metrics(results, gts, /*use_refined=*/false, "coarse"));
  reports.push_back(compute_metrics(results, gts, /*use_refined=*/true,
                                    model ? "refined" : "coarse (no refiner)"));
  emit_reports(cfg, reports, "metrics");
  return 0;
}

int cmd_oracle(const RunConfig& cfg, const std::string& ckpt_flag) {
  const auto dataset = load_eval_dataset(cfg);
  const std::string ckpt = ckpt_flag.empty() ? default_checkpoint(cfg) : ckpt_flag;
  Model<float> model = load_checkpoint(ckpt);
  const auto results = oracle_evaluate_dataset(dataset, &model, cfg.refine, cfg.workers);
  save_results(cfg, results, "oracle_");
  const auto gts = gts_of(dataset);
  std::vector<MetricReport> reports;
  reports.push_back(compute_metrics(results, gts, /*use_refined=*/true, "oracle"));
  emit_reports(cfg, reports, "oracle_metrics");
  return 0;
}

int cmd_ablate(const RunConfig& cfg) {
  const auto train_data = load_dataset(in_run_dir(cfg, cfg.dataset_dir));
  const auto eval_data = cfg.eval_dataset_dir.empty()
                             ? train_data
                             : load_dataset(in_run_dir(cfg, cfg.eval_dataset_dir));
  AblationSetup setup;
  setup.model = cfg.model;
  setup.train = cfg.train;
  setup.loss = cfg.loss;
  setup.jitter = cfg.jitter;
  setup.tracker = cfg.tracker;
  setup.workers = cfg.workers;
  const auto rows = ablation_grid(train_data, eval_data, setup, &std::cout);
  write_ablation_csv((fs::path(cfg.out_dir) / "reports" / "ablation.csv").string(), rows);
  std::ofstream txt(fs::path(cfg.out_dir) / "reports" / "ablation.txt");
  write_ablation_text(txt, rows);
  write_ablation_text(std::cout, rows);
  return 0;
}

int cmd_demo(const RunConfig& cfg, const std::string& ckpt_flag, int seq_idx, int ref_frame,
             int test_frame) {
  const auto dataset = load_eval_dataset(cfg);
  if (seq_idx < 0 || seq_idx >= static_cast<int>(dataset.size()))
    throw std::invalid_argument("demo: --sequence out of range");
  const Sequence& seq = dataset[static_cast<std::size_t>(seq_idx)];
  if (test_frame < 0) test_frame = seq.length() / 2;
  if (ref_frame < 0 || ref_frame >= seq.length() || test_frame >= seq.length())
    throw std::invalid_argument("demo: frame index out of range");

  const std::string ckpt = ckpt_flag.empty() ? default_checkpoint(cfg) : ckpt_flag;
  Model<float> model = load_checkpoint(ckpt);
  const int S = model.config().input_size;

  const auto ref = crop_and_resize(seq.frames[static_cast<std::size_t>(ref_frame)],
                                   make_search_region(seq.gt[static_cast<std::size_t>(ref_frame)],
                                                      2.0, S));
  const auto test = crop_and_resize(
      seq.frames[static_cast<std::size_t>(test_frame)],
      make_search_region(seq.gt[static_cast<std::size_t>(test_frame)], 2.0, S));
  const auto [ref_feat, ref_skips] = model.extract_features(ref.crop);
  const auto [test_feat, test_skips] = model.extract_features(test.crop);

  std::vector<Tensor<float>> tiles = {ref.crop, test.crop};
  std::vector<std::string> labels = {"reference crop", "test crop"};
  for (FusionKind kind :
       {FusionKind::kNaive, FusionKind::kDepthwise, FusionKind::kPixelwise}) {
    const Tensor<float> corr = correlate(kind, ref_feat, test_feat);
    const int ch = corr.dim(0), gh = corr.dim(1), gw = corr.dim(2);
    Tensor<float> resp({gh, gw});
    for (int r = 0; r < gh; ++r)
      for (int c = 0; c < gw; ++c) {
        float acc = 0;
        for (int k = 0; k < ch; ++k) acc += corr(k, r, c);
        resp(r, c) = acc / static_cast<float>(ch);
      }
    const int up = std::max(1, S / gh);
    const std::string name = fusion_kind_name(kind);
    save_heatmap_png(
        (fs::path(cfg.out_dir) / "plots" / ("demo_" + name + ".png")).string(), resp, up);
    tiles.push_back(colorize_heatmap(resp, up));
    labels.push_back(name + " response");
  }
  const std::string grid = (fs::path(cfg.out_dir) / "plots" / "demo_responses.png").string();
  save_image_grid_png(grid, tiles, labels, static_cast<int>(tiles.size()));
  std::cout << "wrote " << grid << "\n";
  return 0;
}

int cmd_report(const RunConfig& cfg, const std::vector<std::string>& inputs,
               const std::string& tag) {
  std::vector<RunResult> results;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> files;
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && e.path().string().ends_with(".result.txt"))
          files.push_back(e.path().string());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) results.push_back(load_run_result(f));
    } else {
      results.push_back(load_run_result(in));
    }
  }
  if (results.empty()) throw std::runtime_error("report: no run results found");
  const auto gts = gts_of(results);
  std::vector<MetricReport> reports;
  reports.push_back(compute_metrics(results, gts, /*use_refined=*/false, tag + " coarse"));
  reports.push_back(compute_metrics(results, gts, /*use_refined=*/true, tag + " refined"));
  emit_reports(cfg, reports, "report");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"box refinement toolkit: synthetic data, training, evaluation, ablations"};
  app.require_subcommand(1);

  CommonFlags fl;
  std::string ckpt_flag;
  bool no_refine = false;
  int seq_idx = 0, ref_frame = 0, test_frame = -1;
  std::vector<std::string> report_inputs;
  std::string report_tag = "merged";

  CLI::App* c_gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  add_common(c_gen, fl);

  CLI::App* c_train = app.add_subcommand("train", "train a model and save a checkpoint");
  add_common(c_train, fl);

  CLI::App* c_eval = app.add_subcommand("eval", "run the simulated tracker with refinement");
  add_common(c_eval, fl);
  c_eval->add_option("--checkpoint", ckpt_flag, "checkpoint path");
  c_eval->add_flag("--no-refine", no_refine, "evaluate the coarse tracker alone");

  CLI::App* c_oracle =
      app.add_subcommand("oracle", "ground-truth-centered evaluation protocol");
  add_common(c_oracle, fl);
  c_oracle->add_option("--checkpoint", ckpt_flag, "checkpoint path");

  CLI::App* c_ablate = app.add_subcommand("ablate", "train/eval all fusion x head x mask combos");
  add_common(c_ablate, fl);

  CLI::App* c_demo = app.add_subcommand("demo", "render correlation response maps");
  add_common(c_demo, fl);
  c_demo->add_option("--checkpoint", ckpt_flag, "checkpoint path");
  c_demo->add_option("--sequence", seq_idx, "sequence index");
  c_demo->add_option("--ref-frame", ref_frame, "reference frame index");
  c_demo->add_option("--test-frame", test_frame, "test frame index (default: mid-sequence)");

  CLI::App* c_report = app.add_subcommand("report", "merge saved run results into one report");
  add_common(c_report, fl);
  c_report->add_option("inputs", report_inputs, "run-result files or directories")->required();
  c_report->add_option("--tag", report_tag, "label prefix for the merged rows");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = resolve(fl);
    const std::string resolved = prepare_run_dir(cfg);
    std::cout << "resolved config: " << resolved << "\n";
    if (c_gen->parsed()) return cmd_gen_data(cfg);
    if (c_train->parsed()) return cmd_train(cfg);
    if (c_eval->parsed()) return cmd_eval(cfg, no_refine, ckpt_flag);
    if (c_oracle->parsed()) return cmd_oracle(cfg, ckpt_flag);
    if (c_ablate->parsed()) return cmd_ablate(cfg);
    if (c_demo->parsed()) return cmd_demo(cfg, ckpt_flag, seq_idx, ref_frame, test_frame);
    if (c_report->parsed()) return cmd_report(cfg, report_inputs, report_tag);
    std::cerr << "error: no command\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
