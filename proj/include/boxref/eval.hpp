#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "boxref/refine.hpp"
#include "boxref/sequence.hpp"
#include "boxref/training.hpp"

namespace boxref {

enum class RunMode { kStandard, kOracle };
enum class FeedbackMode { kDetached, kFeedback };

const char* run_mode_name(RunMode m);
const char* feedback_mode_name(FeedbackMode m);

/// One-pass evaluation record for a single sequence.
struct RunResult {
  std::string sequence_id;
  std::vector<Box> coarse;
  std::vector<Box> refined;  // equals coarse when no refiner ran
  std::vector<Box> gt;       // carried along so saved results are self-contained
  std::vector<double> base_ms, refine_ms, total_ms;
  RunMode mode = RunMode::kStandard;
  FeedbackMode feedback = FeedbackMode::kDetached;
  bool refiner_ran = false;
};

struct CurveMetric {
  double value = 0;
  std::vector<double> curve;
};

/// Success thresholds: 21 IoU values {0, 0.05, ..., 1.0}. A frame counts at
/// threshold t when IoU > t (strict), so perfect predictions score 20/21.
std::vector<double> success_thresholds();
/// Precision curve grid: 101 center-distance values {0, 0.5, ..., 50} px.
std::vector<double> precision_grid();
/// Normalized-precision grid: 101 values {0, 0.005, ..., 0.5}.
std::vector<double> norm_precision_grid();

/// value = mean of the 21-point success curve.
CurveMetric success_auc(const std::vector<Box>& pred, const std::vector<Box>& gt);
/// Counts frames with center distance <= threshold (inclusive). value is the
/// fraction at pixel_threshold; curve spans precision_grid().
CurveMetric precision(const std::vector<Box>& pred, const std::vector<Box>& gt,
                      double pixel_threshold = 20.0);
/// Center error normalized componentwise by the ground-truth (w,h); value =
/// mean of the 101-point curve.
CurveMetric normalized_precision(const std::vector<Box>& pred, const std::vector<Box>& gt);

struct MetricReport {
  double auc = 0;
  double precision20 = 0;
  double normalized_precision = 0;
  std::vector<double> success_curve;
  std::vector<double> precision_curve;
  std::vector<double> norm_precision_curve;
  double mean_base_ms = 0;
  double mean_refine_ms = 0;  // the per-frame refinement cost delta
  double mean_total_ms = 0;
  int n_frames = 0;
  int n_sequences = 0;
  std::string tag;
};

/// Curves are averaged across sequences; latency means exclude the first 3
/// frames of each sequence (warm-up) and frame 0 (initialization).
MetricReport compute_metrics(const std::vector<RunResult>& results,
                             const std::vector<std::vector<Box>>& gts, bool use_refined,
                             const std::string& tag);

/// Frame 0 is initialized from ground truth; later frames are tracked, then
/// refined when a refiner is given. Feedback mode reports each refined box
/// back to the tracker.
RunResult run_sequence(const Sequence& seq, BaseTracker& tracker, Refiner* refiner,
                       FeedbackMode feedback);

/// Ground-truth-centered protocol: every frame's search region is centered on
/// the ground truth with twice the previous prediction's size, isolating box
/// estimation quality from tracker localization.
using BoxEstimator = std::function<Box(const Image& frame, const CropSpec& spec)>;
RunResult oracle_run(const Sequence& seq, const BoxEstimator& estimator, int out_size = 256);
RunResult oracle_run(const Sequence& seq, Refiner& refiner);

// ---------------------------------------------------------------------------
// Dataset-level evaluation
// ---------------------------------------------------------------------------

struct EvalSetup {
  SimulatedTrackerSpec tracker;
  FeedbackMode feedback = FeedbackMode::kDetached;
  int workers = 1;
};

/// Runs every sequence against a fresh simulated tracker (seed mixed with the
/// sequence index) and, when model is non-null, a fresh per-sequence refiner.
/// Results are returned in dataset order regardless of worker count.
std::vector<RunResult> evaluate_dataset(const std::vector<Sequence>& seqs, Model<float>* model,
                                        const RefineConfig& rc, const EvalSetup& setup);

std::vector<RunResult> oracle_evaluate_dataset(const std::vector<Sequence>& seqs,
                                               Model<float>* model, const RefineConfig& rc,
                                               int workers);

// ---------------------------------------------------------------------------
// Persistence and reports
// ---------------------------------------------------------------------------

void save_run_result(const std::string& path, const RunResult& r);
RunResult load_run_result(const std::string& path);

void write_metric_report_csv(const std::string& path,
                             const std::vector<MetricReport>& reports);
void write_metric_report_text(std::ostream& out, const std::vector<MetricReport>& reports);

// ---------------------------------------------------------------------------
// Ablation grid
// ---------------------------------------------------------------------------

struct AblationRow {
  FusionKind fusion;
  HeadKind head;
  bool with_mask = false;
  double auc = 0;
  double precision20 = 0;
  double normalized_precision = 0;
  double delta_ms = 0;
  double train_seconds = 0;
};

struct AblationSetup {
  ModelConfig model;  // fusion/head/mask fields are overridden per row
  TrainConfig train;
  LossConfig loss;
  JitterParams jitter;
  SimulatedTrackerSpec tracker;
  int workers = 1;
};

/// Trains and evaluates every fusion x head x mask combination (18 rows) under
/// identical seeds and budgets.
std::vector<AblationRow> ablation_grid(const std::vector<Sequence>& train_data,
                                       const std::vector<Sequence>& eval_data,
                                       const AblationSetup& setup, std::ostream* progress);

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);
void write_ablation_text(std::ostream& out, std::vector<AblationRow> rows);

}  // namespace boxref
