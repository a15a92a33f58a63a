#include "boxref/training.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace boxref {

SamplePair build_pair(const Sequence& seq, std::mt19937& rng, const JitterParams& jitter,
                      int max_interval, int out_size) {
  const int len = seq.length();
  if (len < 2) throw std::invalid_argument("build_pair: sequence length must be >= 2");

  std::uniform_int_distribution<int> ref_dist(0, len - 1);
  for (int attempt = 0; attempt < 32; ++attempt) {
    const int i_ref = ref_dist(rng);
    const int lo = std::max(0, i_ref - (max_interval - 1));
    const int hi = std::min(len - 1, i_ref + (max_interval - 1));
    std::uniform_int_distribution<int> test_dist(lo, hi);
    const int i_test = test_dist(rng);

    const Box& gt_ref = seq.gt[static_cast<std::size_t>(i_ref)];
    const Box& gt_test = seq.gt[static_cast<std::size_t>(i_test)];
    if (!gt_ref.valid() || !gt_test.valid())
      throw std::invalid_argument("build_pair: degenerate ground-truth box");

    const CropSpec ref_spec = make_search_region(gt_ref, 2.0, out_size);
    const CropSpec test_spec = jitter_crop_spec(gt_test, jitter, rng, out_size);

    CropResult ref_res = crop_and_resize(seq.frames[static_cast<std::size_t>(i_ref)], ref_spec);
    CropResult test_res = crop_and_resize(seq.frames[static_cast<std::size_t>(i_test)], test_spec);

    Box tb = box_image_to_crop(gt_test, test_res.transform);
    const double S = out_size;
    const double l = std::clamp(tb.left(), 0.0, S), t = std::clamp(tb.top(), 0.0, S);
    const double r = std::clamp(tb.right(), 0.0, S), b = std::clamp(tb.bottom(), 0.0, S);
    if (r - l < 1e-6 || b - t < 1e-6) continue;  // target fell outside the crop; redraw

    SamplePair pair;
    pair.ref_crop = std::move(ref_res.crop);
    pair.test_crop = std::move(test_res.crop);
    pair.transform_test = test_res.transform;
    pair.target_ltrb = {l / S, t / S, r / S, b / S};
    if (seq.has_masks())
      pair.target_mask = crop_mask_nearest(seq.masks[static_cast<std::size_t>(i_test)], test_spec);
    return pair;
  }
  throw std::runtime_error("build_pair: could not draw a crop containing the target");
}

namespace {

double validation_mean_iou(Model<float>& model, const std::vector<SamplePair>& pairs) {
  if (pairs.empty()) return 0.0;
  const double S = model.config().input_size;
  double acc = 0;
  for (const SamplePair& p : pairs) {
    HeadOutput<float> out = model.forward(p.ref_crop, p.test_crop, false);
    const Box target = Box::from_ltrb(p.target_ltrb[0] * S, p.target_ltrb[1] * S,
                                      p.target_ltrb[2] * S, p.target_ltrb[3] * S);
    if (out.box_crop.valid()) acc += iou(out.box_crop, target);
  }
  return acc / static_cast<double>(pairs.size());
}

}  // namespace

TrainSummary train(Model<float>& model, const std::vector<Sequence>& dataset,
                   const TrainConfig& tc, const LossConfig& lc, const JitterParams& jitter,
                   std::ostream* metrics_log) {
  tc.validate();
  lc.validate();
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");

  // hold out the tail of the dataset for the per-epoch mean-IoU probe
  std::size_t n_val = dataset.size() >= 4 ? std::max<std::size_t>(1, dataset.size() / 10) : 0;
  const std::size_t n_train = dataset.size() - n_val;
  std::vector<const Sequence*> train_seqs, val_seqs;
  for (std::size_t i = 0; i < n_train; ++i) train_seqs.push_back(&dataset[i]);
  for (std::size_t i = n_train; i < dataset.size(); ++i) val_seqs.push_back(&dataset[i]);
  if (val_seqs.empty()) val_seqs = train_seqs;

  const int S = model.config().input_size;
  std::mt19937 val_rng(static_cast<std::uint32_t>(tc.seed ^ 0x9E3779B9u));
  std::vector<SamplePair> val_pairs;
  for (int i = 0; i < 32; ++i)
    val_pairs.push_back(build_pair(*val_seqs[static_cast<std::size_t>(i) % val_seqs.size()],
                                   val_rng, jitter, tc.max_frame_interval, S));

  Adam<float> opt(model.params());
  std::mt19937 rng(static_cast<std::uint32_t>(tc.seed));
  std::uniform_int_distribution<std::size_t> seq_dist(0, train_seqs.size() - 1);

  const bool want_mask = model.config().with_mask;
  TrainSummary summary;
  int iter = 0;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    const double lr = lr_at_epoch(tc.base_learning_rate, epoch, tc.lr_halving_period_epochs);
    for (int it = 0; it < tc.iterations_per_epoch; ++it) {
      const int n = tc.batch_size;
      Tensor<float> ref({n, 3, S, S}), test({n, 3, S, S}), targets({n, 4});
      Tensor<float> masks;
      bool have_masks = want_mask;
      std::vector<SamplePair> batch;
      batch.reserve(static_cast<std::size_t>(n));
      for (int b = 0; b < n; ++b) {
        batch.push_back(
            build_pair(*train_seqs[seq_dist(rng)], rng, jitter, tc.max_frame_interval, S));
        if (batch.back().target_mask.empty()) have_masks = false;
      }
      if (have_masks) masks = Tensor<float>({n, 1, S, S});
      for (int b = 0; b < n; ++b) {
        put_sample(ref, b, batch[static_cast<std::size_t>(b)].ref_crop);
        put_sample(test, b, batch[static_cast<std::size_t>(b)].test_crop);
        for (int k = 0; k < 4; ++k)
          targets(b, k) = static_cast<float>(batch[static_cast<std::size_t>(b)].target_ltrb[k]);
        if (have_masks)
          put_sample(masks, b,
                     batch[static_cast<std::size_t>(b)].target_mask.reshaped({1, S, S}));
      }

      ForwardCache<float> cache;
      TrainOutputs<float> out = model.forward_train(ref, test, cache, have_masks);
      BatchLoss<float> bl = compute_losses(model.config(), out, targets, masks, lc);
      if (!std::isfinite(bl.total))
        throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(iter + 1) +
                                 " (loss=" + std::to_string(bl.total) + ")");
      opt.zero_grad();
      model.backward_train(cache, bl.grads);
      opt.step(lr);

      ++iter;
      summary.final_loss = bl.total;
      if (metrics_log)
        (*metrics_log) << "{\"iter\":" << iter << ",\"loss\":" << bl.total
                       << ",\"box_loss\":" << bl.box_l << ",\"mask_loss\":" << bl.mask_l
                       << ",\"lr\":" << lr << "}\n";
    }
    const double viou = validation_mean_iou(model, val_pairs);
    summary.val_mean_iou.push_back(viou);
    if (metrics_log)
      (*metrics_log) << "{\"epoch\":" << epoch << ",\"val_mean_iou\":" << viou << "}\n";
  }
  summary.iterations = iter;
  return summary;
}

}  // namespace boxref
