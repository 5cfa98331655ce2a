#include "daaim/evaluator.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace daaim {

bool average_precision(const std::vector<Prediction>& preds, const std::vector<GroundTruth>& gts,
                       int class_id, double iou_threshold, double& ap_out) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
    throw std::invalid_argument("average_precision: iou_threshold must be in (0,1]");

  std::vector<size_t> gt_idx;
  for (size_t i = 0; i < gts.size(); ++i)
    if (gts[i].class_id == class_id) gt_idx.push_back(i);
  if (gt_idx.empty()) return false;

  std::vector<size_t> order;
  for (size_t i = 0; i < preds.size(); ++i)
    if (preds[i].class_id == class_id) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return preds[a].score > preds[b].score; });

  std::vector<uint8_t> matched(gt_idx.size(), 0);
  double ap = 0.0;
  int tp = 0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    const Prediction& p = preds[order[rank]];
    double best = 0.0;
    int best_g = -1;
    for (size_t g = 0; g < gt_idx.size(); ++g) {
      if (matched[g]) continue;
      const GroundTruth& gt = gts[gt_idx[g]];
      if (gt.sample_id != p.sample_id) continue;
      double v = iou(p.box, gt.box);
      if (v >= iou_threshold && v > best) {
        best = v;
        best_g = static_cast<int>(g);
      }
    }
    if (best_g >= 0) {
      matched[best_g] = 1;
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(rank + 1);
    }
  }
  ap_out = ap / static_cast<double>(gt_idx.size());
  return true;
}

EvalResult mean_ap(const std::vector<Prediction>& preds, const std::vector<GroundTruth>& gts,
                   int num_classes, double iou_threshold) {
  EvalResult r;
  for (const GroundTruth& g : gts) r.support[g.class_id]++;
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c < num_classes; ++c) {
    double ap;
    if (average_precision(preds, gts, c, iou_threshold, ap)) {
      r.per_class_ap[c] = ap;
      sum += ap;
      ++counted;
    }
  }
  r.map = counted ? sum / counted : 0.0;
  return r;
}

double ConfusionMatrix::accuracy() const {
  long total = std::accumulate(counts.begin(), counts.end(), 0L);
  if (total == 0) return 0.0;
  long trace = 0;
  for (int i = 0; i < num_classes; ++i) trace += at(i, i);
  return static_cast<double>(trace) / static_cast<double>(total);
}

ConfusionMatrix confusion_matrix(const std::vector<int>& pseudo, const std::vector<int>& truth,
                                 int num_classes) {
  if (pseudo.size() != truth.size())
    throw std::invalid_argument("confusion_matrix: length mismatch");
  ConfusionMatrix m;
  m.num_classes = num_classes;
  m.counts.assign(static_cast<size_t>(num_classes) * num_classes, 0);
  for (size_t i = 0; i < pseudo.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || pseudo[i] < 0 || pseudo[i] >= num_classes)
      throw std::invalid_argument("confusion_matrix: label out of range");
    m.counts[static_cast<size_t>(truth[i]) * num_classes + pseudo[i]]++;
  }
  m.row_normalized.assign(m.counts.size(), 0.0);
  for (int i = 0; i < num_classes; ++i) {
    long row = 0;
    for (int j = 0; j < num_classes; ++j) row += m.at(i, j);
    if (row == 0) continue;
    for (int j = 0; j < num_classes; ++j)
      m.row_normalized[static_cast<size_t>(i) * num_classes + j] =
          static_cast<double>(m.at(i, j)) / static_cast<double>(row);
  }
  return m;
}

}  // namespace daaim
