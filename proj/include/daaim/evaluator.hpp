#pragma once

#include <map>
#include <string>
#include <vector>

#include "daaim/clipstore.hpp"
#include "daaim/geometry.hpp"

namespace daaim {

struct Prediction {
  std::string sample_id;
  Box box;
  int class_id = 0;
  double score = 0.0;
};

struct GroundTruth {
  std::string sample_id;
  Box box;
  int class_id = 0;
};

struct EvalResult {
  std::map<int, double> per_class_ap;  // only classes with >= 1 ground truth
  double map = 0.0;
  std::map<int, int> support;
};

// VOC-style continuous AP: predictions of the class sorted by descending
// score (ties keep insertion order), greedily matched to unmatched ground
// truth in the same sample at IoU >= threshold; AP = sum over true positives
// of precision-at-rank / num_gt. Returns false when the class has no ground
// truth (excluded from mAP).
bool average_precision(const std::vector<Prediction>& preds, const std::vector<GroundTruth>& gts,
                       int class_id, double iou_threshold, double& ap_out);

EvalResult mean_ap(const std::vector<Prediction>& preds, const std::vector<GroundTruth>& gts,
                   int num_classes, double iou_threshold);

struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<int> counts;          // K x K, row = true class, col = pseudo class
  std::vector<double> row_normalized;

  int at(int truth, int pseudo) const { return counts[static_cast<size_t>(truth) * num_classes + pseudo]; }
  double accuracy() const;  // trace / total, 0 when empty
};

ConfusionMatrix confusion_matrix(const std::vector<int>& pseudo, const std::vector<int>& truth,
                                 int num_classes);

}  // namespace daaim
