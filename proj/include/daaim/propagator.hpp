#pragma once

#include <map>
#include <vector>

#include "daaim/clipstore.hpp"
#include "daaim/geometry.hpp"

namespace daaim {

struct FrameDetections {
  int frame_index = 0;
  std::vector<Box> boxes;
};

// Dense annotation propagation: every regular frame inherits labels from the
// most recent preceding key-frame by greedy highest-IoU-first one-to-one
// matching of detector boxes against that key-frame's ground truth. Matches
// below iou_min are dropped; key-frames pass through verbatim. Throws when a
// detection frame has no preceding key-frame.
std::map<int, std::vector<Annotation>> propagate_annotations(
    const std::map<int, std::vector<Annotation>>& keyframes,
    const std::vector<FrameDetections>& detections, double iou_min);

}  // namespace daaim
