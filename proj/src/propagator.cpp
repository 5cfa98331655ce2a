#include "daaim/propagator.hpp"

#include <algorithm>
#include <stdexcept>

namespace daaim {

std::map<int, std::vector<Annotation>> propagate_annotations(
    const std::map<int, std::vector<Annotation>>& keyframes,
    const std::vector<FrameDetections>& detections, double iou_min) {
  if (keyframes.empty()) throw std::invalid_argument("propagate: no key-frames");

  std::map<int, std::vector<Annotation>> out = keyframes;

  for (const FrameDetections& fd : detections) {
    if (keyframes.count(fd.frame_index)) continue;  // key-frames keep ground truth

    // most recent key-frame at or before this frame
    auto it = keyframes.upper_bound(fd.frame_index);
    if (it == keyframes.begin())
      throw std::runtime_error("propagate: no key-frame precedes frame " +
                               std::to_string(fd.frame_index));
    const std::vector<Annotation>& anchor = std::prev(it)->second;

    struct Pair {
      double score;
      size_t det, ann;
    };
    std::vector<Pair> pairs;
    for (size_t d = 0; d < fd.boxes.size(); ++d)
      for (size_t a = 0; a < anchor.size(); ++a) {
        double v = iou(fd.boxes[d], anchor[a].box);
        if (v >= iou_min) pairs.push_back({v, d, a});
      }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const Pair& x, const Pair& y) { return x.score > y.score; });

    std::vector<uint8_t> det_used(fd.boxes.size(), 0), ann_used(anchor.size(), 0);
    std::vector<Annotation> frame_out;
    for (const Pair& p : pairs) {
      if (det_used[p.det] || ann_used[p.ann]) continue;
      det_used[p.det] = 1;
      ann_used[p.ann] = 1;
      Annotation a = anchor[p.ann];
      a.box = fd.boxes[p.det];
      frame_out.push_back(a);
    }
    out[fd.frame_index] = std::move(frame_out);
  }
  return out;
}

}  // namespace daaim
