#pragma once

#include <optional>
#include <vector>

#include "daaim/clipstore.hpp"
#include "daaim/geometry.hpp"
#include "daaim/rng.hpp"

namespace daaim {

struct MixConfig {
  double expand_factor = 0.2;
  double discard_threshold = 0.4;  // target box dropped when coverage exceeds this
  double downscale_area_ratio = 0.5;
  bool enable_resize = true;
};

struct PseudoLabel {
  int label = 0;
  double confidence = 0.0;
};

struct MixedSample {
  Clip clip;
  std::vector<Annotation> annotations;          // source-origin first, then kept targets
  std::vector<double> kept_target_confidences;  // aligned with target-origin annotations
  size_t discarded_count = 0;
  bool downscaled = false;  // whether the half-resolution rule fired
};

// Uniform subset of size ceil(n/2), without replacement. Returned indices are
// in ascending order. Throws on an empty list.
std::vector<size_t> select_instances(const std::vector<Annotation>& annotations, Rng& rng);

// Expand every selected box, rasterize the key-frame mask, replicate over T.
Mask3D build_mask(const std::vector<Box>& selected, double expand_factor, int frames,
                  int height, int width);

struct DownscaleResult {
  Sample sample;
  std::vector<size_t> selected;  // indices into sample.annotations, unchanged
  Mask3D mask;
  bool applied = false;
};

// If the key-frame mask occupies more than `downscale_area_ratio` of the
// frame, downscale every source frame by 0.5 (2x2 mean pool, centered paste,
// zero borders), transform all boxes with resize_box_half and rebuild the
// mask from the transformed selected boxes.
DownscaleResult apply_downscale_rule(const Sample& source, const std::vector<size_t>& selected,
                                     const Mask3D& mask, const MixConfig& cfg);

// x_M = M * x_S + (1 - M) * x_T, exact per voxel.
Clip mix_clips(const Clip& source, const Clip& target, const Mask3D& mask);

struct MixedLabels {
  std::vector<Annotation> annotations;
  std::vector<double> kept_target_confidences;
  size_t discarded_count = 0;
};

// Selected source annotations keep ground-truth labels; target annotations
// keep their pseudo-labels unless covered by the pasted source boxes beyond
// the discard threshold.
MixedLabels mix_labels(const std::vector<Annotation>& selected_source,
                       const std::vector<Annotation>& target,
                       const std::vector<PseudoLabel>& pseudo,
                       const std::vector<Box>& pasted_boxes, const MixConfig& cfg);

// Full pipeline: select -> mask -> optional downscale -> mix pixels -> mix
// labels. Returns nullopt when the source sample has no annotations, in which
// case the caller falls back to the plain target clip.
std::optional<MixedSample> aim_mix(const Sample& source, const Sample& target,
                                   const std::vector<PseudoLabel>& pseudo, Rng& rng,
                                   const MixConfig& cfg);

}  // namespace daaim
