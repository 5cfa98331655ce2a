#pragma once

#include <cstdint>
#include <string>

#include "daaim/clipstore.hpp"
#include "daaim/rng.hpp"

namespace daaim {

// Two-domain synthetic action-detection benchmark. Each action instance is a
// moving-texture rectangle whose class fixes its color tint, texture
// frequency and per-frame texture velocity. Target clips draw a per-clip
// severity and apply two shifts scaled by it: a clip-static correlated
// blotch field that box pooling cannot average out, and a rotation of the
// texture wave direction. Both are recoverable by adaptation: instance
// tints are untouched, so teacher pseudo-labels stay well seeded.
struct BenchmarkConfig {
  int num_classes = 6;
  int clips_per_domain = 200;
  int frames = 6;
  int height = 48;
  int width = 48;
  int instances_min = 4;
  int instances_max = 6;
  int instance_size_min = 13;
  int instance_size_max = 21;
  double max_instance_iou = 0.15;  // generation-time overlap bound
  double background_level = 70.0;  // source background mean
  double shift_background = 35.0;  // added to target background mean
  double shift_contrast = 1.0;     // target contrast scale around mid-gray
  double shift_noise_sigma = 8.0;  // target additive gaussian noise, per pixel
  double shift_blotch_sigma = 40.0;// target additive noise on an 8x8 block grid;
                                   //   correlated, so box pooling cannot average it out
  double shift_hue_degrees = 0.0;
  double shift_pattern_degrees = 90.0; // rotates the texture wave direction by
                                       //   severity * this many degrees
  double shift_gain_r = 1.0;       // target per-channel gains; asymmetric values
  double shift_gain_g = 1.0;       //   distort the color ratios that identify classes
  double shift_gain_b = 1.0;
  double tint_spread = 0.5;        // class tint distance from gray; < 1 packs classes closer
  double tint_jitter = 0.0;        // per-instance relative tint perturbation
  double shift_scale = 1.0;        // target instance size multiplier; < 1 shrinks instances
  int box_margin = 4;              // background ring inside the annotated box, pixels per side
  double severity_min = 0.0;       // per-clip target severity is uniform in
  double severity_max = 1.0;       //   [severity_min, severity_max]
  double long_tail_gamma = 0.0;    // source class counts ~ (c+1)^-gamma; 0 = balanced
  double target_tail_gamma = 0.0;  // same power law for target_train; target_val stays balanced
  uint64_t seed = 42;

  void validate() const;
};

struct Benchmark {
  DatasetIndex source;
  DatasetIndex target_train;
  DatasetIndex target_val;
};

Benchmark gen_benchmark(const BenchmarkConfig& cfg);

}  // namespace daaim
