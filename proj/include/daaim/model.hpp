#pragma once

#include <filesystem>
#include <vector>

#include "daaim/clipstore.hpp"
#include "daaim/geometry.hpp"
#include "daaim/rng.hpp"

namespace daaim {

// One-hidden-layer ReLU classifier over pooled box crops. Small enough that
// every gradient is written out by hand and checked against finite
// differences.
struct ModelParams {
  int feature_dim = 0;  // pool_grid * pool_grid * channels
  int hidden_dim = 0;
  int num_classes = 0;
  int pool_grid = 0;
  int channels = 0;

  std::vector<double> w1;  // hidden_dim x feature_dim, row-major
  std::vector<double> b1;  // hidden_dim
  std::vector<double> w2;  // num_classes x hidden_dim
  std::vector<double> b2;  // num_classes

  static ModelParams init(int pool_grid, int channels, int hidden_dim, int num_classes,
                          Rng& rng);
  bool same_shape(const ModelParams& o) const;
  void check_finite() const;
};

struct TrainingExample {
  std::vector<double> features;
  int label = 0;
  double weight = 1.0;
};

struct LossGrad {
  double loss = 0.0;
  ModelParams grads;  // same shapes, gradient values
};

// Crop the box in every frame, average-pool each crop to a GxG grid per
// channel, average over frames, flatten channel-last, map to [-0.5, 0.5].
std::vector<double> extract_features(const Clip& clip, const Box& box, int pool_grid);

std::vector<double> forward(const ModelParams& p, const std::vector<double>& features);

// Weighted-mean cross entropy and its analytic gradient. Throws when the
// weight sum is zero.
LossGrad loss_and_grad(const ModelParams& p, const std::vector<TrainingExample>& batch);

// teacher <- alpha * teacher + (1 - alpha) * student, entry-wise
void ema_update(ModelParams& teacher, const ModelParams& student, double alpha);

// MDL1: magic, u32le D, hidden, K, G, C, then w1,b1,w2,b2 as f32le.
ModelParams read_model(const std::filesystem::path& path);
void write_model(const ModelParams& p, const std::filesystem::path& path);

}  // namespace daaim
