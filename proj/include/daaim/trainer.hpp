#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "daaim/clipstore.hpp"
#include "daaim/evaluator.hpp"
#include "daaim/mixer.hpp"
#include "daaim/model.hpp"
#include "daaim/synthgen.hpp"

namespace daaim {

struct TrainConfig {
  double lr_base = 1.25e-2;
  double lr_final_ratio = 0.01;
  int warmup_epochs = 1;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 1e-7;
  int epochs = 64;
  int batch_size = 8;
  double ema_alpha = 0.99;
  double conf_threshold = 0.7;
  double expand_factor = 0.2;
  double discard_threshold = 0.4;
  double downscale_area_ratio = 0.5;
  size_t class_cap = 5000;
  uint64_t seed = 1;
  bool enable_mix = true;
  bool enable_pseudo = true;
  bool enable_resize = true;
  std::string lambda_scope = "clip";  // "clip" or "batch"
  int hidden_dim = 64;
  int pool_grid = 8;
  double eval_iou_threshold = 0.5;
  double target_box_jitter = 0.0;  // fraction of box size, detector-noise knob
  int workers = 1;

  void validate() const;
  MixConfig mix_config() const;
};

// Flat `key = value` config file; unknown keys are errors. Benchmark keys and
// trainer keys share one file.
void load_config_file(const std::filesystem::path& path, TrainConfig& train,
                      BenchmarkConfig& bench);
bool apply_config_entry(const std::string& key, const std::string& value, TrainConfig& train,
                        BenchmarkConfig& bench);

struct TrainState {
  ModelParams student;
  ModelParams teacher;
  ModelParams momentum_buffers;
  long step = 0;
  Rng rng{0};
  std::vector<double> lambda_history;
};

struct StepMetrics {
  double loss = 0.0;
  double loss_source = 0.0;
  double loss_mixed = 0.0;
  double mean_lambda = 1.0;
  size_t discarded = 0;
  size_t kept_targets = 0;
  size_t mixed_clips = 0;
  size_t downscaled_clips = 0;
  double lr = 0.0;
};

std::vector<PseudoLabel> pseudo_label(const ModelParams& teacher, const Clip& clip,
                                      const std::vector<Box>& boxes);

// Share of confidences at or above the threshold; 1.0 for an empty list.
double compute_lambda(const std::vector<double>& confidences, double threshold);

double lr_at(long step, long steps_per_epoch, const TrainConfig& cfg);

void sgd_update(ModelParams& params, const ModelParams& grads, ModelParams& buffers, double lr,
                const TrainConfig& cfg);

StepMetrics train_step(TrainState& state, const std::vector<const Sample*>& source_batch,
                       const std::vector<const Sample*>& target_batch, long steps_per_epoch,
                       const TrainConfig& cfg);

struct TrainResult {
  ModelParams student;
  ModelParams teacher;
  std::vector<std::string> metrics_lines;  // one JSON object per epoch
};

// Full training loop. Target labels are never read by the optimization path;
// they only feed the reported pseudo-label accuracy. `eval_ds`, when present,
// is scored with the student after every epoch.
TrainResult train(const TrainConfig& cfg, const DatasetIndex& source,
                  const std::optional<DatasetIndex>& aux, const DatasetIndex& target,
                  const std::optional<DatasetIndex>& eval_ds);

// Classify every ground-truth box of the dataset with the model: one scored
// prediction per (box, class).
EvalResult evaluate_dataset(const ModelParams& params, const DatasetIndex& ds,
                            double iou_threshold);

ConfusionMatrix pseudo_confusion(const ModelParams& teacher, const DatasetIndex& target);

}  // namespace daaim
