#include "daaim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace daaim {

void TrainConfig::validate() const {
  if (!(lr_base > 0)) throw std::invalid_argument("config: lr_base must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw std::invalid_argument("config: momentum in [0,1)");
  if (!(ema_alpha >= 0 && ema_alpha <= 1)) throw std::invalid_argument("config: ema_alpha in [0,1]");
  if (!(conf_threshold >= 0 && conf_threshold <= 1))
    throw std::invalid_argument("config: conf_threshold in [0,1]");
  if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (class_cap < 1) throw std::invalid_argument("config: class_cap must be >= 1");
  if (lambda_scope != "clip" && lambda_scope != "batch")
    throw std::invalid_argument("config: lambda_scope must be clip or batch");
  if (hidden_dim < 1 || pool_grid < 1) throw std::invalid_argument("config: bad model dims");
}

MixConfig TrainConfig::mix_config() const {
  MixConfig m;
  m.expand_factor = expand_factor;
  m.discard_threshold = discard_threshold;
  m.downscale_area_ratio = downscale_area_ratio;
  m.enable_resize = enable_resize;
  return m;
}

static bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean value '" + v + "'");
}

bool apply_config_entry(const std::string& key, const std::string& value, TrainConfig& t,
                        BenchmarkConfig& b) {
  auto d = [&] { return std::stod(value); };
  auto i = [&] { return std::stoi(value); };
  auto u = [&] { return static_cast<uint64_t>(std::stoull(value)); };

  if (key == "lr_base") t.lr_base = d();
  else if (key == "lr_final_ratio") t.lr_final_ratio = d();
  else if (key == "warmup_epochs") t.warmup_epochs = i();
  else if (key == "momentum") t.momentum = d();
  else if (key == "nesterov") t.nesterov = parse_bool(value);
  else if (key == "weight_decay") t.weight_decay = d();
  else if (key == "epochs") t.epochs = i();
  else if (key == "batch_size") t.batch_size = i();
  else if (key == "ema_alpha") t.ema_alpha = d();
  else if (key == "conf_threshold") t.conf_threshold = d();
  else if (key == "expand_factor") t.expand_factor = d();
  else if (key == "discard_threshold") t.discard_threshold = d();
  else if (key == "downscale_area_ratio") t.downscale_area_ratio = d();
  else if (key == "class_cap") t.class_cap = static_cast<size_t>(std::stoull(value));
  else if (key == "seed") { t.seed = u(); b.seed = t.seed; }
  else if (key == "enable_mix") t.enable_mix = parse_bool(value);
  else if (key == "enable_pseudo") t.enable_pseudo = parse_bool(value);
  else if (key == "enable_resize") t.enable_resize = parse_bool(value);
  else if (key == "lambda_scope") t.lambda_scope = value;
  else if (key == "hidden_dim") t.hidden_dim = i();
  else if (key == "pool_grid") t.pool_grid = i();
  else if (key == "eval_iou_threshold") t.eval_iou_threshold = d();
  else if (key == "target_box_jitter") t.target_box_jitter = d();
  else if (key == "workers") t.workers = i();
  else if (key == "num_classes") b.num_classes = i();
  else if (key == "clips_per_domain") b.clips_per_domain = i();
  else if (key == "frames") b.frames = i();
  else if (key == "height") b.height = i();
  else if (key == "width") b.width = i();
  else if (key == "instances_min") b.instances_min = i();
  else if (key == "instances_max") b.instances_max = i();
  else if (key == "instance_size_min") b.instance_size_min = i();
  else if (key == "instance_size_max") b.instance_size_max = i();
  else if (key == "max_instance_iou") b.max_instance_iou = d();
  else if (key == "background_level") b.background_level = d();
  else if (key == "shift_background") b.shift_background = d();
  else if (key == "shift_contrast") b.shift_contrast = d();
  else if (key == "shift_noise_sigma") b.shift_noise_sigma = d();
  else if (key == "shift_gain_r") b.shift_gain_r = d();
  else if (key == "shift_gain_g") b.shift_gain_g = d();
  else if (key == "shift_gain_b") b.shift_gain_b = d();
  else if (key == "tint_spread") b.tint_spread = d();
  else if (key == "tint_jitter") b.tint_jitter = d();
  else if (key == "shift_scale") b.shift_scale = d();
  else if (key == "box_margin") b.box_margin = i();
  else if (key == "shift_blotch_sigma") b.shift_blotch_sigma = d();
  else if (key == "shift_hue_degrees") b.shift_hue_degrees = d();
  else if (key == "shift_pattern_degrees") b.shift_pattern_degrees = d();
  else if (key == "long_tail_gamma") b.long_tail_gamma = d();
  else if (key == "target_tail_gamma") b.target_tail_gamma = d();
  else if (key == "severity_min") b.severity_min = d();
  else if (key == "severity_max") b.severity_max = d();
  else return false;
  return true;
}

void load_config_file(const std::filesystem::path& path, TrainConfig& train,
                      BenchmarkConfig& bench) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto strip = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    std::string stripped = strip(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: expected key = value at line " + std::to_string(lineno));
    std::string key = strip(stripped.substr(0, eq));
    std::string value = strip(stripped.substr(eq + 1));
    try {
      if (!apply_config_entry(key, value, train, bench))
        throw std::runtime_error("config: unknown key '" + key + "' at line " +
                                 std::to_string(lineno));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("config: bad value for '" + key + "' at line " +
                               std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::vector<PseudoLabel> pseudo_label(const ModelParams& teacher, const Clip& clip,
                                      const std::vector<Box>& boxes) {
  std::vector<PseudoLabel> out;
  out.reserve(boxes.size());
  for (const Box& b : boxes) {
    std::vector<double> probs = forward(teacher, extract_features(clip, b, teacher.pool_grid));
    int best = 0;
    for (int k = 1; k < teacher.num_classes; ++k)
      if (probs[k] > probs[best]) best = k;  // ties keep the lowest index
    out.push_back({best, probs[best]});
  }
  return out;
}

double compute_lambda(const std::vector<double>& confidences, double threshold) {
  if (!(threshold >= 0 && threshold <= 1))
    throw std::invalid_argument("compute_lambda: threshold in [0,1]");
  if (confidences.empty()) return 1.0;
  size_t n = 0;
  for (double c : confidences)
    if (c >= threshold) ++n;
  return static_cast<double>(n) / static_cast<double>(confidences.size());
}

double lr_at(long step, long steps_per_epoch, const TrainConfig& cfg) {
  long total = static_cast<long>(cfg.epochs) * steps_per_epoch;
  long warmup = std::min<long>(static_cast<long>(cfg.warmup_epochs) * steps_per_epoch, total);
  double base = cfg.lr_base;
  if (step < warmup)
    return base / 10.0 + (base - base / 10.0) * static_cast<double>(step) / warmup;
  double final_lr = base * cfg.lr_final_ratio;
  long span = total - 1 - warmup;
  double u = span > 0 ? static_cast<double>(step - warmup) / span : 1.0;
  u = std::clamp(u, 0.0, 1.0);
  return final_lr + (base - final_lr) * 0.5 * (1.0 + std::cos(M_PI * u));
}

static void sgd_axis(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& v,
                     double lr, const TrainConfig& cfg) {
  for (size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(g[i])) throw std::runtime_error("sgd_update: non-finite gradient");
    double grad = g[i] + cfg.weight_decay * p[i];
    v[i] = cfg.momentum * v[i] + grad;
    p[i] -= lr * (cfg.nesterov ? grad + cfg.momentum * v[i] : v[i]);
  }
}

void sgd_update(ModelParams& params, const ModelParams& grads, ModelParams& buffers, double lr,
                const TrainConfig& cfg) {
  if (!params.same_shape(grads) || !params.same_shape(buffers))
    throw std::invalid_argument("sgd_update: shape mismatch");
  sgd_axis(params.w1, grads.w1, buffers.w1, lr, cfg);
  sgd_axis(params.b1, grads.b1, buffers.b1, lr, cfg);
  sgd_axis(params.w2, grads.w2, buffers.w2, lr, cfg);
  sgd_axis(params.b2, grads.b2, buffers.b2, lr, cfg);
}

static void zero_like(ModelParams& g) {
  std::fill(g.w1.begin(), g.w1.end(), 0.0);
  std::fill(g.b1.begin(), g.b1.end(), 0.0);
  std::fill(g.w2.begin(), g.w2.end(), 0.0);
  std::fill(g.b2.begin(), g.b2.end(), 0.0);
}

static void accumulate_scaled(ModelParams& acc, const ModelParams& g, double scale) {
  for (size_t i = 0; i < acc.w1.size(); ++i) acc.w1[i] += scale * g.w1[i];
  for (size_t i = 0; i < acc.b1.size(); ++i) acc.b1[i] += scale * g.b1[i];
  for (size_t i = 0; i < acc.w2.size(); ++i) acc.w2[i] += scale * g.w2[i];
  for (size_t i = 0; i < acc.b2.size(); ++i) acc.b2[i] += scale * g.b2[i];
}

// one (possibly mixed) clip: annotations with trusted or pseudo labels
struct ClipTerm {
  std::vector<TrainingExample> examples;
  double lambda = 1.0;
  std::vector<double> confidences;  // target-origin only
};

StepMetrics train_step(TrainState& state, const std::vector<const Sample*>& source_batch,
                       const std::vector<const Sample*>& target_batch, long steps_per_epoch,
                       const TrainConfig& cfg) {
  if (source_batch.empty() || target_batch.empty())
    throw std::invalid_argument("train_step: empty batch");

  const int G = state.student.pool_grid;
  StepMetrics metrics;
  metrics.lr = lr_at(state.step, steps_per_epoch, cfg);

  ModelParams grad_total = state.student;
  zero_like(grad_total);

  // supervised source term, per-clip mean CE averaged over the batch
  size_t n_source = 0;
  for (const Sample* s : source_batch)
    if (!s->annotations.empty()) ++n_source;
  for (const Sample* s : source_batch) {
    if (s->annotations.empty()) continue;
    std::vector<TrainingExample> batch;
    for (const Annotation& a : s->annotations)
      batch.push_back({extract_features(s->clip, a.box, G), a.class_id, 1.0});
    LossGrad lg = loss_and_grad(state.student, batch);
    metrics.loss_source += lg.loss / n_source;
    accumulate_scaled(grad_total, lg.grads, 1.0 / n_source);
  }

  // mixed / pseudo term
  std::vector<ClipTerm> terms;
  if (cfg.enable_mix || cfg.enable_pseudo) {
    for (size_t i = 0; i < target_batch.size(); ++i) {
      const Sample* tgt = target_batch[i];
      const Sample* src = source_batch[i % source_batch.size()];

      std::vector<Box> tgt_boxes;
      for (const Annotation& a : tgt->annotations) tgt_boxes.push_back(a.box);
      std::vector<PseudoLabel> pseudo = pseudo_label(state.teacher, tgt->clip, tgt_boxes);

      ClipTerm term;
      if (cfg.enable_mix) {
        Rng mix_rng = state.rng.split("mix", static_cast<uint64_t>(state.step) * 1000 + i);
        std::optional<MixedSample> mixed =
            aim_mix(*src, *tgt, pseudo, mix_rng, cfg.mix_config());
        if (mixed) {
          metrics.discarded += mixed->discarded_count;
          metrics.mixed_clips++;
          if (mixed->downscaled) metrics.downscaled_clips++;
          for (const Annotation& a : mixed->annotations) {
            if (a.origin == Origin::Target && !cfg.enable_pseudo) continue;
            term.examples.push_back(
                {extract_features(mixed->clip, a.box, G), a.class_id, 1.0});
          }
          if (cfg.enable_pseudo) term.confidences = mixed->kept_target_confidences;
        } else if (cfg.enable_pseudo) {
          for (size_t k = 0; k < tgt->annotations.size(); ++k) {
            term.examples.push_back(
                {extract_features(tgt->clip, tgt_boxes[k], G), pseudo[k].label, 1.0});
            term.confidences.push_back(pseudo[k].confidence);
          }
        }
      } else {  // pseudo-labeling without mixing: plain target clips
        for (size_t k = 0; k < tgt->annotations.size(); ++k) {
          term.examples.push_back(
              {extract_features(tgt->clip, tgt_boxes[k], G), pseudo[k].label, 1.0});
          term.confidences.push_back(pseudo[k].confidence);
        }
      }
      if (!term.examples.empty()) terms.push_back(std::move(term));
    }
  }

  if (!terms.empty()) {
    std::vector<double> all_conf;
    for (const ClipTerm& t : terms)
      all_conf.insert(all_conf.end(), t.confidences.begin(), t.confidences.end());
    double batch_lambda = compute_lambda(all_conf, cfg.conf_threshold);

    double lambda_sum = 0.0;
    for (ClipTerm& t : terms) {
      t.lambda = cfg.lambda_scope == "batch" ? batch_lambda
                                             : compute_lambda(t.confidences, cfg.conf_threshold);
      lambda_sum += t.lambda;
      state.lambda_history.push_back(t.lambda);
      metrics.kept_targets += t.confidences.size();

      if (t.lambda == 0.0) continue;  // no gradient contribution
      LossGrad lg = loss_and_grad(state.student, t.examples);
      metrics.loss_mixed += t.lambda * lg.loss / terms.size();
      accumulate_scaled(grad_total, lg.grads, t.lambda / terms.size());
    }
    metrics.mean_lambda = lambda_sum / terms.size();
  }

  metrics.loss = metrics.loss_source + metrics.loss_mixed;
  if (!std::isfinite(metrics.loss)) throw std::runtime_error("train_step: non-finite loss");

  sgd_update(state.student, grad_total, state.momentum_buffers, metrics.lr, cfg);
  ema_update(state.teacher, state.student, cfg.ema_alpha);
  state.step++;
  return metrics;
}

EvalResult evaluate_dataset(const ModelParams& params, const DatasetIndex& ds,
                            double iou_threshold) {
  std::vector<Prediction> preds;
  std::vector<GroundTruth> gts;
  for (const Sample& s : ds.samples) {
    for (const Annotation& a : s.annotations) {
      gts.push_back({s.sample_id, a.box, a.class_id});
      std::vector<double> probs =
          forward(params, extract_features(s.clip, a.box, params.pool_grid));
      for (int k = 0; k < params.num_classes; ++k)
        preds.push_back({s.sample_id, a.box, k, probs[k]});
    }
  }
  return mean_ap(preds, gts, ds.num_classes, iou_threshold);
}

ConfusionMatrix pseudo_confusion(const ModelParams& teacher, const DatasetIndex& target) {
  std::vector<int> pseudo, truth;
  for (const Sample& s : target.samples) {
    std::vector<Box> boxes;
    for (const Annotation& a : s.annotations) {
      boxes.push_back(a.box);
      truth.push_back(a.class_id);
    }
    for (const PseudoLabel& p : pseudo_label(teacher, s.clip, boxes)) pseudo.push_back(p.label);
  }
  return confusion_matrix(pseudo, truth, target.num_classes);
}

static DatasetIndex jitter_target_boxes(const DatasetIndex& ds, double amount, Rng rng) {
  DatasetIndex out = ds;
  for (Sample& s : out.samples)
    for (Annotation& a : s.annotations) {
      double dw = amount * a.box.width(), dh = amount * a.box.height();
      Box b{a.box.x1 + rng.next_range(-dw, dw), a.box.y1 + rng.next_range(-dh, dh),
            a.box.x2 + rng.next_range(-dw, dw), a.box.y2 + rng.next_range(-dh, dh)};
      if (b.x1 > b.x2) std::swap(b.x1, b.x2);
      if (b.y1 > b.y2) std::swap(b.y1, b.y2);
      a.box = b.clamped(s.clip.width, s.clip.height);
    }
  return out;
}

TrainResult train(const TrainConfig& cfg, const DatasetIndex& source,
                  const std::optional<DatasetIndex>& aux, const DatasetIndex& target,
                  const std::optional<DatasetIndex>& eval_ds) {
  cfg.validate();
  if (source.samples.empty()) throw std::runtime_error("train: empty source dataset");
  if (target.samples.empty()) throw std::runtime_error("train: empty target dataset");
  if (aux && aux->num_classes != source.num_classes)
    throw std::runtime_error("train: auxiliary class count mismatch");
  if (target.num_classes != source.num_classes)
    throw std::runtime_error("train: target class count mismatch");
  for (const Sample& s : source.samples)
    for (const Annotation& a : s.annotations)
      if (a.class_id >= source.num_classes)
        throw std::runtime_error("train: source annotation class out of range");

  Rng root(cfg.seed);

  DatasetIndex train_source = aux ? extend_source(source, *aux) : source;
  Rng cap_rng = root.split("cap");
  train_source = cap_per_class(train_source, cfg.class_cap, cap_rng);

  DatasetIndex train_target = target;
  if (cfg.target_box_jitter > 0)
    train_target = jitter_target_boxes(target, cfg.target_box_jitter, root.split("jitter"));

  const int num_channels = 3;
  TrainState state;
  Rng init_rng = root.split("init");
  state.student = ModelParams::init(cfg.pool_grid, num_channels, cfg.hidden_dim,
                                    source.num_classes, init_rng);
  state.teacher = state.student;  // teacher starts as an exact copy
  state.momentum_buffers = state.student;
  zero_like(state.momentum_buffers);
  state.rng = root.split("steps");

  long steps_per_epoch =
      (static_cast<long>(train_source.samples.size()) + cfg.batch_size - 1) / cfg.batch_size;

  TrainResult result;
  std::vector<size_t> src_order(train_source.samples.size());
  for (size_t i = 0; i < src_order.size(); ++i) src_order[i] = i;
  std::vector<size_t> tgt_order(train_target.samples.size());
  for (size_t i = 0; i < tgt_order.size(); ++i) tgt_order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng order_rng = root.split("order", epoch);
    order_rng.shuffle(src_order);
    Rng torder_rng = root.split("torder", epoch);
    torder_rng.shuffle(tgt_order);

    double loss_sum = 0.0, lambda_sum = 0.0;
    size_t discarded = 0, kept = 0, mixed_clips = 0, downscaled_clips = 0;
    double last_lr = 0.0;

    size_t tgt_cursor = 0;
    for (long b = 0; b < steps_per_epoch; ++b) {
      size_t lo = static_cast<size_t>(b) * cfg.batch_size;
      size_t hi = std::min(lo + cfg.batch_size, src_order.size());
      std::vector<const Sample*> sbatch, tbatch;
      for (size_t i = lo; i < hi; ++i) sbatch.push_back(&train_source.samples[src_order[i]]);
      for (size_t i = lo; i < hi; ++i) {
        tbatch.push_back(&train_target.samples[tgt_order[tgt_cursor]]);
        tgt_cursor = (tgt_cursor + 1) % tgt_order.size();
      }
      StepMetrics m = train_step(state, sbatch, tbatch, steps_per_epoch, cfg);
      loss_sum += m.loss;
      lambda_sum += m.mean_lambda;
      discarded += m.discarded;
      kept += m.kept_targets;
      mixed_clips += m.mixed_clips;
      downscaled_clips += m.downscaled_clips;
      last_lr = m.lr;
    }

    nlohmann::json line;
    line["epoch"] = epoch;
    line["loss"] = loss_sum / steps_per_epoch;
    line["mean_lambda"] = lambda_sum / steps_per_epoch;
    line["discard_rate"] =
        (discarded + kept) ? static_cast<double>(discarded) / (discarded + kept) : 0.0;
    line["resize_rate"] =
        mixed_clips ? static_cast<double>(downscaled_clips) / mixed_clips : 0.0;
    line["lr"] = last_lr;
    if (eval_ds) {
      EvalResult ev = evaluate_dataset(state.student, *eval_ds, cfg.eval_iou_threshold);
      line["map"] = ev.map;
      line["map_teacher"] =
          evaluate_dataset(state.teacher, *eval_ds, cfg.eval_iou_threshold).map;
      nlohmann::json ap = nlohmann::json::object();
      for (const auto& [c, v] : ev.per_class_ap) ap[std::to_string(c)] = v;
      line["per_class_ap"] = ap;
    }
    line["pseudo_acc"] = pseudo_confusion(state.teacher, train_target).accuracy();
    result.metrics_lines.push_back(line.dump());
  }

  result.student = state.student;
  result.teacher = state.teacher;
  return result;
}

}  // namespace daaim
