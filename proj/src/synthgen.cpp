#include "daaim/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace daaim {

void BenchmarkConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("benchmark: num_classes must be >= 2");
  if (frames < 3) throw std::invalid_argument("benchmark: frames must be >= 3");
  if (clips_per_domain < 1) throw std::invalid_argument("benchmark: clips_per_domain must be >= 1");
  if (instances_min < 1 || instances_max < instances_min)
    throw std::invalid_argument("benchmark: bad instance count range");
  if (instance_size_min < 2 || instance_size_max < instance_size_min)
    throw std::invalid_argument("benchmark: bad instance size range");
  if (instance_size_max > height || instance_size_max > width)
    throw std::invalid_argument("benchmark: instance boxes cannot fit within the frame");
  if (long_tail_gamma < 0) throw std::invalid_argument("benchmark: long_tail_gamma must be >= 0");
  if (severity_min < 0 || severity_max > 1 || severity_min > severity_max)
    throw std::invalid_argument("benchmark: severity range must satisfy 0 <= min <= max <= 1");
  if (target_tail_gamma < 0)
    throw std::invalid_argument("benchmark: target_tail_gamma must be >= 0");
  if (shift_gain_r <= 0 || shift_gain_g <= 0 || shift_gain_b <= 0)
    throw std::invalid_argument("benchmark: channel gains must be positive");
  if (tint_spread <= 0 || tint_spread > 1)
    throw std::invalid_argument("benchmark: tint_spread in (0,1]");
  if (tint_jitter < 0 || tint_jitter >= 1)
    throw std::invalid_argument("benchmark: tint_jitter in [0,1)");
  if (shift_scale <= 0 || shift_scale > 1 || shift_scale * instance_size_min < 2)
    throw std::invalid_argument("benchmark: shift_scale must keep instances at least 2 px");
  if (box_margin < 0 || instance_size_min - 2.0 * box_margin < 2)
    throw std::invalid_argument("benchmark: box_margin leaves no texture interior");
}

namespace {

struct Tint {
  double r, g, b;
};

// widely separated tints, cycled past 8 classes
Tint class_tint(int c) {
  static const Tint palette[] = {
      {1.00, 0.35, 0.35}, {0.35, 1.00, 0.35}, {0.40, 0.40, 1.00}, {1.00, 1.00, 0.35},
      {1.00, 0.40, 1.00}, {0.35, 1.00, 1.00}, {1.00, 0.70, 0.35}, {0.70, 0.70, 0.70}};
  return palette[c % 8];
}

// Besides its tint, each class is identified by a spatial frequency (two
// well-separated values, so box-size variation cannot alias them) and a
// temporal velocity. Averaging pooled features over frames turns velocity
// into a class-specific attenuation of the spatial pattern, so class identity
// survives any purely photometric domain shift.
double class_frequency(int c) { return (c % 2) ? 0.06 : 0.025; }          // cycles per pixel
double class_velocity(int c) {
  static const double kTiers[3] = {0.03, 0.11, 0.23};  // cycles per frame
  return kTiers[(c / 2) % 3];
}

uint8_t clamp_u8(double v) {
  return static_cast<uint8_t>(std::clamp(v, 0.0, 255.0) + 0.5);
}

struct InstanceSpec {
  Box box;
  int class_id;
  double phase;
  Tint tint;
  double severity = 0.0;  // per-instance photometric shift strength on target
};

// balanced (gamma 0) or power-law class assignment for a run of n instances
std::vector<int> assign_classes(int n, const BenchmarkConfig& cfg, double gamma, Rng& rng) {
  std::vector<int> classes;
  classes.reserve(n);
  if (gamma == 0.0) {
    for (int i = 0; i < n; ++i) classes.push_back(i % cfg.num_classes);
    rng.shuffle(classes);
  } else {
    std::vector<double> cdf(cfg.num_classes);
    double acc = 0.0;
    for (int c = 0; c < cfg.num_classes; ++c) {
      acc += std::pow(c + 1.0, -gamma);
      cdf[c] = acc;
    }
    for (int i = 0; i < n; ++i) {
      double u = rng.next_double() * acc;
      int c = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      classes.push_back(std::min(c, cfg.num_classes - 1));
    }
  }
  return classes;
}

Sample gen_sample(const BenchmarkConfig& cfg, const std::string& sample_id, bool target_style,
                  const std::vector<int>& classes, Origin origin, Rng rng) {
  Sample s;
  s.sample_id = sample_id;
  s.clip = Clip::make(cfg.frames, cfg.height, cfg.width, 3);

  // One severity per clip: the target domain spans a continuum of clips from
  // near-source to fully shifted, so confidence statistics computed over a
  // clip's instances meaningfully rank whole clips by difficulty.
  double clip_sev =
      target_style ? cfg.severity_min + (cfg.severity_max - cfg.severity_min) * rng.next_double()
                   : 0.0;

  // place boxes honoring the pairwise overlap bound
  std::vector<InstanceSpec> specs;
  for (size_t k = 0; k < classes.size(); ++k) {
    Box placed;
    bool ok = false;
    // severity also shrinks the instance toward shift_scale, so the most
    // distorted target instances are the smallest ones
    double sev = clip_sev;
    double scale = 1.0 + sev * (cfg.shift_scale - 1.0);
    for (int attempt = 0; attempt < 60 && !ok; ++attempt) {
      double w = scale * rng.next_range(cfg.instance_size_min, cfg.instance_size_max);
      double h = scale * rng.next_range(cfg.instance_size_min, cfg.instance_size_max);
      double x = rng.next_range(0.0, cfg.width - w);
      double y = rng.next_range(0.0, cfg.height - h);
      placed = Box{std::floor(x), std::floor(y), std::floor(x) + std::floor(w),
                   std::floor(y) + std::floor(h)};
      ok = true;
      for (const InstanceSpec& other : specs)
        if (iou(placed, other.box) > cfg.max_instance_iou) ok = false;
    }
    if (!ok) continue;  // crowded frame, skip this instance
    InstanceSpec spec;
    spec.box = placed;
    spec.class_id = classes[k];
    // fixed spatial phase keeps the frequency pattern class-stable under the
    // box-relative pooling grid; motion still varies through the velocity term
    spec.phase = 0.0;
    Tint base = class_tint(spec.class_id);
    const double gray = 0.7;
    spec.tint = {gray + cfg.tint_spread * (base.r - gray),
                 gray + cfg.tint_spread * (base.g - gray),
                 gray + cfg.tint_spread * (base.b - gray)};
    spec.tint.r *= 1.0 + cfg.tint_jitter * rng.next_range(-1.0, 1.0);
    spec.tint.g *= 1.0 + cfg.tint_jitter * rng.next_range(-1.0, 1.0);
    spec.tint.b *= 1.0 + cfg.tint_jitter * rng.next_range(-1.0, 1.0);
    spec.severity = sev;
    specs.push_back(spec);

    Annotation a;
    a.box = placed;
    a.class_id = spec.class_id;
    a.instance_id = static_cast<int>(specs.size()) - 1;
    a.origin = origin;
    s.annotations.push_back(a);
  }

  // The target shift has two orthogonal components with distinct remedies:
  //  - a context shift on background pixels (level offset plus a clip-static
  //    blotch field) that contaminates the background ring inside every
  //    annotated box, and
  //  - an appearance shift on instance texture pixels (hue rotation, channel
  //    gains, contrast), scaled by a per-instance severity so the target
  //    spans a continuum from near-source to fully shifted.
  double bg = cfg.background_level + (target_style ? cfg.shift_background : 0.0);

  // clip-static blotch field: one offset per 8x8 block per channel
  const int kBlock = 8;
  int blocks_i = (cfg.height + kBlock - 1) / kBlock, blocks_j = (cfg.width + kBlock - 1) / kBlock;
  std::vector<double> blotch(static_cast<size_t>(blocks_i) * blocks_j * 3, 0.0);
  if (target_style)
    for (double& v : blotch) v = cfg.shift_blotch_sigma * rng.next_gaussian();
  for (uint32_t t = 0; t < s.clip.frames; ++t) {
    for (int i = 0; i < cfg.height; ++i) {
      for (int j = 0; j < cfg.width; ++j) {
        double px[3];
        double base = bg + rng.next_range(-12.0, 12.0);
        px[0] = px[1] = px[2] = base;
        bool on_texture = false;
        double sev = 0.0;

        for (const InstanceSpec& spec : specs) {
          // the annotated box keeps a background ring around the texture
          if (j >= spec.box.x1 + cfg.box_margin && j < spec.box.x2 - cfg.box_margin &&
              i >= spec.box.y1 + cfg.box_margin && i < spec.box.y2 - cfg.box_margin) {
            const Tint& tint = spec.tint;
            // box-relative coordinates keep the pattern aligned with the
            // pooling grid regardless of where the instance was placed
            double di = i - spec.box.y1, dj = j - spec.box.x1;
            // the wave runs diagonally in the source domain; the target
            // domain rotates its direction by severity * shift_pattern_degrees
            double wave_angle =
                (45.0 + (target_style ? spec.severity * cfg.shift_pattern_degrees : 0.0)) *
                M_PI / 180.0;
            double along = std::cos(wave_angle) * di + std::sin(wave_angle) * dj;
            double phase =
                2.0 * M_PI * (class_frequency(spec.class_id) * M_SQRT2 * along +
                              class_velocity(spec.class_id) * t) +
                spec.phase;
            double tex = 60.0 + 160.0 * (0.5 + 0.5 * std::sin(phase));
            px[0] = tint.r * tex;
            px[1] = tint.g * tex;
            px[2] = tint.b * tex;
            on_texture = true;
            sev = spec.severity;
            break;  // boxes barely overlap; first instance wins
          }
        }

        if (target_style) {
          if (on_texture) {
            if (cfg.shift_hue_degrees != 0.0) {
              double a = sev * cfg.shift_hue_degrees * M_PI / 180.0;
              double r = px[0], b = px[2];
              px[0] = std::cos(a) * r - std::sin(a) * b;
              px[2] = std::sin(a) * r + std::cos(a) * b;
            }
            double gain[3] = {1.0 + sev * (cfg.shift_gain_r - 1.0),
                              1.0 + sev * (cfg.shift_gain_g - 1.0),
                              1.0 + sev * (cfg.shift_gain_b - 1.0)};
            double contrast = 1.0 - sev * (1.0 - cfg.shift_contrast);
            for (int c = 0; c < 3; ++c) px[c] = 128.0 + contrast * (gain[c] * px[c] - 128.0);
          }
          // the blotch field lands on every pixel, scaled by the clip
          // severity, so low-severity clips stay genuinely close to source
          size_t block = (static_cast<size_t>(i / kBlock) * blocks_j + j / kBlock) * 3;
          for (int c = 0; c < 3; ++c) px[c] += clip_sev * blotch[block + c];
          for (int c = 0; c < 3; ++c) px[c] += cfg.shift_noise_sigma * rng.next_gaussian();
        }
        size_t idx = s.clip.index(t, i, j, 0);
        s.clip.data[idx + 0] = clamp_u8(px[0]);
        s.clip.data[idx + 1] = clamp_u8(px[1]);
        s.clip.data[idx + 2] = clamp_u8(px[2]);
      }
    }
  }
  return s;
}

DatasetIndex gen_split(const BenchmarkConfig& cfg, const std::string& prefix, bool target_style,
                       double gamma, Origin origin, const Rng& root) {
  DatasetIndex ds;
  ds.domain_tag = origin;
  ds.num_classes = cfg.num_classes;
  for (int c = 0; c < cfg.num_classes; ++c) ds.class_names.push_back("class_" + std::to_string(c));

  Rng counts_rng = root.split(prefix + "/counts");
  std::vector<int> per_clip(cfg.clips_per_domain);
  int total = 0;
  for (int& n : per_clip) {
    n = cfg.instances_min +
        static_cast<int>(counts_rng.next_below(cfg.instances_max - cfg.instances_min + 1));
    total += n;
  }
  Rng class_rng = root.split(prefix + "/classes");
  std::vector<int> classes = assign_classes(total, cfg, gamma, class_rng);

  int cursor = 0;
  for (int k = 0; k < cfg.clips_per_domain; ++k) {
    char sid[32];
    std::snprintf(sid, sizeof(sid), "%s_%04d", prefix.c_str(), k);
    std::vector<int> clip_classes(classes.begin() + cursor, classes.begin() + cursor + per_clip[k]);
    cursor += per_clip[k];
    ds.samples.push_back(gen_sample(cfg, sid, target_style, clip_classes, origin,
                                    root.split(prefix + "/clip", k)));
  }
  return ds;
}

}  // namespace

Benchmark gen_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  Rng root(cfg.seed);
  Benchmark b;
  b.source = gen_split(cfg, "src", false, cfg.long_tail_gamma, Origin::SourcePrimary, root);
  b.target_train = gen_split(cfg, "tgt", true, cfg.target_tail_gamma, Origin::Target, root);
  b.target_val = gen_split(cfg, "val", true, 0.0, Origin::Target, root);
  return b;
}

}  // namespace daaim
