#include "daaim/mixer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace daaim {

std::vector<size_t> select_instances(const std::vector<Annotation>& annotations, Rng& rng) {
  if (annotations.empty()) throw std::invalid_argument("select_instances: empty annotation list");
  size_t n = annotations.size();
  size_t k = (n + 1) / 2;
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Mask3D build_mask(const std::vector<Box>& selected, double expand_factor, int frames,
                  int height, int width) {
  std::vector<Box> expanded;
  expanded.reserve(selected.size());
  for (const Box& b : selected) expanded.push_back(expand_box(b, expand_factor, width, height));
  Mask2D key = rasterize(expanded, width, height);
  return replicate_mask(key, frames);
}

// 2x2 mean pool of one frame pasted centered into a zero frame. Odd input
// dims pool the trailing row/col against zero padding.
static Clip downscale_clip(const Clip& in) {
  Clip out = Clip::make(in.frames, in.height, in.width, in.channels);
  out.key_index = in.key_index;
  int half_h = (static_cast<int>(in.height) + 1) / 2;
  int half_w = (static_cast<int>(in.width) + 1) / 2;
  int oy = static_cast<int>(std::round(in.height / 4.0));
  int ox = static_cast<int>(std::round(in.width / 4.0));
  for (uint32_t t = 0; t < in.frames; ++t) {
    for (int i = 0; i < half_h; ++i) {
      for (int j = 0; j < half_w; ++j) {
        for (uint32_t c = 0; c < in.channels; ++c) {
          int sum = 0;
          for (int di = 0; di < 2; ++di)
            for (int dj = 0; dj < 2; ++dj) {
              int si = 2 * i + di, sj = 2 * j + dj;
              if (si < static_cast<int>(in.height) && sj < static_cast<int>(in.width))
                sum += in.at(t, si, sj, c);
            }
          int ti = oy + i, tj = ox + j;
          if (ti < static_cast<int>(in.height) && tj < static_cast<int>(in.width))
            out.data[out.index(t, ti, tj, c)] = static_cast<uint8_t>((sum + 2) / 4);
        }
      }
    }
  }
  return out;
}

DownscaleResult apply_downscale_rule(const Sample& source, const std::vector<size_t>& selected,
                                     const Mask3D& mask, const MixConfig& cfg) {
  DownscaleResult r{source, selected, mask, false};
  double frame_area = static_cast<double>(mask.height) * mask.width;
  if (frame_area <= 0) return r;
  double ratio = static_cast<double>(r.mask.slice_popcount()) / frame_area;
  if (ratio <= cfg.downscale_area_ratio) return r;

  r.applied = true;
  r.sample.clip = downscale_clip(source.clip);
  double w = source.clip.width, h = source.clip.height;
  for (Annotation& a : r.sample.annotations) a.box = resize_box_half(a.box, w, h);

  std::vector<Box> sel_boxes;
  for (size_t i : r.selected) sel_boxes.push_back(r.sample.annotations[i].box);
  r.mask = build_mask(sel_boxes, cfg.expand_factor, mask.frames, mask.height, mask.width);
  return r;
}

Clip mix_clips(const Clip& source, const Clip& target, const Mask3D& mask) {
  if (source.frames != target.frames || source.height != target.height ||
      source.width != target.width || source.channels != target.channels)
    throw std::invalid_argument("mix_clips: clip dimension mismatch");
  if (mask.frames != static_cast<int>(source.frames) ||
      mask.height != static_cast<int>(source.height) ||
      mask.width != static_cast<int>(source.width))
    throw std::invalid_argument("mix_clips: mask dimension mismatch");

  Clip out = source;
  size_t C = source.channels;
  for (size_t v = 0; v < mask.data.size(); ++v) {
    if (mask.data[v]) continue;
    size_t base = v * C;
    for (size_t c = 0; c < C; ++c) out.data[base + c] = target.data[base + c];
  }
  return out;
}

MixedLabels mix_labels(const std::vector<Annotation>& selected_source,
                       const std::vector<Annotation>& target,
                       const std::vector<PseudoLabel>& pseudo,
                       const std::vector<Box>& pasted_boxes, const MixConfig& cfg) {
  if (pseudo.size() != target.size())
    throw std::invalid_argument("mix_labels: pseudo labels not aligned with target boxes");

  MixedLabels out;
  out.annotations = selected_source;

  for (size_t i = 0; i < target.size(); ++i) {
    double cov = target[i].box.area() > 0 ? coverage(target[i].box, pasted_boxes) : 1.0;
    if (cov > cfg.discard_threshold) {
      out.discarded_count++;
      continue;
    }
    Annotation a = target[i];
    a.class_id = pseudo[i].label;
    a.origin = Origin::Target;
    out.annotations.push_back(a);
    out.kept_target_confidences.push_back(pseudo[i].confidence);
  }
  return out;
}

std::optional<MixedSample> aim_mix(const Sample& source, const Sample& target,
                                   const std::vector<PseudoLabel>& pseudo, Rng& rng,
                                   const MixConfig& cfg) {
  if (source.annotations.empty()) return std::nullopt;

  const Clip& tc = target.clip;
  std::vector<size_t> selected = select_instances(source.annotations, rng);

  std::vector<Box> sel_boxes;
  for (size_t i : selected) sel_boxes.push_back(source.annotations[i].box);
  Mask3D mask = build_mask(sel_boxes, cfg.expand_factor, static_cast<int>(tc.frames),
                           static_cast<int>(tc.height), static_cast<int>(tc.width));

  const Sample* src = &source;
  DownscaleResult down;
  if (cfg.enable_resize) {
    down = apply_downscale_rule(source, selected, mask, cfg);
    src = &down.sample;
    if (down.applied) mask = std::move(down.mask);
  }

  MixedSample out;
  out.downscaled = down.applied;
  out.clip = mix_clips(src->clip, tc, mask);

  std::vector<Annotation> sel_source;
  std::vector<Box> pasted;
  for (size_t i : selected) {
    sel_source.push_back(src->annotations[i]);
    pasted.push_back(expand_box(src->annotations[i].box, cfg.expand_factor, tc.width, tc.height));
  }
  MixedLabels labels = mix_labels(sel_source, target.annotations, pseudo, pasted, cfg);
  out.annotations = std::move(labels.annotations);
  out.kept_target_confidences = std::move(labels.kept_target_confidences);
  out.discarded_count = labels.discarded_count;
  return out;
}

}  // namespace daaim
