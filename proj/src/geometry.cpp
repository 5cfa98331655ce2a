#include "daaim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace daaim {

Box Box::clamped(double w, double h) const {
  Box r;
  r.x1 = std::clamp(x1, 0.0, w);
  r.x2 = std::clamp(x2, 0.0, w);
  r.y1 = std::clamp(y1, 0.0, h);
  r.y2 = std::clamp(y2, 0.0, h);
  return r;
}

size_t Mask2D::popcount() const {
  return static_cast<size_t>(std::accumulate(data.begin(), data.end(), size_t{0}));
}

size_t Mask3D::slice_popcount() const {
  size_t n = static_cast<size_t>(height) * width;
  return static_cast<size_t>(std::accumulate(data.begin(), data.begin() + n, size_t{0}));
}

static double intersection_area(const Box& a, const Box& b) {
  double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0 || h <= 0) return 0.0;
  return w * h;
}

double iou(const Box& a, const Box& b) {
  double inter = intersection_area(a, b);
  double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return inter / uni;
}

double coverage(const Box& target, const std::vector<Box>& sources) {
  if (target.area() <= 0) throw std::invalid_argument("coverage: zero-area target box");

  // Clip each source to the target, then measure the union on the compressed grid.
  std::vector<Box> clipped;
  for (const Box& s : sources) {
    Box c{std::max(s.x1, target.x1), std::max(s.y1, target.y1),
          std::min(s.x2, target.x2), std::min(s.y2, target.y2)};
    if (c.x1 < c.x2 && c.y1 < c.y2) clipped.push_back(c);
  }
  if (clipped.empty()) return 0.0;

  std::vector<double> xs, ys;
  for (const Box& c : clipped) {
    xs.push_back(c.x1);
    xs.push_back(c.x2);
    ys.push_back(c.y1);
    ys.push_back(c.y2);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

  double covered = 0.0;
  for (size_t ix = 0; ix + 1 < xs.size(); ++ix) {
    for (size_t iy = 0; iy + 1 < ys.size(); ++iy) {
      double cx = 0.5 * (xs[ix] + xs[ix + 1]);
      double cy = 0.5 * (ys[iy] + ys[iy + 1]);
      for (const Box& c : clipped) {
        if (cx >= c.x1 && cx < c.x2 && cy >= c.y1 && cy < c.y2) {
          covered += (xs[ix + 1] - xs[ix]) * (ys[iy + 1] - ys[iy]);
          break;
        }
      }
    }
  }
  return covered / target.area();
}

Box expand_box(const Box& b, double factor, double frame_w, double frame_h) {
  double dx = 0.5 * factor * b.width();
  double dy = 0.5 * factor * b.height();
  Box r{b.x1 - dx, b.y1 - dy, b.x2 + dx, b.y2 + dy};
  return r.clamped(frame_w, frame_h);
}

// round half away from zero; all coordinates here are non-negative
static double round_half(double v) { return std::round(v); }

Box resize_box_half(const Box& b, double frame_w, double frame_h) {
  double ox = round_half(frame_w / 4.0);
  double oy = round_half(frame_h / 4.0);
  return Box{ox + round_half(b.x1 / 2.0), oy + round_half(b.y1 / 2.0),
             ox + round_half(b.x2 / 2.0), oy + round_half(b.y2 / 2.0)};
}

Mask2D rasterize(const std::vector<Box>& boxes, int width, int height) {
  Mask2D m;
  m.width = width;
  m.height = height;
  m.data.assign(static_cast<size_t>(width) * height, 0);
  for (const Box& b : boxes) {
    Box c = b.clamped(width, height);
    int j0 = static_cast<int>(std::ceil(c.x1));
    int j1 = static_cast<int>(std::ceil(c.x2));
    int i0 = static_cast<int>(std::ceil(c.y1));
    int i1 = static_cast<int>(std::ceil(c.y2));
    for (int i = i0; i < i1; ++i)
      for (int j = j0; j < j1; ++j) m.data[static_cast<size_t>(i) * width + j] = 1;
  }
  return m;
}

Mask3D replicate_mask(const Mask2D& key, int frames) {
  Mask3D m;
  m.frames = frames;
  m.height = key.height;
  m.width = key.width;
  m.data.resize(static_cast<size_t>(frames) * key.data.size());
  for (int t = 0; t < frames; ++t)
    std::copy(key.data.begin(), key.data.end(), m.data.begin() + static_cast<size_t>(t) * key.data.size());
  return m;
}

}  // namespace daaim
