#pragma once

#include <cstdint>
#include <vector>

namespace daaim {

// Axis-aligned box in pixel coordinates, half-open: integer pixel (i, j) is
// inside iff x1 <= j < x2 and y1 <= i < y2. Zero-area boxes are legal.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const { return x1 <= x2 && y1 <= y2; }

  Box clamped(double w, double h) const;

  bool operator==(const Box&) const = default;
};

struct Mask2D {
  int height = 0, width = 0;
  std::vector<uint8_t> data;  // H*W, row-major, values 0/1

  uint8_t at(int i, int j) const { return data[static_cast<size_t>(i) * width + j]; }
  size_t popcount() const;
};

// Temporal replication of a key-frame mask: every slice is identical.
struct Mask3D {
  int frames = 0, height = 0, width = 0;
  std::vector<uint8_t> data;  // T*H*W

  uint8_t at(int t, int i, int j) const {
    return data[(static_cast<size_t>(t) * height + i) * width + j];
  }
  size_t slice_popcount() const;  // popcount of one temporal slice
};

double iou(const Box& a, const Box& b);

// Fraction of target covered by the union of source boxes. Exact for any
// real-coordinate boxes (coordinate compression). Throws on zero-area target.
double coverage(const Box& target, const std::vector<Box>& sources);

// Grow width and height by `factor` total (factor/2 per side, centered),
// then clamp to [0,W]x[0,H].
Box expand_box(const Box& b, double factor, double frame_w, double frame_h);

// Box transform matching a 0.5 downscale pasted centered into the frame:
// x' = round(W/4) + round(x/2), same for y with H. Round half away from zero.
Box resize_box_half(const Box& b, double frame_w, double frame_h);

Mask2D rasterize(const std::vector<Box>& boxes, int width, int height);

Mask3D replicate_mask(const Mask2D& key, int frames);

}  // namespace daaim
