#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "daaim/geometry.hpp"
#include "daaim/rng.hpp"

using namespace daaim;

namespace {

// pixel-count oracle on a fine integer grid (scale 10 -> 0.1 px resolution)
double iou_raster_oracle(const Box& a, const Box& b, int scale = 10) {
  auto scaled = [&](const Box& x) {
    return Box{x.x1 * scale, x.y1 * scale, x.x2 * scale, x.y2 * scale};
  };
  int w = static_cast<int>(std::ceil(std::max(a.x2, b.x2))) * scale + 1;
  int h = static_cast<int>(std::ceil(std::max(a.y2, b.y2))) * scale + 1;
  Mask2D ma = rasterize({scaled(a)}, w, h);
  Mask2D mb = rasterize({scaled(b)}, w, h);
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < ma.data.size(); ++i) {
    inter += ma.data[i] & mb.data[i];
    uni += ma.data[i] | mb.data[i];
  }
  return uni ? static_cast<double>(inter) / uni : 0.0;
}

double coverage_raster_oracle(const Box& target, const std::vector<Box>& sources, int w, int h) {
  Mask2D mt = rasterize({target}, w, h);
  Mask2D ms = rasterize(sources, w, h);
  size_t inter = 0;
  for (size_t i = 0; i < mt.data.size(); ++i) inter += mt.data[i] & ms.data[i];
  return static_cast<double>(inter) / mt.popcount();
}

Box random_int_box(Rng& rng, int w, int h) {
  int x1 = static_cast<int>(rng.next_below(w - 1));
  int y1 = static_cast<int>(rng.next_below(h - 1));
  int x2 = x1 + 1 + static_cast<int>(rng.next_below(w - x1));
  int y2 = y1 + 1 + static_cast<int>(rng.next_below(h - y1));
  return Box{static_cast<double>(x1), static_cast<double>(y1),
             static_cast<double>(std::min(x2, w)), static_cast<double>(std::min(y2, h))};
}

}  // namespace

TEST_CASE("iou on known boxes") {
  CHECK(iou(Box{0, 0, 10, 10}, Box{0, 0, 10, 10}) == doctest::Approx(1.0));
  CHECK(iou(Box{0, 0, 5, 5}, Box{5, 5, 9, 9}) == doctest::Approx(0.0));
  // 2x2 and 2x2 with 1x1 overlap: 1 / (4 + 4 - 1)
  CHECK(iou(Box{0, 0, 2, 2}, Box{1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0));
  CHECK(iou(Box{0, 0, 2, 2}, Box{1, 1, 3, 3}) ==
        doctest::Approx(iou_raster_oracle(Box{0, 0, 2, 2}, Box{1, 1, 3, 3})));
  // degenerate boxes
  CHECK(iou(Box{3, 3, 3, 3}, Box{3, 3, 3, 3}) == 0.0);
}

TEST_CASE("iou properties over random pairs") {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    Box a = random_int_box(rng, 40, 40);
    Box b = random_int_box(rng, 40, 40);
    double v = iou(a, b);
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(v == doctest::Approx(iou_raster_oracle(a, b, 1)));
  }
}

TEST_CASE("coverage on known boxes") {
  CHECK(coverage(Box{2, 2, 8, 8}, {Box{0, 0, 10, 10}}) == doctest::Approx(1.0));
  CHECK(coverage(Box{0, 0, 10, 10}, {Box{20, 20, 30, 30}}) == doctest::Approx(0.0));
  CHECK(coverage(Box{0, 0, 10, 10}, {Box{0, 0, 10, 5}}) == doctest::Approx(0.5));
  CHECK(coverage(Box{0, 0, 10, 10}, {}) == 0.0);
  CHECK_THROWS(coverage(Box{5, 5, 5, 5}, {Box{0, 0, 10, 10}}));
}

TEST_CASE("coverage matches the pixel oracle for integer boxes") {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    Box t = random_int_box(rng, 32, 32);
    std::vector<Box> sources;
    for (int k = 0; k < 3; ++k) sources.push_back(random_int_box(rng, 32, 32));
    CHECK(coverage(t, sources) == doctest::Approx(coverage_raster_oracle(t, sources, 32, 32)));
  }
}

TEST_CASE("coverage with overlapping sources does not double count") {
  // two sources each cover the same half of the target
  CHECK(coverage(Box{0, 0, 10, 10}, {Box{0, 0, 10, 5}, Box{0, 0, 10, 5}}) == doctest::Approx(0.5));
}

TEST_CASE("expand_box") {
  CHECK(expand_box(Box{40, 40, 60, 60}, 0.2, 100, 100) == Box{38, 38, 62, 62});
  CHECK(expand_box(Box{40, 40, 60, 60}, 0.0, 100, 100) == Box{40, 40, 60, 60});
  CHECK(expand_box(Box{0, 0, 20, 20}, 0.2, 100, 100) == Box{0, 0, 22, 22});
}

TEST_CASE("resize_box_half worked examples") {
  CHECK(resize_box_half(Box{20, 10, 60, 50}, 100, 80) == Box{35, 25, 55, 45});
  // full-frame box maps to the centered half frame
  CHECK(resize_box_half(Box{0, 0, 100, 80}, 100, 80) == Box{25, 20, 75, 60});
  // center point is a fixed point
  CHECK(resize_box_half(Box{50, 40, 50, 40}, 100, 80) == Box{50, 40, 50, 40});
}

TEST_CASE("resize_box_half ordering and width over random boxes") {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    int w = 20 + static_cast<int>(rng.next_below(200));
    int h = 20 + static_cast<int>(rng.next_below(200));
    Box b = random_int_box(rng, w, h);
    Box r = resize_box_half(b, w, h);
    CHECK(r.x1 <= r.x2);
    CHECK(r.y1 <= r.y2);
    CHECK(std::abs(r.width() - b.width() / 2.0) <= 1.0);
    CHECK(std::abs(r.height() - b.height() / 2.0) <= 1.0);
  }
}

TEST_CASE("rasterize") {
  CHECK(rasterize({}, 8, 8).popcount() == 0);
  CHECK(rasterize({Box{0, 0, 8, 8}}, 8, 8).popcount() == 64);
  CHECK(rasterize({Box{0, 0, 3, 2}}, 4, 4).popcount() == 6);
}

TEST_CASE("rasterize inclusion-exclusion for two boxes") {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    Box a = random_int_box(rng, 24, 24);
    Box b = random_int_box(rng, 24, 24);
    size_t pa = rasterize({a}, 24, 24).popcount();
    size_t pb = rasterize({b}, 24, 24).popcount();
    Box inter{std::max(a.x1, b.x1), std::max(a.y1, b.y1), std::min(a.x2, b.x2),
              std::min(a.y2, b.y2)};
    size_t pi = inter.x1 < inter.x2 && inter.y1 < inter.y2
                    ? rasterize({inter}, 24, 24).popcount()
                    : 0;
    CHECK(rasterize({a, b}, 24, 24).popcount() == pa + pb - pi);
  }
}

TEST_CASE("mask replication keeps every slice identical") {
  Mask2D key = rasterize({Box{1, 1, 5, 4}}, 8, 8);
  Mask3D m = replicate_mask(key, 5);
  for (int t = 0; t < 5; ++t)
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) CHECK(m.at(t, i, j) == key.at(i, j));
  CHECK(m.slice_popcount() == key.popcount());
}
