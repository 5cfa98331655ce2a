#include "daaim/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace daaim {

ModelParams ModelParams::init(int pool_grid, int channels, int hidden_dim, int num_classes,
                              Rng& rng) {
  ModelParams p;
  p.pool_grid = pool_grid;
  p.channels = channels;
  p.feature_dim = pool_grid * pool_grid * channels;
  p.hidden_dim = hidden_dim;
  p.num_classes = num_classes;
  p.w1.resize(static_cast<size_t>(hidden_dim) * p.feature_dim);
  p.b1.assign(hidden_dim, 0.0);
  p.w2.resize(static_cast<size_t>(num_classes) * hidden_dim);
  p.b2.assign(num_classes, 0.0);

  double s1 = std::sqrt(6.0 / (p.feature_dim + hidden_dim));
  for (double& v : p.w1) v = rng.next_range(-s1, s1);
  double s2 = std::sqrt(6.0 / (hidden_dim + num_classes));
  for (double& v : p.w2) v = rng.next_range(-s2, s2);
  return p;
}

bool ModelParams::same_shape(const ModelParams& o) const {
  return feature_dim == o.feature_dim && hidden_dim == o.hidden_dim &&
         num_classes == o.num_classes && pool_grid == o.pool_grid && channels == o.channels;
}

void ModelParams::check_finite() const {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!ok(w1) || !ok(b1) || !ok(w2) || !ok(b2))
    throw std::runtime_error("model: non-finite parameter");
}

std::vector<double> extract_features(const Clip& clip, const Box& box, int pool_grid) {
  if (box.area() <= 0) throw std::invalid_argument("extract_features: zero-area box");
  const int G = pool_grid;
  const int C = static_cast<int>(clip.channels);
  std::vector<double> acc(static_cast<size_t>(G) * G * C, 0.0);

  Box b = box.clamped(clip.width, clip.height);
  for (uint32_t t = 0; t < clip.frames; ++t) {
    for (int gi = 0; gi < G; ++gi) {
      double cy0 = b.y1 + b.height() * gi / G;
      double cy1 = b.y1 + b.height() * (gi + 1) / G;
      int i0 = static_cast<int>(std::ceil(cy0));
      int i1 = static_cast<int>(std::ceil(cy1));
      if (i0 >= i1) {  // cell narrower than one pixel: take the pixel under its center
        i0 = std::clamp(static_cast<int>(std::floor(0.5 * (cy0 + cy1))), 0,
                        static_cast<int>(clip.height) - 1);
        i1 = i0 + 1;
      }
      for (int gj = 0; gj < G; ++gj) {
        double cx0 = b.x1 + b.width() * gj / G;
        double cx1 = b.x1 + b.width() * (gj + 1) / G;
        int j0 = static_cast<int>(std::ceil(cx0));
        int j1 = static_cast<int>(std::ceil(cx1));
        if (j0 >= j1) {
          j0 = std::clamp(static_cast<int>(std::floor(0.5 * (cx0 + cx1))), 0,
                          static_cast<int>(clip.width) - 1);
          j1 = j0 + 1;
        }
        for (int c = 0; c < C; ++c) {
          double sum = 0.0;
          for (int i = i0; i < i1; ++i)
            for (int j = j0; j < j1; ++j) sum += clip.at(t, i, j, c);
          acc[(static_cast<size_t>(gi) * G + gj) * C + c] +=
              sum / (static_cast<double>(i1 - i0) * (j1 - j0));
        }
      }
    }
  }
  for (double& v : acc) v = v / clip.frames / 255.0 - 0.5;
  return acc;
}

std::vector<double> forward(const ModelParams& p, const std::vector<double>& features) {
  p.check_finite();
  if (static_cast<int>(features.size()) != p.feature_dim)
    throw std::invalid_argument("forward: feature dim mismatch");

  std::vector<double> h(p.hidden_dim);
  for (int i = 0; i < p.hidden_dim; ++i) {
    double z = p.b1[i];
    const double* row = &p.w1[static_cast<size_t>(i) * p.feature_dim];
    for (int j = 0; j < p.feature_dim; ++j) z += row[j] * features[j];
    h[i] = std::max(0.0, z);
  }
  std::vector<double> logits(p.num_classes);
  for (int k = 0; k < p.num_classes; ++k) {
    double z = p.b2[k];
    const double* row = &p.w2[static_cast<size_t>(k) * p.hidden_dim];
    for (int i = 0; i < p.hidden_dim; ++i) z += row[i] * h[i];
    logits[k] = z;
  }
  double m = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double& z : logits) {
    z = std::exp(z - m);
    denom += z;
  }
  for (double& z : logits) z /= denom;
  return logits;
}

LossGrad loss_and_grad(const ModelParams& p, const std::vector<TrainingExample>& batch) {
  double wsum = 0.0;
  for (const auto& ex : batch) {
    if (ex.weight < 0) throw std::invalid_argument("loss_and_grad: negative weight");
    wsum += ex.weight;
  }
  if (wsum <= 0) throw std::invalid_argument("loss_and_grad: zero weight sum");

  LossGrad out;
  out.grads = p;
  std::fill(out.grads.w1.begin(), out.grads.w1.end(), 0.0);
  std::fill(out.grads.b1.begin(), out.grads.b1.end(), 0.0);
  std::fill(out.grads.w2.begin(), out.grads.w2.end(), 0.0);
  std::fill(out.grads.b2.begin(), out.grads.b2.end(), 0.0);

  std::vector<double> h(p.hidden_dim), dh(p.hidden_dim);
  for (const auto& ex : batch) {
    if (ex.label < 0 || ex.label >= p.num_classes)
      throw std::invalid_argument("loss_and_grad: label out of range");
    if (ex.weight == 0.0) continue;

    for (int i = 0; i < p.hidden_dim; ++i) {
      double z = p.b1[i];
      const double* row = &p.w1[static_cast<size_t>(i) * p.feature_dim];
      for (int j = 0; j < p.feature_dim; ++j) z += row[j] * ex.features[j];
      h[i] = std::max(0.0, z);
    }
    std::vector<double> probs(p.num_classes);
    double m = -1e300;
    for (int k = 0; k < p.num_classes; ++k) {
      double z = p.b2[k];
      const double* row = &p.w2[static_cast<size_t>(k) * p.hidden_dim];
      for (int i = 0; i < p.hidden_dim; ++i) z += row[i] * h[i];
      probs[k] = z;
      m = std::max(m, z);
    }
    double denom = 0.0;
    for (double& z : probs) {
      z = std::exp(z - m);
      denom += z;
    }
    for (double& z : probs) z /= denom;

    double scale = ex.weight / wsum;
    out.loss += scale * (-std::log(std::max(probs[ex.label], 1e-300)));

    // dL/dlogit_k = scale * (p_k - [k == label])
    std::fill(dh.begin(), dh.end(), 0.0);
    for (int k = 0; k < p.num_classes; ++k) {
      double dz = scale * (probs[k] - (k == ex.label ? 1.0 : 0.0));
      out.grads.b2[k] += dz;
      double* gw2 = &out.grads.w2[static_cast<size_t>(k) * p.hidden_dim];
      const double* w2row = &p.w2[static_cast<size_t>(k) * p.hidden_dim];
      for (int i = 0; i < p.hidden_dim; ++i) {
        gw2[i] += dz * h[i];
        dh[i] += dz * w2row[i];
      }
    }
    for (int i = 0; i < p.hidden_dim; ++i) {
      if (h[i] <= 0.0) continue;  // ReLU gate
      out.grads.b1[i] += dh[i];
      double* gw1 = &out.grads.w1[static_cast<size_t>(i) * p.feature_dim];
      for (int j = 0; j < p.feature_dim; ++j) gw1[j] += dh[i] * ex.features[j];
    }
  }
  return out;
}

void ema_update(ModelParams& teacher, const ModelParams& student, double alpha) {
  if (!teacher.same_shape(student)) throw std::invalid_argument("ema_update: shape mismatch");
  auto blend = [alpha](std::vector<double>& t, const std::vector<double>& s) {
    for (size_t i = 0; i < t.size(); ++i) t[i] = alpha * t[i] + (1.0 - alpha) * s[i];
  };
  blend(teacher.w1, student.w1);
  blend(teacher.b1, student.b1);
  blend(teacher.w2, student.w2);
  blend(teacher.b2, student.b2);
}

static uint32_t read_u32le(std::istream& in) {
  uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("mdl1: truncated header");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

static void write_u32le(std::ostream& out, uint32_t v) {
  uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                  static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}

static void write_f32(std::ostream& out, const std::vector<double>& v) {
  for (double d : v) {
    float f = static_cast<float>(d);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_u32le(out, bits);
  }
}

static void read_f32(std::istream& in, std::vector<double>& v) {
  for (double& d : v) {
    uint32_t bits = read_u32le(in);
    float f;
    std::memcpy(&f, &bits, 4);
    d = f;
  }
}

ModelParams read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("mdl1: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MDL1", 4) != 0)
    throw std::runtime_error("mdl1: bad magic in " + path.string());
  ModelParams p;
  p.feature_dim = static_cast<int>(read_u32le(in));
  p.hidden_dim = static_cast<int>(read_u32le(in));
  p.num_classes = static_cast<int>(read_u32le(in));
  p.pool_grid = static_cast<int>(read_u32le(in));
  p.channels = static_cast<int>(read_u32le(in));
  if (p.feature_dim != p.pool_grid * p.pool_grid * p.channels)
    throw std::runtime_error("mdl1: inconsistent dims in " + path.string());
  p.w1.resize(static_cast<size_t>(p.hidden_dim) * p.feature_dim);
  p.b1.resize(p.hidden_dim);
  p.w2.resize(static_cast<size_t>(p.num_classes) * p.hidden_dim);
  p.b2.resize(p.num_classes);
  read_f32(in, p.w1);
  read_f32(in, p.b1);
  read_f32(in, p.w2);
  read_f32(in, p.b2);
  if (!in) throw std::runtime_error("mdl1: truncated payload in " + path.string());
  return p;
}

void write_model(const ModelParams& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("mdl1: cannot write " + path.string());
  out.write("MDL1", 4);
  write_u32le(out, static_cast<uint32_t>(p.feature_dim));
  write_u32le(out, static_cast<uint32_t>(p.hidden_dim));
  write_u32le(out, static_cast<uint32_t>(p.num_classes));
  write_u32le(out, static_cast<uint32_t>(p.pool_grid));
  write_u32le(out, static_cast<uint32_t>(p.channels));
  write_f32(out, p.w1);
  write_f32(out, p.b1);
  write_f32(out, p.w2);
  write_f32(out, p.b2);
  if (!out) throw std::runtime_error("mdl1: write failed for " + path.string());
}

}  // namespace daaim
