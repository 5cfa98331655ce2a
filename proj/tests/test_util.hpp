#pragma once

// Shared helpers for unit and acceptance suites. The nearest-centroid
// classifier is an implementation-independent check that instance features
// carry class identity; it never touches the trained model path.

#include <map>
#include <vector>

#include "daaim/clipstore.hpp"
#include "daaim/model.hpp"

namespace daaim::testutil {

struct CentroidModel {
  std::map<int, std::vector<double>> centroids;
  int pool_grid = 4;
};

inline CentroidModel fit_centroids(const DatasetIndex& ds, int pool_grid = 4) {
  CentroidModel m;
  m.pool_grid = pool_grid;
  std::map<int, int> counts;
  for (const Sample& s : ds.samples)
    for (const Annotation& a : s.annotations) {
      std::vector<double> f = extract_features(s.clip, a.box, pool_grid);
      auto& c = m.centroids[a.class_id];
      if (c.empty()) c.assign(f.size(), 0.0);
      for (size_t i = 0; i < f.size(); ++i) c[i] += f[i];
      counts[a.class_id]++;
    }
  for (auto& [cls, c] : m.centroids)
    for (double& v : c) v /= counts[cls];
  return m;
}

inline int classify(const CentroidModel& m, const Clip& clip, const Box& box) {
  std::vector<double> f = extract_features(clip, box, m.pool_grid);
  int best = -1;
  double best_d = 1e300;
  for (const auto& [cls, c] : m.centroids) {
    double d = 0;
    for (size_t i = 0; i < f.size(); ++i) d += (f[i] - c[i]) * (f[i] - c[i]);
    if (d < best_d) {
      best_d = d;
      best = cls;
    }
  }
  return best;
}

inline double centroid_accuracy(const CentroidModel& m, const DatasetIndex& ds) {
  size_t correct = 0, total = 0;
  for (const Sample& s : ds.samples)
    for (const Annotation& a : s.annotations) {
      if (classify(m, s.clip, a.box) == a.class_id) ++correct;
      ++total;
    }
  return total ? static_cast<double>(correct) / total : 0.0;
}

inline DatasetIndex slice_dataset(const DatasetIndex& ds, size_t begin, size_t end) {
  DatasetIndex out;
  out.domain_tag = ds.domain_tag;
  out.num_classes = ds.num_classes;
  out.class_names = ds.class_names;
  for (size_t i = begin; i < end && i < ds.samples.size(); ++i)
    out.samples.push_back(ds.samples[i]);
  return out;
}

// drop every annotation of the given classes; samples left empty are removed
inline DatasetIndex drop_classes(const DatasetIndex& ds, const std::vector<int>& classes) {
  DatasetIndex out;
  out.domain_tag = ds.domain_tag;
  out.num_classes = ds.num_classes;
  out.class_names = ds.class_names;
  for (const Sample& s : ds.samples) {
    Sample copy;
    copy.sample_id = s.sample_id;
    copy.clip = s.clip;
    for (const Annotation& a : s.annotations) {
      bool dropped = false;
      for (int c : classes)
        if (a.class_id == c) dropped = true;
      if (!dropped) copy.annotations.push_back(a);
    }
    if (!copy.annotations.empty()) out.samples.push_back(std::move(copy));
  }
  return out;
}

}  // namespace daaim::testutil
