#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "daaim/geometry.hpp"
#include "daaim/rng.hpp"

namespace daaim {

enum class Origin : uint8_t { SourcePrimary, SourceAuxiliary, Target };

// T x H x W x C uint8 video tensor, channel-last; boxes are annotated on the
// key-frame in the middle of the clip.
struct Clip {
  uint32_t frames = 0, height = 0, width = 0, channels = 0;
  uint32_t key_index = 0;
  std::vector<uint8_t> data;

  size_t index(uint32_t t, uint32_t i, uint32_t j, uint32_t c) const {
    return ((static_cast<size_t>(t) * height + i) * width + j) * channels + c;
  }
  uint8_t at(uint32_t t, uint32_t i, uint32_t j, uint32_t c) const {
    return data[index(t, i, j, c)];
  }

  static Clip make(uint32_t frames, uint32_t height, uint32_t width, uint32_t channels);
};

struct Annotation {
  Box box;
  int class_id = 0;
  int instance_id = 0;
  Origin origin = Origin::SourcePrimary;
};

struct Sample {
  Clip clip;
  std::vector<Annotation> annotations;
  std::string sample_id;
};

struct DatasetIndex {
  std::vector<Sample> samples;
  Origin domain_tag = Origin::SourcePrimary;
  int num_classes = 0;
  std::vector<std::string> class_names;

  std::vector<int> class_histogram() const;
  size_t annotation_count() const;
};

// One parsed CSV row; coordinates still normalized to [0,1].
struct AnnotationRecord {
  std::string sample_id;
  double x1, y1, x2, y2;
  int class_id;
  int instance_id;
};

// `sample_id,x1,y1,x2,y2,class_id,instance_id`, coordinates in [0,1].
// Header line optional on read, always written. Throws with a 1-based line
// number on malformed rows.
std::vector<AnnotationRecord> parse_annotation_csv(std::istream& in);
void write_annotation_csv(std::ostream& out, const std::vector<AnnotationRecord>& records);

Annotation to_pixel_annotation(const AnnotationRecord& rec, const Clip& clip, Origin origin);

// CLP1 container: magic "CLP1", u32le T,H,W,C, u32le key_index, raw payload.
Clip read_clip(const std::filesystem::path& path);
void write_clip(const Clip& clip, const std::filesystem::path& path);

// Directory layout: clips/<sample_id>.clp, annotations.csv, classes.txt.
DatasetIndex load_dataset(const std::filesystem::path& dir, Origin origin);
void save_dataset(const DatasetIndex& ds, const std::filesystem::path& dir);

// Per class keep at most `cap` annotations, chosen uniformly without
// replacement; samples that lose every annotation are dropped.
DatasetIndex cap_per_class(const DatasetIndex& ds, size_t cap, Rng& rng);

// Concatenates an auxiliary source after the primary; origin flags preserved.
DatasetIndex extend_source(const DatasetIndex& primary, const DatasetIndex& auxiliary);

}  // namespace daaim
