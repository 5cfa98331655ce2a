#include "daaim/clipstore.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace daaim {

namespace fs = std::filesystem;

Clip Clip::make(uint32_t frames, uint32_t height, uint32_t width, uint32_t channels) {
  Clip c;
  c.frames = frames;
  c.height = height;
  c.width = width;
  c.channels = channels;
  c.key_index = frames / 2;
  c.data.assign(static_cast<size_t>(frames) * height * width * channels, 0);
  return c;
}

std::vector<int> DatasetIndex::class_histogram() const {
  std::vector<int> hist(num_classes, 0);
  for (const Sample& s : samples)
    for (const Annotation& a : s.annotations) {
      if (a.class_id < 0 || a.class_id >= num_classes)
        throw std::runtime_error("annotation class_id out of range");
      hist[a.class_id]++;
    }
  return hist;
}

size_t DatasetIndex::annotation_count() const {
  size_t n = 0;
  for (const Sample& s : samples) n += s.annotations.size();
  return n;
}

static const char* kCsvHeader = "sample_id,x1,y1,x2,y2,class_id,instance_id";

std::vector<AnnotationRecord> parse_annotation_csv(std::istream& in) {
  std::vector<AnnotationRecord> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line == kCsvHeader) continue;

    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 7)
      throw std::runtime_error("annotation csv: expected 7 fields at line " + std::to_string(lineno));

    AnnotationRecord rec;
    rec.sample_id = fields[0];
    try {
      size_t pos;
      rec.x1 = std::stod(fields[1], &pos);
      rec.y1 = std::stod(fields[2]);
      rec.x2 = std::stod(fields[3]);
      rec.y2 = std::stod(fields[4]);
      rec.class_id = std::stoi(fields[5]);
      rec.instance_id = std::stoi(fields[6]);
    } catch (const std::exception&) {
      throw std::runtime_error("annotation csv: malformed number at line " + std::to_string(lineno));
    }
    for (double v : {rec.x1, rec.y1, rec.x2, rec.y2})
      if (!(v >= 0.0 && v <= 1.0))
        throw std::runtime_error("annotation csv: coordinate outside [0,1] at line " +
                                 std::to_string(lineno));
    if (rec.x1 > rec.x2)
      throw std::runtime_error("annotation csv: x1>x2 at line " + std::to_string(lineno));
    if (rec.y1 > rec.y2)
      throw std::runtime_error("annotation csv: y1>y2 at line " + std::to_string(lineno));
    out.push_back(std::move(rec));
  }
  return out;
}

void write_annotation_csv(std::ostream& out, const std::vector<AnnotationRecord>& records) {
  out << kCsvHeader << "\n";
  char buf[256];
  for (const AnnotationRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%d,%d", r.sample_id.c_str(), r.x1,
                  r.y1, r.x2, r.y2, r.class_id, r.instance_id);
    out << buf << "\n";
  }
}

Annotation to_pixel_annotation(const AnnotationRecord& rec, const Clip& clip, Origin origin) {
  Annotation a;
  a.box = Box{rec.x1 * clip.width, rec.y1 * clip.height, rec.x2 * clip.width,
              rec.y2 * clip.height};
  a.class_id = rec.class_id;
  a.instance_id = rec.instance_id;
  a.origin = origin;
  return a;
}

static uint32_t read_u32le(std::istream& in) {
  uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("clp1: truncated header");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

static void write_u32le(std::ostream& out, uint32_t v) {
  uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                  static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}

Clip read_clip(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("clp1: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "CLP1", 4) != 0)
    throw std::runtime_error("clp1: bad magic in " + path.string());
  Clip c;
  c.frames = read_u32le(in);
  c.height = read_u32le(in);
  c.width = read_u32le(in);
  c.channels = read_u32le(in);
  c.key_index = read_u32le(in);
  uint64_t n = static_cast<uint64_t>(c.frames) * c.height * c.width * c.channels;
  if (n > (1ULL << 32)) throw std::runtime_error("clp1: dims overflow in " + path.string());
  c.data.resize(n);
  in.read(reinterpret_cast<char*>(c.data.data()), static_cast<std::streamsize>(n));
  if (static_cast<uint64_t>(in.gcount()) != n)
    throw std::runtime_error("clp1: truncated payload in " + path.string());
  return c;
}

void write_clip(const Clip& clip, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("clp1: cannot write " + path.string());
  out.write("CLP1", 4);
  write_u32le(out, clip.frames);
  write_u32le(out, clip.height);
  write_u32le(out, clip.width);
  write_u32le(out, clip.channels);
  write_u32le(out, clip.key_index);
  out.write(reinterpret_cast<const char*>(clip.data.data()),
            static_cast<std::streamsize>(clip.data.size()));
  if (!out) throw std::runtime_error("clp1: write failed for " + path.string());
}

DatasetIndex load_dataset(const fs::path& dir, Origin origin) {
  DatasetIndex ds;
  ds.domain_tag = origin;

  std::ifstream cls(dir / "classes.txt");
  if (!cls) throw std::runtime_error("dataset: missing classes.txt in " + dir.string());
  std::string name;
  while (std::getline(cls, name)) {
    if (!name.empty() && name.back() == '\r') name.pop_back();
    if (!name.empty()) ds.class_names.push_back(name);
  }
  ds.num_classes = static_cast<int>(ds.class_names.size());

  std::ifstream csv(dir / "annotations.csv");
  if (!csv) throw std::runtime_error("dataset: missing annotations.csv in " + dir.string());
  auto records = parse_annotation_csv(csv);

  // group records preserving first-seen sample order
  std::vector<std::string> order;
  std::map<std::string, std::vector<AnnotationRecord>> by_sample;
  for (auto& r : records) {
    if (!by_sample.count(r.sample_id)) order.push_back(r.sample_id);
    by_sample[r.sample_id].push_back(r);
  }

  for (const std::string& sid : order) {
    Sample s;
    s.sample_id = sid;
    s.clip = read_clip(dir / "clips" / (sid + ".clp"));
    for (const AnnotationRecord& r : by_sample[sid]) {
      Annotation a = to_pixel_annotation(r, s.clip, origin);
      if (a.class_id < 0 || a.class_id >= ds.num_classes)
        throw std::runtime_error("dataset: class_id out of range for sample " + sid);
      s.annotations.push_back(a);
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void save_dataset(const DatasetIndex& ds, const fs::path& dir) {
  fs::create_directories(dir / "clips");

  std::ofstream cls(dir / "classes.txt");
  for (const std::string& n : ds.class_names) cls << n << "\n";

  std::vector<AnnotationRecord> records;
  for (const Sample& s : ds.samples) {
    write_clip(s.clip, dir / "clips" / (s.sample_id + ".clp"));
    for (const Annotation& a : s.annotations) {
      AnnotationRecord r;
      r.sample_id = s.sample_id;
      r.x1 = a.box.x1 / s.clip.width;
      r.y1 = a.box.y1 / s.clip.height;
      r.x2 = a.box.x2 / s.clip.width;
      r.y2 = a.box.y2 / s.clip.height;
      r.class_id = a.class_id;
      r.instance_id = a.instance_id;
      records.push_back(std::move(r));
    }
  }
  std::ofstream csv(dir / "annotations.csv");
  write_annotation_csv(csv, records);
}

DatasetIndex cap_per_class(const DatasetIndex& ds, size_t cap, Rng& rng) {
  if (cap < 1) throw std::invalid_argument("cap_per_class: cap must be >= 1");

  // flat annotation index per class, in dataset order
  std::vector<std::vector<std::pair<size_t, size_t>>> per_class(ds.num_classes);
  for (size_t si = 0; si < ds.samples.size(); ++si)
    for (size_t ai = 0; ai < ds.samples[si].annotations.size(); ++ai)
      per_class[ds.samples[si].annotations[ai].class_id].push_back({si, ai});

  std::vector<std::vector<uint8_t>> keep(ds.samples.size());
  for (size_t si = 0; si < ds.samples.size(); ++si)
    keep[si].assign(ds.samples[si].annotations.size(), 1);

  for (int c = 0; c < ds.num_classes; ++c) {
    auto& idx = per_class[c];
    if (idx.size() <= cap) continue;
    std::vector<size_t> order(idx.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (size_t i = cap; i < order.size(); ++i) {
      auto [si, ai] = idx[order[i]];
      keep[si][ai] = 0;
    }
  }

  DatasetIndex out;
  out.domain_tag = ds.domain_tag;
  out.num_classes = ds.num_classes;
  out.class_names = ds.class_names;
  for (size_t si = 0; si < ds.samples.size(); ++si) {
    Sample s;
    s.sample_id = ds.samples[si].sample_id;
    s.clip = ds.samples[si].clip;
    for (size_t ai = 0; ai < ds.samples[si].annotations.size(); ++ai)
      if (keep[si][ai]) s.annotations.push_back(ds.samples[si].annotations[ai]);
    if (!s.annotations.empty()) out.samples.push_back(std::move(s));
  }
  return out;
}

DatasetIndex extend_source(const DatasetIndex& primary, const DatasetIndex& auxiliary) {
  if (primary.num_classes != auxiliary.num_classes)
    throw std::runtime_error("extend_source: class count mismatch");
  DatasetIndex out = primary;
  for (const Sample& s : auxiliary.samples) {
    Sample copy = s;
    for (Annotation& a : copy.annotations)
      if (a.origin != Origin::Target) a.origin = Origin::SourceAuxiliary;
    out.samples.push_back(std::move(copy));
  }
  return out;
}

}  // namespace daaim
