// daaim: synthetic-benchmark domain-adaptive action detection toolkit.
// Subcommands: gen-data, train, eval, mix-preview, propagate, stats.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "daaim/clipstore.hpp"
#include "daaim/evaluator.hpp"
#include "daaim/mixer.hpp"
#include "daaim/model.hpp"
#include "daaim/propagator.hpp"
#include "daaim/synthgen.hpp"
#include "daaim/trainer.hpp"

namespace fs = std::filesystem;
using namespace daaim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

struct CommonOpts {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
};

void load_configs(const CommonOpts& c, TrainConfig& train, BenchmarkConfig& bench) {
  if (!c.config_path.empty()) load_config_file(c.config_path, train, bench);
  if (c.seed_set) {
    train.seed = c.seed;
    bench.seed = c.seed;
  }
}

int cmd_gen_data(const CommonOpts& common, const std::string& out_dir) {
  TrainConfig tc;
  BenchmarkConfig bc;
  Benchmark bench;
  try {
    load_configs(common, tc, bc);
    bc.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  try {
    bench = gen_benchmark(bc);
    save_dataset(bench.source, fs::path(out_dir) / "source");
    save_dataset(bench.target_train, fs::path(out_dir) / "target_train");
    save_dataset(bench.target_val, fs::path(out_dir) / "target_val");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  std::cout << "wrote " << bench.source.samples.size() << " source, "
            << bench.target_train.samples.size() << " target_train, "
            << bench.target_val.samples.size() << " target_val clips to " << out_dir << "\n";
  return kExitOk;
}

int cmd_train(const CommonOpts& common, const std::string& source_dir,
              const std::string& aux_dir, const std::string& target_dir,
              const std::string& val_dir, const std::string& out_dir, bool no_adapt,
              bool no_mix, bool no_pseudo, bool no_resize) {
  TrainConfig tc;
  BenchmarkConfig bc;
  DatasetIndex source, target;
  std::optional<DatasetIndex> aux, val;
  try {
    load_configs(common, tc, bc);
    if (no_adapt) tc.enable_mix = tc.enable_pseudo = tc.enable_resize = false;
    if (no_mix) tc.enable_mix = false;
    if (no_pseudo) tc.enable_pseudo = false;
    if (no_resize) tc.enable_resize = false;
    tc.validate();
    source = load_dataset(source_dir, Origin::SourcePrimary);
    target = load_dataset(target_dir, Origin::Target);
    if (!aux_dir.empty()) aux = load_dataset(aux_dir, Origin::SourceAuxiliary);
    if (!val_dir.empty()) val = load_dataset(val_dir, Origin::Target);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  try {
    TrainResult result = train(tc, source, aux, target, val);
    fs::create_directories(out_dir);
    std::ofstream metrics(fs::path(out_dir) / "metrics.jsonl", std::ios::binary);
    for (const std::string& line : result.metrics_lines) metrics << line << "\n";
    write_model(result.student, fs::path(out_dir) / "final.mdl1");
    write_model(result.teacher, fs::path(out_dir) / "teacher.mdl1");
    if (!result.metrics_lines.empty())
      std::cout << result.metrics_lines.back() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& data_dir,
             const std::string& out_path, double iou_threshold) {
  ModelParams model;
  DatasetIndex ds;
  try {
    model = read_model(model_path);
    ds = load_dataset(data_dir, Origin::Target);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  try {
    EvalResult ev = evaluate_dataset(model, ds, iou_threshold);
    ConfusionMatrix cm = pseudo_confusion(model, ds);

    nlohmann::json j;
    j["map"] = ev.map;
    nlohmann::json ap = nlohmann::json::object(), sup = nlohmann::json::object();
    for (const auto& [c, v] : ev.per_class_ap) ap[std::to_string(c)] = v;
    for (const auto& [c, v] : ev.support) sup[std::to_string(c)] = v;
    j["per_class_ap"] = ap;
    j["support"] = sup;
    j["confusion"] = cm.counts;
    j["confusion_row_normalized"] = cm.row_normalized;
    j["accuracy"] = cm.accuracy();

    std::ofstream out(out_path, std::ios::binary);
    out << j.dump(2) << "\n";
    std::cout << "mAP " << ev.map << " accuracy " << cm.accuracy() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_mix_preview(const CommonOpts& common, const std::string& source_dir,
                    const std::string& target_dir, const std::string& model_path,
                    const std::string& out_dir, int count) {
  TrainConfig tc;
  BenchmarkConfig bc;
  DatasetIndex source, target;
  std::optional<ModelParams> model;
  try {
    load_configs(common, tc, bc);
    source = load_dataset(source_dir, Origin::SourcePrimary);
    target = load_dataset(target_dir, Origin::Target);
    if (!model_path.empty()) model = read_model(model_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  try {
    fs::create_directories(out_dir);
    Rng rng = Rng(tc.seed).split("preview");
    std::vector<AnnotationRecord> records;
    int made = 0;
    for (int i = 0; made < count && i < static_cast<int>(source.samples.size()); ++i) {
      const Sample& src = source.samples[i];
      const Sample& tgt = target.samples[i % target.samples.size()];
      std::vector<PseudoLabel> pseudo;
      if (model) {
        std::vector<Box> boxes;
        for (const Annotation& a : tgt.annotations) boxes.push_back(a.box);
        pseudo = pseudo_label(*model, tgt.clip, boxes);
      } else {
        for (const Annotation& a : tgt.annotations) pseudo.push_back({a.class_id, 1.0});
      }
      std::optional<MixedSample> mixed = aim_mix(src, tgt, pseudo, rng, tc.mix_config());
      if (!mixed) continue;
      std::string sid = "mix_" + std::to_string(made);
      write_clip(mixed->clip, fs::path(out_dir) / (sid + ".clp"));
      for (const Annotation& a : mixed->annotations) {
        AnnotationRecord r;
        r.sample_id = sid + (a.origin == Origin::Target ? ":target" : ":source");
        r.x1 = a.box.x1 / mixed->clip.width;
        r.y1 = a.box.y1 / mixed->clip.height;
        r.x2 = a.box.x2 / mixed->clip.width;
        r.y2 = a.box.y2 / mixed->clip.height;
        r.class_id = a.class_id;
        r.instance_id = a.instance_id;
        records.push_back(r);
      }
      ++made;
    }
    std::ofstream csv(fs::path(out_dir) / "mixed_annotations.csv", std::ios::binary);
    write_annotation_csv(csv, records);
    std::cout << "wrote " << made << " mixed clips to " << out_dir << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_propagate(const std::string& keyframes_path, const std::string& detections_path,
                  const std::string& out_path, double iou_min) {
  std::map<int, std::vector<Annotation>> keyframes;
  std::vector<FrameDetections> detections;
  try {
    auto parse_frame = [](const std::string& sid) {
      size_t pos = 0;
      int frame = std::stoi(sid, &pos);
      if (pos != sid.size()) throw std::runtime_error("propagate: sample_id must be a frame index, got '" + sid + "'");
      return frame;
    };
    std::ifstream kf(keyframes_path);
    if (!kf) throw std::runtime_error("propagate: cannot open " + keyframes_path);
    for (const AnnotationRecord& r : parse_annotation_csv(kf)) {
      Annotation a;
      a.box = Box{r.x1, r.y1, r.x2, r.y2};
      a.class_id = r.class_id;
      a.instance_id = r.instance_id;
      keyframes[parse_frame(r.sample_id)].push_back(a);
    }
    std::ifstream df(detections_path);
    if (!df) throw std::runtime_error("propagate: cannot open " + detections_path);
    std::map<int, std::vector<Box>> by_frame;
    for (const AnnotationRecord& r : parse_annotation_csv(df))
      by_frame[parse_frame(r.sample_id)].push_back(Box{r.x1, r.y1, r.x2, r.y2});
    for (const auto& [frame, boxes] : by_frame) detections.push_back({frame, boxes});
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  try {
    auto dense = propagate_annotations(keyframes, detections, iou_min);
    std::vector<AnnotationRecord> records;
    for (const auto& [frame, annotations] : dense)
      for (const Annotation& a : annotations) {
        AnnotationRecord r;
        r.sample_id = std::to_string(frame);
        r.x1 = a.box.x1;
        r.y1 = a.box.y1;
        r.x2 = a.box.x2;
        r.y2 = a.box.y2;
        r.class_id = a.class_id;
        r.instance_id = a.instance_id;
        records.push_back(r);
      }
    std::ofstream out(out_path, std::ios::binary);
    write_annotation_csv(out, records);
    std::cout << "wrote " << records.size() << " annotations to " << out_path << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_stats(const std::string& data_dir) {
  try {
    DatasetIndex ds = load_dataset(data_dir, Origin::SourcePrimary);
    nlohmann::json j;
    j["samples"] = ds.samples.size();
    j["annotations"] = ds.annotation_count();
    nlohmann::json hist = nlohmann::json::object();
    std::vector<int> h = ds.class_histogram();
    for (int c = 0; c < ds.num_classes; ++c) hist[ds.class_names[c]] = h[c];
    j["class_histogram"] = hist;
    std::cout << j.dump(2) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"domain-adaptive action detection on a synthetic two-domain benchmark"};
  app.require_subcommand(1);

  CommonOpts common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "flat key = value config file");
    sub->add_option("--seed", common.seed, "seed overriding the config file")
        ->each([&](const std::string&) { common.seed_set = true; });
  };

  std::string out_dir, source_dir, aux_dir, target_dir, val_dir, data_dir;
  std::string model_path, keyframes_path, detections_path, out_path;
  bool no_adapt = false, no_mix = false, no_pseudo = false, no_resize = false;
  int count = 8;
  double iou_threshold = 0.5, iou_min = 0.5;

  CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic two-domain benchmark");
  add_common(gen);
  gen->add_option("--out", out_dir, "output directory")->required();

  CLI::App* tr = app.add_subcommand("train", "train with cross-domain mixing and self-training");
  add_common(tr);
  tr->add_option("--source", source_dir, "labeled source dataset")->required();
  tr->add_option("--aux", aux_dir, "auxiliary labeled source dataset");
  tr->add_option("--target", target_dir, "unlabeled target dataset")->required();
  tr->add_option("--val", val_dir, "labeled target validation dataset");
  tr->add_option("--out", out_dir, "output directory")->required();
  tr->add_flag("--no-adapt", no_adapt, "source-only baseline (mix, pseudo, resize all off)");
  tr->add_flag("--no-mix", no_mix, "disable instance mixing");
  tr->add_flag("--no-pseudo", no_pseudo, "disable pseudo-labeling");
  tr->add_flag("--no-resize", no_resize, "disable the downscale rule");

  CLI::App* ev = app.add_subcommand("eval", "evaluate a model on a labeled dataset");
  ev->add_option("--model", model_path, "MDL1 model file")->required();
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--out", out_path, "result JSON path")->required();
  ev->add_option("--iou", iou_threshold, "matching IoU threshold");

  CLI::App* mp = app.add_subcommand("mix-preview", "dump mixed clips for inspection");
  add_common(mp);
  mp->add_option("--source", source_dir, "source dataset")->required();
  mp->add_option("--target", target_dir, "target dataset")->required();
  mp->add_option("--model", model_path, "teacher model for pseudo-labels (optional)");
  mp->add_option("--out", out_dir, "output directory")->required();
  mp->add_option("--count", count, "number of mixed samples");

  CLI::App* pr = app.add_subcommand("propagate", "propagate key-frame labels to dense frames");
  pr->add_option("--keyframes", keyframes_path, "key-frame annotation CSV")->required();
  pr->add_option("--detections", detections_path, "detector box CSV (class_id may be -1)")
      ->required();
  pr->add_option("--out", out_path, "dense annotation CSV path")->required();
  pr->add_option("--iou-min", iou_min, "minimum IoU for a match");

  CLI::App* st = app.add_subcommand("stats", "print dataset statistics");
  st->add_option("--data", data_dir, "dataset directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (gen->parsed()) return cmd_gen_data(common, out_dir);
  if (tr->parsed())
    return cmd_train(common, source_dir, aux_dir, target_dir, val_dir, out_dir, no_adapt, no_mix,
                     no_pseudo, no_resize);
  if (ev->parsed()) return cmd_eval(model_path, data_dir, out_path, iou_threshold);
  if (mp->parsed()) return cmd_mix_preview(common, source_dir, target_dir, model_path, out_dir, count);
  if (pr->parsed()) return cmd_propagate(keyframes_path, detections_path, out_path, iou_min);
  if (st->parsed()) return cmd_stats(data_dir);
  return kExitUsage;
}
