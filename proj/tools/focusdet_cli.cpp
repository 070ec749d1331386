// Copyright 2026 The focusdet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// focusdet command-line front end. Every stage reads and writes files so a
// real detector can stand in for the oracle by producing the same
// region-detection JSON.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "focusdet/config.hpp"
#include "focusdet/error.hpp"
#include "focusdet/io/files.hpp"
#include "focusdet/io/json.hpp"
#include "focusdet/io/report.hpp"
#include "focusdet/io/visdrone.hpp"
#include "focusdet/parallel.hpp"
#include "focusdet/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace focusdet;
using io::Json;

// Flags that override config-file values (flag > file > default).
struct Overrides {
  std::optional<int> grid_rows;
  std::optional<int> grid_cols;
  std::optional<double> margin;
  std::optional<double> keep_threshold;
  std::optional<int> detector_width;
  std::optional<int> detector_height;
  std::optional<double> nms_iou;
  std::optional<double> ibs_region_iou;
  std::optional<double> ibs_box_iou;
  std::optional<std::size_t> max_dets;
  std::optional<double> voc_iou;
  std::optional<int> synth_images;
  bool class_agnostic = false;
  bool no_ibs = false;
};

struct Globals {
  std::string config_path;
  std::string classes_path;
  unsigned jobs = default_jobs();
  Overrides ov;
};

PipelineConfig load_config(const Globals& g) {
  PipelineConfig cfg;
  if (!g.config_path.empty()) {
    const Json j = io::load_json(g.config_path);
    try {
      cfg = apply_config(j);
    } catch (const UsageError& e) {
      throw UsageError(g.config_path + ": " + e.what());
    }
  }
  const Overrides& o = g.ov;
  if (o.grid_rows) cfg.grid_rows = *o.grid_rows;
  if (o.grid_cols) cfg.grid_cols = *o.grid_cols;
  if (o.margin) cfg.margin = *o.margin;
  if (o.keep_threshold) cfg.keep_threshold = *o.keep_threshold;
  if (o.detector_width) cfg.detector_width = *o.detector_width;
  if (o.detector_height) cfg.detector_height = *o.detector_height;
  if (o.nms_iou) cfg.fuse.nms_iou = *o.nms_iou;
  if (o.ibs_region_iou) cfg.fuse.ibs_region_iou = *o.ibs_region_iou;
  if (o.ibs_box_iou) cfg.fuse.ibs_box_iou = *o.ibs_box_iou;
  if (o.max_dets) cfg.max_dets = *o.max_dets;
  if (o.voc_iou) cfg.voc_iou = *o.voc_iou;
  if (o.synth_images) cfg.synth_images = *o.synth_images;
  if (o.class_agnostic) cfg.fuse.per_class = false;
  if (o.no_ibs) cfg.fuse.ibs_enabled = false;
  cfg.validate();
  return cfg;
}

io::ClassMap load_classes(const Globals& g) {
  if (g.classes_path.empty()) return {};
  return io::class_map_from_json(io::load_json(g.classes_path), g.classes_path);
}

// Randomized commands take --seed; otherwise a seed is drawn, reported and
// recorded in the outputs.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed) {
  if (seed) return *seed;
  std::random_device rd;
  const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  std::cerr << "focusdet: no --seed given, using " << s << "\n";
  return s;
}

struct AnnotationSource {
  std::string path;
  std::string sizes;
  std::string images;

  void add_options(CLI::App* cmd, bool required = true) {
    auto* opt = cmd->add_option("--annotations", path,
                                "Dataset JSON file or directory of VisDrone annotation files");
    if (required) opt->required();
    cmd->add_option("--sizes", sizes, "CSV of id,width,height for VisDrone input");
    cmd->add_option("--images", images, "Directory of images whose headers give the dimensions");
  }

  Dataset load(const io::ClassMap& classes, bool need_sizes) const {
    if (!fs::exists(path)) throw DataError(path + " does not exist");
    if (fs::is_regular_file(path)) return io::parse_annotations(path, classes);
    io::SizeSource src;
    if (!sizes.empty()) src.table = io::read_size_table(sizes);
    src.image_dir = images;
    const bool have_source = !sizes.empty() || !images.empty();
    if (need_sizes && !have_source) {
      throw UsageError("VisDrone annotations need --sizes or --images to know image dimensions");
    }
    return io::parse_annotations(path, classes, have_source ? &src : nullptr);
  }
};

Json with_seed(Json j, std::uint64_t seed) {
  j["seed"] = seed;
  return j;
}

void write_json(const fs::path& path, const Json& j) { io::write_file_atomic(path, io::dump(j)); }

// ---- evaluation shared by `eval` and `pipeline`

struct EvalOutputs {
  std::string report;
  std::string table;
  std::string pr_csv;
};

// Categories scored: ground-truth classes, every named class of the class map
// and every detected class, minus the ignored ids. Classes without ground
// truth carry no AP of their own; their detections simply go unmatched.
std::vector<int> scored_categories(const GroundTruthSet& gts, const DetectionSet& dets, const io::ClassMap& classes) {
  std::set<int> cats;
  for (const auto& [id, objs] : gts)
    for (const auto& g : objs)
      if (!g.ignore) cats.insert(g.class_id);
  for (const auto& [c, name] : classes.names) cats.insert(c);
  for (const auto& [id, ds] : dets)
    for (const auto& d : ds) cats.insert(d.class_id);
  for (const int c : classes.ignore) cats.erase(c);
  return {cats.begin(), cats.end()};
}

EvalOutputs evaluate(const DetectionSet& dets_in, const GroundTruthSet& gts, const PipelineConfig& cfg,
                     const io::ClassMap& classes, bool merge_classes) {
  // detections of classes marked as ignored are not scored
  DetectionSet dets;
  for (const auto& [id, ds] : dets_in) {
    auto& out = dets[id];
    for (const ScoredBox& d : ds)
      if (!classes.ignore.contains(d.class_id)) out.push_back(d);
  }
  const std::vector<int> cats = scored_categories(gts, dets, classes);
  const EvalReport report = coco_eval(dets, gts, EvalOptions{cfg.max_dets, cats});
  const VocReport voc = voc_eval(dets, gts, cfg.voc_iou, merge_classes, cats);
  Json j = io::to_json(report);
  j["max_dets"] = cfg.max_dets;
  j["voc"] = io::to_json(voc, cfg.voc_iou, merge_classes);
  return EvalOutputs{io::dump(j), io::format_table(report, classes, std::pair{cfg.voc_iou, voc.ap}),
                     io::format_pr_csv(report)};
}

// ---- subcommands

struct GenRegionsArgs {
  AnnotationSource annotations;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool eip = false;
};

int run_gen_regions(const Globals& g, const GenRegionsArgs& a) {
  const PipelineConfig cfg = load_config(g);
  const Dataset data = a.annotations.load(load_classes(g), true);
  const std::uint64_t seed = resolve_seed(a.seed);
  std::vector<ImageRegions> regions;
  if (a.eip) {
    for (const ImageRecord& im : data) regions.push_back({im.id, im.size, eip_regions(im.size, cfg.detector(), im.id)});
  } else {
    regions = generate_regions(data, cfg, seed, g.jobs);
  }
  write_json(a.out, io::to_json(regions, a.eip ? std::nullopt : std::optional(seed)));
  return 0;
}

struct RefineArgs {
  AnnotationSource annotations;
  std::string regions;
  std::string out;
};

int run_refine(const Globals& g, const RefineArgs& a) {
  const PipelineConfig cfg = load_config(g);
  const Dataset data = a.annotations.load(load_classes(g), false);
  const auto regions = io::regions_from_json(io::load_json(a.regions), a.regions);
  write_json(a.out, io::to_json(refine_dataset(regions, data, cfg, g.jobs)));
  return 0;
}

struct OracleArgs {
  std::string crops;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int run_oracle(const Globals& g, const OracleArgs& a) {
  const PipelineConfig cfg = load_config(g);
  const auto crops = io::crops_from_json(io::load_json(a.crops), a.crops);
  const std::uint64_t seed = resolve_seed(a.seed);
  OracleSpec spec = cfg.oracle;
  spec.rng_seed = stream_seed(seed, SeedStream::kOracle);
  write_json(a.out, with_seed(io::to_json(oracle_dataset(crops, spec, g.jobs)), seed));
  return 0;
}

struct MergeArgs {
  std::string input;
  std::string out;
  std::string visdrone;
};

int run_merge(const Globals& g, const MergeArgs& a) {
  const PipelineConfig cfg = load_config(g);
  const auto images = io::region_detections_from_json(io::load_json(a.input), a.input);
  const DetectionSet merged = merge_dataset(images, cfg.fuse, g.jobs);
  if (!a.out.empty()) write_json(a.out, io::to_json(merged));
  if (!a.visdrone.empty()) io::write_results(a.visdrone, merged);
  if (a.out.empty() && a.visdrone.empty()) std::cout << io::dump(io::to_json(merged));
  return 0;
}

struct EvalArgs {
  std::string gt;
  std::string dets;
  std::string out;
  std::string table;
  std::string pr_csv;
  bool merge_classes = false;
};

DetectionSet load_detections(const std::string& path) {
  if (!fs::exists(path)) throw DataError(path + " does not exist");
  if (fs::is_directory(path)) return io::parse_results(path);
  return io::detections_from_json(io::load_json(path), path);
}

int run_eval(const Globals& g, const EvalArgs& a) {
  const PipelineConfig cfg = load_config(g);
  const io::ClassMap classes = load_classes(g);
  AnnotationSource src{a.gt, {}, {}};
  const GroundTruthSet gts = to_ground_truth(src.load(classes, false));
  const EvalOutputs out = evaluate(load_detections(a.dets), gts, cfg, classes, a.merge_classes);
  if (!a.out.empty()) io::write_file_atomic(a.out, out.report);
  if (!a.pr_csv.empty()) io::write_file_atomic(a.pr_csv, out.pr_csv);
  if (!a.table.empty()) {
    io::write_file_atomic(a.table, out.table);
  } else {
    std::cout << out.table;
  }
  return 0;
}

struct SynthArgs {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string visdrone;
};

int run_synth(const Globals& g, const SynthArgs& a) {
  const PipelineConfig cfg = load_config(g);
  const std::uint64_t seed = resolve_seed(a.seed);
  const Dataset data = synthesize(cfg, seed);
  if (!a.out.empty()) write_json(a.out, with_seed(io::to_json(data), seed));
  if (!a.visdrone.empty()) {
    io::write_annotations(a.visdrone, data);
    std::string sizes = "id,width,height\n";
    for (const ImageRecord& im : data) sizes += fmt::format("{},{},{}\n", im.id, im.size.width, im.size.height);
    io::write_file_atomic(fs::path(a.visdrone) / "sizes.csv", sizes);
  }
  if (a.out.empty() && a.visdrone.empty()) std::cout << io::dump(with_seed(io::to_json(data), seed));
  return 0;
}

struct PipelineArgs {
  AnnotationSource annotations;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

Json scale_json(const PipelineRun& run) {
  std::vector<RefinedCrop> crops;
  std::vector<Annotation> raw;
  for (const ImageCrops& im : run.crops) crops.insert(crops.end(), im.crops.begin(), im.crops.end());
  for (const ImageRecord& im : run.data) raw.insert(raw.end(), im.annotations.begin(), im.annotations.end());
  const ScaleStats s = scale_stats(crops, raw);
  auto spread = [](const ScaleSpread& v) {
    auto opt = [](const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); };
    return Json{{"cv_raw", opt(v.cv_raw)}, {"cv_cropped", opt(v.cv_cropped)}};
  };
  Json j{{"pooled", spread(s.pooled)}};
  Json per = Json::object();
  for (const auto& [c, v] : s.per_class) per[std::to_string(c)] = spread(v);
  j["per_class"] = per;
  return j;
}

int run_pipeline_cmd(const Globals& g, const PipelineArgs& a) {
  const PipelineConfig cfg = load_config(g);
  const io::ClassMap classes = load_classes(g);
  const std::uint64_t seed = resolve_seed(a.seed);
  Dataset data = a.annotations.path.empty() ? synthesize(cfg, seed) : a.annotations.load(classes, true);
  const PipelineRun run = run_pipeline(std::move(data), cfg, seed, g.jobs);

  const fs::path dir(a.out_dir);
  Json effective = to_json(cfg);
  effective["seed"] = seed;
  write_json(dir / "config.json", effective);
  write_json(dir / "dataset.json", with_seed(io::to_json(run.data), seed));
  write_json(dir / "regions.json", io::to_json(run.regions, seed));
  write_json(dir / "crops.json", io::to_json(run.crops));
  write_json(dir / "region_detections.json", with_seed(io::to_json(run.region_detections), seed));
  write_json(dir / "detections.json", io::to_json(run.merged));
  const EvalOutputs out = evaluate(run.merged, to_ground_truth(run.data), cfg, classes, true);
  io::write_file_atomic(dir / "eval.json", out.report);
  io::write_file_atomic(dir / "eval.txt", out.table);
  io::write_file_atomic(dir / "pr.csv", out.pr_csv);
  write_json(dir / "scale.json", scale_json(run));
  std::cout << out.table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"focusdet: focal-region detection pipeline tools"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "focusdet 1.0.0");

  Globals g;
  app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--classes", g.classes_path, "Class map JSON (names and ignored ids)")->check(CLI::ExistingFile);
  app.add_option("-j,--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  Overrides& o = g.ov;
  app.add_option("--grid-rows", o.grid_rows, "Feature grid rows");
  app.add_option("--grid-cols", o.grid_cols, "Feature grid columns");
  app.add_option("--margin", o.margin, "Region margin in pixels");
  app.add_option("--keep-threshold", o.keep_threshold, "Minimum kept area fraction for crop ground truth");
  app.add_option("--detector-width", o.detector_width, "Detector input width");
  app.add_option("--detector-height", o.detector_height, "Detector input height");
  app.add_option("--nms-iou", o.nms_iou, "NMS IoU threshold");
  app.add_option("--ibs-region-iou", o.ibs_region_iou, "Region overlap needed for IBS");
  app.add_option("--ibs-box-iou", o.ibs_box_iou, "IBS suppression IoU");
  app.add_option("--max-dets", o.max_dets, "Detections per image and class kept for evaluation");
  app.add_option("--voc-iou", o.voc_iou, "IoU threshold of the VOC score");
  app.add_option("--synth-images", o.synth_images, "Images in a synthetic corpus");
  app.add_flag("--class-agnostic", o.class_agnostic, "Suppress across classes in NMS and IBS");

  GenRegionsArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-regions", "Fit per-image mixtures and emit focal regions");
  gen.annotations.add_options(gen_cmd);
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_option("-o,--out", gen.out, "Output regions JSON")->required();
  gen_cmd->add_flag("--eip", gen.eip, "Emit the even 3x2 partition instead");

  RefineArgs refine;
  auto* refine_cmd = app.add_subcommand("refine-gt", "Clip ground truth to focal regions");
  refine.annotations.add_options(refine_cmd);
  refine_cmd->add_option("--regions", refine.regions, "Regions JSON")->required();
  refine_cmd->add_option("-o,--out", refine.out, "Output crops JSON")->required();

  OracleArgs oracle;
  auto* oracle_cmd = app.add_subcommand("oracle-detect", "Simulate detector output on refined crops");
  oracle_cmd->add_option("--crops", oracle.crops, "Crops JSON")->required();
  oracle_cmd->add_option("--seed", oracle.seed, "Random seed");
  oracle_cmd->add_option("-o,--out", oracle.out, "Output region detections JSON")->required();

  MergeArgs merge;
  auto* merge_cmd = app.add_subcommand("merge", "Fuse region detections into image detections");
  merge_cmd->add_option("--input", merge.input, "Region detections JSON")->required();
  merge_cmd->add_option("-o,--out", merge.out, "Output detections JSON");
  merge_cmd->add_option("--visdrone", merge.visdrone, "Also write VisDrone result files to this directory");
  merge_cmd->add_flag("--no-ibs", o.no_ibs, "Skip incomplete box suppression");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score detections against ground truth");
  eval_cmd->add_option("--gt", ev.gt, "Dataset JSON or directory of VisDrone annotations")->required();
  eval_cmd->add_option("--dets", ev.dets, "Detections JSON or directory of VisDrone results")->required();
  eval_cmd->add_option("-o,--out", ev.out, "Report JSON");
  eval_cmd->add_option("--table", ev.table, "Write the table here instead of stdout");
  eval_cmd->add_option("--pr-csv", ev.pr_csv, "Precision/recall points CSV");
  eval_cmd->add_flag("--merge-classes", ev.merge_classes, "Score the VOC metric class-agnostically");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene corpus");
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("-o,--out", synth.out, "Output dataset JSON");
  synth_cmd->add_option("--visdrone", synth.visdrone, "Also write VisDrone annotation files and sizes.csv here");

  PipelineArgs pipe;
  auto* pipe_cmd = app.add_subcommand("pipeline", "Run every stage with the oracle detector");
  pipe.annotations.add_options(pipe_cmd, false);
  pipe_cmd->add_option("--seed", pipe.seed, "Random seed");
  pipe_cmd->add_option("--out-dir", pipe.out_dir, "Directory for all stage outputs")->required();
  pipe_cmd->add_flag("--no-ibs", o.no_ibs, "Skip incomplete box suppression");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "focusdet: usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*gen_cmd) return run_gen_regions(g, gen);
    if (*refine_cmd) return run_refine(g, refine);
    if (*oracle_cmd) return run_oracle(g, oracle);
    if (*merge_cmd) return run_merge(g, merge);
    if (*eval_cmd) return run_eval(g, ev);
    if (*synth_cmd) return run_synth(g, synth);
    if (*pipe_cmd) return run_pipeline_cmd(g, pipe);
  } catch (const UsageError& e) {
    std::cerr << "focusdet: usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "focusdet: error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
