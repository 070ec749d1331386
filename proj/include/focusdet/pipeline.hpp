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

#pragma once

// Stage drivers over whole datasets: focus -> refine -> detect -> merge -> eval.
// Every stage is a pure function of its inputs, the config and the seed;
// per-image work runs on a bounded pool and results are ordered by image id.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "focusdet/config.hpp"
#include "focusdet/dataset.hpp"
#include "focusdet/evalkit.hpp"
#include "focusdet/focal.hpp"
#include "focusdet/fuse.hpp"
#include "focusdet/parallel.hpp"
#include "focusdet/random.hpp"
#include "focusdet/scenes.hpp"

namespace focusdet {

enum class SeedStream : std::uint64_t { kScenes = 1, kFocus = 2, kOracle = 3 };

inline std::uint64_t stream_seed(std::uint64_t seed, SeedStream s) {
  return derive_seed(seed, static_cast<std::uint64_t>(s));
}

inline Dataset synthesize(const PipelineConfig& cfg, std::uint64_t seed) {
  Dataset data;
  for (Scene& s : generate_corpus(cfg.synth, cfg.synth_images, stream_seed(seed, SeedStream::kScenes))) {
    data.push_back(ImageRecord{s.image_id, s.image, std::move(s.annotations), std::move(s.labels)});
  }
  sort_by_id(data);
  return data;
}

inline ImageRegions generate_image_regions(const ImageRecord& image, const PipelineConfig& cfg, std::uint64_t seed) {
  FocusConfig focus = cfg.focus();
  focus.em.rng_seed = derive_seed(stream_seed(seed, SeedStream::kFocus), stable_hash(image.id));
  return ImageRegions{image.id, image.size, focus_regions(image.annotations, image.size, focus, image.id).regions};
}

inline std::vector<ImageRegions> generate_regions(const Dataset& data, const PipelineConfig& cfg, std::uint64_t seed,
                                                  unsigned jobs = 1) {
  std::vector<ImageRegions> out(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t i) { out[i] = generate_image_regions(data[i], cfg, seed); });
  sort_by_id(out);
  return out;
}

/// Crop ground truth for every region; regions of images absent from `data`
/// are an error.
inline std::vector<ImageCrops> refine_dataset(const std::vector<ImageRegions>& regions, const Dataset& data,
                                              const PipelineConfig& cfg, unsigned jobs = 1) {
  std::map<std::string, const ImageRecord*> by_id;
  for (const ImageRecord& im : data) by_id[im.id] = &im;
  std::vector<ImageCrops> out(regions.size());
  parallel_for(regions.size(), jobs, [&](std::size_t i) {
    const ImageRegions& ir = regions[i];
    const auto it = by_id.find(ir.id);
    if (it == by_id.end()) throw DataError("no annotations for image '" + ir.id + "'");
    ImageCrops crops{ir.id, ir.size, {}};
    for (const FocalRegion& r : ir.regions) crops.crops.push_back(refine_gt(r, it->second->annotations, cfg.keep_threshold));
    out[i] = std::move(crops);
  });
  sort_by_id(out);
  return out;
}

inline std::vector<ImageRegionDetections> oracle_dataset(const std::vector<ImageCrops>& crops, const OracleSpec& spec,
                                                         unsigned jobs = 1) {
  std::vector<ImageRegionDetections> out(crops.size());
  parallel_for(crops.size(), jobs, [&](std::size_t i) {
    ImageRegionDetections im{crops[i].id, crops[i].size, {}};
    for (const RefinedCrop& c : crops[i].crops) im.regions.push_back(oracle_detect(c, spec));
    out[i] = std::move(im);
  });
  sort_by_id(out);
  return out;
}

inline DetectionSet merge_dataset(const std::vector<ImageRegionDetections>& images, const FuseConfig& cfg,
                                  unsigned jobs = 1) {
  std::vector<std::vector<ScoredBox>> merged(images.size());
  parallel_for(images.size(), jobs, [&](std::size_t i) { merged[i] = merge_pipeline(images[i].regions, cfg); });
  DetectionSet out;
  for (std::size_t i = 0; i < images.size(); ++i) out[images[i].id] = std::move(merged[i]);
  return out;
}

/// Scored categories of a closed-loop run: every non-ignored ground-truth class
/// plus the classes the oracle can emit, so that class flips are scored as
/// errors rather than rejected.
inline std::vector<int> dataset_categories(const Dataset& data, int oracle_classes) {
  std::set<int> cats;
  for (const ImageRecord& im : data)
    for (const Annotation& a : im.annotations)
      if (!a.ignore) cats.insert(a.class_id);
  for (int c = 1; c <= oracle_classes; ++c) cats.insert(c);
  return {cats.begin(), cats.end()};
}

struct PipelineRun {
  Dataset data;
  std::vector<ImageRegions> regions;
  std::vector<ImageCrops> crops;
  std::vector<ImageRegionDetections> region_detections;
  DetectionSet merged;
  EvalReport report;
  VocReport voc;
};

/// The closed loop on a given dataset with the oracle standing in for the
/// detection network.
inline PipelineRun run_pipeline(Dataset data, const PipelineConfig& cfg, std::uint64_t seed, unsigned jobs = 1) {
  cfg.validate();
  PipelineRun run;
  run.data = std::move(data);
  run.regions = generate_regions(run.data, cfg, seed, jobs);
  run.crops = refine_dataset(run.regions, run.data, cfg, jobs);
  OracleSpec oracle = cfg.oracle;
  oracle.rng_seed = stream_seed(seed, SeedStream::kOracle);
  run.region_detections = oracle_dataset(run.crops, oracle, jobs);
  run.merged = merge_dataset(run.region_detections, cfg.fuse, jobs);
  const GroundTruthSet gts = to_ground_truth(run.data);
  const std::vector<int> categories = dataset_categories(run.data, cfg.oracle.classes);
  run.report = coco_eval(run.merged, gts, EvalOptions{cfg.max_dets, categories});
  run.voc = voc_eval(run.merged, gts, cfg.voc_iou, true, categories);
  return run;
}

}  // namespace focusdet
