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

// Merging per-region detections into image-level detections: remap to image
// coordinates, non-maximum suppression, then incomplete box suppression (IBS)
// across overlapping regions.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "focusdet/boxgeom.hpp"
#include "focusdet/error.hpp"
#include "focusdet/focal.hpp"

namespace focusdet {

/// Detections of one focal region, in detector-resolution coordinates.
struct RegionDetections {
  FocalRegion region;
  std::vector<ScoredBox> detections;
};

/// Detections of one focal region, already in image coordinates.
struct RegionBoxes {
  Box rect;
  std::vector<ScoredBox> detections;
};

struct FuseConfig {
  double nms_iou = 0.5;
  double ibs_region_iou = 0.05;
  double ibs_box_iou = 0.5;
  bool per_class = true;
  bool ibs_enabled = true;

  void validate() const {
    auto unit = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) throw UsageError(std::string("FuseConfig: ") + name + " must lie in [0, 1]");
    };
    unit(nms_iou, "nms_iou");
    unit(ibs_region_iou, "ibs_region_iou");
    unit(ibs_box_iou, "ibs_box_iou");
  }
};

/// Validates scores and classes and clamps boxes to the detector frame.
inline RegionDetections ingest(RegionDetections rd) {
  const Box frame = rd.region.detector.frame();
  for (ScoredBox& d : rd.detections) {
    validate(d);
    d.box = clamp_to(d.box, frame);
  }
  return rd;
}

/// Detector coordinates -> image coordinates through the inverse of the
/// region's transform. Scores and classes are unchanged.
inline std::vector<ScoredBox> remap_to_image(const RegionDetections& rd) {
  const RegionDetections clean = ingest(rd);
  const AffineMap2D back = invert_map(clean.region.to_detector);
  std::vector<ScoredBox> out;
  out.reserve(clean.detections.size());
  for (const ScoredBox& d : clean.detections) out.push_back(ScoredBox{apply_map(d.box, back), d.class_id, d.score});
  return out;
}

namespace detail {

/// Indices ordered by descending score, earlier index first on ties.
inline std::vector<std::size_t> score_order(std::span<const ScoredBox> boxes) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return boxes[a].score > boxes[b].score; });
  return order;
}

}  // namespace detail

/// Greedy NMS. Returns the indices of surviving boxes in selection order. A box
/// is dropped iff its IoU with an already-kept box (of the same class when
/// per_class) exceeds the threshold.
inline std::vector<std::size_t> nms_indices(std::span<const ScoredBox> boxes, double iou_threshold,
                                            bool per_class = true) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) throw UsageError("nms: threshold must lie in [0, 1]");
  std::vector<std::size_t> kept;
  for (const std::size_t i : detail::score_order(boxes)) {
    bool suppressed = false;
    for (const std::size_t k : kept) {
      if (per_class && boxes[k].class_id != boxes[i].class_id) continue;
      if (iou(boxes[k].box, boxes[i].box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

inline std::vector<ScoredBox> nms(std::span<const ScoredBox> boxes, double iou_threshold, bool per_class = true) {
  std::vector<ScoredBox> out;
  for (const std::size_t i : nms_indices(boxes, iou_threshold, per_class)) out.push_back(boxes[i]);
  return out;
}

/// Survivor flags of incomplete box suppression, one vector per region.
///
/// A box B in region i is compared against the kept boxes of every other region
/// k whose rectangle overlaps region i with IoU above ibs_region_iou. Each such
/// box is clipped to region i; B is suppressed when a clip of positive area has
/// IoU with B above ibs_box_iou. Boxes are visited once in descending score
/// order (lower region index, then lower box index on ties), so a box can only
/// be suppressed by a stronger one that itself survived.
inline std::vector<std::vector<bool>> ibs_keep_mask(std::span<const RegionBoxes> regions, const FuseConfig& cfg) {
  cfg.validate();
  const std::size_t n_regions = regions.size();
  for (const RegionBoxes& r : regions) {
    for (const ScoredBox& d : r.detections) {
      validate(d);
      const Box& b = d.box;
      const Box& c = r.rect;
      if (b.x1() < c.x1() - 1.0 || b.y1() < c.y1() - 1.0 || b.x2() > c.x2() + 1.0 || b.y2() > c.y2() + 1.0) {
        throw DataError("ibs: detection lies outside its focal region by more than 1 px");
      }
    }
  }

  std::vector<std::vector<bool>> overlapping(n_regions, std::vector<bool>(n_regions, false));
  for (std::size_t i = 0; i < n_regions; ++i) {
    for (std::size_t k = 0; k < n_regions; ++k) {
      overlapping[i][k] = i != k && iou(regions[i].rect, regions[k].rect) > cfg.ibs_region_iou;
    }
  }

  struct Entry {
    std::size_t region;
    std::size_t index;
  };
  std::vector<Entry> order;
  for (std::size_t r = 0; r < n_regions; ++r)
    for (std::size_t j = 0; j < regions[r].detections.size(); ++j) order.push_back({r, j});
  std::stable_sort(order.begin(), order.end(), [&](const Entry& a, const Entry& b) {
    return regions[a.region].detections[a.index].score > regions[b.region].detections[b.index].score;
  });

  std::vector<std::vector<bool>> keep(n_regions);
  for (std::size_t r = 0; r < n_regions; ++r) keep[r].assign(regions[r].detections.size(), false);
  std::vector<std::vector<std::size_t>> kept(n_regions);

  for (const Entry& e : order) {
    const ScoredBox& candidate = regions[e.region].detections[e.index];
    const Box& home = regions[e.region].rect;
    bool suppressed = false;
    for (std::size_t k = 0; k < n_regions && !suppressed; ++k) {
      if (!overlapping[e.region][k]) continue;
      for (const std::size_t l : kept[k]) {
        const ScoredBox& other = regions[k].detections[l];
        if (cfg.per_class && other.class_id != candidate.class_id) continue;
        const auto clipped = clip(other.box, home);
        if (!clipped) continue;
        if (iou(*clipped, candidate.box) > cfg.ibs_box_iou) {
          suppressed = true;
          break;
        }
      }
    }
    if (!suppressed) {
      keep[e.region][e.index] = true;
      kept[e.region].push_back(e.index);
    }
  }
  return keep;
}

/// Surviving boxes of all regions, region by region in input order.
inline std::vector<ScoredBox> ibs(std::span<const RegionBoxes> regions, const FuseConfig& cfg) {
  const auto keep = ibs_keep_mask(regions, cfg);
  std::vector<ScoredBox> out;
  for (std::size_t r = 0; r < regions.size(); ++r)
    for (std::size_t j = 0; j < regions[r].detections.size(); ++j)
      if (keep[r][j]) out.push_back(regions[r].detections[j]);
  return out;
}

/// Image-level detections from per-region detector output: remap, concatenate,
/// NMS, then IBS (when enabled). The result is sorted by descending score with
/// concatenation order breaking ties.
inline std::vector<ScoredBox> merge_pipeline(std::span<const RegionDetections> per_region, const FuseConfig& cfg) {
  cfg.validate();
  std::vector<ScoredBox> all;
  std::vector<std::size_t> owner;
  std::vector<RegionBoxes> regions;
  for (std::size_t r = 0; r < per_region.size(); ++r) {
    regions.push_back(RegionBoxes{per_region[r].region.rect, {}});
    for (const ScoredBox& d : remap_to_image(per_region[r])) {
      all.push_back(d);
      owner.push_back(r);
    }
  }

  std::vector<std::size_t> survivors = nms_indices(all, cfg.nms_iou, cfg.per_class);
  std::sort(survivors.begin(), survivors.end());

  if (cfg.ibs_enabled) {
    std::vector<std::vector<std::size_t>> source(regions.size());
    for (const std::size_t i : survivors) {
      regions[owner[i]].detections.push_back(all[i]);
      source[owner[i]].push_back(i);
    }
    const auto keep = ibs_keep_mask(regions, cfg);
    survivors.clear();
    for (std::size_t r = 0; r < regions.size(); ++r)
      for (std::size_t j = 0; j < keep[r].size(); ++j)
        if (keep[r][j]) survivors.push_back(source[r][j]);
    std::sort(survivors.begin(), survivors.end());
  }

  std::vector<ScoredBox> kept;
  kept.reserve(survivors.size());
  for (const std::size_t i : survivors) kept.push_back(all[i]);
  std::vector<ScoredBox> out;
  out.reserve(kept.size());
  for (const std::size_t i : detail::score_order(kept)) out.push_back(kept[i]);
  return out;
}

}  // namespace focusdet
