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

// Focal regions: cluster envelopes, crop-level ground truth, and the
// crop-to-detector transform.

#include <algorithm>
#include <cstddef>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "focusdet/boxgeom.hpp"
#include "focusdet/error.hpp"
#include "focusdet/mixture.hpp"

namespace focusdet {

struct ImageSize {
  int width = 0;
  int height = 0;

  Box frame() const { return Box(0.0, 0.0, width, height); }
  void validate() const {
    if (width <= 0 || height <= 0) throw UsageError("image dimensions must be positive");
  }
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// One ground-truth object of an image.
struct Annotation {
  Box box;
  int class_id = 0;
  bool ignore = false;
  int truncation = 0;
  int occlusion = 0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct FocalRegion {
  Box rect;  // image coordinates
  int region_id = 0;
  std::string image_id;
  ImageSize detector;       // resolution the crop is resized to
  AffineMap2D to_detector;  // image coordinates -> detector coordinates

  /// Crop-local coordinates (origin at the region's top-left) -> image coordinates.
  AffineMap2D crop_to_image() const { return AffineMap2D(1.0, 1.0, rect.x1(), rect.y1()); }

  friend bool operator==(const FocalRegion&, const FocalRegion&) = default;
};

struct CropObject {
  Box box;  // crop coordinates
  int class_id = 0;
  double kept_fraction = 1.0;
  bool ignore = false;

  friend bool operator==(const CropObject&, const CropObject&) = default;
};

struct RefinedCrop {
  FocalRegion region;
  std::vector<CropObject> gt;
  std::size_t dropped_degenerate = 0;  // zero-area annotations skipped
};

/// Scale-and-offset map taking `rect` onto (0, 0, width, height). The scale is
/// anisotropic: the crop is stretched to the detector resolution.
inline AffineMap2D make_detector_map(const Box& rect, ImageSize detector) {
  detector.validate();
  if (!(rect.width() > 0.0) || !(rect.height() > 0.0)) {
    throw UsageError("make_detector_map: region has zero area");
  }
  const double sx = detector.width / rect.width();
  const double sy = detector.height / rect.height();
  return AffineMap2D(sx, sy, -rect.x1() * sx, -rect.y1() * sy);
}

inline AffineMap2D make_detector_map(const FocalRegion& region, ImageSize detector) {
  return make_detector_map(region.rect, detector);
}

/// Builds a region around `rect`. Without an explicit detector size the crop is
/// kept at native resolution (the detector size is the rounded-up crop size).
inline FocalRegion make_region(const Box& rect, int region_id, std::string image_id,
                               std::optional<ImageSize> detector = std::nullopt) {
  FocalRegion r;
  r.rect = rect;
  r.region_id = region_id;
  r.image_id = std::move(image_id);
  if (detector) {
    r.detector = *detector;
    r.to_detector = make_detector_map(rect, *detector);
  } else {
    r.detector = ImageSize{static_cast<int>(std::ceil(rect.width())), static_cast<int>(std::ceil(rect.height()))};
    r.to_detector = AffineMap2D(1.0, 1.0, -rect.x1(), -rect.y1());
  }
  return r;
}

/// One region per non-empty cluster: the tight envelope of its member boxes,
/// grown by `margin` on every side and clamped to the image. Regions are
/// numbered in increasing cluster-label order.
inline std::vector<FocalRegion> regions_from_clusters(std::span<const Box> boxes, std::span<const int> labels,
                                                      ImageSize image, double margin,
                                                      std::optional<ImageSize> detector = std::nullopt,
                                                      const std::string& image_id = {}) {
  if (boxes.size() != labels.size()) throw UsageError("regions_from_clusters: labels do not match boxes");
  if (!(margin >= 0.0)) throw UsageError("regions_from_clusters: margin must be >= 0");
  image.validate();

  std::map<int, Box> envelopes;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box& b = boxes[i];
    auto [it, inserted] = envelopes.try_emplace(labels[i], b);
    if (!inserted) {
      const Box& e = it->second;
      it->second = Box(std::min(e.x1(), b.x1()), std::min(e.y1(), b.y1()), std::max(e.x2(), b.x2()),
                       std::max(e.y2(), b.y2()));
    }
  }

  std::vector<FocalRegion> out;
  int next_id = 0;
  for (const auto& [label, env] : envelopes) {
    const Box grown(env.x1() - margin, env.y1() - margin, env.x2() + margin, env.y2() + margin);
    const auto clamped = clip(grown, image.frame());
    if (!clamped) continue;  // cluster entirely outside the image
    out.push_back(make_region(*clamped, next_id++, image_id, detector));
  }
  return out;
}

/// Clips annotations to the region and keeps those with at least
/// `keep_threshold` of their area inside. Kept boxes are expressed in crop
/// coordinates.
inline RefinedCrop refine_gt(const FocalRegion& region, std::span<const Annotation> annotations,
                             double keep_threshold = 0.30) {
  if (!(keep_threshold > 0.0 && keep_threshold <= 1.0)) {
    throw UsageError("refine_gt: keep_threshold must lie in (0, 1]");
  }
  RefinedCrop crop;
  crop.region = region;
  for (const Annotation& a : annotations) {
    const double full = area(a.box);
    if (!(full > 0.0)) {
      ++crop.dropped_degenerate;
      continue;
    }
    const auto inside = clip(a.box, region.rect);
    if (!inside) continue;
    const double fraction = area(*inside) / full;
    if (fraction < keep_threshold) continue;
    const Box local(inside->x1() - region.rect.x1(), inside->y1() - region.rect.y1(),
                    inside->x2() - region.rect.x1(), inside->y2() - region.rect.y1());
    crop.gt.push_back(CropObject{local, a.class_id, fraction, a.ignore});
  }
  return crop;
}

/// Even-partition baseline: 3 columns x 2 rows of non-overlapping tiles
/// covering the image exactly. Leftover pixels go one each to the leftmost
/// columns and topmost rows.
inline std::vector<FocalRegion> eip_regions(ImageSize image, std::optional<ImageSize> detector = std::nullopt,
                                            const std::string& image_id = {}) {
  image.validate();
  constexpr int kCols = 3;
  constexpr int kRows = 2;
  if (image.width < kCols || image.height < kRows) throw UsageError("eip_regions: image too small to partition");
  auto cuts = [](int extent, int parts) {
    std::vector<int> edges{0};
    const int base = extent / parts;
    const int extra = extent % parts;
    for (int p = 0; p < parts; ++p) edges.push_back(edges.back() + base + (p < extra ? 1 : 0));
    return edges;
  };
  const auto xs = cuts(image.width, kCols);
  const auto ys = cuts(image.height, kRows);
  std::vector<FocalRegion> out;
  int id = 0;
  for (int r = 0; r < kRows; ++r) {
    for (int c = 0; c < kCols; ++c) {
      out.push_back(make_region(Box(xs[c], ys[r], xs[c + 1], ys[r + 1]), id++, image_id, detector));
    }
  }
  return out;
}

struct FocusConfig {
  FeatureGrid grid;  // image dimensions are filled in per image
  EmConfig em;
  double margin = 20.0;
  ImageSize detector{1000, 600};
};

struct FocusResult {
  std::vector<FocalRegion> regions;
  std::vector<int> labels;  // cluster per non-ignored annotation, in input order
  MixtureModel model;
};

/// Ground-truth focal regions for one image: featurize the non-ignored boxes,
/// fit a mixture with the log2-rule component count, assign, and take envelopes.
/// Images without usable boxes yield no regions.
inline FocusResult focus_regions(std::span<const Annotation> annotations, ImageSize image, const FocusConfig& cfg,
                                 const std::string& image_id = {}) {
  image.validate();
  std::vector<Box> boxes;
  for (const Annotation& a : annotations) {
    if (!a.ignore) boxes.push_back(a.box);
  }
  FocusResult out;
  if (boxes.empty()) return out;
  FeatureGrid grid = cfg.grid;
  grid.image_width = image.width;
  grid.image_height = image.height;
  const auto features = featurize(boxes, grid);
  const std::size_t k = num_focal_regions(boxes.size());
  EmResult fit = fit_em(features, k, cfg.em);
  out.labels = assign_clusters(fit.model, features).labels;
  out.regions = regions_from_clusters(boxes, out.labels, image, cfg.margin, cfg.detector, image_id);
  out.model = std::move(fit.model);
  return out;
}

}  // namespace focusdet
