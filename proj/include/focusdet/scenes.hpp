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

// Synthetic scenes and an oracle detector for closed-loop testing of the
// region pipeline without imagery or trained networks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "focusdet/boxgeom.hpp"
#include "focusdet/error.hpp"
#include "focusdet/focal.hpp"
#include "focusdet/fuse.hpp"
#include "focusdet/random.hpp"

namespace focusdet {

struct SizeRange {
  double min = 10.0;
  double max = 30.0;
};

struct SceneSpec {
  ImageSize image{1360, 765};
  int n_clusters = 4;
  int boxes_per_cluster_min = 4;
  int boxes_per_cluster_max = 10;
  double cluster_spread = 40.0;  // std of box centers around the cluster center
  // one side-length range per class; the class count is its size
  std::vector<SizeRange> box_size_range{{10.0, 24.0}, {16.0, 36.0}, {24.0, 56.0}};
  // Each cluster draws a zoom factor log-uniformly from this range and applies
  // it to both its box sizes and its spread.
  double size_multiplier_min = 1.0;
  double size_multiplier_max = 1.0;
  double min_center_separation = 0.0;
  std::uint64_t rng_seed = 0;
  std::string image_id = "scene";

  int classes() const { return static_cast<int>(box_size_range.size()); }

  void validate() const {
    image.validate();
    if (n_clusters < 1) throw UsageError("SceneSpec: n_clusters must be >= 1");
    if (boxes_per_cluster_min < 1 || boxes_per_cluster_max < boxes_per_cluster_min) {
      throw UsageError("SceneSpec: invalid boxes_per_cluster range");
    }
    if (!(cluster_spread >= 0.0)) throw UsageError("SceneSpec: cluster_spread must be >= 0");
    if (box_size_range.empty()) throw UsageError("SceneSpec: at least one class is required");
    if (!(size_multiplier_min > 0.0) || size_multiplier_max < size_multiplier_min) {
      throw UsageError("SceneSpec: invalid size multiplier range");
    }
    for (const SizeRange& r : box_size_range) {
      if (!(r.min >= 1.0) || r.max < r.min) throw UsageError("SceneSpec: invalid box size range");
      const double largest = std::ceil(r.max * size_multiplier_max);
      if (largest > image.width || largest > image.height) {
        throw UsageError("SceneSpec: boxes cannot fit in the image");
      }
    }
    if (!(min_center_separation >= 0.0)) throw UsageError("SceneSpec: min_center_separation must be >= 0");
  }
};

struct Scene {
  std::string image_id;
  ImageSize image;
  std::vector<Annotation> annotations;
  std::vector<int> labels;  // generating cluster per annotation
};

inline Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.rng_seed);
  const double w = spec.image.width;
  const double h = spec.image.height;

  std::vector<std::pair<double, double>> centers;
  for (int c = 0; c < spec.n_clusters; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      const double cx = rng.uniform(0.1 * w, 0.9 * w);
      const double cy = rng.uniform(0.1 * h, 0.9 * h);
      placed = std::all_of(centers.begin(), centers.end(), [&](const auto& o) {
        return std::hypot(o.first - cx, o.second - cy) >= spec.min_center_separation;
      });
      if (placed) centers.emplace_back(cx, cy);
    }
    if (!placed) throw UsageError("SceneSpec: cannot place cluster centers with the requested separation");
  }

  Scene scene;
  scene.image_id = spec.image_id;
  scene.image = spec.image;
  const double log_lo = std::log(spec.size_multiplier_min);
  const double log_hi = std::log(spec.size_multiplier_max);
  for (int c = 0; c < spec.n_clusters; ++c) {
    const double zoom = std::exp(rng.uniform(log_lo, log_hi));
    const auto count = rng.uniform_int(spec.boxes_per_cluster_min, spec.boxes_per_cluster_max);
    for (std::int64_t i = 0; i < count; ++i) {
      const int cls = static_cast<int>(rng.uniform_int(0, spec.classes() - 1));
      const SizeRange& range = spec.box_size_range[static_cast<std::size_t>(cls)];
      const double bw = std::max(1.0, std::round(rng.uniform(range.min, range.max) * zoom));
      const double bh = std::max(1.0, std::round(rng.uniform(range.min, range.max) * zoom));
      const double cx = rng.normal(centers[c].first, spec.cluster_spread * zoom);
      const double cy = rng.normal(centers[c].second, spec.cluster_spread * zoom);
      const double left = std::clamp(std::round(cx - bw / 2.0), 0.0, w - bw);
      const double top = std::clamp(std::round(cy - bh / 2.0), 0.0, h - bh);
      // classes are 1-based like the VisDrone categories; 0 is reserved for ignore regions
      scene.annotations.push_back(Annotation{Box::from_xywh(left, top, bw, bh), cls + 1, false, 0, 0});
      scene.labels.push_back(c);
    }
  }
  return scene;
}

/// `count` scenes with ids "<prefix>_0000", ... and independent seeded streams.
inline std::vector<Scene> generate_corpus(const SceneSpec& base, int count, std::uint64_t seed,
                                          const std::string& prefix = "synth") {
  std::vector<Scene> out;
  for (int i = 0; i < count; ++i) {
    SceneSpec s = base;
    s.rng_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    char id[32];
    std::snprintf(id, sizeof id, "_%04d", i);
    s.image_id = prefix + id;
    out.push_back(generate_scene(s));
  }
  return out;
}

struct OracleSpec {
  double localization_noise = 1.0;  // std per coordinate, detector pixels
  double score_mean_tp = 0.8;
  double score_std = 0.1;
  double miss_rate = 0.05;
  double false_positive_rate = 0.2;  // expected false positives per region
  double class_flip_rate_truncated = 0.3;
  double truncated_score_factor = 0.8;  // truncated objects are detected with lower confidence
  int classes = 3;                      // class ids 1..classes
  std::uint64_t rng_seed = 0;

  void validate() const {
    auto prob = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) throw UsageError(std::string("OracleSpec: ") + name + " must lie in [0, 1]");
    };
    prob(score_mean_tp, "score_mean_tp");
    prob(miss_rate, "miss_rate");
    prob(class_flip_rate_truncated, "class_flip_rate_truncated");
    prob(truncated_score_factor, "truncated_score_factor");
    if (!(localization_noise >= 0.0) || !(score_std >= 0.0)) throw UsageError("OracleSpec: noise must be >= 0");
    if (!(false_positive_rate >= 0.0)) throw UsageError("OracleSpec: false_positive_rate must be >= 0");
    if (classes < 1) throw UsageError("OracleSpec: classes must be >= 1");
  }

  static OracleSpec perfect() {
    OracleSpec s;
    s.localization_noise = 0.0;
    s.score_std = 0.0;
    s.miss_rate = 0.0;
    s.false_positive_rate = 0.0;
    s.class_flip_rate_truncated = 0.0;
    s.truncated_score_factor = 1.0;
    return s;
  }
};

/// Stand-in detector: emits the crop's ground truth in detector coordinates,
/// perturbed per the spec. Truncated objects (kept_fraction < 1) may change
/// class. Each (image, region) pair has its own random stream.
inline RegionDetections oracle_detect(const RefinedCrop& crop, const OracleSpec& spec) {
  spec.validate();
  const FocalRegion& region = crop.region;
  Rng rng(derive_seed(spec.rng_seed ^ stable_hash(region.image_id), static_cast<std::uint64_t>(region.region_id)));
  const AffineMap2D to_det = compose(region.to_detector, region.crop_to_image());
  const Box frame = region.detector.frame();

  RegionDetections out;
  out.region = region;
  for (const CropObject& obj : crop.gt) {
    if (obj.ignore) continue;
    if (rng.bernoulli(spec.miss_rate)) continue;
    const Box b = apply_map(obj.box, to_det);
    double xs[2] = {b.x1() + spec.localization_noise * rng.normal(), b.x2() + spec.localization_noise * rng.normal()};
    double ys[2] = {b.y1() + spec.localization_noise * rng.normal(), b.y2() + spec.localization_noise * rng.normal()};
    std::sort(std::begin(xs), std::end(xs));
    std::sort(std::begin(ys), std::end(ys));
    const Box jittered = clamp_to(Box(xs[0], ys[0], xs[1], ys[1]), frame);

    const bool truncated = obj.kept_fraction < 1.0;
    double score = std::clamp(rng.normal(spec.score_mean_tp, spec.score_std), 0.01, 1.0);
    if (truncated) score *= spec.truncated_score_factor;
    int cls = obj.class_id;
    if (truncated && spec.classes > 1 && rng.bernoulli(spec.class_flip_rate_truncated)) {
      // uniform over the other classes
      int other = static_cast<int>(rng.uniform_int(1, spec.classes - 1));
      if (other >= cls) ++other;
      cls = other;
    }
    out.detections.push_back(ScoredBox{jittered, cls, score});
  }

  const int n_fp = rng.poisson(spec.false_positive_rate);
  for (int i = 0; i < n_fp; ++i) {
    const double bw = rng.uniform(8.0, std::max(8.0, std::min(64.0, frame.width())));
    const double bh = rng.uniform(8.0, std::max(8.0, std::min(64.0, frame.height())));
    const double left = rng.uniform(0.0, std::max(0.0, frame.width() - bw));
    const double top = rng.uniform(0.0, std::max(0.0, frame.height() - bh));
    const int cls = static_cast<int>(rng.uniform_int(1, spec.classes));
    const double score = rng.uniform(0.05, 0.5);
    out.detections.push_back(ScoredBox{clamp_to(Box::from_xywh(left, top, bw, bh), frame), cls, score});
  }
  return out;
}

/// Coefficient of variation (population std / mean); nullopt below two samples.
inline std::optional<double> coefficient_of_variation(std::span<const double> values) {
  if (values.size() < 2) return std::nullopt;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (!(mean > 0.0)) return std::nullopt;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return std::sqrt(var) / mean;
}

struct ScaleSpread {
  std::optional<double> cv_raw;
  std::optional<double> cv_cropped;
};

struct ScaleStats {
  ScaleSpread pooled;
  std::map<int, ScaleSpread> per_class;
};

/// Spread of box areas in the raw image versus inside the resized crops.
inline ScaleStats scale_stats(std::span<const RefinedCrop> crops, std::span<const Annotation> raw) {
  std::map<int, std::vector<double>> raw_by_class;
  std::vector<double> raw_all;
  for (const Annotation& a : raw) {
    if (a.ignore) continue;
    raw_by_class[a.class_id].push_back(area(a.box));
    raw_all.push_back(area(a.box));
  }
  std::map<int, std::vector<double>> crop_by_class;
  std::vector<double> crop_all;
  for (const RefinedCrop& c : crops) {
    const AffineMap2D to_det = compose(c.region.to_detector, c.region.crop_to_image());
    for (const CropObject& o : c.gt) {
      if (o.ignore) continue;
      const double a = area(apply_map(o.box, to_det));
      crop_by_class[o.class_id].push_back(a);
      crop_all.push_back(a);
    }
  }
  ScaleStats out;
  out.pooled = {coefficient_of_variation(raw_all), coefficient_of_variation(crop_all)};
  for (const auto& [cls, values] : raw_by_class) out.per_class[cls].cv_raw = coefficient_of_variation(values);
  for (const auto& [cls, values] : crop_by_class) out.per_class[cls].cv_cropped = coefficient_of_variation(values);
  return out;
}

}  // namespace focusdet
