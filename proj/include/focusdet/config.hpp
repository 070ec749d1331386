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

// Run configuration: every tunable of the stages in one declarative document.
// Defaults are the constants of the method (20 px margin, 30 % keep rule,
// NMS 0.5, IBS 0.05 / 0.5).

#include <cstddef>
#include <set>
#include <string>

#include "focusdet/error.hpp"
#include "focusdet/focal.hpp"
#include "focusdet/fuse.hpp"
#include "focusdet/io/json.hpp"
#include "focusdet/mixture.hpp"
#include "focusdet/scenes.hpp"

namespace focusdet {

struct PipelineConfig {
  int grid_rows = 4;
  int grid_cols = 4;
  double margin = 20.0;
  double keep_threshold = 0.30;
  int detector_width = 1000;
  int detector_height = 600;
  FuseConfig fuse;
  EmConfig em;  // rng_seed is ignored; per-image seeds derive from the run seed
  std::size_t max_dets = 500;
  double voc_iou = 0.7;

  // synthetic corpus and oracle detector used by `synth` and `pipeline`
  int synth_images = 8;
  SceneSpec synth = default_synth();
  OracleSpec oracle;

  static SceneSpec default_synth() {
    SceneSpec s;
    s.n_clusters = 5;
    s.boxes_per_cluster_min = 4;
    s.boxes_per_cluster_max = 10;
    s.cluster_spread = 40.0;
    s.size_multiplier_min = 0.7;
    s.size_multiplier_max = 2.0;
    return s;
  }

  ImageSize detector() const { return ImageSize{detector_width, detector_height}; }

  FocusConfig focus() const {
    FocusConfig f;
    f.grid.rows = grid_rows;
    f.grid.cols = grid_cols;
    f.em = em;
    f.margin = margin;
    f.detector = detector();
    return f;
  }

  void validate() const {
    if (grid_rows < 1 || grid_cols < 1) throw UsageError("config: grid_rows and grid_cols must be >= 1");
    if (!(margin >= 0.0)) throw UsageError("config: margin must be >= 0");
    if (!(keep_threshold > 0.0 && keep_threshold <= 1.0)) throw UsageError("config: keep_threshold must lie in (0, 1]");
    detector().validate();
    fuse.validate();
    em.validate();
    if (max_dets < 1) throw UsageError("config: max_dets must be >= 1");
    if (!(voc_iou > 0.0 && voc_iou <= 1.0)) throw UsageError("config: voc_iou must lie in (0, 1]");
    if (synth_images < 1) throw UsageError("config: synth_images must be >= 1");
    synth.validate();
    oracle.validate();
  }
};

namespace detail {

inline void reject_unknown(const io::Json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw UsageError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw UsageError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_key(const io::Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError(std::string("config: invalid value for '") + key + "'");
  }
}

}  // namespace detail

/// Applies a config document on top of `base`. Unknown keys are rejected and
/// the result is validated.
inline PipelineConfig apply_config(const io::Json& j, PipelineConfig cfg = {}) {
  detail::reject_unknown(j,
                         {"grid_rows", "grid_cols", "margin", "keep_threshold", "detector_width", "detector_height",
                          "nms_iou", "ibs_region_iou", "ibs_box_iou", "per_class", "ibs_enabled", "em_max_iterations",
                          "em_tolerance", "em_covariance_floor", "em_restarts", "max_dets", "voc_iou", "synth_images",
                          "synth", "oracle"},
                         "config");
  using detail::read_key;
  read_key(j, "grid_rows", cfg.grid_rows);
  read_key(j, "grid_cols", cfg.grid_cols);
  read_key(j, "margin", cfg.margin);
  read_key(j, "keep_threshold", cfg.keep_threshold);
  read_key(j, "detector_width", cfg.detector_width);
  read_key(j, "detector_height", cfg.detector_height);
  read_key(j, "nms_iou", cfg.fuse.nms_iou);
  read_key(j, "ibs_region_iou", cfg.fuse.ibs_region_iou);
  read_key(j, "ibs_box_iou", cfg.fuse.ibs_box_iou);
  read_key(j, "per_class", cfg.fuse.per_class);
  read_key(j, "ibs_enabled", cfg.fuse.ibs_enabled);
  read_key(j, "em_max_iterations", cfg.em.max_iterations);
  read_key(j, "em_tolerance", cfg.em.tolerance);
  read_key(j, "em_covariance_floor", cfg.em.covariance_floor);
  read_key(j, "em_restarts", cfg.em.restarts);
  read_key(j, "max_dets", cfg.max_dets);
  read_key(j, "voc_iou", cfg.voc_iou);
  read_key(j, "synth_images", cfg.synth_images);

  if (j.contains("synth")) {
    const io::Json& s = j.at("synth");
    detail::reject_unknown(s,
                           {"image_width", "image_height", "n_clusters", "boxes_per_cluster_min", "boxes_per_cluster_max",
                            "cluster_spread", "box_size_range", "size_multiplier_min", "size_multiplier_max",
                            "min_center_separation"},
                           "config.synth");
    read_key(s, "image_width", cfg.synth.image.width);
    read_key(s, "image_height", cfg.synth.image.height);
    read_key(s, "n_clusters", cfg.synth.n_clusters);
    read_key(s, "boxes_per_cluster_min", cfg.synth.boxes_per_cluster_min);
    read_key(s, "boxes_per_cluster_max", cfg.synth.boxes_per_cluster_max);
    read_key(s, "cluster_spread", cfg.synth.cluster_spread);
    read_key(s, "size_multiplier_min", cfg.synth.size_multiplier_min);
    read_key(s, "size_multiplier_max", cfg.synth.size_multiplier_max);
    read_key(s, "min_center_separation", cfg.synth.min_center_separation);
    if (s.contains("box_size_range")) {
      std::vector<std::vector<double>> ranges;
      read_key(s, "box_size_range", ranges);
      cfg.synth.box_size_range.clear();
      for (const auto& r : ranges) {
        if (r.size() != 2) throw UsageError("config.synth: box_size_range entries must be [min, max]");
        cfg.synth.box_size_range.push_back(SizeRange{r[0], r[1]});
      }
    }
  }
  if (j.contains("oracle")) {
    const io::Json& o = j.at("oracle");
    detail::reject_unknown(o,
                           {"localization_noise", "score_mean_tp", "score_std", "miss_rate", "false_positive_rate",
                            "class_flip_rate_truncated", "truncated_score_factor", "classes"},
                           "config.oracle");
    read_key(o, "localization_noise", cfg.oracle.localization_noise);
    read_key(o, "score_mean_tp", cfg.oracle.score_mean_tp);
    read_key(o, "score_std", cfg.oracle.score_std);
    read_key(o, "miss_rate", cfg.oracle.miss_rate);
    read_key(o, "false_positive_rate", cfg.oracle.false_positive_rate);
    read_key(o, "class_flip_rate_truncated", cfg.oracle.class_flip_rate_truncated);
    read_key(o, "truncated_score_factor", cfg.oracle.truncated_score_factor);
    read_key(o, "classes", cfg.oracle.classes);
  }
  cfg.validate();
  return cfg;
}

inline io::Json to_json(const PipelineConfig& c) {
  io::Json j;
  j["grid_rows"] = c.grid_rows;
  j["grid_cols"] = c.grid_cols;
  j["margin"] = c.margin;
  j["keep_threshold"] = c.keep_threshold;
  j["detector_width"] = c.detector_width;
  j["detector_height"] = c.detector_height;
  j["nms_iou"] = c.fuse.nms_iou;
  j["ibs_region_iou"] = c.fuse.ibs_region_iou;
  j["ibs_box_iou"] = c.fuse.ibs_box_iou;
  j["per_class"] = c.fuse.per_class;
  j["ibs_enabled"] = c.fuse.ibs_enabled;
  j["em_max_iterations"] = c.em.max_iterations;
  j["em_tolerance"] = c.em.tolerance;
  j["em_covariance_floor"] = c.em.covariance_floor;
  j["em_restarts"] = c.em.restarts;
  j["max_dets"] = c.max_dets;
  j["voc_iou"] = c.voc_iou;
  j["synth_images"] = c.synth_images;
  io::Json ranges = io::Json::array();
  for (const SizeRange& r : c.synth.box_size_range) ranges.push_back(io::Json::array({r.min, r.max}));
  j["synth"] = io::Json{{"image_width", c.synth.image.width},
                        {"image_height", c.synth.image.height},
                        {"n_clusters", c.synth.n_clusters},
                        {"boxes_per_cluster_min", c.synth.boxes_per_cluster_min},
                        {"boxes_per_cluster_max", c.synth.boxes_per_cluster_max},
                        {"cluster_spread", c.synth.cluster_spread},
                        {"box_size_range", ranges},
                        {"size_multiplier_min", c.synth.size_multiplier_min},
                        {"size_multiplier_max", c.synth.size_multiplier_max},
                        {"min_center_separation", c.synth.min_center_separation}};
  j["oracle"] = io::Json{{"localization_noise", c.oracle.localization_noise},
                         {"score_mean_tp", c.oracle.score_mean_tp},
                         {"score_std", c.oracle.score_std},
                         {"miss_rate", c.oracle.miss_rate},
                         {"false_positive_rate", c.oracle.false_positive_rate},
                         {"class_flip_rate_truncated", c.oracle.class_flip_rate_truncated},
                         {"truncated_score_factor", c.oracle.truncated_score_factor},
                         {"classes", c.oracle.classes}};
  return j;
}

}  // namespace focusdet
