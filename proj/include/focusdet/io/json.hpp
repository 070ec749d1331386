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

// JSON layouts of every stage boundary. Each document carries a "format" tag
// and a "version"; loaders reject documents of the wrong kind. Boxes are
// always [x1, y1, x2, y2] in the coordinate frame noted per field.

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "focusdet/dataset.hpp"
#include "focusdet/error.hpp"
#include "focusdet/evalkit.hpp"
#include "focusdet/io/files.hpp"
#include "focusdet/mixture.hpp"
#include "focusdet/scenes.hpp"

namespace focusdet::io {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kDatasetFormat = "focusdet.dataset";
inline constexpr const char* kRegionsFormat = "focusdet.regions";
inline constexpr const char* kCropsFormat = "focusdet.crops";
inline constexpr const char* kRegionDetectionsFormat = "focusdet.region_detections";
inline constexpr const char* kDetectionsFormat = "focusdet.detections";
inline constexpr const char* kMixtureFormat = "focusdet.mixture";
inline constexpr const char* kEvalFormat = "focusdet.eval";

inline Json header(const char* format) {
  Json j;
  j["format"] = format;
  j["version"] = kFormatVersion;
  return j;
}

inline void expect_format(const Json& j, const char* format) {
  if (!j.is_object() || !j.contains("format") || j["format"] != format) {
    throw DataError(std::string("expected a '") + format + "' document");
  }
  if (j.value("version", 0) != kFormatVersion) throw DataError(std::string("unsupported ") + format + " version");
}

inline Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(origin + ": " + e.what());
  }
}

inline Json load_json(const std::filesystem::path& path) { return parse_json(read_file(path), path.string()); }

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

/// Wraps nlohmann type errors into DataError with the origin attached.
template <typename F>
auto decode(const std::string& origin, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(origin + ": " + e.what());
  } catch (const UsageError& e) {
    throw DataError(origin + ": " + e.what());
  }
}

// ---- primitives

inline Json to_json(const Box& b) { return Json::array({b.x1(), b.y1(), b.x2(), b.y2()}); }

inline Box box_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw DataError("box must be an array [x1, y1, x2, y2]");
  return Box(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

inline Json to_json(const ImageSize& s) { return Json{{"width", s.width}, {"height", s.height}}; }

inline ImageSize size_from_json(const Json& j) {
  ImageSize s{j.at("width").get<int>(), j.at("height").get<int>()};
  s.validate();
  return s;
}

inline Json to_json(const AffineMap2D& m) {
  return Json{{"scale_x", m.scale_x()}, {"scale_y", m.scale_y()}, {"offset_x", m.offset_x()}, {"offset_y", m.offset_y()}};
}

inline AffineMap2D map_from_json(const Json& j) {
  return AffineMap2D(j.at("scale_x").get<double>(), j.at("scale_y").get<double>(), j.at("offset_x").get<double>(),
                     j.at("offset_y").get<double>());
}

inline Json to_json(const ScoredBox& d) {
  return Json{{"box", to_json(d.box)}, {"category", d.class_id}, {"score", d.score}};
}

inline ScoredBox detection_from_json(const Json& j) {
  ScoredBox d{box_from_json(j.at("box")), j.at("category").get<int>(), j.at("score").get<double>()};
  validate(d);
  return d;
}

inline Json to_json(const FocalRegion& r) {
  Json j;
  j["region_id"] = r.region_id;
  j["rect"] = to_json(r.rect);
  j["detector"] = to_json(r.detector);
  j["to_detector"] = to_json(r.to_detector);
  return j;
}

inline FocalRegion region_from_json(const Json& j, const std::string& image_id) {
  FocalRegion r;
  r.region_id = j.at("region_id").get<int>();
  r.rect = box_from_json(j.at("rect"));
  r.image_id = image_id;
  r.detector = size_from_json(j.at("detector"));
  r.to_detector = map_from_json(j.at("to_detector"));
  return r;
}

inline Json image_header(const std::string& id, const ImageSize& size) {
  return Json{{"id", id}, {"width", size.width}, {"height", size.height}};
}

// ---- dataset

inline Json to_json(const Dataset& data) {
  Json j = header(kDatasetFormat);
  j["images"] = Json::array();
  for (const ImageRecord& im : data) {
    Json ij = image_header(im.id, im.size);
    ij["annotations"] = Json::array();
    for (std::size_t i = 0; i < im.annotations.size(); ++i) {
      const Annotation& a = im.annotations[i];
      Json aj{{"box", to_json(a.box)}, {"category", a.class_id}, {"ignore", a.ignore}, {"truncation", a.truncation},
              {"occlusion", a.occlusion}};
      if (i < im.clusters.size()) aj["cluster"] = im.clusters[i];
      ij["annotations"].push_back(std::move(aj));
    }
    j["images"].push_back(std::move(ij));
  }
  return j;
}

inline Dataset dataset_from_json(const Json& j, const std::string& origin = "dataset") {
  return decode(origin, [&] {
    expect_format(j, kDatasetFormat);
    Dataset data;
    for (const Json& ij : j.at("images")) {
      ImageRecord im;
      im.id = ij.at("id").get<std::string>();
      im.size = size_from_json(ij);
      for (const Json& aj : ij.at("annotations")) {
        Annotation a;
        a.box = box_from_json(aj.at("box"));
        a.class_id = aj.at("category").get<int>();
        a.ignore = aj.value("ignore", false);
        a.truncation = aj.value("truncation", 0);
        a.occlusion = aj.value("occlusion", 0);
        im.annotations.push_back(a);
        if (aj.contains("cluster")) im.clusters.push_back(aj["cluster"].get<int>());
      }
      if (!im.clusters.empty() && im.clusters.size() != im.annotations.size()) {
        throw DataError("image '" + im.id + "': cluster labels must be given for all annotations or none");
      }
      data.push_back(std::move(im));
    }
    sort_by_id(data);
    return data;
  });
}

inline Dataset dataset_from_scenes(const std::vector<Scene>& scenes) {
  Dataset data;
  for (const Scene& s : scenes) data.push_back(ImageRecord{s.image_id, s.image, s.annotations, s.labels});
  sort_by_id(data);
  return data;
}

// ---- regions

inline Json to_json(const std::vector<ImageRegions>& images, std::optional<std::uint64_t> seed) {
  Json j = header(kRegionsFormat);
  if (seed) j["seed"] = *seed;
  j["images"] = Json::array();
  for (const ImageRegions& im : images) {
    Json ij = image_header(im.id, im.size);
    ij["regions"] = Json::array();
    for (const FocalRegion& r : im.regions) ij["regions"].push_back(to_json(r));
    j["images"].push_back(std::move(ij));
  }
  return j;
}

inline std::vector<ImageRegions> regions_from_json(const Json& j, const std::string& origin = "regions") {
  return decode(origin, [&] {
    expect_format(j, kRegionsFormat);
    std::vector<ImageRegions> out;
    for (const Json& ij : j.at("images")) {
      ImageRegions im;
      im.id = ij.at("id").get<std::string>();
      im.size = size_from_json(ij);
      for (const Json& rj : ij.at("regions")) im.regions.push_back(region_from_json(rj, im.id));
      out.push_back(std::move(im));
    }
    sort_by_id(out);
    return out;
  });
}

// ---- crops

inline Json to_json(const std::vector<ImageCrops>& images) {
  Json j = header(kCropsFormat);
  j["images"] = Json::array();
  for (const ImageCrops& im : images) {
    Json ij = image_header(im.id, im.size);
    ij["crops"] = Json::array();
    for (const RefinedCrop& c : im.crops) {
      Json cj;
      cj["region"] = to_json(c.region);
      cj["gt"] = Json::array();
      for (const CropObject& o : c.gt) {
        cj["gt"].push_back(Json{{"box", to_json(o.box)},
                                {"category", o.class_id},
                                {"kept_fraction", o.kept_fraction},
                                {"ignore", o.ignore}});
      }
      cj["dropped_degenerate"] = c.dropped_degenerate;
      ij["crops"].push_back(std::move(cj));
    }
    j["images"].push_back(std::move(ij));
  }
  return j;
}

inline std::vector<ImageCrops> crops_from_json(const Json& j, const std::string& origin = "crops") {
  return decode(origin, [&] {
    expect_format(j, kCropsFormat);
    std::vector<ImageCrops> out;
    for (const Json& ij : j.at("images")) {
      ImageCrops im;
      im.id = ij.at("id").get<std::string>();
      im.size = size_from_json(ij);
      for (const Json& cj : ij.at("crops")) {
        RefinedCrop c;
        c.region = region_from_json(cj.at("region"), im.id);
        for (const Json& oj : cj.at("gt")) {
          CropObject o{box_from_json(oj.at("box")), oj.at("category").get<int>(), oj.at("kept_fraction").get<double>(),
                       oj.value("ignore", false)};
          if (!(o.kept_fraction >= 0.0 && o.kept_fraction <= 1.0)) throw DataError("kept_fraction outside [0, 1]");
          c.gt.push_back(o);
        }
        c.dropped_degenerate = cj.value("dropped_degenerate", std::size_t{0});
        im.crops.push_back(std::move(c));
      }
      out.push_back(std::move(im));
    }
    sort_by_id(out);
    return out;
  });
}

// ---- region detections (detector-resolution coordinates)

inline Json to_json(const std::vector<ImageRegionDetections>& images) {
  Json j = header(kRegionDetectionsFormat);
  j["images"] = Json::array();
  for (const ImageRegionDetections& im : images) {
    Json ij = image_header(im.id, im.size);
    ij["regions"] = Json::array();
    for (const RegionDetections& rd : im.regions) {
      Json rj;
      rj["region"] = to_json(rd.region);
      rj["detections"] = Json::array();
      for (const ScoredBox& d : rd.detections) rj["detections"].push_back(to_json(d));
      ij["regions"].push_back(std::move(rj));
    }
    j["images"].push_back(std::move(ij));
  }
  return j;
}

inline std::vector<ImageRegionDetections> region_detections_from_json(const Json& j,
                                                                      const std::string& origin = "region detections") {
  return decode(origin, [&] {
    expect_format(j, kRegionDetectionsFormat);
    std::vector<ImageRegionDetections> out;
    for (const Json& ij : j.at("images")) {
      ImageRegionDetections im;
      im.id = ij.at("id").get<std::string>();
      im.size = size_from_json(ij);
      for (const Json& rj : ij.at("regions")) {
        RegionDetections rd;
        rd.region = region_from_json(rj.at("region"), im.id);
        for (const Json& dj : rj.at("detections")) rd.detections.push_back(detection_from_json(dj));
        im.regions.push_back(std::move(rd));
      }
      out.push_back(std::move(im));
    }
    sort_by_id(out);
    return out;
  });
}

// ---- image-level detections

inline Json to_json(const DetectionSet& dets) {
  Json j = header(kDetectionsFormat);
  j["images"] = Json::array();
  for (const auto& [id, ds] : dets) {
    Json ij{{"id", id}, {"detections", Json::array()}};
    for (const ScoredBox& d : ds) ij["detections"].push_back(to_json(d));
    j["images"].push_back(std::move(ij));
  }
  return j;
}

inline DetectionSet detections_from_json(const Json& j, const std::string& origin = "detections") {
  return decode(origin, [&] {
    expect_format(j, kDetectionsFormat);
    DetectionSet out;
    for (const Json& ij : j.at("images")) {
      auto& ds = out[ij.at("id").get<std::string>()];
      for (const Json& dj : ij.at("detections")) ds.push_back(detection_from_json(dj));
    }
    return out;
  });
}

// ---- mixture

inline Json to_json(const MixtureModel& m, const FeatureGrid& grid) {
  Json j = header(kMixtureFormat);
  j["grid"] = Json{{"rows", grid.rows}, {"cols", grid.cols}, {"image_width", grid.image_width},
                   {"image_height", grid.image_height}};
  j["weights"] = m.weights;
  j["means"] = m.means;
  j["variances"] = m.variances;
  return j;
}

struct MixtureDocument {
  MixtureModel model;
  FeatureGrid grid;
};

inline MixtureDocument mixture_from_json(const Json& j, const std::string& origin = "mixture") {
  return decode(origin, [&] {
    expect_format(j, kMixtureFormat);
    MixtureDocument doc;
    const Json& g = j.at("grid");
    doc.grid = FeatureGrid{g.at("rows").get<int>(), g.at("cols").get<int>(), g.at("image_width").get<double>(),
                           g.at("image_height").get<double>()};
    doc.grid.validate();
    doc.model.weights = j.at("weights").get<std::vector<double>>();
    doc.model.means = j.at("means").get<std::vector<std::vector<double>>>();
    doc.model.variances = j.at("variances").get<std::vector<std::vector<double>>>();
    doc.model.validate();
    if (doc.model.dimension() != doc.grid.dimension()) throw DataError("mixture dimension does not match its grid");
    return doc;
  });
}

// ---- evaluation report

inline Json to_json(const EvalReport& r) {
  Json j = header(kEvalFormat);
  j["ap"] = r.ap;
  j["ap50"] = r.ap50;
  j["ap75"] = r.ap75;
  j["ap_small"] = r.ap_small;
  j["ap_medium"] = r.ap_medium;
  j["ap_large"] = r.ap_large;
  Json per50 = Json::object();
  for (const auto& [c, v] : r.per_class_ap50) per50[std::to_string(c)] = v;
  j["per_class_ap50"] = per50;
  Json per = Json::object();
  for (const auto& [c, v] : r.per_class_ap) per[std::to_string(c)] = v;
  j["per_class_ap"] = per;
  j["empty"] = r.empty;
  j["undefined"] = r.undefined;
  return j;
}

}  // namespace focusdet::io
