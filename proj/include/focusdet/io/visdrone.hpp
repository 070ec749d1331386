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

// VisDrone text format: one file per image named <image id>.txt, one object
// per line with the comma-separated fields
//
//   bbox_left,bbox_top,bbox_width,bbox_height,score,category,truncation,occlusion
//
// Category 0 marks ignored regions. Result files use the same layout with
// truncation and occlusion set to -1.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "focusdet/dataset.hpp"
#include "focusdet/error.hpp"
#include "focusdet/io/files.hpp"
#include "focusdet/io/image_size.hpp"
#include "focusdet/io/json.hpp"

namespace focusdet::io {

struct VisDroneRecord {
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;
  double score = 0.0;
  int category = 0;
  int truncation = 0;
  int occlusion = 0;
};

/// Category names and which ids denote ignored regions. Shipped as data
/// (data/visdrone_classes.json) because challenge years differ.
struct ClassMap {
  std::map<int, std::string> names;
  std::set<int> ignore{0};

  std::string name(int id) const {
    const auto it = names.find(id);
    return it == names.end() ? std::to_string(id) : it->second;
  }
};

inline ClassMap class_map_from_json(const Json& j, const std::string& origin = "class map") {
  return decode(origin, [&] {
    ClassMap m;
    for (const auto& [key, value] : j.items()) {
      if (key != "names" && key != "ignore") throw DataError("unknown key '" + key + "'");
    }
    if (j.contains("names")) {
      for (const auto& [key, value] : j.at("names").items()) m.names[std::stoi(key)] = value.get<std::string>();
    }
    if (j.contains("ignore")) m.ignore = j.at("ignore").get<std::set<int>>();
    return m;
  });
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline VisDroneRecord parse_visdrone_line(std::string_view line, const std::string& origin, std::size_t line_no) {
  const std::string where = origin + ":" + std::to_string(line_no);
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (fields.size() == 9 && fields.back().empty()) fields.pop_back();  // tolerate one trailing comma
  if (fields.size() != 8) {
    throw DataError(where + ": expected 8 comma-separated fields, found " + std::to_string(fields.size()));
  }
  auto real = [&](const std::string& f) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
      throw DataError(where + ": invalid number '" + f + "'");
    }
    return v;
  };
  auto integer = [&](const std::string& f) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size()) throw DataError(where + ": invalid integer '" + f + "'");
    return v;
  };
  VisDroneRecord r{real(fields[0]), real(fields[1]), real(fields[2]),    real(fields[3]),
                   real(fields[4]), integer(fields[5]), integer(fields[6]), integer(fields[7])};
  if (r.width < 0.0 || r.height < 0.0) throw DataError(where + ": negative box width or height");
  return r;
}

inline std::vector<VisDroneRecord> parse_visdrone_text(std::string_view text, const std::string& origin) {
  std::vector<VisDroneRecord> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    const std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    ++line_no;
    if (!trim(line).empty()) out.push_back(parse_visdrone_line(line, origin, line_no));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

inline std::string format_visdrone(const VisDroneRecord& r) {
  return fmt::format("{},{},{},{},{},{},{},{}\n", r.left, r.top, r.width, r.height, r.score, r.category, r.truncation,
                     r.occlusion);
}

inline Annotation to_annotation(const VisDroneRecord& r, const ClassMap& classes) {
  return Annotation{Box::from_xywh(r.left, r.top, r.width, r.height), r.category, classes.ignore.contains(r.category),
                    r.truncation, r.occlusion};
}

/// Sorted *.txt files of a directory, keyed by stem.
inline std::map<std::string, std::filesystem::path> list_text_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
  std::map<std::string, std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files[entry.path().stem().string()] = entry.path();
  }
  return files;
}

/// Image sizes from a CSV of "id,width,height" lines (a header line is allowed).
inline std::map<std::string, ImageSize> read_size_table(const std::filesystem::path& path) {
  std::map<std::string, ImageSize> out;
  const std::string text = read_file(path);
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    const std::string line = trim(std::string_view(text).substr(start, nl == std::string::npos ? std::string::npos : nl - start));
    ++line_no;
    start = nl == std::string::npos ? text.size() : nl + 1;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected id,width,height");
    const std::string id = trim(std::string_view(line).substr(0, c1));
    const std::string ws = trim(std::string_view(line).substr(c1 + 1, c2 - c1 - 1));
    const std::string hs = trim(std::string_view(line).substr(c2 + 1));
    int w = 0;
    int h = 0;
    const bool ok_w = std::from_chars(ws.data(), ws.data() + ws.size(), w).ec == std::errc();
    const bool ok_h = std::from_chars(hs.data(), hs.data() + hs.size(), h).ec == std::errc();
    if (!ok_w || !ok_h) {
      if (line_no == 1) continue;  // header
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": invalid image size");
    }
    if (w <= 0 || h <= 0) throw DataError(path.string() + ":" + std::to_string(line_no) + ": image size must be positive");
    out[id] = ImageSize{w, h};
  }
  return out;
}

/// Looks up image dimensions from a size table or from image headers in a
/// directory (<id>.jpg, <id>.jpeg or <id>.png).
struct SizeSource {
  std::map<std::string, ImageSize> table;
  std::filesystem::path image_dir;

  ImageSize lookup(const std::string& id) const {
    if (const auto it = table.find(id); it != table.end()) return it->second;
    if (!image_dir.empty()) {
      for (const char* ext : {".jpg", ".jpeg", ".png", ".JPG", ".PNG"}) {
        const auto p = image_dir / (id + ext);
        if (std::filesystem::exists(p)) return read_image_size(p);
      }
    }
    throw DataError("no image dimensions known for '" + id + "' (pass an image size table or image directory)");
  }
};

/// Ground truth from a dataset JSON file or from a directory of VisDrone
/// annotation files. Directory input needs a source for image dimensions;
/// without one, images default to the extent of their boxes.
inline Dataset parse_annotations(const std::filesystem::path& path, const ClassMap& classes = {},
                                 const SizeSource* sizes = nullptr) {
  if (std::filesystem::is_regular_file(path)) return dataset_from_json(load_json(path), path.string());
  Dataset data;
  for (const auto& [id, file] : list_text_files(path)) {
    ImageRecord im;
    im.id = id;
    for (const VisDroneRecord& r : parse_visdrone_text(read_file(file), file.string())) {
      im.annotations.push_back(to_annotation(r, classes));
    }
    if (sizes) {
      im.size = sizes->lookup(id);
    } else {
      double w = 1.0;
      double h = 1.0;
      for (const auto& a : im.annotations) {
        w = std::max(w, a.box.x2());
        h = std::max(h, a.box.y2());
      }
      im.size = ImageSize{static_cast<int>(std::ceil(w)), static_cast<int>(std::ceil(h))};
    }
    data.push_back(std::move(im));
  }
  return data;
}

/// Detections from a directory of VisDrone result files.
inline DetectionSet parse_results(const std::filesystem::path& dir) {
  DetectionSet out;
  for (const auto& [id, file] : list_text_files(dir)) {
    auto& ds = out[id];
    for (const VisDroneRecord& r : parse_visdrone_text(read_file(file), file.string())) {
      ScoredBox d{Box::from_xywh(r.left, r.top, r.width, r.height), r.category, r.score};
      try {
        validate(d);
      } catch (const DataError& e) {
        throw DataError(file.string() + ": " + e.what());
      }
      ds.push_back(d);
    }
  }
  return out;
}

inline void write_annotations(const std::filesystem::path& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  for (const ImageRecord& im : data) {
    std::string text;
    for (const Annotation& a : im.annotations) {
      text += format_visdrone(VisDroneRecord{a.box.x1(), a.box.y1(), a.box.width(), a.box.height(), a.ignore ? 0.0 : 1.0,
                                             a.class_id, a.truncation, a.occlusion});
    }
    write_file_atomic(dir / (im.id + ".txt"), text);
  }
}

inline void write_results(const std::filesystem::path& dir, const DetectionSet& dets) {
  std::filesystem::create_directories(dir);
  for (const auto& [id, ds] : dets) {
    std::string text;
    for (const ScoredBox& d : ds) {
      text += format_visdrone(
          VisDroneRecord{d.box.x1(), d.box.y1(), d.box.width(), d.box.height(), d.score, d.class_id, -1, -1});
    }
    write_file_atomic(dir / (id + ".txt"), text);
  }
}

}  // namespace focusdet::io
