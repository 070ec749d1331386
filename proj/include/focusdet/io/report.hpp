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

// Human-readable and CSV renderings of an evaluation.

#include <fmt/format.h>

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "focusdet/evalkit.hpp"
#include "focusdet/io/json.hpp"
#include "focusdet/io/visdrone.hpp"

namespace focusdet::io {

/// Two aligned rows: the summary metrics followed by one AP50 column per
/// class, and the VOC score when given. Undefined metrics print as "-".
inline std::string format_table(const EvalReport& r, const ClassMap& classes,
                                std::optional<std::pair<double, double>> voc = std::nullopt) {
  auto defined = [&](const char* name) {
    return std::find(r.undefined.begin(), r.undefined.end(), name) == r.undefined.end();
  };
  std::vector<std::pair<std::string, std::string>> cols;
  auto add = [&](std::string head, std::optional<double> v) {
    cols.emplace_back(std::move(head), v ? fmt::format("{:.2f}", *v) : "-");
  };
  add("AP", defined("ap") ? std::optional(r.ap) : std::nullopt);
  add("AP50", defined("ap50") ? std::optional(r.ap50) : std::nullopt);
  add("AP75", defined("ap75") ? std::optional(r.ap75) : std::nullopt);
  add("APs", defined("ap_small") ? std::optional(r.ap_small) : std::nullopt);
  add("APm", defined("ap_medium") ? std::optional(r.ap_medium) : std::nullopt);
  add("APl", defined("ap_large") ? std::optional(r.ap_large) : std::nullopt);
  for (const auto& [c, v] : r.per_class_ap50) add(classes.name(c), v);
  if (voc) add(fmt::format("VOC@{:g}", voc->first), voc->second);

  std::string head;
  std::string body;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const std::size_t w = std::max<std::size_t>({cols[i].first.size(), cols[i].second.size(), 6});
    const char* sep = i + 1 < cols.size() ? "  " : "";
    head += fmt::format("{:>{}}{}", cols[i].first, w, sep);
    body += fmt::format("{:>{}}{}", cols[i].second, w, sep);
  }
  return head + "\n" + body + "\n";
}

/// One row per (class, IoU threshold, recall point) of the interpolated
/// precision curves.
inline std::string format_pr_csv(const EvalReport& r) {
  std::string out = "class,iou,recall,precision\n";
  for (const PrecisionCurve& c : r.curves) {
    for (int k = 0; k < kRecallPoints; ++k) {
      out += fmt::format("{},{:.2f},{:.2f},{}\n", c.class_id, c.iou_threshold, k / 100.0, c.precision[k]);
    }
  }
  return out;
}

inline Json to_json(const VocReport& r, double iou_threshold, bool merged_classes) {
  Json j{{"iou", iou_threshold}, {"merge_classes", merged_classes}, {"ap", r.ap}};
  Json per = Json::object();
  for (const auto& [c, v] : r.per_class) per[std::to_string(c)] = v;
  j["per_class"] = per;
  return j;
}

}  // namespace focusdet::io
