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

// Per-image containers shared by the stages and their file formats.

#include <algorithm>
#include <string>
#include <vector>

#include "focusdet/evalkit.hpp"
#include "focusdet/focal.hpp"
#include "focusdet/fuse.hpp"

namespace focusdet {

struct ImageRecord {
  std::string id;
  ImageSize size;
  std::vector<Annotation> annotations;
  std::vector<int> clusters;  // generating cluster per annotation (synthetic data only), else empty
};

using Dataset = std::vector<ImageRecord>;

struct ImageRegions {
  std::string id;
  ImageSize size;
  std::vector<FocalRegion> regions;
};

struct ImageCrops {
  std::string id;
  ImageSize size;
  std::vector<RefinedCrop> crops;
};

struct ImageRegionDetections {
  std::string id;
  ImageSize size;
  std::vector<RegionDetections> regions;
};

template <typename T>
void sort_by_id(std::vector<T>& items) {
  std::sort(items.begin(), items.end(), [](const T& a, const T& b) { return a.id < b.id; });
}

inline GroundTruthSet to_ground_truth(const Dataset& data) {
  GroundTruthSet out;
  for (const ImageRecord& im : data) {
    auto& objs = out[im.id];
    for (const Annotation& a : im.annotations) objs.push_back(GroundTruthObject{a.box, a.class_id, a.ignore});
  }
  return out;
}

}  // namespace focusdet
