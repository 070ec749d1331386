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

// Random instance generators shared by the property tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "focusdet/boxgeom.hpp"
#include "focusdet/evalkit.hpp"
#include "focusdet/random.hpp"
#include "oracles/eval_reference.hpp"
#include "oracles/nms_reference.hpp"
#include "oracles/pixels.hpp"

namespace testing_support {

inline oracle::IntBox random_int_box(focusdet::Rng& rng, int extent = 64) {
  const int x1 = static_cast<int>(rng.uniform_int(0, extent));
  const int y1 = static_cast<int>(rng.uniform_int(0, extent));
  const int x2 = static_cast<int>(rng.uniform_int(x1, extent));
  const int y2 = static_cast<int>(rng.uniform_int(y1, extent));
  return {x1, y1, x2, y2};
}

inline focusdet::Box to_box(const oracle::IntBox& b) { return focusdet::Box(b.x1, b.y1, b.x2, b.y2); }

inline focusdet::Box random_box(focusdet::Rng& rng, double extent, double max_side) {
  const double x = rng.uniform(0.0, extent);
  const double y = rng.uniform(0.0, extent);
  return focusdet::Box(x, y, x + rng.uniform(0.0, max_side), y + rng.uniform(0.0, max_side));
}

/// Clustered boxes so that NMS has real work to do.
inline std::vector<focusdet::ScoredBox> random_detections(focusdet::Rng& rng, std::size_t n, int classes) {
  std::vector<focusdet::ScoredBox> out;
  const std::size_t seeds = std::max<std::size_t>(1, n / 8);
  std::vector<focusdet::Box> anchors;
  for (std::size_t i = 0; i < seeds; ++i) anchors.push_back(random_box(rng, 400.0, 80.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = anchors[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(seeds) - 1))];
    const double j = 12.0;
    double x1 = a.x1() + rng.uniform(-j, j);
    double y1 = a.y1() + rng.uniform(-j, j);
    double x2 = std::max(x1, a.x2() + rng.uniform(-j, j));
    double y2 = std::max(y1, a.y2() + rng.uniform(-j, j));
    // a few exact score ties exercise the index tie-break
    const double score = rng.bernoulli(0.1) ? 0.5 : rng.uniform();
    out.push_back({focusdet::Box(x1, y1, x2, y2), static_cast<int>(rng.uniform_int(1, classes)), score});
  }
  return out;
}

inline std::vector<oracle::RefBox> to_ref(const std::vector<focusdet::ScoredBox>& v) {
  std::vector<oracle::RefBox> out;
  for (const auto& d : v) out.push_back({d.box.x1(), d.box.y1(), d.box.x2(), d.box.y2(), d.class_id, d.score});
  return out;
}

struct MicroDataset {
  focusdet::GroundTruthSet gts;
  focusdet::DetectionSet dets;
  std::vector<oracle::RefImage> ref;
  std::vector<int> classes;
};

/// A few images with a handful of objects of mixed sizes, some ignore regions
/// (class 0, never scored), and jittered, duplicated or spurious detections.
inline MicroDataset random_micro_dataset(focusdet::Rng& rng, int classes = 3) {
  MicroDataset m;
  for (int c = 1; c <= classes; ++c) m.classes.push_back(c);
  const int images = static_cast<int>(rng.uniform_int(1, 4));
  for (int i = 0; i < images; ++i) {
    const std::string id = "im" + std::to_string(i);
    oracle::RefImage ri{id, {}, {}};
    auto& gt = m.gts[id];
    auto& dt = m.dets[id];
    const int objects = static_cast<int>(rng.uniform_int(0, 8));
    for (int k = 0; k < objects; ++k) {
      // side lengths straddle the small / medium / large limits
      const double side = std::exp(rng.uniform(std::log(8.0), std::log(160.0)));
      const double x = rng.uniform(0, 400);
      const double y = rng.uniform(0, 400);
      const focusdet::Box b(x, y, x + side * rng.uniform(0.6, 1.4), y + side * rng.uniform(0.6, 1.4));
      const bool ignore_region = rng.bernoulli(0.1);
      const int cls = ignore_region ? 0 : static_cast<int>(rng.uniform_int(1, classes));
      const bool ignore = ignore_region || rng.bernoulli(0.05);
      gt.push_back({b, cls, ignore});
      ri.gt.push_back({b.x1(), b.y1(), b.x2(), b.y2(), cls, ignore});
      const int copies = rng.bernoulli(0.8) ? static_cast<int>(rng.uniform_int(1, 2)) : 0;
      for (int c = 0; c < copies && cls != 0; ++c) {
        const double j = 0.15 * side;
        const double x1 = b.x1() + rng.uniform(-j, j);
        const double y1 = b.y1() + rng.uniform(-j, j);
        const focusdet::Box d(x1, y1, std::max(x1 + 1.0, b.x2() + rng.uniform(-j, j)),
                              std::max(y1 + 1.0, b.y2() + rng.uniform(-j, j)));
        const int dc = rng.bernoulli(0.1) ? static_cast<int>(rng.uniform_int(1, classes)) : cls;
        const double score = rng.bernoulli(0.1) ? 0.5 : rng.uniform();
        dt.push_back({d, dc, score});
      }
    }
    const int spurious = static_cast<int>(rng.uniform_int(0, 4));
    for (int k = 0; k < spurious; ++k) {
      dt.push_back({random_box(rng, 400.0, 120.0), static_cast<int>(rng.uniform_int(1, classes)), rng.uniform()});
    }
    for (const auto& d : dt) ri.dt.push_back({d.box.x1(), d.box.y1(), d.box.x2(), d.box.y2(), d.class_id, d.score});
    m.ref.push_back(std::move(ri));
  }
  return m;
}

}  // namespace testing_support
