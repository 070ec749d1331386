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

// Pixel-enumeration oracle for integer boxes under the half-open convention:
// box (x1, y1, x2, y2) covers pixels (i, j) with x1 <= i < x2, y1 <= j < y2.

#include <algorithm>
#include <optional>
#include <set>
#include <utility>

namespace oracle {

struct IntBox {
  int x1, y1, x2, y2;
};

using PixelSet = std::set<std::pair<int, int>>;

inline PixelSet pixels(const IntBox& b) {
  PixelSet s;
  for (int i = b.x1; i < b.x2; ++i)
    for (int j = b.y1; j < b.y2; ++j) s.emplace(i, j);
  return s;
}

inline long pixel_area(const IntBox& b) { return static_cast<long>(pixels(b).size()); }

inline PixelSet common(const PixelSet& a, const PixelSet& b) {
  PixelSet out;
  for (const auto& p : a)
    if (b.contains(p)) out.insert(p);
  return out;
}

/// Bounding rectangle of a pixel set, nullopt when empty.
inline std::optional<IntBox> bounds(const PixelSet& s) {
  if (s.empty()) return std::nullopt;
  IntBox b{s.begin()->first, s.begin()->second, s.begin()->first + 1, s.begin()->second + 1};
  for (const auto& [i, j] : s) {
    b.x1 = std::min(b.x1, i);
    b.y1 = std::min(b.y1, j);
    b.x2 = std::max(b.x2, i + 1);
    b.y2 = std::max(b.y2, j + 1);
  }
  return b;
}

/// IoU as a ratio of pixel counts; 0 when the union is empty.
inline std::pair<long, long> iou_fraction(const IntBox& a, const IntBox& b) {
  const PixelSet pa = pixels(a);
  const PixelSet pb = pixels(b);
  const long inter = static_cast<long>(common(pa, pb).size());
  const long uni = static_cast<long>(pa.size() + pb.size()) - inter;
  return {inter, uni};
}

}  // namespace oracle
