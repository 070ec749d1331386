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

// Axis-aligned box arithmetic. Boxes use real-valued pixel coordinates with
// the half-open convention [x1, x2) x [y1, y2), so an integer box covers
// exactly (x2 - x1) * (y2 - y1) pixels.

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>

#include "focusdet/error.hpp"

namespace focusdet {

class Box {
 public:
  constexpr Box() = default;

  Box(double x1, double y1, double x2, double y2) : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
    if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2)) {
      throw UsageError("Box: coordinates must be finite");
    }
    if (x1 > x2 || y1 > y2) {
      throw UsageError("Box: expected x1 <= x2 and y1 <= y2");
    }
  }

  /// Builds a box from a top-left corner and a size.
  static Box from_xywh(double left, double top, double width, double height) {
    return Box(left, top, left + width, top + height);
  }

  constexpr double x1() const { return x1_; }
  constexpr double y1() const { return y1_; }
  constexpr double x2() const { return x2_; }
  constexpr double y2() const { return y2_; }

  constexpr double width() const { return x2_ - x1_; }
  constexpr double height() const { return y2_ - y1_; }
  constexpr double center_x() const { return 0.5 * (x1_ + x2_); }
  constexpr double center_y() const { return 0.5 * (y1_ + y2_); }

  Box translated(double dx, double dy) const { return Box(x1_ + dx, y1_ + dy, x2_ + dx, y2_ + dy); }

  friend constexpr bool operator==(const Box&, const Box&) = default;

 private:
  double x1_ = 0.0;
  double y1_ = 0.0;
  double x2_ = 0.0;
  double y2_ = 0.0;
};

inline std::ostream& operator<<(std::ostream& os, const Box& b) {
  return os << '(' << b.x1() << ',' << b.y1() << ',' << b.x2() << ',' << b.y2() << ')';
}

/// A detection: box plus class id and confidence in [0, 1].
struct ScoredBox {
  Box box;
  int class_id = 0;
  double score = 0.0;

  friend bool operator==(const ScoredBox&, const ScoredBox&) = default;
};

inline void validate(const ScoredBox& d) {
  if (d.class_id < 0) throw DataError("detection class id must be nonnegative");
  if (!(d.score >= 0.0 && d.score <= 1.0)) throw DataError("detection score must lie in [0, 1]");
}

/// Per-axis scale followed by offset: x' = scale_x * x + offset_x.
/// Only positive scales are allowed; inference geometry never flips.
class AffineMap2D {
 public:
  constexpr AffineMap2D() = default;

  AffineMap2D(double scale_x, double scale_y, double offset_x, double offset_y)
      : scale_x_(scale_x), scale_y_(scale_y), offset_x_(offset_x), offset_y_(offset_y) {
    if (!(scale_x > 0.0) || !(scale_y > 0.0) || !std::isfinite(scale_x) || !std::isfinite(scale_y)) {
      throw UsageError("AffineMap2D: scales must be positive and finite");
    }
    if (!std::isfinite(offset_x) || !std::isfinite(offset_y)) {
      throw UsageError("AffineMap2D: offsets must be finite");
    }
  }

  constexpr double scale_x() const { return scale_x_; }
  constexpr double scale_y() const { return scale_y_; }
  constexpr double offset_x() const { return offset_x_; }
  constexpr double offset_y() const { return offset_y_; }

  constexpr double map_x(double x) const { return scale_x_ * x + offset_x_; }
  constexpr double map_y(double y) const { return scale_y_ * y + offset_y_; }

  friend constexpr bool operator==(const AffineMap2D&, const AffineMap2D&) = default;

 private:
  double scale_x_ = 1.0;
  double scale_y_ = 1.0;
  double offset_x_ = 0.0;
  double offset_y_ = 0.0;
};

inline double area(const Box& b) { return b.width() * b.height(); }

/// Overlap rectangle, or nullopt when the boxes do not share positive area
/// (max of lefts >= min of rights on either axis).
inline std::optional<Box> intersect(const Box& a, const Box& b) {
  const double left = std::max(a.x1(), b.x1());
  const double top = std::max(a.y1(), b.y1());
  const double right = std::min(a.x2(), b.x2());
  const double bottom = std::min(a.y2(), b.y2());
  if (left >= right || top >= bottom) return std::nullopt;
  return Box(left, top, right, bottom);
}

inline double intersection_area(const Box& a, const Box& b) {
  const auto i = intersect(a, b);
  return i ? area(*i) : 0.0;
}

/// Intersection over union. Two zero-area boxes give 0.
inline double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = area(a) + area(b) - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

/// `b` restricted to `frame`; nullopt when nothing of positive area remains.
inline std::optional<Box> clip(const Box& b, const Box& frame) { return intersect(b, frame); }

/// Clamps to frame, collapsing to a degenerate box on the frame border instead of
/// returning empty. Used when ingesting detector output.
inline Box clamp_to(const Box& b, const Box& frame) {
  auto cx = [&](double v) { return std::clamp(v, frame.x1(), frame.x2()); };
  auto cy = [&](double v) { return std::clamp(v, frame.y1(), frame.y2()); };
  return Box(cx(b.x1()), cy(b.y1()), cx(b.x2()), cy(b.y2()));
}

inline bool contains(const Box& outer, const Box& inner) {
  return inner.x1() >= outer.x1() && inner.y1() >= outer.y1() && inner.x2() <= outer.x2() &&
         inner.y2() <= outer.y2();
}

inline Box apply_map(const Box& b, const AffineMap2D& m) {
  return Box(m.map_x(b.x1()), m.map_y(b.y1()), m.map_x(b.x2()), m.map_y(b.y2()));
}

inline AffineMap2D invert_map(const AffineMap2D& m) {
  return AffineMap2D(1.0 / m.scale_x(), 1.0 / m.scale_y(), -m.offset_x() / m.scale_x(),
                     -m.offset_y() / m.scale_y());
}

/// `second` after `first`.
inline AffineMap2D compose(const AffineMap2D& second, const AffineMap2D& first) {
  return AffineMap2D(second.scale_x() * first.scale_x(), second.scale_y() * first.scale_y(),
                     second.scale_x() * first.offset_x() + second.offset_x(),
                     second.scale_y() * first.offset_y() + second.offset_y());
}

}  // namespace focusdet
