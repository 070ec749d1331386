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

// Detection scoring: COCO-style AP family and PASCAL-VOC all-point AP.
//
// The COCO path follows the reference protocol: per image and category the
// detections are sorted by score and cut to max_dets, matched greedily at each
// IoU threshold, and precision is sampled at 101 recall points after taking
// its monotone envelope. Ignore-flagged ground truth behaves like COCO crowd
// annotations: it absorbs any number of matches (with intersection over
// detection area as the overlap) and never counts as a miss.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "focusdet/boxgeom.hpp"
#include "focusdet/error.hpp"

namespace focusdet {

struct GroundTruthObject {
  Box box;
  int class_id = 0;
  bool ignore = false;
};

/// Per image id.
using GroundTruthSet = std::map<std::string, std::vector<GroundTruthObject>>;
using DetectionSet = std::map<std::string, std::vector<ScoredBox>>;

struct EvalOptions {
  std::size_t max_dets = 500;
  // Categories to score. Empty means every class carried by a non-ignored
  // ground-truth object. Ignore-flagged objects whose class is not scored act
  // as ignore regions for every category.
  std::vector<int> categories;
};

inline constexpr int kRecallPoints = 101;
inline constexpr int kIouThresholds = 10;

/// 0.50, 0.55, ..., 0.95
inline double coco_iou_threshold(int t) { return 0.5 + 0.05 * t; }

enum class AreaRange { kAll = 0, kSmall = 1, kMedium = 2, kLarge = 3 };
inline constexpr int kAreaRanges = 4;

inline bool in_area_range(double a, AreaRange r) {
  constexpr double kSmall = 32.0 * 32.0;
  constexpr double kMedium = 96.0 * 96.0;
  constexpr double kMax = 1e10;
  switch (r) {
    case AreaRange::kAll: return a >= 0.0 && a <= kMax;
    case AreaRange::kSmall: return a >= 0.0 && a <= kSmall;
    case AreaRange::kMedium: return a >= kSmall && a <= kMedium;
    case AreaRange::kLarge: return a >= kMedium && a <= kMax;
  }
  return false;
}

struct PrecisionCurve {
  int class_id = 0;
  double iou_threshold = 0.5;
  std::array<double, kRecallPoints> precision{};  // at recall 0.00, 0.01, ..., 1.00
};

struct EvalReport {
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  double ap_small = 0.0;
  double ap_medium = 0.0;
  double ap_large = 0.0;
  std::map<int, double> per_class_ap50;
  std::map<int, double> per_class_ap;
  bool empty = false;                     // no ground truth and no detections at all
  std::vector<std::string> undefined;     // metrics with no scorable ground truth (reported as 0)
  std::vector<PrecisionCurve> curves;     // area "all", every category and threshold
};

namespace detail {

struct CategoryIndex {
  std::vector<int> categories;
  std::set<int> scored;
};

inline CategoryIndex resolve_categories(const DetectionSet& dets, const GroundTruthSet& gts,
                                        const std::vector<int>& requested) {
  CategoryIndex idx;
  if (!requested.empty()) {
    idx.scored.insert(requested.begin(), requested.end());
  } else {
    for (const auto& [id, objs] : gts)
      for (const auto& g : objs)
        if (!g.ignore) idx.scored.insert(g.class_id);
  }
  idx.categories.assign(idx.scored.begin(), idx.scored.end());
  for (const auto& [id, ds] : dets) {
    if (!gts.contains(id)) throw DataError("evaluation: detections for unknown image '" + id + "'");
    for (const auto& d : ds) {
      validate(d);
      if (!idx.scored.contains(d.class_id)) {
        throw DataError("evaluation: unknown class id " + std::to_string(d.class_id) + " in image '" + id + "'");
      }
    }
  }
  return idx;
}

/// Matching outcome of one (image, category, area range).
struct ImageMatches {
  std::vector<double> scores;
  // [threshold][detection]
  std::array<std::vector<bool>, kIouThresholds> matched;
  std::array<std::vector<bool>, kIouThresholds> ignored;
  std::size_t positives = 0;
};

inline ImageMatches match_image(std::vector<GroundTruthObject> gt, std::vector<ScoredBox> dt, AreaRange range,
                                std::size_t max_dets) {
  std::vector<bool> g_ignore;
  std::vector<bool> g_crowd;
  std::stable_sort(gt.begin(), gt.end(), [&](const GroundTruthObject& a, const GroundTruthObject& b) {
    const bool ia = a.ignore || !in_area_range(area(a.box), range);
    const bool ib = b.ignore || !in_area_range(area(b.box), range);
    return !ia && ib;
  });
  ImageMatches out;
  for (const auto& g : gt) {
    const bool ig = g.ignore || !in_area_range(area(g.box), range);
    g_ignore.push_back(ig);
    g_crowd.push_back(g.ignore);
    if (!ig) ++out.positives;
  }
  std::stable_sort(dt.begin(), dt.end(), [](const ScoredBox& a, const ScoredBox& b) { return a.score > b.score; });
  if (dt.size() > max_dets) dt.resize(max_dets);

  const std::size_t nd = dt.size();
  const std::size_t ng = gt.size();
  std::vector<double> overlaps(nd * ng, 0.0);
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t g = 0; g < ng; ++g) {
      if (g_crowd[g]) {
        const double ad = area(dt[d].box);
        overlaps[d * ng + g] = ad > 0.0 ? intersection_area(dt[d].box, gt[g].box) / ad : 0.0;
      } else {
        overlaps[d * ng + g] = iou(dt[d].box, gt[g].box);
      }
    }
  }

  for (const auto& d : dt) out.scores.push_back(d.score);
  for (int t = 0; t < kIouThresholds; ++t) {
    const double thr = coco_iou_threshold(t);
    std::vector<bool> gt_taken(ng, false);
    auto& matched = out.matched[t];
    auto& ignored = out.ignored[t];
    matched.assign(nd, false);
    ignored.assign(nd, false);
    for (std::size_t d = 0; d < nd; ++d) {
      double best = std::min(thr, 1.0 - 1e-10);
      std::ptrdiff_t m = -1;
      for (std::size_t g = 0; g < ng; ++g) {
        if (gt_taken[g] && !g_crowd[g]) continue;
        // once matched to a regular object, stop before ignored ones
        if (m > -1 && !g_ignore[static_cast<std::size_t>(m)] && g_ignore[g]) break;
        if (overlaps[d * ng + g] < best) continue;
        best = overlaps[d * ng + g];
        m = static_cast<std::ptrdiff_t>(g);
      }
      if (m == -1) {
        ignored[d] = !in_area_range(area(dt[d].box), range);
        continue;
      }
      matched[d] = true;
      ignored[d] = g_ignore[static_cast<std::size_t>(m)];
      gt_taken[static_cast<std::size_t>(m)] = true;
    }
  }
  return out;
}

/// Interpolated precision at the 101 recall points from the concatenated
/// per-image records; nullopt when the category has no positives.
inline std::optional<std::array<double, kRecallPoints>> precision_at_recall(std::span<const ImageMatches> images,
                                                                          int t) {
  std::size_t positives = 0;
  std::vector<double> scores;
  std::vector<int> kind;  // 1 tp, 0 fp, -1 ignored
  for (const auto& im : images) {
    positives += im.positives;
    for (std::size_t d = 0; d < im.scores.size(); ++d) {
      scores.push_back(im.scores[d]);
      kind.push_back(im.ignored[t][d] ? -1 : (im.matched[t][d] ? 1 : 0));
    }
  }
  if (positives == 0) return std::nullopt;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<double> recall;
  std::vector<double> precision;
  double tp = 0.0;
  double fp = 0.0;
  for (const std::size_t i : order) {
    if (kind[i] == 1) tp += 1.0;
    if (kind[i] == 0) fp += 1.0;
    recall.push_back(tp / static_cast<double>(positives));
    precision.push_back(tp + fp > 0.0 ? tp / (tp + fp) : 0.0);
  }
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  std::array<double, kRecallPoints> q{};
  for (int r = 0; r < kRecallPoints; ++r) {
    const double target = r / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), target);
    q[r] = it == recall.end() ? 0.0 : precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return q;
}

inline double mean_of(std::span<const double> q) {
  double s = 0.0;
  for (double v : q) s += v;
  return s / static_cast<double>(q.size());
}

}  // namespace detail

inline EvalReport coco_eval(const DetectionSet& dets, const GroundTruthSet& gts, const EvalOptions& opts = {}) {
  if (opts.max_dets < 1) throw UsageError("coco_eval: max_dets must be >= 1");
  const auto cats = detail::resolve_categories(dets, gts, opts.categories);
  EvalReport report;

  bool any_gt = false;
  bool any_dt = false;
  for (const auto& [id, objs] : gts) any_gt = any_gt || !objs.empty();
  for (const auto& [id, ds] : dets) any_dt = any_dt || !ds.empty();
  if (!any_gt && !any_dt) {
    report.empty = true;
    report.undefined = {"ap", "ap50", "ap75", "ap_small", "ap_medium", "ap_large"};
    return report;
  }

  // [area][threshold] -> per-category AP values (valid categories only)
  std::array<std::array<std::vector<double>, kIouThresholds>, kAreaRanges> per_cell;

  for (const int c : cats.categories) {
    for (int a = 0; a < kAreaRanges; ++a) {
      std::vector<detail::ImageMatches> images;
      for (const auto& [id, objs] : gts) {
        std::vector<GroundTruthObject> g;
        for (const auto& o : objs) {
          if (o.class_id == c || (o.ignore && !cats.scored.contains(o.class_id))) g.push_back(o);
        }
        std::vector<ScoredBox> d;
        if (const auto it = dets.find(id); it != dets.end()) {
          for (const auto& x : it->second)
            if (x.class_id == c) d.push_back(x);
        }
        if (g.empty() && d.empty()) continue;
        images.push_back(detail::match_image(std::move(g), std::move(d), static_cast<AreaRange>(a), opts.max_dets));
      }
      for (int t = 0; t < kIouThresholds; ++t) {
        const auto q = detail::precision_at_recall(images, t);
        if (!q) continue;
        const double ap = detail::mean_of(*q);
        per_cell[a][t].push_back(ap);
        if (a == 0) {
          report.curves.push_back(PrecisionCurve{c, coco_iou_threshold(t), *q});
          if (t == 0) report.per_class_ap50[c] = 100.0 * ap;
          report.per_class_ap[c] += 100.0 * ap / kIouThresholds;
        }
      }
    }
  }

  auto summarize = [&](int a, std::optional<int> t, const char* name) {
    double sum = 0.0;
    std::size_t n = 0;
    for (int i = 0; i < kIouThresholds; ++i) {
      if (t && *t != i) continue;
      for (double v : per_cell[a][i]) {
        sum += v;
        ++n;
      }
    }
    if (n == 0) {
      report.undefined.emplace_back(name);
      return 0.0;
    }
    return 100.0 * sum / static_cast<double>(n);
  };
  report.ap = summarize(0, std::nullopt, "ap");
  report.ap50 = summarize(0, 0, "ap50");
  report.ap75 = summarize(0, 5, "ap75");
  report.ap_small = summarize(1, std::nullopt, "ap_small");
  report.ap_medium = summarize(2, std::nullopt, "ap_medium");
  report.ap_large = summarize(3, std::nullopt, "ap_large");
  return report;
}

struct VocReport {
  double ap = 0.0;                 // mean over classes with positives, percent
  std::map<int, double> per_class; // percent
};

/// PASCAL-VOC all-point interpolated AP at one IoU threshold. A detection is a
/// true positive when its best-overlapping object of the same class has
/// IoU >= threshold and is not yet taken; hits on ignored objects are
/// discarded. With merge_classes every class is scored as one.
inline VocReport voc_eval(const DetectionSet& dets, const GroundTruthSet& gts, double iou_threshold = 0.7,
                          bool merge_classes = false, const std::vector<int>& categories = {}) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw UsageError("voc_eval: threshold must lie in (0, 1]");
  DetectionSet d2 = dets;
  GroundTruthSet g2 = gts;
  std::vector<int> requested = categories;
  if (merge_classes) {
    const auto cats = detail::resolve_categories(dets, gts, categories);
    for (auto& [id, ds] : d2)
      for (auto& d : ds) d.class_id = 0;
    for (auto& [id, objs] : g2) {
      for (auto& g : objs) {
        const bool scored = cats.scored.contains(g.class_id);
        if (scored) {
          g.class_id = 0;
        } else if (g.ignore) {
          g.class_id = -1;  // ignore region, applies to every class
        }
      }
    }
    requested = {0};
  }
  const auto cats = detail::resolve_categories(d2, g2, requested);

  VocReport report;
  double sum = 0.0;
  std::size_t counted = 0;
  for (const int c : cats.categories) {
    struct Hit {
      std::string image;
      ScoredBox det;
    };
    std::vector<Hit> all;
    for (const auto& [id, ds] : d2)
      for (const auto& d : ds)
        if (d.class_id == c) all.push_back({id, d});
    std::stable_sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) { return a.det.score > b.det.score; });

    std::size_t positives = 0;
    std::map<std::string, std::vector<const GroundTruthObject*>> pool;
    for (const auto& [id, objs] : g2) {
      for (const auto& g : objs) {
        if (g.class_id == c || (g.ignore && !cats.scored.contains(g.class_id))) {
          pool[id].push_back(&g);
          if (!g.ignore) ++positives;
        }
      }
    }
    if (positives == 0) continue;
    std::map<std::string, std::vector<bool>> taken;
    for (const auto& [id, objs] : pool) taken[id].assign(objs.size(), false);

    std::vector<double> tp_counts;
    std::vector<double> precision;
    double tp = 0.0;
    double fp = 0.0;
    for (const Hit& h : all) {
      double best = -1.0;
      std::ptrdiff_t m = -1;
      if (const auto it = pool.find(h.image); it != pool.end()) {
        for (std::size_t g = 0; g < it->second.size(); ++g) {
          const double o = iou(h.det.box, it->second[g]->box);
          if (o > best) {
            best = o;
            m = static_cast<std::ptrdiff_t>(g);
          }
        }
      }
      if (m >= 0 && best >= iou_threshold) {
        const auto gi = static_cast<std::size_t>(m);
        if (pool[h.image][gi]->ignore) continue;
        if (!taken[h.image][gi]) {
          taken[h.image][gi] = true;
          tp += 1.0;
        } else {
          fp += 1.0;
        }
      } else {
        fp += 1.0;
      }
      tp_counts.push_back(tp);
      precision.push_back(tp / (tp + fp));
    }

    // area under the monotone precision envelope; recall steps are kept as
    // integer true-positive counts so a perfect ranking sums to exactly 1
    std::vector<double> steps{0.0};
    std::vector<double> mpre{0.0};
    for (std::size_t i = 0; i < tp_counts.size(); ++i) {
      steps.push_back(tp_counts[i]);
      mpre.push_back(precision[i]);
    }
    for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
    double weighted = 0.0;
    for (std::size_t i = 1; i < steps.size(); ++i) weighted += (steps[i] - steps[i - 1]) * mpre[i];
    const double ap = weighted / static_cast<double>(positives);
    report.per_class[c] = 100.0 * ap;
    sum += 100.0 * ap;
    ++counted;
  }
  report.ap = counted ? sum / static_cast<double>(counted) : 0.0;
  return report;
}

inline double voc_ap_at(const DetectionSet& dets, const GroundTruthSet& gts, double iou_threshold = 0.7,
                        bool merge_classes = false) {
  return voc_eval(dets, gts, iou_threshold, merge_classes).ap;
}

}  // namespace focusdet
