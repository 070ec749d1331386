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

#include "focusdet/evalkit.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "oracles/eval_reference.hpp"
#include "support.hpp"

namespace focusdet {
namespace {

GroundTruthSet one_image(std::vector<GroundTruthObject> objs) { return GroundTruthSet{{"a", std::move(objs)}}; }
DetectionSet one_image_dets(std::vector<ScoredBox> dets) { return DetectionSet{{"a", std::move(dets)}}; }

std::vector<double> metrics(const EvalReport& r) {
  return {r.ap, r.ap50, r.ap75, r.ap_small, r.ap_medium, r.ap_large};
}

TEST(CocoEvalTest, PerfectDetectionsScoreExactlyHundred) {
  const auto gts = one_image({{Box(0, 0, 20, 20), 1}, {Box(100, 100, 160, 150), 2}, {Box(200, 0, 400, 300), 1}});
  DetectionSet dets;
  for (const auto& g : gts.at("a")) dets["a"].push_back({g.box, g.class_id, 0.9});
  const EvalReport r = coco_eval(dets, gts);
  for (const double m : metrics(r)) EXPECT_EQ(m, 100.0);
  EXPECT_TRUE(r.undefined.empty());
  EXPECT_EQ(r.per_class_ap50.at(1), 100.0);
  EXPECT_EQ(r.per_class_ap.at(2), 100.0);
}

TEST(CocoEvalTest, PartialOverlapCountsThresholdsPassed) {
  // IoU 0.625: matched at 0.50, 0.55, 0.60 only
  const auto gts = one_image({{Box(0, 0, 100, 100), 1}});
  const auto dets = one_image_dets({{Box(0, 0, 62.5, 100), 1, 0.8}});
  const EvalReport r = coco_eval(dets, gts);
  EXPECT_DOUBLE_EQ(r.ap50, 100.0);
  EXPECT_DOUBLE_EQ(r.ap75, 0.0);
  EXPECT_NEAR(r.ap, 30.0, 1e-12);
}

TEST(CocoEvalTest, FalsePositiveAboveTruePositiveHalvesPrecision) {
  const auto gts = one_image({{Box(0, 0, 50, 50), 1}});
  const auto dets = one_image_dets({{Box(300, 300, 350, 350), 1, 0.9}, {Box(0, 0, 50, 50), 1, 0.5}});
  EXPECT_DOUBLE_EQ(coco_eval(dets, gts).ap50, 50.0);
}

TEST(CocoEvalTest, IgnoreRegionsAbsorbDetections) {
  // a class-0 ignore region swallows any number of detections lying inside it
  const auto gts = one_image({{Box(0, 0, 20, 20), 1}, {Box(100, 100, 300, 300), 0, true}});
  const auto dets = one_image_dets({{Box(120, 120, 140, 140), 1, 0.95},
                                    {Box(150, 150, 170, 170), 1, 0.9},
                                    {Box(0, 0, 20, 20), 1, 0.5}});
  const EvalReport r = coco_eval(dets, gts);
  EXPECT_EQ(r.ap50, 100.0);
  EXPECT_EQ(r.per_class_ap50.size(), 1u);
}

TEST(CocoEvalTest, MaxDetsKeepsHighestScores) {
  const auto gts = one_image({{Box(0, 0, 50, 50), 1}});
  const auto dets = one_image_dets({{Box(0, 0, 50, 50), 1, 0.2}, {Box(300, 300, 350, 350), 1, 0.9}});
  EvalOptions opts;
  opts.max_dets = 1;
  EXPECT_EQ(coco_eval(dets, gts, opts).ap50, 0.0);
  opts.max_dets = 2;
  EXPECT_EQ(coco_eval(dets, gts, opts).ap50, 50.0);
  opts.max_dets = 0;
  EXPECT_THROW(coco_eval(dets, gts, opts), UsageError);
}

TEST(CocoEvalTest, AreaBucketsWithoutObjectsAreUndefined) {
  const auto gts = one_image({{Box(0, 0, 10, 10), 1}});
  const auto dets = one_image_dets({{Box(0, 0, 10, 10), 1, 0.9}});
  const EvalReport r = coco_eval(dets, gts);
  EXPECT_EQ(r.ap_small, 100.0);
  EXPECT_EQ(r.ap_medium, 0.0);
  EXPECT_EQ(r.ap_large, 0.0);
  EXPECT_EQ(r.undefined, (std::vector<std::string>{"ap_medium", "ap_large"}));
}

TEST(CocoEvalTest, EmptyDatasetIsFlagged) {
  const EvalReport r = coco_eval({}, GroundTruthSet{{"a", {}}});
  EXPECT_TRUE(r.empty);
  EXPECT_EQ(r.ap, 0.0);
  EXPECT_EQ(r.undefined.size(), 6u);
}

TEST(CocoEvalTest, DetectionsWithoutGroundTruthScoreZero) {
  EvalOptions opts;
  opts.categories = {1};
  const EvalReport r = coco_eval(one_image_dets({{Box(0, 0, 5, 5), 1, 0.4}}), one_image({}), opts);
  EXPECT_FALSE(r.empty);
  EXPECT_EQ(r.ap, 0.0);
  EXPECT_EQ(r.undefined.size(), 6u);
}

TEST(CocoEvalTest, RejectsUnknownImagesAndClasses) {
  const auto gts = one_image({{Box(0, 0, 10, 10), 1}});
  EXPECT_THROW(coco_eval(DetectionSet{{"b", {}}}, gts), DataError);
  EXPECT_THROW(coco_eval(one_image_dets({{Box(0, 0, 10, 10), 7, 0.5}}), gts), DataError);
}

TEST(CocoEvalProperty, MatchesReference) {
  Rng rng(99);
  for (int trial = 0; trial < 150; ++trial) {
    const auto m = testing_support::random_micro_dataset(rng);
    EvalOptions opts;
    opts.categories = m.classes;
    opts.max_dets = rng.bernoulli(0.3) ? 3 : 100;
    const EvalReport r = coco_eval(m.dets, m.gts, opts);
    const oracle::RefCocoResult ref = oracle::reference_coco(m.ref, m.classes, opts.max_dets);
    ASSERT_NEAR(r.ap, ref.ap, 1e-6) << "trial " << trial;
    ASSERT_NEAR(r.ap50, ref.ap50, 1e-6) << "trial " << trial;
    ASSERT_NEAR(r.ap75, ref.ap75, 1e-6) << "trial " << trial;
    ASSERT_NEAR(r.ap_small, ref.ap_small, 1e-6) << "trial " << trial;
    ASSERT_NEAR(r.ap_medium, ref.ap_medium, 1e-6) << "trial " << trial;
    ASSERT_NEAR(r.ap_large, ref.ap_large, 1e-6) << "trial " << trial;
  }
}

TEST(CocoEvalProperty, ThresholdMonotonicityAndBounds) {
  Rng rng(3);
  for (int trial = 0; trial < 150; ++trial) {
    const auto m = testing_support::random_micro_dataset(rng);
    EvalOptions opts;
    opts.categories = m.classes;
    const EvalReport r = coco_eval(m.dets, m.gts, opts);
    ASSERT_GE(r.ap50, r.ap75);
    ASSERT_GE(r.ap50, r.ap);
    for (const double v : metrics(r)) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 100.0);
    }
  }
}

// Well separated objects so that a copied detection can only compete for the
// object its original already took.
std::pair<GroundTruthSet, DetectionSet> separated_scene(Rng& rng) {
  GroundTruthSet gts;
  DetectionSet dets;
  for (int i = 0; i < 12; ++i) {
    const double x = 200.0 * (i % 4);
    const double y = 200.0 * (i / 4);
    const double side = rng.uniform(10, 120);
    const Box g(x, y, x + side, y + side);
    const int cls = static_cast<int>(rng.uniform_int(1, 2));
    gts["a"].push_back({g, cls});
    const double j = 0.2 * side;
    const double x1 = x + rng.uniform(0, j);
    const double y1 = y + rng.uniform(0, j);
    dets["a"].push_back({Box(x1, y1, x1 + side * rng.uniform(0.8, 1.1), y1 + side * rng.uniform(0.8, 1.1)), cls,
                         rng.uniform(0.05, 1.0)});
  }
  return {gts, dets};
}

TEST(CocoEvalProperty, LowerScoredDuplicateNeverHelps) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    auto [gts, dets] = separated_scene(rng);
    const EvalReport before = coco_eval(dets, gts);
    const double voc_before = voc_ap_at(dets, gts, 0.5);
    const ScoredBox src = dets["a"][static_cast<std::size_t>(rng.uniform_int(0, 11))];
    dets["a"].push_back({src.box, src.class_id, src.score * rng.uniform(0.0, 0.99)});
    const EvalReport after = coco_eval(dets, gts);
    const auto b = metrics(before);
    const auto a = metrics(after);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_LE(a[i], b[i] + 1e-12) << "metric " << i;
    ASSERT_LE(voc_ap_at(dets, gts, 0.5), voc_before + 1e-12);
  }
}

TEST(CocoEvalProperty, RemovingFalsePositiveNeverHurts) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    auto [gts, dets] = separated_scene(rng);
    dets["a"].push_back({Box(900, 900, 900 + rng.uniform(5, 80), 900 + rng.uniform(5, 80)),
                         static_cast<int>(rng.uniform_int(1, 2)), rng.uniform()});
    const EvalReport with = coco_eval(dets, gts);
    const double voc_with = voc_ap_at(dets, gts, 0.5);
    dets["a"].pop_back();
    const EvalReport without = coco_eval(dets, gts);
    const auto w = metrics(with);
    const auto wo = metrics(without);
    for (std::size_t i = 0; i < w.size(); ++i) ASSERT_GE(wo[i], w[i] - 1e-12) << "metric " << i;
    ASSERT_GE(voc_ap_at(dets, gts, 0.5), voc_with - 1e-12);
  }
}

TEST(VocEvalTest, PerfectIsExactlyHundred) {
  const auto gts = one_image({{Box(0, 0, 20, 20), 1}, {Box(50, 50, 90, 80), 2}});
  DetectionSet dets;
  for (const auto& g : gts.at("a")) dets["a"].push_back({g.box, g.class_id, 0.7});
  EXPECT_EQ(voc_eval(dets, gts).ap, 100.0);
  EXPECT_EQ(voc_eval(dets, gts, 0.7, true).ap, 100.0);
}

TEST(VocEvalTest, ThresholdIsInclusive) {
  const auto gts = one_image({{Box(0, 0, 100, 100), 1}});
  const auto dets = one_image_dets({{Box(0, 0, 100, 75), 1, 0.5}});  // IoU 0.75
  EXPECT_EQ(voc_eval(dets, gts, 0.75).ap, 100.0);
  EXPECT_EQ(voc_eval(dets, gts, 0.76).ap, 0.0);
}

TEST(VocEvalTest, MergedClassesForgiveLabelErrors) {
  const auto gts = one_image({{Box(0, 0, 20, 20), 1}, {Box(50, 50, 90, 80), 2}});
  const auto dets = one_image_dets({{Box(0, 0, 20, 20), 2, 0.9}, {Box(50, 50, 90, 80), 1, 0.8}});
  EXPECT_EQ(voc_eval(dets, gts, 0.7, false).ap, 0.0);
  EXPECT_EQ(voc_eval(dets, gts, 0.7, true).ap, 100.0);
}

TEST(VocEvalTest, DuplicatesAreFalsePositives) {
  const auto gts = one_image({{Box(0, 0, 20, 20), 1}, {Box(50, 50, 90, 80), 1}});
  const auto dets =
      one_image_dets({{Box(0, 0, 20, 20), 1, 0.9}, {Box(0, 0, 20, 20), 1, 0.8}, {Box(50, 50, 90, 80), 1, 0.7}});
  // precision envelope: 1 up to recall 0.5, then 2/3
  EXPECT_NEAR(voc_eval(dets, gts).ap, 100.0 * (0.5 + 0.5 * 2.0 / 3.0), 1e-12);
}

TEST(VocEvalProperty, MatchesReference) {
  Rng rng(44);
  for (int trial = 0; trial < 150; ++trial) {
    const auto m = testing_support::random_micro_dataset(rng);
    for (const double thr : {0.5, 0.7}) {
      const VocReport r = voc_eval(m.dets, m.gts, thr, false, m.classes);
      ASSERT_NEAR(r.ap, oracle::reference_voc(m.ref, m.classes, thr), 1e-6) << "trial " << trial;
    }
  }
}

}  // namespace
}  // namespace focusdet
