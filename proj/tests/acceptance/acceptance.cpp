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

// Acceptance checks, one PASS/FAIL line each. Usage: acceptance <path-to-focusdet-cli>

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <tuple>
#include <unistd.h>
#include <vector>

#include "focusdet/boxgeom.hpp"
#include "focusdet/evalkit.hpp"
#include "focusdet/focal.hpp"
#include "focusdet/fuse.hpp"
#include "focusdet/io/files.hpp"
#include "focusdet/mixture.hpp"
#include "focusdet/pipeline.hpp"
#include "focusdet/random.hpp"
#include "focusdet/scenes.hpp"
#include "oracles/eval_reference.hpp"
#include "oracles/nms_reference.hpp"
#include "oracles/pixels.hpp"
#include "support.hpp"

namespace {

namespace fs = std::filesystem;
using namespace focusdet;

struct Outcome {
  bool ok = false;
  std::string detail;
};

int failures = 0;

void check(const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = budget_seconds <= 0.0 || secs < budget_seconds;
  const bool pass = out.ok && in_time;
  if (!pass) ++failures;
  std::string timing = fmt::format("{:.3f}s", secs);
  if (budget_seconds > 0.0) timing += fmt::format(" of {:g}s", budget_seconds);
  if (!in_time) timing += ", over budget";
  fmt::print("{} {}: {} [{}]\n", pass ? "PASS" : "FAIL", name, out.detail, timing);
  std::fflush(stdout);
}

// ---- mixtures

Outcome region_count_formula() {
  const bool exact = num_focal_regions(4) == 4 && num_focal_regions(16) == 6 && num_focal_regions(256) == 10;
  const bool clamped = num_focal_regions(1) == 1 && num_focal_regions(2) == 2;
  return {exact && clamped, fmt::format("n=4,16,256 -> {},{},{}; n=1,2 -> {},{}", num_focal_regions(4),
                                        num_focal_regions(16), num_focal_regions(256), num_focal_regions(1),
                                        num_focal_regions(2))};
}

Outcome em_correctness() {
  int monotone_runs = 0;
  int recovered = 0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(2024, static_cast<std::uint64_t>(t)));
    const int k = 2 + t % 3;
    std::vector<std::vector<double>> truth;
    while (static_cast<int>(truth.size()) < k) {
      const std::vector<double> m{rng.uniform(0, 100), rng.uniform(0, 100)};
      const bool apart = std::all_of(truth.begin(), truth.end(), [&](const auto& o) {
        return std::hypot(o[0] - m[0], o[1] - m[1]) >= 25.0;
      });
      if (apart) truth.push_back(m);
    }
    std::vector<FeatureVector> x;
    for (const auto& m : truth)
      for (int i = 0; i < 50; ++i) x.push_back({rng.normal(m[0], 1.0), rng.normal(m[1], 1.0)});
    EmConfig cfg;
    cfg.rng_seed = static_cast<std::uint64_t>(t);
    const EmResult fit = fit_em(x, static_cast<std::size_t>(k), cfg);

    bool monotone = true;
    for (const EmRun& run : fit.runs)
      for (std::size_t i = 1; i < run.log_likelihood.size(); ++i)
        monotone = monotone && run.log_likelihood[i] >= run.log_likelihood[i - 1] - 1e-8;
    monotone_runs += monotone;

    // every true mean has a distinct fitted mean within 0.5
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    bool found = false;
    do {
      bool all = true;
      for (int j = 0; j < k && all; ++j) {
        const auto& f = fit.model.means[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
        all = std::hypot(f[0] - truth[j][0], f[1] - truth[j][1]) <= 0.5;
      }
      found = found || all;
    } while (!found && std::next_permutation(perm.begin(), perm.end()));
    recovered += found;
  }
  const bool ok = monotone_runs == trials && recovered >= 45;
  return {ok, fmt::format("{}/{} fits monotone, means recovered in {}/{}", monotone_runs, trials, recovered, trials)};
}

Outcome posterior_normalization() {
  Rng rng(77);
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const auto k = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const auto d = static_cast<std::size_t>(rng.uniform_int(1, 8));
    MixtureModel m;
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      m.weights.push_back(rng.uniform(0.01, 1.0));
      total += m.weights.back();
      std::vector<double> mean;
      std::vector<double> var;
      for (std::size_t i = 0; i < d; ++i) {
        mean.push_back(rng.uniform(-50, 50));
        var.push_back(rng.uniform(0.1, 30));
      }
      m.means.push_back(mean);
      m.variances.push_back(var);
    }
    for (double& w : m.weights) w /= total;
    std::vector<double> x;
    for (std::size_t i = 0; i < d; ++i) x.push_back(rng.uniform(-80, 80));
    const auto p = posterior(m, x).probabilities;
    worst = std::max(worst, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
  }
  return {worst <= 1e-9, fmt::format("10000 posteriors, max |sum - 1| = {:.3g}", worst)};
}

// ---- geometry and suppression

Outcome geometry_oracle() {
  Rng rng(11);
  int mismatches = 0;
  for (int t = 0; t < 10000; ++t) {
    const auto a = testing_support::random_int_box(rng, 64);
    const auto b = testing_support::random_int_box(rng, 64);
    const Box ba = testing_support::to_box(a);
    const Box bb = testing_support::to_box(b);
    bool ok = area(ba) == static_cast<double>(oracle::pixel_area(a));
    const auto expected = oracle::bounds(oracle::common(oracle::pixels(a), oracle::pixels(b)));
    const auto got = intersect(ba, bb);
    const auto clipped = clip(ba, bb);
    ok = ok && got.has_value() == expected.has_value() && clipped == got;
    if (ok && got) ok = *got == Box(expected->x1, expected->y1, expected->x2, expected->y2);
    const auto [inter, uni] = oracle::iou_fraction(a, b);
    ok = ok && intersection_area(ba, bb) == static_cast<double>(inter);
    ok = ok && iou(ba, bb) == (uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni));
    mismatches += !ok;
  }
  return {mismatches == 0, fmt::format("10000 box pairs on a 64x64 lattice, {} mismatches", mismatches)};
}

Outcome nms_oracle() {
  Rng rng(5150);
  int mismatches = 0;
  std::size_t largest = 0;
  for (int t = 0; t < 100; ++t) {
    const auto n = t == 0 ? std::size_t{500} : static_cast<std::size_t>(rng.uniform_int(1, 500));
    largest = std::max(largest, n);
    const auto boxes = testing_support::random_detections(rng, n, 3);
    const bool per_class = t % 2 == 0;
    const auto got = nms_indices(boxes, 0.5, per_class);
    const std::set<std::size_t> got_set(got.begin(), got.end());
    mismatches += got_set != oracle::reference_nms(testing_support::to_ref(boxes), 0.5, per_class);
  }
  return {mismatches == 0, fmt::format("100 instances up to n={}, {} differing survivor sets", largest, mismatches)};
}

Outcome ibs_scene() {
  // region A sees only the left part of a car that region B sees whole
  const RegionBoxes a{Box(0, 0, 100, 100), {ScoredBox{Box(55, 20, 100, 60), 1, 0.8}}};
  const RegionBoxes b{Box(50, 0, 200, 100), {ScoredBox{Box(55, 20, 150, 60), 1, 0.9}}};
  const double pair_iou = iou(a.detections[0].box, b.detections[0].box);
  const std::vector<ScoredBox> both{a.detections[0], b.detections[0]};
  const bool nms_keeps_both = nms(both, 0.5).size() == 2;
  const auto mask = ibs_keep_mask(std::vector<RegionBoxes>{a, b}, FuseConfig{});
  const bool ok = pair_iou < 0.5 && nms_keeps_both && !mask[0][0] && mask[1][0];
  return {ok, fmt::format("duplicate IoU {:.3f}, NMS keeps {}, IBS keeps truncated={} complete={}", pair_iou,
                          nms(both, 0.5).size(), static_cast<bool>(mask[0][0]), static_cast<bool>(mask[1][0]))};
}

// ---- closed-loop ablations

Outcome ibs_ablation() {
  const PipelineConfig cfg;
  const int corpora = 50;
  std::vector<double> with_ibs;
  std::vector<double> without_ibs;
  int better = 0;
  int worse = 0;
  for (int c = 0; c < corpora; ++c) {
    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(c);
    Dataset data = synthesize(cfg, seed);
    const auto regions = generate_regions(data, cfg, seed);
    const auto crops = refine_dataset(regions, data, cfg);
    OracleSpec spec = cfg.oracle;
    spec.rng_seed = stream_seed(seed, SeedStream::kOracle);
    const auto dets = oracle_dataset(crops, spec);
    const GroundTruthSet gts = to_ground_truth(data);
    const EvalOptions opts{cfg.max_dets, dataset_categories(data, spec.classes)};
    FuseConfig fuse = cfg.fuse;
    fuse.ibs_enabled = true;
    with_ibs.push_back(coco_eval(merge_dataset(dets, fuse), gts, opts).ap50);
    fuse.ibs_enabled = false;
    without_ibs.push_back(coco_eval(merge_dataset(dets, fuse), gts, opts).ap50);
    if (with_ibs.back() > without_ibs.back()) ++better;
    if (with_ibs.back() < without_ibs.back()) ++worse;
  }
  const double mean_with = std::accumulate(with_ibs.begin(), with_ibs.end(), 0.0) / corpora;
  const double mean_without = std::accumulate(without_ibs.begin(), without_ibs.end(), 0.0) / corpora;
  // one-sided sign test, ties dropped: P(X >= better) for X ~ Binomial(better + worse, 1/2)
  const int n = better + worse;
  double p = 0.0;
  for (int i = better; i <= n; ++i) p += std::exp(std::lgamma(n + 1) - std::lgamma(i + 1) - std::lgamma(n - i + 1) - n * std::log(2.0));
  if (n == 0) p = 1.0;
  const bool ok = mean_with > mean_without && p < 0.05;
  return {ok, fmt::format("AP50 {:.2f} with IBS vs {:.2f} without (gain {:+.2f}), {} better / {} worse, sign test p={:.2g}",
                          mean_with, mean_without, mean_with - mean_without, better, worse, p)};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Scenes whose clusters sit at different apparent scales (a zoom factor per
// cluster scales both box sizes and spread), as in imagery taken at varying
// altitude and angle.
SceneSpec multiscale_scenes() {
  SceneSpec spec = PipelineConfig::default_synth();
  spec.n_clusters = 5;
  spec.boxes_per_cluster_min = 8;
  spec.boxes_per_cluster_max = 16;
  spec.size_multiplier_min = 0.3;
  spec.size_multiplier_max = 3.0;
  spec.min_center_separation = 250.0;
  return spec;
}

Outcome scale_normalization() {
  const PipelineConfig cfg;
  std::vector<double> raw;
  std::vector<double> cropped;
  for (std::uint64_t s = 0; s < 20; ++s) {
    SceneSpec spec = multiscale_scenes();
    spec.rng_seed = derive_seed(606, s);
    spec.image_id = fmt::format("scale_{:02d}", s);
    const Scene scene = generate_scene(spec);
    const Dataset data{ImageRecord{scene.image_id, scene.image, scene.annotations, scene.labels}};
    const auto regions = generate_regions(data, cfg, s);
    const auto crops = refine_dataset(regions, data, cfg);
    const ScaleStats st = scale_stats(crops[0].crops, scene.annotations);
    if (!st.pooled.cv_raw || !st.pooled.cv_cropped) continue;
    raw.push_back(*st.pooled.cv_raw);
    cropped.push_back(*st.pooled.cv_cropped);
  }
  const double mr = median(raw);
  const double mc = median(cropped);
  return {raw.size() == 20 && mc < mr,
          fmt::format("median CV of box areas {:.3f} raw vs {:.3f} after crop-and-resize over {} scenes", mr, mc,
                      raw.size())};
}

// ---- evaluation

Outcome evaluator_oracle() {
  Rng rng(31337);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto m = testing_support::random_micro_dataset(rng);
    EvalOptions opts;
    opts.categories = m.classes;
    opts.max_dets = t % 4 == 0 ? 3 : 100;
    const EvalReport r = coco_eval(m.dets, m.gts, opts);
    const oracle::RefCocoResult ref = oracle::reference_coco(m.ref, m.classes, opts.max_dets);
    for (const auto& [got, want] : {std::pair{r.ap, ref.ap}, {r.ap50, ref.ap50}, {r.ap75, ref.ap75},
                                    {r.ap_small, ref.ap_small}, {r.ap_medium, ref.ap_medium}, {r.ap_large, ref.ap_large}})
      worst = std::max(worst, std::abs(got - want));
    const double voc = voc_eval(m.dets, m.gts, 0.7, false, m.classes).ap;
    worst = std::max(worst, std::abs(voc - oracle::reference_voc(m.ref, m.classes, 0.7)));
  }
  return {worst <= 1e-6, fmt::format("100 micro-datasets, max deviation {:.3g} points", worst)};
}

bool regions_disjoint(const std::vector<FocalRegion>& regions) {
  for (std::size_t i = 0; i < regions.size(); ++i)
    for (std::size_t j = i + 1; j < regions.size(); ++j)
      if (intersection_area(regions[i].rect, regions[j].rect) > 0.0) return false;
  return true;
}

Outcome perfect_pipeline() {
  PipelineConfig cfg;
  cfg.oracle = OracleSpec::perfect();
  // one object per cluster, so every object gets a region of its own
  cfg.synth.n_clusters = 4;
  cfg.synth.boxes_per_cluster_min = 1;
  cfg.synth.boxes_per_cluster_max = 1;
  cfg.synth.min_center_separation = 350.0;
  cfg.synth_images = 40;
  const std::uint64_t seed = 8;
  const Dataset all = synthesize(cfg, seed);
  const auto all_regions = generate_regions(all, cfg, seed);
  Dataset data;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (regions_disjoint(all_regions[i].regions)) data.push_back(all[i]);
  if (data.size() != all.size()) {
    return {false, fmt::format("only {} of {} images have disjoint regions", data.size(), all.size())};
  }
  const PipelineRun run = run_pipeline(data, cfg, seed);
  std::size_t objects = 0;
  for (const auto& im : data) objects += im.annotations.size();
  const bool ok = run.report.ap == 100.0 && run.report.ap50 == 100.0 && run.voc.ap == 100.0;
  return {ok, fmt::format("{} images, {} objects: AP {} AP50 {} VOC {}", data.size(), objects, run.report.ap,
                          run.report.ap50, run.voc.ap)};
}

// ---- command line

Outcome cli_determinism(const std::string& cli) {
  const fs::path root = fs::temp_directory_path() / fmt::format("focusdet_accept_{}", ::getpid());
  fs::remove_all(root);
  int identical = 0;
  int compared = 0;
  std::string problem;
  for (const auto& [seed, jobs_a, jobs_b] : {std::tuple{7, 1, 4}, std::tuple{123456789, 2, 1}}) {
    const fs::path a = root / fmt::format("a{}", seed);
    const fs::path b = root / fmt::format("b{}", seed);
    for (const auto& [dir, jobs] : {std::pair{a, jobs_a}, std::pair{b, jobs_b}}) {
      const std::string cmd =
          fmt::format("\"{}\" pipeline --seed {} --jobs {} --out-dir \"{}\" > /dev/null", cli, seed, jobs, dir.string());
      if (std::system(cmd.c_str()) != 0) problem = "pipeline exited non-zero";
    }
    for (const auto& entry : fs::directory_iterator(a)) {
      ++compared;
      const fs::path other = b / entry.path().filename();
      if (fs::exists(other) && io::read_file(entry.path()) == io::read_file(other)) ++identical;
    }
    if (std::distance(fs::directory_iterator(b), fs::directory_iterator{}) !=
        std::distance(fs::directory_iterator(a), fs::directory_iterator{}))
      problem = "output file sets differ";
  }
  fs::remove_all(root);
  const bool ok = problem.empty() && compared > 0 && identical == compared;
  return {ok, fmt::format("{}/{} output files byte-identical across reruns{}", identical, compared,
                          problem.empty() ? "" : ", " + problem)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    fmt::print(stderr, "usage: {} <path-to-focusdet-cli>\n", argv[0]);
    return 2;
  }
  check("region count formula", 1.0, region_count_formula);
  check("EM monotone and recovers means", 5.0, em_correctness);
  check("posterior normalization", 1.0, posterior_normalization);
  check("geometry matches pixel enumeration", 5.0, geometry_oracle);
  check("NMS matches exhaustive reference", 10.0, nms_oracle);
  check("IBS removes truncated duplicate NMS keeps", 1.0, ibs_scene);
  check("IBS raises AP50 over NMS alone", 60.0, ibs_ablation);
  check("crop-and-resize narrows box area spread", 30.0, scale_normalization);
  check("evaluators match brute-force reference", 30.0, evaluator_oracle);
  check("perfect detections score AP 100 end to end", 5.0, perfect_pipeline);
  const std::string cli = argv[1];
  check("CLI pipeline reruns are byte-identical", 0.0, [&] { return cli_determinism(cli); });
  fmt::print("{} of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
