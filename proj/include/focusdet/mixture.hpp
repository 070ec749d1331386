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

// Box clustering with a diagonal-covariance Gaussian mixture.
//
// Each box is described by the offsets from a fixed grid of image points to
// the box center. A mixture is fit per image by expectation maximization and
// boxes are assigned to the component with the highest posterior.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "focusdet/boxgeom.hpp"
#include "focusdet/error.hpp"
#include "focusdet/random.hpp"

namespace focusdet {

using FeatureVector = std::vector<double>;

/// rows x cols points evenly sampled over the image; point (r, c) sits at
/// ((c + 0.5) / cols * width, (r + 0.5) / rows * height).
struct FeatureGrid {
  int rows = 4;
  int cols = 4;
  double image_width = 0.0;
  double image_height = 0.0;

  void validate() const {
    if (rows < 1 || cols < 1) throw UsageError("FeatureGrid: rows and cols must be >= 1");
    if (!(image_width > 0.0) || !(image_height > 0.0)) {
      throw UsageError("FeatureGrid: image dimensions must be positive");
    }
  }

  std::size_t points() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  std::size_t dimension() const { return 2 * points(); }

  double point_x(int c) const { return (c + 0.5) / cols * image_width; }
  double point_y(int r) const { return (r + 0.5) / rows * image_height; }
};

struct MixtureModel {
  std::vector<double> weights;
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> variances;  // diagonal of each covariance

  std::size_t components() const { return weights.size(); }
  std::size_t dimension() const { return means.empty() ? 0 : means.front().size(); }

  /// Shape checks plus the normalized-weights and positive-variance invariants.
  void validate() const {
    const std::size_t k = weights.size();
    if (k == 0) throw DataError("MixtureModel: no components");
    if (means.size() != k || variances.size() != k) throw DataError("MixtureModel: component count mismatch");
    const std::size_t m = dimension();
    if (m == 0) throw DataError("MixtureModel: zero dimension");
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (means[j].size() != m || variances[j].size() != m) throw DataError("MixtureModel: dimension mismatch");
      if (!(weights[j] >= 0.0)) throw DataError("MixtureModel: negative weight");
      total += weights[j];
      for (std::size_t d = 0; d < m; ++d) {
        if (!std::isfinite(means[j][d])) throw DataError("MixtureModel: non-finite mean");
        if (!(variances[j][d] > 0.0) || !std::isfinite(variances[j][d])) {
          throw DataError("MixtureModel: variances must be positive and finite");
        }
      }
    }
    if (std::abs(total - 1.0) > 1e-9) throw DataError("MixtureModel: weights must sum to 1");
  }
};

struct EmConfig {
  int max_iterations = 100;
  double tolerance = 1e-4;  // absolute change in total log-likelihood
  double covariance_floor = 1.0;
  std::uint64_t rng_seed = 0;
  int restarts = 3;

  void validate() const {
    if (max_iterations < 1) throw UsageError("EmConfig: max_iterations must be >= 1");
    if (!(tolerance > 0.0)) throw UsageError("EmConfig: tolerance must be > 0");
    if (!(covariance_floor > 0.0)) throw UsageError("EmConfig: covariance_floor must be > 0");
    if (restarts < 1) throw UsageError("EmConfig: restarts must be >= 1");
  }
};

/// Trace of a single EM run. log_likelihood[0] is the value at initialization,
/// entry t the value after t parameter updates.
struct EmRun {
  std::vector<double> log_likelihood;
  int iterations = 0;
  bool converged = false;
};

struct EmResult {
  MixtureModel model;
  double log_likelihood = 0.0;
  std::vector<EmRun> runs;
  std::size_t best_run = 0;
};

struct Posterior {
  std::vector<double> probabilities;
  // set when every component density underflowed and the point was assigned
  // to the nearest mean instead
  bool nearest_mean_fallback = false;
};

/// Number of clusters for an image with `n_gt` boxes: floor(log2 n) + 2,
/// never more than n.
inline std::size_t num_focal_regions(std::size_t n_gt) {
  if (n_gt == 0) throw UsageError("num_focal_regions: no ground truth");
  const std::size_t floor_log2 = static_cast<std::size_t>(std::bit_width(n_gt)) - 1;
  return std::min(floor_log2 + 2, n_gt);
}

inline FeatureVector featurize(const Box& box, const FeatureGrid& grid) {
  FeatureVector v;
  v.reserve(grid.dimension());
  const double cx = box.center_x();
  const double cy = box.center_y();
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      v.push_back(cx - grid.point_x(c));
      v.push_back(cy - grid.point_y(r));
    }
  }
  return v;
}

inline std::vector<FeatureVector> featurize(std::span<const Box> boxes, const FeatureGrid& grid) {
  grid.validate();
  std::vector<FeatureVector> out;
  out.reserve(boxes.size());
  for (const Box& b : boxes) out.push_back(featurize(b, grid));
  return out;
}

namespace detail {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(std::span<const double> values) {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double v : values) s += std::exp(v - hi);
  return hi + std::log(s);
}

/// log(phi_j) + log N(x | mu_j, diag(var_j)) for every component.
inline void component_log_terms(const MixtureModel& model, std::span<const double> x, std::span<double> out) {
  const std::size_t m = x.size();
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t j = 0; j < model.components(); ++j) {
    const auto& mu = model.means[j];
    const auto& var = model.variances[j];
    double quad = 0.0;
    double log_det = 0.0;
    for (std::size_t d = 0; d < m; ++d) {
      const double diff = x[d] - mu[d];
      quad += diff * diff / var[d];
      log_det += std::log(var[d]);
    }
    const double log_weight = model.weights[j] > 0.0 ? std::log(model.weights[j]) : kNegInf;
    out[j] = log_weight - 0.5 * (static_cast<double>(m) * log_two_pi + log_det + quad);
  }
}

inline void check_features(std::span<const FeatureVector> features) {
  if (features.empty()) throw UsageError("fit_em: no samples");
  const std::size_t m = features.front().size();
  if (m == 0) throw UsageError("fit_em: zero-length feature vectors");
  for (const auto& f : features) {
    if (f.size() != m) throw UsageError("fit_em: feature vectors differ in length");
    for (double v : f) {
      if (!std::isfinite(v)) throw DataError("fit_em: non-finite feature value");
    }
  }
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

/// k-means++ seeding of means; uniform weights; every component starts with
/// the global per-dimension variance.
inline MixtureModel initialize(std::span<const FeatureVector> x, std::size_t k, double floor, Rng& rng) {
  const std::size_t n = x.size();
  const std::size_t m = x.front().size();

  std::vector<double> mean(m, 0.0);
  for (const auto& f : x)
    for (std::size_t d = 0; d < m; ++d) mean[d] += f[d];
  for (double& v : mean) v /= static_cast<double>(n);
  std::vector<double> var(m, 0.0);
  for (const auto& f : x)
    for (std::size_t d = 0; d < m; ++d) var[d] += (f[d] - mean[d]) * (f[d] - mean[d]);
  for (double& v : var) v = std::max(v / static_cast<double>(n), floor);

  MixtureModel model;
  model.weights.assign(k, 1.0 / static_cast<double>(k));
  model.variances.assign(k, var);

  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
  for (std::size_t j = 0; j < k; ++j) {
    if (j > 0) {
      double total = 0.0;
      for (double d2 : nearest) total += d2;
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += nearest[i];
          if (acc > target && nearest[i] > 0.0) {
            pick = i;
            break;
          }
        }
      } else {
        pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
      }
    }
    model.means.push_back(x[pick]);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], squared_distance(x[i], x[pick]));
  }
  return model;
}

/// Fills responsibilities (n x k, row-major) and returns the total log-likelihood.
inline double expectation(const MixtureModel& model, std::span<const FeatureVector> x, std::vector<double>& resp) {
  const std::size_t k = model.components();
  resp.resize(x.size() * k);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::span<double> row(resp.data() + i * k, k);
    component_log_terms(model, x[i], row);
    const double lse = log_sum_exp(row);
    total += lse;
    for (double& r : row) r = std::isfinite(lse) ? std::exp(r - lse) : 1.0 / static_cast<double>(k);
  }
  return total;
}

/// Closed-form update. Clamping each variance at the floor is the exact
/// maximizer under the constraint var >= floor, so the likelihood still never
/// decreases. Components with no responsibility keep their parameters and get
/// weight zero.
inline void maximization(MixtureModel& model, std::span<const FeatureVector> x, const std::vector<double>& resp,
                         double floor) {
  const std::size_t k = model.components();
  const std::size_t m = model.dimension();
  const std::size_t n = x.size();
  double weight_total = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    double nk = 0.0;
    for (std::size_t i = 0; i < n; ++i) nk += resp[i * k + j];
    model.weights[j] = nk / static_cast<double>(n);
    weight_total += model.weights[j];
    if (!(nk > 0.0)) continue;

    std::vector<double> mu(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = resp[i * k + j];
      if (r == 0.0) continue;
      for (std::size_t d = 0; d < m; ++d) mu[d] += r * x[i][d];
    }
    for (double& v : mu) v /= nk;

    std::vector<double> var(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = resp[i * k + j];
      if (r == 0.0) continue;
      for (std::size_t d = 0; d < m; ++d) {
        const double diff = x[i][d] - mu[d];
        var[d] += r * diff * diff;
      }
    }
    for (double& v : var) v = std::max(v / nk, floor);

    model.means[j] = std::move(mu);
    model.variances[j] = std::move(var);
  }
  for (double& w : model.weights) w /= weight_total;
}

}  // namespace detail

/// Total log-likelihood of `features` under `model`.
inline double log_likelihood(const MixtureModel& model, std::span<const FeatureVector> features) {
  std::vector<double> terms(model.components());
  double total = 0.0;
  for (const auto& f : features) {
    detail::component_log_terms(model, f, terms);
    total += detail::log_sum_exp(terms);
  }
  return total;
}

/// Fits a k-component diagonal mixture by EM. Runs cfg.restarts independent
/// initializations from one seeded stream and keeps the run with the highest
/// final log-likelihood (earliest run on ties).
inline EmResult fit_em(std::span<const FeatureVector> features, std::size_t k, const EmConfig& cfg) {
  cfg.validate();
  if (k < 1) throw UsageError("fit_em: k must be >= 1");
  detail::check_features(features);
  if (k > features.size()) throw UsageError("fit_em: more components than samples");

  Rng rng(cfg.rng_seed);
  EmResult result;
  std::vector<double> resp;
  double best = -std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < cfg.restarts; ++restart) {
    Rng run_rng(rng.next_u64());
    MixtureModel model = detail::initialize(features, k, cfg.covariance_floor, run_rng);
    EmRun run;
    double previous = detail::expectation(model, features, resp);
    run.log_likelihood.push_back(previous);
    for (int it = 0; it < cfg.max_iterations; ++it) {
      detail::maximization(model, features, resp, cfg.covariance_floor);
      const double current = detail::expectation(model, features, resp);
      run.log_likelihood.push_back(current);
      run.iterations = it + 1;
      if (std::abs(current - previous) < cfg.tolerance) {
        run.converged = true;
        break;
      }
      previous = current;
    }
    const double final_ll = run.log_likelihood.back();
    if (restart == 0 || final_ll > best) {
      best = final_ll;
      result.model = std::move(model);
      result.best_run = static_cast<std::size_t>(restart);
    }
    result.runs.push_back(std::move(run));
  }
  result.log_likelihood = best;
  return result;
}

/// Component membership probabilities for one point. Weights need not be
/// normalized; only their ratios matter.
inline Posterior posterior(const MixtureModel& model, std::span<const double> x) {
  if (x.size() != model.dimension()) throw UsageError("posterior: dimension mismatch");
  const std::size_t k = model.components();
  Posterior out;
  out.probabilities.assign(k, 0.0);
  std::vector<double> terms(k);
  detail::component_log_terms(model, x, terms);
  const double hi = *std::max_element(terms.begin(), terms.end());
  if (std::isfinite(hi)) {
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      out.probabilities[j] = std::exp(terms[j] - hi);
      total += out.probabilities[j];
    }
    if (std::isfinite(total)) {
      for (double& p : out.probabilities) p /= total;
      return out;
    }
    out.probabilities.assign(k, 0.0);
  }
  // distances are compared after a common rescale so that far-away points do
  // not overflow every candidate to infinity
  double scale = 0.0;
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < x.size(); ++i) scale = std::max(scale, std::abs(x[i] - model.means[j][i]));
  if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
  std::size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = (x[i] - model.means[j][i]) / scale;
      d2 += d * d;
    }
    if (d2 < best) {
      best = d2;
      nearest = j;
    }
  }
  out.probabilities[nearest] = 1.0;
  out.nearest_mean_fallback = true;
  return out;
}

struct ClusterAssignment {
  std::vector<int> labels;
  std::size_t fallback_count = 0;
};

/// Argmax of the posterior per sample; ties go to the lowest component index.
inline ClusterAssignment assign_clusters(const MixtureModel& model, std::span<const FeatureVector> features) {
  ClusterAssignment out;
  out.labels.reserve(features.size());
  for (const auto& f : features) {
    const Posterior p = posterior(model, f);
    if (p.nearest_mean_fallback) ++out.fallback_count;
    const auto it = std::max_element(p.probabilities.begin(), p.probabilities.end());
    out.labels.push_back(static_cast<int>(it - p.probabilities.begin()));
  }
  return out;
}

}  // namespace focusdet
