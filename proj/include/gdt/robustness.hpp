#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gdt/data.hpp"
#include "gdt/error.hpp"
#include "gdt/loss.hpp"
#include "gdt/transform.hpp"

namespace gdt {

/// Angle between u and v in [0, pi], i.e. arccos of their cosine similarity.
/// Evaluated as 2 atan2(|u^ - v^|, |u^ + v^|) on the unit vectors, which keeps
/// full precision for nearly parallel vectors where acos does not.
inline double angular_distance(ConstSpan u, ConstSpan v) {
  if (u.size() != v.size()) throw ShapeError("angular_distance: length mismatch");
  const double nu = norm(u);
  const double nv = norm(v);
  if (!(nu > kNormEpsilon)) throw DegenerateVector(std::size_t{0});
  if (!(nv > kNormEpsilon)) throw DegenerateVector(std::size_t{1});
  double diff = 0.0, sum = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double a = u[k] / nu, b = v[k] / nv;
    diff += (a - b) * (a - b);
    sum += (a + b) * (a + b);
  }
  return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
}

enum class Metric { Angular, Euclidean };

inline std::string_view to_string(Metric m) { return m == Metric::Angular ? "angular" : "euclidean"; }

inline Metric parse_metric(std::string_view s) {
  if (s == "angular") return Metric::Angular;
  if (s == "euclidean") return Metric::Euclidean;
  throw ConfigError("unknown metric '" + std::string(s) + "'");
}

inline double distance(Metric m, ConstSpan u, ConstSpan v) {
  return m == Metric::Angular ? angular_distance(u, v) : euclidean_distance(u, v);
}

struct CoverResult {
  double radius = 0.0;
  std::vector<std::size_t> centers;     // indices into the input points
  std::vector<std::size_t> assignment;  // per point, position in `centers`
  std::vector<double> assigned_distance;

  double max_assigned_distance() const {
    return assigned_distance.empty() ? 0.0 : *std::max_element(assigned_distance.begin(), assigned_distance.end());
  }
};

/// Farthest-point greedy cover: start at point 0 and keep adding the point
/// farthest from all current centers until every point is within `radius`.
/// Centers end up pairwise more than `radius` apart.
inline CoverResult greedy_cover(const std::vector<Vector>& points, double radius, Metric metric = Metric::Angular) {
  if (points.empty()) throw InvalidInput("greedy_cover: no points");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidInput("greedy_cover: radius must be positive");

  const std::size_t n = points.size();
  CoverResult c;
  c.radius = radius;
  c.assignment.assign(n, 0);
  c.assigned_distance.assign(n, INFINITY);
  std::size_t next = 0;
  for (;;) {
    const std::size_t slot = c.centers.size();
    c.centers.push_back(next);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = distance(metric, points[i], points[next]);
      if (d < c.assigned_distance[i]) {  // strict: ties keep the earlier center
        c.assigned_distance[i] = d;
        c.assignment[i] = slot;
      }
    }
    const auto far = std::max_element(c.assigned_distance.begin(), c.assigned_distance.end());
    if (*far <= radius) break;
    next = static_cast<std::size_t>(far - c.assigned_distance.begin());
  }
  return c;
}

struct PartitionResult {
  std::vector<std::vector<std::size_t>> subsets;
  std::size_t cover_cells = 0;

  std::size_t K() const noexcept { return subsets.size(); }
};

/// Label-pure cells of diameter <= gamma: a greedy gamma/2 cover of the
/// features intersected with the class labels, empty cells dropped.
inline PartitionResult partition_feature_label_space(const LabeledDataset& ds, double gamma,
                                                     Metric metric = Metric::Angular) {
  ds.validate();
  if (ds.empty()) throw InvalidInput("partition: empty dataset");
  const CoverResult cover = greedy_cover(ds.features, gamma / 2.0, metric);
  std::map<std::pair<std::size_t, int>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < ds.size(); ++i) cells[{cover.assignment[i], ds.labels[i]}].push_back(i);
  PartitionResult p;
  p.cover_cells = cover.centers.size();
  for (auto& [key, members] : cells) p.subsets.push_back(std::move(members));
  return p;
}

/// Largest distortion |rho(f x_i, f x_j) - rho(x_i, x_j)| over pairs sharing a subset.
template <FeatureTransform F>
double isometry_defect(const F& f, const LabeledDataset& ds, const PartitionResult& partition,
                       Metric metric = Metric::Angular) {
  const std::vector<Vector> ys = transform_all(f, ds.features);
  if (metric == Metric::Angular)
    for (std::size_t i = 0; i < ys.size(); ++i)
      if (!(norm(ys[i]) > kNormEpsilon)) throw DegenerateVector(i);
  double worst = 0.0;
  for (const auto& subset : partition.subsets) {
    for (std::size_t a = 0; a < subset.size(); ++a) {
      for (std::size_t b = a + 1; b < subset.size(); ++b) {
        const std::size_t i = subset[a], j = subset[b];
        if (i >= ds.size() || j >= ds.size()) throw InvalidInput("partition index out of range");
        const double distortion =
            std::abs(distance(metric, ys[i], ys[j]) - distance(metric, ds.features[i], ds.features[j]));
        worst = std::max(worst, distortion);
      }
    }
  }
  return worst;
}

/// Lipschitz bound of the pair loss with respect to its similarity/distance argument.
inline double default_lipschitz(LossMode mode) {
  // |d/dC (C - t)^2| = 2|C - t| <= 4 for C, t in [-1, 1]; both hinge variants have slope <= 1.
  return (mode == LossMode::HingeDml || mode == LossMode::SmoothedDml) ? 1.0 : 4.0;
}

struct RobustnessReport {
  double gamma = 0.0;
  double delta_hat = 0.0;
  double lipschitz_A = 0.0;
  double epsilon = 0.0;  // 2 A (gamma + delta_hat)
  std::size_t K = 0;
  std::size_t n = 0;
  double sqrt_K_over_n = 0.0;
};

/// Generalization bound ingredients: epsilon and sqrt(K/n), kept separate
/// because the constant in front of the second term is unknown.
inline RobustnessReport robustness_bound(std::size_t K, std::size_t n, double gamma, double delta_hat,
                                         double lipschitz_A) {
  if (K < 1) throw InvalidInput("robustness_bound: K must be >= 1");
  if (n < 2) throw InvalidInput("robustness_bound: n must be >= 2");
  for (double v : {gamma, delta_hat, lipschitz_A})
    if (!std::isfinite(v) || v < 0.0) throw InvalidInput("robustness_bound: inputs must be finite and >= 0");
  RobustnessReport r;
  r.gamma = gamma;
  r.delta_hat = delta_hat;
  r.lipschitz_A = lipschitz_A;
  r.epsilon = 2.0 * lipschitz_A * (gamma + delta_hat);
  r.K = K;
  r.n = n;
  r.sqrt_K_over_n = std::sqrt(static_cast<double>(K) / static_cast<double>(n));
  return r;
}

/// Partition `ds`, measure the defect of `f` on it, and assemble the bound terms.
template <FeatureTransform F>
RobustnessReport analyze_robustness(const F& f, const LabeledDataset& ds, double gamma, double lipschitz_A,
                                    Metric metric = Metric::Angular) {
  const PartitionResult p = partition_feature_label_space(ds, gamma, metric);
  return robustness_bound(p.K(), ds.size(), gamma, isometry_defect(f, ds, p, metric), lipschitz_A);
}

inline nlohmann::json to_json(const RobustnessReport& r, Metric metric = Metric::Angular) {
  return {{"gamma", r.gamma},
          {"delta_hat", r.delta_hat},
          {"lipschitz_A", r.lipschitz_A},
          {"epsilon", r.epsilon},
          {"K", r.K},
          {"n", r.n},
          {"metric", std::string(to_string(metric))},
          {"bound_terms", {{"epsilon", r.epsilon}, {"sqrt_K_over_n", r.sqrt_K_over_n}}}};
}

}  // namespace gdt
