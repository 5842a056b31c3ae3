#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "gdt/error.hpp"
#include "gdt/linalg.hpp"

namespace gdt {

inline constexpr double kNormEpsilon = 1e-12;

/// u.v / (|u| |v|), clamped to [-1, 1]. Throws DegenerateVector when either norm <= 1e-12.
inline double cosine_similarity(ConstSpan u, ConstSpan v) {
  if (u.size() != v.size()) throw ShapeError("cosine_similarity: length mismatch");
  const double nu = norm(u);
  const double nv = norm(v);
  if (!(nu > kNormEpsilon)) throw DegenerateVector(std::size_t{0});
  if (!(nv > kNormEpsilon)) throw DegenerateVector(std::size_t{1});
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

enum class PairLabel : int { Negative = -1, Positive = 1 };

inline double sign(PairLabel l) { return static_cast<double>(static_cast<int>(l)); }

/// An unordered sample pair with its pair label and regression target.
struct PairTarget {
  std::size_t i = 0;
  std::size_t j = 0;
  PairLabel label = PairLabel::Negative;
  double target = -1.0;
};

enum class LossMode { Gdt, MetricLearning, Classification, HingeDml, SmoothedDml };

inline std::string_view to_string(LossMode m) {
  switch (m) {
    case LossMode::Gdt: return "gdt";
    case LossMode::MetricLearning: return "metric-learning";
    case LossMode::Classification: return "classification";
    case LossMode::HingeDml: return "hinge-dml";
    case LossMode::SmoothedDml: return "smoothed-dml";
  }
  return "?";
}

inline LossMode parse_loss_mode(std::string_view s) {
  for (LossMode m : {LossMode::Gdt, LossMode::MetricLearning, LossMode::Classification, LossMode::HingeDml,
                     LossMode::SmoothedDml})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown loss mode '" + std::string(s) + "'");
}

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1], got " + std::to_string(lambda));
}

struct LossConfig {
  double lambda = 0.4;
  LossMode mode = LossMode::Gdt;

  /// The lambda actually used for targets: the pedagogic modes pin it to 1 or 0.
  double effective_lambda() const {
    switch (mode) {
      case LossMode::MetricLearning: return 1.0;
      case LossMode::Classification: return 0.0;
      default: return lambda;
    }
  }

  bool is_dml() const { return mode == LossMode::HingeDml || mode == LossMode::SmoothedDml; }
};

/// Same class: lambda + (1 - lambda) cos(x_i, x_j). Different class: -1.
inline double gdt_target(ConstSpan xi, ConstSpan xj, bool same_class, double lambda) {
  check_lambda(lambda);
  if (!same_class) return -1.0;
  if (lambda == 1.0) {
    // still reject degenerate inputs so the endpoint matches the general case
    (void)cosine_similarity(xi, xj);
    return 1.0;
  }
  return lambda + (1.0 - lambda) * cosine_similarity(xi, xj);
}

namespace detail {

/// Unit directions and norms of every vector, reporting the first degenerate index.
struct Normalized {
  std::vector<Vector> unit;
  std::vector<double> norms;
};

inline Normalized normalize_all(const std::vector<Vector>& ys) {
  Normalized n;
  n.unit.reserve(ys.size());
  n.norms.reserve(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double len = norm(ys[i]);
    if (!(len > kNormEpsilon) || !std::isfinite(len)) throw DegenerateVector(i);
    Vector u(ys[i]);
    for (double& v : u) v /= len;
    n.unit.push_back(std::move(u));
    n.norms.push_back(len);
  }
  return n;
}

inline void check_pair(const PairTarget& p, std::size_t n) {
  if (p.i >= n || p.j >= n) throw InvalidInput("pair index out of range");
  if (p.i == p.j) throw InvalidInput("pair must join two distinct samples");
}

inline double clamped_dot(ConstSpan a, ConstSpan b) { return std::clamp(dot(a, b), -1.0, 1.0); }

}  // namespace detail

/// J = 1/2 sum over the given pairs of (C_ij - t_ij)^2.
inline double gdt_loss(const std::vector<Vector>& ys, const std::vector<PairTarget>& pairs) {
  const auto n = detail::normalize_all(ys);
  double j = 0.0;
  for (const PairTarget& p : pairs) {
    detail::check_pair(p, ys.size());
    const double r = detail::clamped_dot(n.unit[p.i], n.unit[p.j]) - p.target;
    j += r * r;
  }
  return 0.5 * j;
}

/// Contribution of one pair to dJ/dy_i and dJ/dy_j for J = 1/2 (C - t)^2.
///
/// dC/dy_i = (y_j/|y_j| - C y_i/|y_i|) / |y_i|, a projection orthogonal to y_i.
struct PairGradient {
  Vector wrt_i;
  Vector wrt_j;
};

inline PairGradient gdt_pair_gradient(ConstSpan yi, ConstSpan yj, double target) {
  if (yi.size() != yj.size()) throw ShapeError("gdt_pair_gradient: length mismatch");
  const double ni = norm(yi);
  const double nj = norm(yj);
  if (!(ni > kNormEpsilon)) throw DegenerateVector(std::size_t{0});
  if (!(nj > kNormEpsilon)) throw DegenerateVector(std::size_t{1});
  const double c = std::clamp(dot(yi, yj) / (ni * nj), -1.0, 1.0);
  const double r = c - target;
  PairGradient g{Vector(yi.size()), Vector(yi.size())};
  for (std::size_t k = 0; k < yi.size(); ++k) {
    const double ui = yi[k] / ni;
    const double uj = yj[k] / nj;
    g.wrt_i[k] = r * (uj - c * ui) / ni;
    g.wrt_j[k] = r * (ui - c * uj) / nj;
  }
  return g;
}

struct LossAndGradient {
  double value = 0.0;
  std::vector<Vector> grads;  // dJ/dy_i, one per sample
};

/// Objective and per-sample gradients in one pass over the pairs.
///
/// Each pair contributes to both endpoints. Accumulation order is the pair
/// order, so results are reproducible bit for bit.
inline LossAndGradient gdt_loss_and_grad(const std::vector<Vector>& ys, const std::vector<PairTarget>& pairs) {
  const auto n = detail::normalize_all(ys);
  const std::size_t dim = ys.empty() ? 0 : ys.front().size();
  LossAndGradient out;
  out.grads.assign(ys.size(), Vector(dim, 0.0));
  // dJ/dy_i = (1/|y_i|) [ sum_j r_ij u_j - (sum_j r_ij C_ij) u_i ]
  std::vector<double> self_coeff(ys.size(), 0.0);
  double j = 0.0;
  for (const PairTarget& p : pairs) {
    detail::check_pair(p, ys.size());
    const double c = detail::clamped_dot(n.unit[p.i], n.unit[p.j]);
    const double r = c - p.target;
    j += r * r;
    axpy(r, n.unit[p.j], out.grads[p.i]);
    axpy(r, n.unit[p.i], out.grads[p.j]);
    self_coeff[p.i] += r * c;
    self_coeff[p.j] += r * c;
  }
  for (std::size_t i = 0; i < ys.size(); ++i) {
    axpy(-self_coeff[i], n.unit[i], out.grads[i]);
    for (double& v : out.grads[i]) v /= n.norms[i];
  }
  out.value = 0.5 * j;
  return out;
}

inline std::vector<Vector> gdt_loss_grad(const std::vector<Vector>& ys, const std::vector<PairTarget>& pairs) {
  return gdt_loss_and_grad(ys, pairs).grads;
}

// ---- deep metric learning baselines ---------------------------------------

enum class DmlVariant { Hinge, Smoothed };

/// Hinge: max(-l (1 - d), 0). Smoothed: log(1 + exp(-l (1 - d))).
inline double dml_loss(double distance, PairLabel label, DmlVariant variant) {
  if (!(distance >= 0.0)) throw InvalidInput("dml_loss: distance must be >= 0");
  const double m = -sign(label) * (1.0 - distance);
  if (variant == DmlVariant::Hinge) return std::max(m, 0.0);
  // log1p(exp(m)) without overflow for large m
  return m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
}

/// d(dml_loss)/d(distance). The hinge kink has subgradient 0.
inline double dml_loss_derivative(double distance, PairLabel label, DmlVariant variant) {
  if (!(distance >= 0.0)) throw InvalidInput("dml_loss: distance must be >= 0");
  const double l = sign(label);
  const double m = -l * (1.0 - distance);
  if (variant == DmlVariant::Hinge) return m > 0.0 ? l : 0.0;
  const double sigmoid = m >= 0.0 ? 1.0 / (1.0 + std::exp(-m)) : std::exp(m) / (1.0 + std::exp(m));
  return l * sigmoid;
}

/// Sum of DML losses on Euclidean distances, with dJ/dy per sample.
inline LossAndGradient dml_loss_and_grad(const std::vector<Vector>& ys, const std::vector<PairTarget>& pairs,
                                         DmlVariant variant) {
  const std::size_t dim = ys.empty() ? 0 : ys.front().size();
  LossAndGradient out;
  out.grads.assign(ys.size(), Vector(dim, 0.0));
  for (const PairTarget& p : pairs) {
    detail::check_pair(p, ys.size());
    const double d = euclidean_distance(ys[p.i], ys[p.j]);
    out.value += dml_loss(d, p.label, variant);
    const double g = dml_loss_derivative(d, p.label, variant);
    if (g == 0.0 || d == 0.0) continue;  // distance is not differentiable at 0
    for (std::size_t k = 0; k < dim; ++k) {
      const double dd = g * (ys[p.i][k] - ys[p.j][k]) / d;
      out.grads[p.i][k] += dd;
      out.grads[p.j][k] -= dd;
    }
  }
  return out;
}

/// Objective for a training step under the configured mode.
inline LossAndGradient pair_objective(const std::vector<Vector>& ys, const std::vector<PairTarget>& pairs,
                                      LossMode mode) {
  switch (mode) {
    case LossMode::HingeDml: return dml_loss_and_grad(ys, pairs, DmlVariant::Hinge);
    case LossMode::SmoothedDml: return dml_loss_and_grad(ys, pairs, DmlVariant::Smoothed);
    default: return gdt_loss_and_grad(ys, pairs);
  }
}

}  // namespace gdt
