#pragma once

#include <concepts>
#include <vector>

#include "gdt/data.hpp"
#include "gdt/linalg.hpp"
#include "gdt/network.hpp"

namespace gdt {

/// The untransformed feature space.
struct Identity {
  Vector operator()(ConstSpan x) const { return Vector(x.begin(), x.end()); }
};

/// Anything mapping a feature vector to a transformed vector: a network, Identity, or a lambda.
template <class F>
concept FeatureTransform = requires(const F& f, ConstSpan x) {
  { f(x) } -> std::convertible_to<Vector>;
};

template <FeatureTransform F>
std::vector<Vector> transform_all(const F& f, const std::vector<Vector>& xs) {
  std::vector<Vector> out;
  out.reserve(xs.size());
  for (const Vector& x : xs) out.push_back(f(x));
  return out;
}

template <FeatureTransform F>
LabeledDataset transform_dataset(const F& f, const LabeledDataset& ds) {
  return {transform_all(f, ds.features), ds.labels};
}

}  // namespace gdt
