#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

#include <json.hpp>

#include "gdt/data.hpp"
#include "gdt/error.hpp"
#include "gdt/format.hpp"
#include "gdt/loss.hpp"
#include "gdt/transform.hpp"

namespace gdt {

namespace detail {

inline std::vector<double> norms_checked(const std::vector<Vector>& ys) {
  std::vector<double> n(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    n[i] = norm(ys[i]);
    if (!(n[i] > kNormEpsilon) || !std::isfinite(n[i])) throw DegenerateVector(i);
  }
  return n;
}

/// Same arithmetic as cosine_similarity, with the norms precomputed.
inline double cosine_with_norms(ConstSpan a, ConstSpan b, double na, double nb) {
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

}  // namespace detail

/// Mean over unordered pairs of (C_ij - l_ij)^2 with l = +1 same class, -1 otherwise.
inline double pair_loss_on_features(const std::vector<Vector>& ys, const std::vector<int>& labels) {
  if (ys.size() != labels.size()) throw ShapeError("pair loss: feature/label count mismatch");
  if (ys.size() < 2) throw InvalidInput("pair loss needs at least two samples");
  const auto n = detail::norms_checked(ys);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    for (std::size_t j = i + 1; j < ys.size(); ++j) {
      const double l = labels[i] == labels[j] ? 1.0 : -1.0;
      const double r = detail::cosine_with_norms(ys[i], ys[j], n[i], n[j]) - l;
      sum += r * r;
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

/// R_emp on `ds` after applying `f`. The GDT target is deliberately not used.
template <FeatureTransform F>
double empirical_pair_loss(const F& f, const LabeledDataset& ds) {
  return pair_loss_on_features(transform_all(f, ds.features), ds.labels);
}

struct GapReport {
  double r_emp = 0.0;
  double r_hat = 0.0;
  double gap = 0.0;  // r_emp - r_hat
};

template <FeatureTransform F>
GapReport generalization_gap(const F& f, const LabeledDataset& train, const LabeledDataset& test) {
  GapReport g;
  g.r_emp = empirical_pair_loss(f, train);
  g.r_hat = empirical_pair_loss(f, test);
  g.gap = g.r_emp - g.r_hat;
  return g;
}

/// 1-NN by cosine similarity over already transformed training vectors.
class CosineNearestNeighbor {
 public:
  CosineNearestNeighbor(std::vector<Vector> train, std::vector<int> labels)
      : train_(std::move(train)), labels_(std::move(labels)) {
    if (train_.empty()) throw InvalidInput("1-NN needs a non-empty training set");
    if (train_.size() != labels_.size()) throw ShapeError("1-NN: feature/label count mismatch");
    norms_ = detail::norms_checked(train_);
  }

  /// Index of the most similar training vector; ties go to the lowest index.
  std::size_t nearest(ConstSpan query) const {
    const double nq = norm(query);
    if (!(nq > kNormEpsilon)) throw DegenerateVector("1-NN query has near-zero norm");
    std::size_t best = 0;
    double best_cos = -2.0;
    for (std::size_t i = 0; i < train_.size(); ++i) {
      const double c = detail::cosine_with_norms(train_[i], query, norms_[i], nq);
      if (c > best_cos) {
        best_cos = c;
        best = i;
      }
    }
    return best;
  }

  int classify(ConstSpan query) const { return labels_[nearest(query)]; }

 private:
  std::vector<Vector> train_;
  std::vector<int> labels_;
  std::vector<double> norms_;
};

template <FeatureTransform F>
int knn_classify(const LabeledDataset& train, ConstSpan query, const F& f) {
  return CosineNearestNeighbor(transform_all(f, train.features), train.labels).classify(f(query));
}

/// Fraction of `test` whose 1-NN label (in transformed space) is correct.
template <FeatureTransform F>
double knn_accuracy(const F& f, const LabeledDataset& train, const LabeledDataset& test) {
  if (test.empty()) throw InvalidInput("1-NN accuracy needs a non-empty test set");
  const CosineNearestNeighbor nn(transform_all(f, train.features), train.labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (nn.classify(f(test.features[i])) == test.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

// ---- ROC / AUC -------------------------------------------------------------

struct RocPoint {
  double threshold;  // score >= threshold is called positive
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;  // starts at (0, 0) with threshold +inf
  double auc = 0.0;
};

/// ROC over every distinct score, AUC by the trapezoid rule. Tied scores
/// move both rates at once, which gives them half credit.
inline RocCurve roc_from_scores(const std::vector<double>& scores, const std::vector<PairLabel>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("roc: score/label count mismatch");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), PairLabel::Positive));
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) throw InvalidInput("roc needs at least one positive and one negative pair");
  for (double s : scores)
    if (!std::isfinite(s)) throw InvalidInput("roc: non-finite score");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({INFINITY, 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    for (; k < order.size() && scores[order[k]] == s; ++k) (labels[order[k]] == PairLabel::Positive ? tp : fp)++;
    const RocPoint next{s, static_cast<double>(fp) / static_cast<double>(negatives),
                        static_cast<double>(tp) / static_cast<double>(positives)};
    const RocPoint& prev = roc.points.back();
    roc.auc += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) * 0.5;
    roc.points.push_back(next);
  }
  return roc;
}

/// Cosine scores of transformed verification pairs, then ROC/AUC.
template <FeatureTransform F>
RocCurve verification_roc(const F& f, const std::vector<VerificationPair>& pairs) {
  std::vector<double> scores;
  std::vector<PairLabel> labels;
  scores.reserve(pairs.size());
  labels.reserve(pairs.size());
  for (const VerificationPair& p : pairs) {
    scores.push_back(cosine_similarity(f(p.a), f(p.b)));
    labels.push_back(p.label);
  }
  return roc_from_scores(scores, labels);
}

inline void write_roc_csv(const RocCurve& roc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "threshold,fpr,tpr\n";
  for (const RocPoint& p : roc.points)
    out << format_double(p.threshold) << ',' << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
}

struct EvalReport {
  double r_emp = 0.0;
  double r_hat = 0.0;
  double gap = 0.0;
  double knn_accuracy = 0.0;
  std::optional<double> auc;
};

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j{{"r_emp", r.r_emp}, {"r_hat", r.r_hat}, {"gap", r.gap}, {"knn_accuracy", r.knn_accuracy}};
  j["auc"] = r.auc ? nlohmann::json(*r.auc) : nlohmann::json(nullptr);
  return j;
}

template <FeatureTransform F>
EvalReport evaluate(const F& f, const LabeledDataset& train, const LabeledDataset& test,
                    const std::vector<VerificationPair>* verification = nullptr) {
  const GapReport g = generalization_gap(f, train, test);
  EvalReport r{g.r_emp, g.r_hat, g.gap, knn_accuracy(f, train, test), std::nullopt};
  if (verification && !verification->empty()) r.auc = verification_roc(f, *verification).auc;
  return r;
}

}  // namespace gdt
