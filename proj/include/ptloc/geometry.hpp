#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ptloc/core.hpp"

namespace ptloc {

struct Hyperplane {
  Vec normal;
  double bias = 0.0;

  Eigen::Index dim() const { return normal.size(); }
  bool homogeneous() const { return bias == 0.0; }
};

// Unit points (columns) with a probability distribution over them.
class WeightedPointSet {
 public:
  WeightedPointSet() = default;

  // Takes raw nonnegative weights; they are normalized and zero-weight
  // points are dropped. `source` keeps the original column index.
  WeightedPointSet(Mat points, const Vec& raw_weights) {
    if (points.cols() != raw_weights.size()) throw InvalidInput("points/weights size mismatch");
    double total = 0;
    for (Eigen::Index i = 0; i < raw_weights.size(); ++i) {
      if (!(raw_weights(i) >= 0) || !std::isfinite(raw_weights(i)))
        throw InvalidInput("weights must be finite and nonnegative");
      total += raw_weights(i);
    }
    if (!(total > 0)) throw InvalidInput("weights sum to zero");
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < raw_weights.size(); ++i)
      if (raw_weights(i) / total > 0) keep.push_back(i);
    points_.resize(points.rows(), static_cast<Eigen::Index>(keep.size()));
    weights_.resize(static_cast<Eigen::Index>(keep.size()));
    double kept = 0;
    for (std::size_t j = 0; j < keep.size(); ++j) kept += raw_weights(keep[j]);
    for (std::size_t j = 0; j < keep.size(); ++j) {
      auto jj = static_cast<Eigen::Index>(j);
      double n = points.col(keep[j]).norm();
      if (std::abs(n - 1.0) > 1e-9) throw InvalidInput("points must have unit norm");
      points_.col(jj) = points.col(keep[j]);
      weights_(jj) = raw_weights(keep[j]) / kept;
      source_.push_back(static_cast<std::size_t>(keep[j]));
    }
  }

  static WeightedPointSet uniform(Mat points) {
    Vec w = Vec::Ones(points.cols());
    return WeightedPointSet(std::move(points), w);
  }

  Eigen::Index dim() const { return points_.rows(); }
  Eigen::Index size() const { return points_.cols(); }
  const Mat& points() const { return points_; }
  const Vec& weights() const { return weights_; }
  auto point(Eigen::Index i) const { return points_.col(i); }
  double weight(Eigen::Index i) const { return weights_(i); }
  std::size_t source(Eigen::Index i) const { return source_[static_cast<std::size_t>(i)]; }
  const std::vector<std::size_t>& sources() const { return source_; }

 private:
  Mat points_;
  Vec weights_;
  std::vector<std::size_t> source_;
};

inline Mat normalize_columns(const Mat& raw) {
  Mat out = raw;
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    double n = out.col(i).norm();
    if (n > 0) out.col(i) /= n;
  }
  return out;
}

// Harness-side: uses the hidden normal.
inline double normalized_margin(const Vec& x, const Hyperplane& h) {
  double n = h.normal.norm();
  if (n == 0) throw DegenerateHyperplane();
  return x.dot(h.normal) / n;
}

inline double margin_norm(const std::vector<Vec>& s, const Hyperplane& h) {
  if (s.empty()) return 0.0;
  double acc = 0;
  for (const auto& x : s) {
    double m = normalized_margin(x, h);
    acc += m * m;
  }
  return std::sqrt(acc);
}

// (x,1)/|(x,1)| per point, weights unchanged.
inline WeightedPointSet lift_instance(const WeightedPointSet& pair) {
  Mat lifted(pair.dim() + 1, pair.size());
  Vec w(pair.size());
  for (Eigen::Index i = 0; i < pair.size(); ++i) {
    lifted.col(i).head(pair.dim()) = pair.point(i);
    lifted(pair.dim(), i) = 1.0;
    lifted.col(i).normalize();
    w(i) = pair.weight(i);
  }
  return WeightedPointSet(std::move(lifted), w);
}

inline Vec lift_point(const Vec& x) {
  Vec y(x.size() + 1);
  y.head(x.size()) = x;
  y(x.size()) = 1.0;
  return y.normalized();
}

inline Vec lift_normal(const Hyperplane& h) {
  Vec y(h.normal.size() + 1);
  y.head(h.normal.size()) = h.normal;
  y(h.normal.size()) = h.bias;
  return y;
}

// Per-point labels plus the factor-2 relative-margin certificates.
struct PartialLabeling {
  std::vector<Label> labels;
  std::vector<double> rel_margin;  // NaN when absent
  std::vector<int> ref_index;      // -1 when absent

  PartialLabeling() = default;
  explicit PartialLabeling(std::size_t n)
      : labels(n, Label::Unknown), rel_margin(n, kNaN), ref_index(n, -1) {}

  std::size_t size() const { return labels.size(); }
  bool known(std::size_t i) const { return labels[i] != Label::Unknown; }

  std::size_t count_known() const {
    std::size_t c = 0;
    for (auto l : labels) c += l != Label::Unknown;
    return c;
  }

  double coverage(const Vec& weights) const {
    double c = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (known(i)) c += weights(static_cast<Eigen::Index>(i));
    return c;
  }
};

}  // namespace ptloc
