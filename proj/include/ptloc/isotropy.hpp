#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "ptloc/core.hpp"
#include "ptloc/geometry.hpp"

namespace ptloc {

inline constexpr double kEigenZero = 1e-14;
// Far below the smallest margin a caller may care about: projecting a
// member onto its subspace moves <x,h> by at most kMemberTol |h|.
inline constexpr double kMemberTol = 1e-12;
inline constexpr double kRankTol = 1e-12;

struct SymEigen {
  Vec values;   // ascending, entries below kEigenZero clamped to 0
  Mat vectors;  // columns
};

inline SymEigen sym_eigen(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
  SymEigen out{es.eigenvalues(), es.eigenvectors()};
  for (Eigen::Index i = 0; i < out.values.size(); ++i)
    if (out.values(i) < kEigenZero) out.values(i) = 0;
  return out;
}

// Spectrum of sum_i w_i y_i y_i^T via QR + SVD of the scaled point matrix,
// so directions carrying 1e-9 components still resolve.
inline SymEigen weighted_spectrum(const Mat& y, const Vec& w) {
  const Eigen::Index d = y.rows();
  Mat a = (y * w.cwiseSqrt().asDiagonal()).transpose();
  Mat r = Mat::Zero(d, d);
  if (a.rows() >= d) {
    Eigen::HouseholderQR<Mat> qr(a);
    r = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
  } else {
    r.topRows(a.rows()) = a;
  }
  Eigen::JacobiSVD<Mat> svd(r, Eigen::ComputeFullV);
  SymEigen out{Vec(d), Mat(d, d)};
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::Index src = d - 1 - i;  // singular values come descending
    double sv = svd.singularValues()(src);
    out.values(i) = sv * sv;
    out.vectors.col(i) = svd.matrixV().col(src);
  }
  return out;
}

inline SymEigen weighted_spectrum(const WeightedPointSet& pair) { return weighted_spectrum(pair.points(), pair.weights()); }

inline Mat covariance(const WeightedPointSet& pair) {
  const Mat& p = pair.points();
  return p * pair.weights().asDiagonal() * p.transpose();
}

inline double isotropy_residual(const Vec& eigenvalues) {
  double d = static_cast<double>(eigenvalues.size());
  double r = 0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) r = std::max(r, std::abs(d * eigenvalues(i) - 1.0));
  return r;
}

inline bool is_eps_isotropic(const WeightedPointSet& pair, double eps) {
  if (eps < 0) throw InvalidInput("eps must be nonnegative");
  return isotropy_residual(weighted_spectrum(pair).values) <= eps + 1e-12;
}

// Orthonormal basis for the column span, rank decided by pivoted QR.
inline Mat span_basis(const Mat& cols, double rel_tol = kRankTol) {
  if (cols.cols() == 0) return Mat(cols.rows(), 0);
  Eigen::ColPivHouseholderQR<Mat> qr(cols);
  qr.setThreshold(rel_tol);
  Eigen::Index r = qr.rank();
  Mat q = qr.householderQ() * Mat::Identity(cols.rows(), r);
  return q;
}

inline double distance_to_span(const Eigen::Ref<const Vec>& x, const Mat& basis) {
  if (basis.cols() == 0) return x.norm();
  return (x - basis * (basis.transpose() * x)).norm();
}

struct SubspaceWitness {
  Mat basis;  // d x k, orthonormal columns
  double mass = 0;
  std::vector<std::size_t> member_indices;

  Eigen::Index k() const { return basis.cols(); }
};

inline SubspaceWitness witness_for(const WeightedPointSet& pair, const Mat& basis) {
  SubspaceWitness w{basis, 0.0, {}};
  for (Eigen::Index i = 0; i < pair.size(); ++i) {
    if (distance_to_span(pair.point(i), basis) <= kMemberTol) {
      w.member_indices.push_back(static_cast<std::size_t>(i));
      w.mass += pair.weight(i);
    }
  }
  return w;
}

struct IsotropicTransform {
  Mat basis;  // d x k
  Mat map;    // k x k
  double residual_eps = 0;

  Eigen::Index k() const { return map.rows(); }
  Vec coords(const Eigen::Ref<const Vec>& x) const { return basis.transpose() * x; }
  double scale(const Eigen::Ref<const Vec>& x) const { return (map * (basis.transpose() * x)).norm(); }
  Vec apply(const Eigen::Ref<const Vec>& x) const {
    Vec y = map * (basis.transpose() * x);
    return y / y.norm();
  }
  // Query in transformed coordinates -> query in the host space.
  Mat query_map() const { return basis * map.inverse(); }
};

struct HeavySubspaceDetected {
  SubspaceWitness witness;
  bool verified = false;  // mass > k/dim checked directly
  Mat last_map;
  double last_residual = 0;
  int iterations = 0;
};

using ForsterResult = std::variant<IsotropicTransform, HeavySubspaceDetected>;

inline constexpr int kBruteForceMaxPoints = 16;
inline constexpr int kBruteForceMaxDim = 8;

inline bool within_brute_force_cap(const WeightedPointSet& pair) {
  return pair.size() <= kBruteForceMaxPoints && pair.dim() <= kBruteForceMaxDim;
}

namespace detail {

// Calls f(basis) for every subspace spanned by 1..dim-1 linearly independent points.
inline void for_each_point_span(const WeightedPointSet& pair, const std::function<bool(const Mat&)>& f) {
  const auto n = static_cast<int>(pair.size());
  const auto d = static_cast<int>(pair.dim());
  std::vector<int> pick;
  bool stop = false;
  std::function<void(int)> rec = [&](int start) {
    if (stop) return;
    if (!pick.empty()) {
      Mat cols(d, static_cast<Eigen::Index>(pick.size()));
      for (std::size_t j = 0; j < pick.size(); ++j) cols.col(static_cast<Eigen::Index>(j)) = pair.point(pick[j]);
      Mat b = span_basis(cols);
      if (b.cols() < static_cast<Eigen::Index>(pick.size())) return;  // dependent: covered by a smaller subset
      if (f(b)) {
        stop = true;
        return;
      }
    }
    if (static_cast<int>(pick.size()) == d - 1) return;
    for (int i = start; i < n && !stop; ++i) {
      pick.push_back(i);
      rec(i + 1);
      pick.pop_back();
    }
  };
  rec(0);
}

}  // namespace detail

// Brute force over spans of point subsets; returns the most overweight one.
inline std::optional<SubspaceWitness> heavy_subspace_witness(const WeightedPointSet& pair, bool strict) {
  if (!within_brute_force_cap(pair)) throw SizeLimitExceeded("heavy_subspace_witness: instance too large");
  const double d = static_cast<double>(pair.dim());
  std::optional<SubspaceWitness> best;
  double best_excess = -1;
  detail::for_each_point_span(pair, [&](const Mat& b) {
    SubspaceWitness w = witness_for(pair, b);
    double excess = w.mass - static_cast<double>(b.cols()) / d;
    bool heavy = strict ? excess > 1e-12 : excess >= -1e-12;
    if (heavy && excess > best_excess) {
      best_excess = excess;
      best = std::move(w);
    }
    return false;
  });
  return best;
}

// Exact-isotropy condition: every point span has mass < k/d, or mass = k/d
// with the remaining points inside a (d-k)-dimensional subspace.
inline bool exact_isotropic_feasible(const WeightedPointSet& pair) {
  if (!within_brute_force_cap(pair)) throw SizeLimitExceeded("exact_isotropic_feasible: instance too large");
  const double d = static_cast<double>(pair.dim());
  bool ok = true;
  detail::for_each_point_span(pair, [&](const Mat& b) {
    SubspaceWitness w = witness_for(pair, b);
    double share = static_cast<double>(b.cols()) / d;
    if (w.mass > share + 1e-12) {
      ok = false;
      return true;
    }
    if (std::abs(w.mass - share) <= 1e-12) {
      std::vector<bool> in(static_cast<std::size_t>(pair.size()), false);
      for (auto i : w.member_indices) in[i] = true;
      Mat rest(pair.dim(), pair.size());
      Eigen::Index c = 0;
      for (Eigen::Index i = 0; i < pair.size(); ++i)
        if (!in[static_cast<std::size_t>(i)]) rest.col(c++) = pair.point(i);
      Mat rb = span_basis(rest.leftCols(c));
      if (rb.cols() > pair.dim() - b.cols()) {
        ok = false;
        return true;
      }
    }
    return false;
  });
  return ok;
}

struct ForsterOptions {
  int max_iter = 10000;
  int check_every = 20;
  double slack = 0.05;
  double snap = 1e-6;
};

namespace detail {

// Candidate heavy subspaces from the top eigenspaces of the current
// covariance, refit on the original points and checked directly.
inline std::optional<SubspaceWitness> extract_heavy(const WeightedPointSet& pair, const Mat& y, const SymEigen& eig,
                                                    const ForsterOptions& opt) {
  const Eigen::Index d = pair.dim();
  std::optional<SubspaceWitness> best;
  double best_excess = 1e-12;
  double cumulative = 0;
  for (Eigen::Index j = 1; j < d; ++j) {
    cumulative += eig.values(d - j);
    if (cumulative < static_cast<double>(j) / static_cast<double>(d) + opt.slack * 0.2) continue;
    Mat u = eig.vectors.rightCols(j);
    for (double thr : {opt.snap, 1e-3, opt.slack}) {
      std::vector<Eigen::Index> near;
      for (Eigen::Index i = 0; i < pair.size(); ++i)
        if (distance_to_span(y.col(i), u) <= thr) near.push_back(i);
      if (near.empty()) continue;
      Mat cols(d, static_cast<Eigen::Index>(near.size()));
      for (std::size_t t = 0; t < near.size(); ++t) cols.col(static_cast<Eigen::Index>(t)) = pair.point(near[t]);
      Mat b = span_basis(cols);
      if (b.cols() == 0 || b.cols() >= d) continue;
      SubspaceWitness w = witness_for(pair, b);
      double excess = w.mass - static_cast<double>(b.cols()) / static_cast<double>(d);
      if (excess > best_excess) {
        best_excess = excess;
        best = std::move(w);
      }
    }
  }
  return best;
}

}  // namespace detail

// Whitening fixed point T <- (d Cov(X_T))^{-1/2} T with renormalized points.
inline ForsterResult forster_transform(const WeightedPointSet& pair, double eps, const ForsterOptions& opt = {}) {
  if (!(eps > 0 && eps < 1)) throw InvalidInput("eps must lie in (0,1)");
  const Eigen::Index d = pair.dim();
  const double dd = static_cast<double>(d);
  if (d == 1) return IsotropicTransform{Mat::Identity(1, 1), Mat::Identity(1, 1), 0.0};

  Mat span = span_basis(pair.points());
  if (span.cols() < d) {
    HeavySubspaceDetected h{witness_for(pair, span), false, Mat::Identity(d, d),
                            isotropy_residual(weighted_spectrum(pair).values), 0};
    h.verified = h.witness.mass > static_cast<double>(span.cols()) / dd + 1e-12;
    return h;
  }

  Mat t = Mat::Identity(d, d);
  Mat y(d, pair.size());
  double residual = 0;
  int it = 0;
  SymEigen eig;
  for (;; ++it) {
    y.noalias() = t * pair.points();
    for (Eigen::Index i = 0; i < y.cols(); ++i) y.col(i).normalize();
    eig = weighted_spectrum(y, pair.weights());
    residual = isotropy_residual(eig.values);
    if (residual <= eps) {
      Eigen::JacobiSVD<Mat> svd(t);
      return IsotropicTransform{Mat::Identity(d, d), t / svd.singularValues()(0), residual};
    }
    bool breakdown = eig.values(0) <= 0;
    bool check = breakdown || it + 1 >= opt.max_iter || (it >= 4 && (it - 4) % opt.check_every == 0);
    if (check) {
      if (auto w = detail::extract_heavy(pair, y, eig, opt)) return HeavySubspaceDetected{*w, true, t, residual, it};
    }
    if (breakdown || it + 1 >= opt.max_iter) break;
    Vec inv_sqrt = (dd * eig.values).cwiseSqrt().cwiseInverse();
    t = eig.vectors * inv_sqrt.asDiagonal() * eig.vectors.transpose() * t;
    t /= t.norm();
  }
  if (within_brute_force_cap(pair)) {
    if (auto w = heavy_subspace_witness(pair, true)) return HeavySubspaceDetected{*w, true, t, residual, it};
  }
  // No verified witness: report the top eigen-direction as an unverified candidate.
  Mat top = t.inverse() * eig.vectors.rightCols(1);
  return HeavySubspaceDetected{witness_for(pair, span_basis(top)), false, t, residual, it};
}

struct DenseSubspace {
  SubspaceWitness subspace;  // in the coordinates of the input pair
  IsotropicTransform transform;
  bool isotropic = true;     // false only when a non-convergent case had no verifiable witness
};

// Recurse into detected heavy subspaces until the restricted pair scales.
inline DenseSubspace dense_isotropic_subspace(const WeightedPointSet& pair, double eps,
                                              const ForsterOptions& opt = {}) {
  Mat basis = Mat::Identity(pair.dim(), pair.dim());
  std::vector<std::size_t> members(static_cast<std::size_t>(pair.size()));
  for (std::size_t i = 0; i < members.size(); ++i) members[i] = i;
  WeightedPointSet cur = pair;
  for (;;) {
    ForsterResult r = forster_transform(cur, eps, opt);
    auto finish = [&](const Mat& map, double residual, bool iso) {
      DenseSubspace out;
      out.subspace.basis = basis;
      out.subspace.member_indices = members;
      for (auto i : members) out.subspace.mass += pair.weight(static_cast<Eigen::Index>(i));
      out.transform = IsotropicTransform{basis, map, residual};
      out.isotropic = iso;
      return out;
    };
    if (auto* t = std::get_if<IsotropicTransform>(&r)) return finish(t->map, t->residual_eps, true);
    auto& h = std::get<HeavySubspaceDetected>(r);
    if (!h.verified || h.witness.k() >= cur.dim() || h.witness.member_indices.empty()) {
      Mat map = h.last_map.size() ? h.last_map : Mat::Identity(cur.dim(), cur.dim());
      return finish(map, h.last_residual, false);
    }
    const Mat& w = h.witness.basis;
    Mat coords(w.cols(), static_cast<Eigen::Index>(h.witness.member_indices.size()));
    Vec wts(coords.cols());
    std::vector<std::size_t> next;
    for (std::size_t j = 0; j < h.witness.member_indices.size(); ++j) {
      auto src = static_cast<Eigen::Index>(h.witness.member_indices[j]);
      auto jj = static_cast<Eigen::Index>(j);
      coords.col(jj) = (w.transpose() * cur.point(src)).normalized();
      wts(jj) = cur.weight(src);
      next.push_back(members[h.witness.member_indices[j]]);
    }
    basis = basis * w;
    members = std::move(next);
    cur = WeightedPointSet(std::move(coords), wts);
  }
}

}  // namespace ptloc
