#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <vector>

#include "ptloc/core.hpp"
#include "ptloc/geometry.hpp"
#include "ptloc/isotropy.hpp"
#include "ptloc/margin_tools.hpp"
#include "ptloc/random.hpp"
#include "ptloc/structure_search.hpp"

namespace ptloc {

struct SmallMarginCertificate {
  std::vector<std::size_t> sample;
  Vec representative;
  bool accepted = false;
};

struct ReducedSubspace {
  Mat v_basis;  // small-margin subspace V
  Mat w_basis;  // its orthogonal complement
  double eigen_floor = 0;
  std::vector<SmallMarginCertificate> certificates;

  // Distinct point indices behind the accepted samples.
  std::vector<std::size_t> small_points() const {
    std::set<std::size_t> s;
    for (const auto& c : certificates)
      if (c.accepted) s.insert(c.sample.begin(), c.sample.end());
    return {s.begin(), s.end()};
  }
};

struct DimReduceParams {
  double c1 = 8;
};

// Accept S when |<x_S,h>| <= (lambda^2/ell) |<x_ref,h>|.
inline SmallMarginCertificate small_margin_accept(const QueryView& view, const WeightedPointSet& pair,
                                                  std::vector<std::size_t> sample, const Vec& x_ref, double ell,
                                                  double lambda, Rng& rng) {
  SmallMarginCertificate c;
  c.representative = gaussian_representative(pair.points(), sample, rng);
  view.oracle().note_oracle_call();
  c.sample = std::move(sample);
  Order o = compare_abs_margin(view, c.representative, (lambda * lambda / ell) * x_ref);
  c.accepted = o != Order::Gt;
  return c;
}

// Eigenvectors of a symmetric matrix with eigenvalue >= floor.
inline Mat top_eigenspace(const Mat& m, double floor) {
  SymEigen e = sym_eigen(m);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < e.values.size(); ++i)
    if (e.values(i) >= floor) keep.push_back(i);
  Mat b(m.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) b.col(static_cast<Eigen::Index>(j)) = e.vectors.col(keep[j]);
  return b;
}

inline Mat orthogonal_complement(const Mat& basis, Eigen::Index d) {
  if (basis.cols() == 0) return Mat::Identity(d, d);
  if (basis.cols() >= d) return Mat(d, 0);
  Eigen::HouseholderQR<Mat> qr(basis);
  Mat q = qr.householderQ() * Mat::Identity(d, d);
  return q.rightCols(d - basis.cols());
}

inline std::optional<ReducedSubspace> dim_reduce(const QueryView& view, const WeightedPointSet& pair,
                                                 const Vec& x_ref, const MarginOracleConfig& mcfg,
                                                 const StructureParams& params, double k, Rng& rng,
                                                 const DimReduceParams& dp = {}) {
  const Eigen::Index d = pair.dim();
  const double dd = static_cast<double>(d);
  if (!(k < dd / 10.0)) throw InvalidInput("dim_reduce requires k < d/10");
  const int outer = std::max(1, static_cast<int>(std::ceil(std::log2(1.0 / params.p))));
  const auto inner = static_cast<std::size_t>(std::ceil(dp.c1 * k * std::log(dd)));
  const auto size = static_cast<std::size_t>(std::ceil(3.0 * dd / k));
  const double floor = 1.0 / (4.0 * dd);
  IndexSampler sampler(pair.weights());
  for (int round = 0; round < outer; ++round) {
    ReducedSubspace out;
    out.eigen_floor = floor;
    std::set<std::size_t> union_set;
    for (std::size_t j = 0; j < std::max<std::size_t>(1, inner); ++j) {
      std::vector<std::size_t> s(size);
      for (auto& e : s) e = sampler(rng);
      auto cert = small_margin_accept(view, pair, std::move(s), x_ref, params.ell, mcfg.lambda, rng);
      if (cert.accepted) union_set.insert(cert.sample.begin(), cert.sample.end());
      out.certificates.push_back(std::move(cert));
    }
    Mat cov = Mat::Zero(d, d);
    for (auto i : union_set) cov.noalias() += pair.point(static_cast<Eigen::Index>(i)) * pair.point(static_cast<Eigen::Index>(i)).transpose();
    if (!union_set.empty()) cov /= static_cast<double>(union_set.size());
    Mat v = top_eigenspace(cov, floor);
    if (static_cast<double>(v.cols()) >= dd - 10.0 * k) {
      out.v_basis = v;
      out.w_basis = orthogonal_complement(v, d);
      return out;
    }
  }
  return std::nullopt;
}

}  // namespace ptloc
