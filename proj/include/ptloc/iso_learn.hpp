#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ptloc/core.hpp"
#include "ptloc/dim_reduce.hpp"
#include "ptloc/geometry.hpp"
#include "ptloc/margin_tools.hpp"
#include "ptloc/random.hpp"
#include "ptloc/structure_search.hpp"

namespace ptloc {

// Ratio between a reference margin and the small-margin points that
// inference in a d-dimensional frame can tolerate: 4d from the covariance
// floor, times twice the inference slack 3 lambda sqrt(10 d).
inline double verification_constant(double d, double lambda) {
  return 24.0 * d * lambda * std::sqrt(10.0 * d);
}

struct IsoLearnConfig {
  double lambda = 20;
  bool theory = false;
  std::optional<double> ell;             // structure gap override
  std::optional<double> dim_reduce_ell;  // acceptance override for dim_reduce
  double dim_reduce_ratio = 10;          // dim_reduce runs when k < d / ratio
  int range_doublings = 6;
  double budget_scale = 64;
};

inline double gamma_tolerance(double d, double lambda) {
  return 1.0 / (3.0 * std::sqrt(10.0) * lambda * std::pow(d, 1.5));
}
inline double decision_threshold(double d, double lambda) { return 2.0 / (3.0 * lambda * std::sqrt(10.0 * d)); }
inline double gamma_range_cap(double d, double lambda) { return 2.0 * lambda * std::sqrt(10.0 * d); }

enum class IsoStatus { AllZero, Inferred, Aborted };

struct IsoLearnResult {
  PartialLabeling labeling;
  IsoStatus status = IsoStatus::Aborted;
  std::optional<StructureResult> structure;
  std::optional<ReducedSubspace> reduced;
  Vec x_ref;
  Sign ref_sign = Sign::Zero;
  double k = 0;
  double threshold = 0;
  std::vector<double> gamma;
  Mat w_basis;
  std::uint64_t queries = 0;
  std::string abort_reason;
};

enum class ZeroTest { AllZero, Nonzero };

inline ZeroTest zero_hyperplane_test(const QueryView& view, const WeightedPointSet& pair, Rng& rng) {
  Vec g = Vec::Zero(pair.dim());
  for (Eigen::Index i = 0; i < pair.size(); ++i) g.noalias() += rng.normal() * pair.point(i);
  if (view.sign(g) != Sign::Zero) return ZeroTest::Nonzero;
  for (Eigen::Index i = 0; i < pair.dim(); ++i)
    if (view.sign(Vec::Unit(pair.dim(), i)) != Sign::Zero) return ZeroTest::Nonzero;
  return ZeroTest::AllZero;
}

inline IsoLearnResult iso_learn(const QueryView& view, const WeightedPointSet& pair, const IsoLearnConfig& cfg, double p,
                                Rng& rng) {
  const std::uint64_t q0 = view.oracle().queries_used();
  const Eigen::Index d = pair.dim();
  const double dd = static_cast<double>(d);
  const auto n = static_cast<std::size_t>(pair.size());
  MarginOracleConfig mcfg(cfg.lambda);
  const double lambda = mcfg.lambda;

  IsoLearnResult res;
  res.labeling = PartialLabeling(n);
  auto done = [&](IsoStatus s, std::string why = {}) {
    res.status = s;
    res.abort_reason = std::move(why);
    res.queries = view.oracle().queries_used() - q0;
    if (s == IsoStatus::Aborted) res.labeling = PartialLabeling(n);
    return res;
  };

  Rng zr = rng.derive("zero_test");
  if (zero_hyperplane_test(view, pair, zr) == ZeroTest::AllZero) {
    for (auto& l : res.labeling.labels) l = Label::Zero;
    res.k = dd;
    return done(IsoStatus::AllZero);
  }

  const double cap = cfg.budget_scale * dd * std::max(1.0, std::log2(dd)) * std::log2(std::max(2.0, dd * lambda / p));
  auto over_budget = [&] { return static_cast<double>(view.oracle().queries_used() - q0) > cap; };

  StructureParams params =
      cfg.theory ? StructureParams::theory(d, p / 2, lambda) : StructureParams::practical(d, p / 2);
  if (cfg.ell) params.ell = *cfg.ell;
  Rng sr = rng.derive("structure");
  res.structure = structure_search(view, pair, mcfg, params, sr);
  res.x_ref = res.structure->x_ref;
  res.k = res.structure->k;
  if (over_budget()) return done(IsoStatus::Aborted, "budget");

  res.ref_sign = view.sign(res.x_ref);
  if (res.ref_sign == Sign::Zero) return done(IsoStatus::Aborted, "reference on hyperplane");

  // LargeMargin results carry k >= 2d/5, so only a gap can trigger this.
  if (res.structure->kind == StructureKind::MarginGap && res.k < dd / cfg.dim_reduce_ratio && d >= 4) {
    StructureParams dp = params;
    dp.ell = cfg.dim_reduce_ell ? *cfg.dim_reduce_ell
                                : std::max(params.ell, lambda * lambda * lambda * verification_constant(dd, lambda));
    // a ratio below 10 forces the reduction; k is then capped to keep its precondition
    double kk = std::min(res.k, 0.999 * dd / 10.0);
    Rng dr = rng.derive("dim_reduce");
    res.reduced = dim_reduce(view, pair, res.x_ref, mcfg, dp, kk, dr);
    if (!res.reduced) return done(IsoStatus::Aborted, "dim_reduce failed");
    res.w_basis = res.reduced->w_basis;
  } else {
    res.w_basis = Mat::Identity(d, d);
  }
  if (over_budget()) return done(IsoStatus::Aborted, "budget");

  const double tol = gamma_tolerance(dd, lambda);
  res.threshold = decision_threshold(dd, lambda);
  for (Eigen::Index i = 0; i < res.w_basis.cols(); ++i) {
    double range = gamma_range_cap(dd, lambda);
    std::optional<double> g;
    for (int attempt = 0; attempt <= cfg.range_doublings && !g; ++attempt, range *= 2) {
      try {
        g = relative_margin_search(view, res.w_basis.col(i), res.x_ref, tol, range, res.ref_sign);
      } catch (const RangeExceeded&) {
      }
    }
    if (!g) return done(IsoStatus::Aborted, "range exceeded");
    res.gamma.push_back(*g);
    if (over_budget()) return done(IsoStatus::Aborted, "budget");
  }

  if (res.w_basis.cols() > 0) {
    Vec gamma = Eigen::Map<const Vec>(res.gamma.data(), static_cast<Eigen::Index>(res.gamma.size()));
    Vec scores = pair.points().transpose() * (res.w_basis * gamma);
    for (std::size_t i = 0; i < n; ++i) {
      double s = scores(static_cast<Eigen::Index>(i));
      if (std::abs(s) >= res.threshold) {
        res.labeling.labels[i] = to_label(res.ref_sign * sign_of(s));
        res.labeling.rel_margin[i] = std::abs(s);
        res.labeling.ref_index[i] = 0;
      }
    }
  }
  return done(IsoStatus::Inferred);
}

}  // namespace ptloc
