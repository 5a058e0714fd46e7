#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ptloc/core.hpp"
#include "ptloc/geometry.hpp"
#include "ptloc/margin_tools.hpp"
#include "ptloc/random.hpp"

namespace ptloc {

enum class StructureKind { MarginGap, LargeMargin };

struct StructureResult {
  StructureKind kind = StructureKind::LargeMargin;
  Vec x_ref;
  double k = 0;
  int level = 0;
};

inline std::size_t pow2_at_least(double v) {
  std::size_t m = 1;
  while (static_cast<double>(m) < v) m <<= 1;
  return m;
}

struct StructureParams {
  double ell = 100;
  double p = 0.01;
  std::size_t m = 16;
  std::size_t r = 1;
  double c_structured = 5;

  static std::size_t subsets_for(std::size_t m, double p) {
    return static_cast<std::size_t>(std::ceil(8.0 * std::log(4.0 * std::log2(static_cast<double>(m)) / p)));
  }

  // Practical gap parameter max(100, 4d).
  static StructureParams practical(Eigen::Index d, double p) {
    StructureParams s;
    s.ell = std::max(100.0, 4.0 * static_cast<double>(d));
    s.p = p;
    s.m = pow2_at_least(10.0 * static_cast<double>(d));
    s.r = std::max<std::size_t>(1, subsets_for(s.m, p));
    return s;
  }

  // Asymptotic choice: ell of order d^{5/2} lambda^4.
  static StructureParams theory(Eigen::Index d, double p, double lambda) {
    StructureParams s = practical(d, p);
    double dd = static_cast<double>(d);
    s.ell = std::max(s.ell, std::sqrt(10.0) * std::pow(dd, 2.5) * std::pow(lambda, 4));
    return s;
  }

  void validate() const {
    if (!(ell > 2)) throw InvalidInput("ell must exceed 2");
    if (r < 1) throw InvalidInput("r must be positive");
    if ((m & (m - 1)) != 0) throw InvalidInput("m must be a power of two");
  }
};

inline bool check_gap(const QueryView& view, const Vec& a, const Vec& b, double ell) {
  return compare_abs_margin(view, a, ell * b) == Order::Gt;
}

inline double structure_k(int level, Eigen::Index d) {
  return std::min(std::ldexp(1.0, level + 1) / 5.0, static_cast<double>(d));
}

// Median representatives of r samples per level, sample sizes m/2^i,
// then the first level whose median beats the next one by a factor ell.
inline StructureResult structure_search(const QueryView& view, const WeightedPointSet& pair,
                                        const MarginOracleConfig&, const StructureParams& params, Rng& rng) {
  params.validate();
  if (pair.size() < 1) throw InvalidInput("structure_search: empty pair");
  const Eigen::Index d = pair.dim();
  IndexSampler sampler(pair.weights());
  std::vector<Vec> medians;
  std::vector<std::size_t> sample;
  for (int i = 0; std::ldexp(1.0, i) < 2.0 * static_cast<double>(d); ++i) {
    std::size_t size = std::max<std::size_t>(1, params.m >> i);
    std::vector<Vec> reps;
    reps.reserve(params.r);
    for (std::size_t j = 0; j < params.r; ++j) {
      sample.resize(size);
      for (auto& s : sample) s = sampler(rng);
      reps.push_back(gaussian_representative(pair.points(), sample, rng));
      view.oracle().note_oracle_call();
    }
    medians.push_back(reps[median_abs_margin(view, reps)]);
  }
  int i = 0;
  for (; std::ldexp(1.0, i) < static_cast<double>(d); ++i) {
    if (check_gap(view, medians[static_cast<std::size_t>(i)], medians[static_cast<std::size_t>(i) + 1], params.ell))
      return {StructureKind::MarginGap, medians[static_cast<std::size_t>(i)], structure_k(i, d), i};
  }
  return {StructureKind::LargeMargin, medians[static_cast<std::size_t>(i)], structure_k(i, d), i};
}

}  // namespace ptloc
