#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "ptloc/core.hpp"
#include "ptloc/oracle.hpp"
#include "ptloc/random.hpp"

namespace ptloc {

struct MarginOracleConfig {
  double lambda = 20.0;

  explicit MarginOracleConfig(double l = 20.0) : lambda(l) {
    if (!(lambda >= 5.0)) throw InvalidInput("lambda must be at least 5");
  }
};

// x_S = sum g_i x_i over the sampled columns (repeats allowed).
inline Vec gaussian_representative(const Mat& points, const std::vector<std::size_t>& sample, Rng& rng) {
  if (sample.empty()) throw InvalidInput("empty sample");
  Vec acc = Vec::Zero(points.rows());
  for (std::size_t i : sample) acc.noalias() += rng.normal() * points.col(static_cast<Eigen::Index>(i));
  return acc;
}

inline Vec gaussian_representative(const std::vector<Vec>& s, Rng& rng) {
  if (s.empty()) throw InvalidInput("empty sample");
  Vec acc = Vec::Zero(s.front().size());
  for (const auto& x : s) acc.noalias() += rng.normal() * x;
  return acc;
}

// (a+b)(a-b) = a^2 - b^2, so two signs order |a| against |b|.
inline Order compare_abs_margin(const QueryView& view, const Vec& x, const Vec& y) {
  int s = to_int(view.sign(x + y)) * to_int(view.sign(x - y));
  if (s > 0) return Order::Gt;
  if (s < 0) return Order::Lt;
  return Order::Eq;
}

// Upper bound on comparisons per element used by median_abs_margin.
inline constexpr double kSelectionConstant = 24.0;

namespace detail {

class MarginComparator {
 public:
  MarginComparator(const QueryView& view, const std::vector<Vec>& c) : view_(view), c_(c) {}

  Order operator()(std::size_t a, std::size_t b) {
    if (a == b) return Order::Eq;
    bool flip = a > b;
    auto key = flip ? std::make_pair(b, a) : std::make_pair(a, b);
    auto it = cache_.find(key);
    Order o;
    if (it != cache_.end()) {
      o = it->second;
    } else {
      o = compare_abs_margin(view_, c_[key.first], c_[key.second]);
      cache_.emplace(key, o);
      ++comparisons_;
    }
    if (!flip) return o;
    return o == Order::Lt ? Order::Gt : (o == Order::Gt ? Order::Lt : Order::Eq);
  }

  bool less(std::size_t a, std::size_t b) { return (*this)(a, b) == Order::Lt; }
  std::size_t comparisons() const { return comparisons_; }

 private:
  const QueryView& view_;
  const std::vector<Vec>& c_;
  std::map<std::pair<std::size_t, std::size_t>, Order> cache_;
  std::size_t comparisons_ = 0;
};

inline std::size_t median_of_small(MarginComparator& cmp, std::vector<std::size_t> v) {
  // insertion sort, stable on index ties
  for (std::size_t i = 1; i < v.size(); ++i)
    for (std::size_t j = i; j > 0 && cmp.less(v[j], v[j - 1]); --j) std::swap(v[j], v[j - 1]);
  return v[(v.size() - 1) / 2];
}

// Element of rank `target` (0-based) in `work`; returns any member of the
// equal-value class holding that rank, choosing the lowest index.
inline std::size_t select_rank(MarginComparator& cmp, std::vector<std::size_t> work, std::size_t target,
                               bool force_mom) {
  const std::size_t budget = 3 * work.size();
  std::size_t spent = 0;
  for (;;) {
    if (work.size() == 1) return work[0];
    std::size_t pivot;
    if (!force_mom && spent < budget) {
      std::size_t a = work.front(), b = work[work.size() / 2], c = work.back();
      pivot = median_of_small(cmp, {a, b, c});
    } else {
      std::vector<std::size_t> medians;
      for (std::size_t i = 0; i < work.size(); i += 5) {
        std::vector<std::size_t> g(work.begin() + static_cast<std::ptrdiff_t>(i),
                                   work.begin() + static_cast<std::ptrdiff_t>(std::min(i + 5, work.size())));
        medians.push_back(median_of_small(cmp, g));
      }
      pivot = select_rank(cmp, medians, (medians.size() - 1) / 2, true);
    }
    std::vector<std::size_t> lt, eq, gt;
    for (std::size_t e : work) {
      Order o = cmp(e, pivot);
      if (o == Order::Lt) lt.push_back(e);
      else if (o == Order::Gt) gt.push_back(e);
      else eq.push_back(e);
    }
    spent += work.size();
    if (target < lt.size()) {
      work = std::move(lt);
    } else if (target < lt.size() + eq.size()) {
      return *std::min_element(eq.begin(), eq.end());
    } else {
      target -= lt.size() + eq.size();
      work = std::move(gt);
    }
  }
}

}  // namespace detail

// Index of a lower median of |<c_i,h>|, ties toward the lowest index.
inline std::size_t median_abs_margin(const QueryView& view, const std::vector<Vec>& candidates) {
  if (candidates.empty()) throw InvalidInput("no candidates");
  if (candidates.size() == 1) return 0;
  detail::MarginComparator cmp(view, candidates);
  std::vector<std::size_t> idx(candidates.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return detail::select_rank(cmp, idx, (candidates.size() + 1) / 2 - 1, false);
}

// gamma with <w,h> = gamma' <x_ref,h>, |gamma - gamma'| <= tol, by bisection
// on sign(<w - a x_ref, h>) over a in [-cap, cap].
inline double relative_margin_search(const QueryView& view, const Vec& w, const Vec& x_ref, double tol,
                                     double range_cap, std::optional<Sign> ref_sign = std::nullopt) {
  if (!(tol > 0) || !(range_cap >= 1)) throw InvalidInput("bad tolerance or range");
  Sign s = ref_sign ? *ref_sign : view.sign(x_ref);
  if (s == Sign::Zero) throw InvalidInput("reference point lies on the hyperplane");
  // g(a) = s * sign(<w,h> - a <x_ref,h>) is nonincreasing in a
  auto g = [&](double a) { return to_int(s * view.sign(w - a * x_ref)); };
  double lo = -range_cap, hi = range_cap;
  int glo = g(lo);
  if (glo == 0) return lo;
  if (glo < 0) throw RangeExceeded();
  int ghi = g(hi);
  if (ghi == 0) return hi;
  if (ghi > 0) throw RangeExceeded();
  while (hi - lo > 2 * tol) {
    double mid = 0.5 * (lo + hi);
    int gm = g(mid);
    if (gm == 0) return mid;
    if (gm > 0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline std::size_t relative_margin_query_bound(double tol, double range_cap) {
  return static_cast<std::size_t>(std::ceil(std::log2(2 * range_cap / tol))) + 2;
}

}  // namespace ptloc
