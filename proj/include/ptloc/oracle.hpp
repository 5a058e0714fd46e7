#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>

#include "ptloc/core.hpp"
#include "ptloc/geometry.hpp"

namespace ptloc {

// Ternary answers sign(<q,h>+b) with 0 inside the floor. Binary answers
// never return 0: points on the hyperplane read as +.
enum class OracleMode { Ternary, Binary };

class QueryOracle {
 public:
  explicit QueryOracle(Hyperplane hidden, OracleMode mode = OracleMode::Ternary,
                       std::optional<std::uint64_t> budget = std::nullopt, double floor_scale = 1e-12)
      : hidden_(std::move(hidden)), mode_(mode), budget_(budget), floor_scale_(floor_scale) {
    normal_norm_ = std::sqrt(hidden_.normal.squaredNorm() + hidden_.bias * hidden_.bias);
  }

  Sign query(const Vec& q) {
    if (q.size() != hidden_.dim()) throw InvalidInput("query dimension mismatch");
    if (budget_ && queries_ >= *budget_) throw BudgetExhausted();
    ++queries_;
    double v = q.dot(hidden_.normal) + hidden_.bias;
    double qn = std::sqrt(q.squaredNorm() + (hidden_.bias != 0.0 ? 1.0 : 0.0));
    double floor = floor_scale_ * qn * normal_norm_;
    if (mode_ == OracleMode::Binary) return v < -floor ? Sign::Neg : Sign::Pos;
    if (v > floor) return Sign::Pos;
    if (v < -floor) return Sign::Neg;
    return Sign::Zero;
  }

  // Ground truth for the harness, same floor semantics as query() but not counted.
  Sign truth(const Vec& q) const {
    double v = q.dot(hidden_.normal) + hidden_.bias;
    double qn = std::sqrt(q.squaredNorm() + (hidden_.bias != 0.0 ? 1.0 : 0.0));
    double floor = floor_scale_ * qn * normal_norm_;
    if (v > floor) return Sign::Pos;
    if (v < -floor) return Sign::Neg;
    return mode_ == OracleMode::Binary ? Sign::Pos : Sign::Zero;
  }

  void note_oracle_call() { ++oracle_calls_; }

  std::uint64_t queries_used() const { return queries_; }
  std::uint64_t oracle_calls_used() const { return oracle_calls_; }
  std::optional<std::uint64_t> budget() const { return budget_; }
  void set_budget(std::optional<std::uint64_t> b) { budget_ = b; }
  const Hyperplane& hidden() const { return hidden_; }
  OracleMode mode() const { return mode_; }
  Eigen::Index dim() const { return hidden_.dim(); }

 private:
  Hyperplane hidden_;
  OracleMode mode_;
  std::optional<std::uint64_t> budget_;
  double floor_scale_;
  double normal_norm_ = 0;
  std::uint64_t queries_ = 0;
  std::uint64_t oracle_calls_ = 0;
};

inline constexpr double kLiftPerturbation = 1e-15;

// sign(<(x,a),(h,b)>) from one binary query of the base oracle.
inline Sign lifted_query(QueryOracle& oracle, const Vec& x, double alpha) {
  if (alpha == 0.0) alpha = kLiftPerturbation * std::max(1.0, x.norm());
  Sign s = oracle.query(x / alpha);
  return alpha > 0 ? s : s * Sign::Neg;
}

// Queries expressed in some coordinate system: q maps to the base query
// `map * q`, optionally through the lifting of a non-homogeneous oracle.
class QueryView {
 public:
  QueryView(QueryOracle& base) : base_(&base), dim_(base.dim()) {}  // NOLINT: implicit on purpose

  static QueryView lifted(QueryOracle& base) {
    QueryView v(base);
    v.lifted_ = true;
    v.dim_ = base.dim() + 1;
    return v;
  }

  QueryView restrict(const Mat& map) const {
    if (map.rows() != dim_) throw InvalidInput("restriction map has wrong row count");
    QueryView v(*this);
    v.map_ = std::make_shared<const Mat>(map_ ? Mat(*map_ * map) : map);
    v.dim_ = map.cols();
    return v;
  }

  Eigen::Index dim() const { return dim_; }
  QueryOracle& oracle() const { return *base_; }
  bool is_lifted() const { return lifted_; }

  // Coordinates in the space the base oracle (or its lifting) sees.
  Vec outer(const Vec& q) const { return map_ ? Vec(*map_ * q) : q; }

  Sign sign(const Vec& q) const {
    if (q.size() != dim_) throw InvalidInput("query dimension mismatch");
    Vec o = outer(q);
    if (!lifted_) return base_->query(o);
    Eigen::Index d = o.size() - 1;
    return lifted_query(*base_, o.head(d), o(d));
  }

  // Harness-side: the hidden normal as seen in this view's coordinates.
  Vec effective_normal() const {
    Vec n = lifted_ ? lift_normal(base_->hidden()) : base_->hidden().normal;
    return map_ ? Vec(map_->transpose() * n) : n;
  }

  Sign truth(const Vec& q) const {
    Vec o = outer(q);
    if (!lifted_) return base_->truth(o);
    Eigen::Index d = o.size() - 1;
    double a = o(d);
    if (a == 0.0) a = kLiftPerturbation * std::max(1.0, o.head(d).norm());
    Sign s = base_->truth(o.head(d) / a);
    return a > 0 ? s : s * Sign::Neg;
  }

 private:
  QueryOracle* base_;
  std::shared_ptr<const Mat> map_;
  bool lifted_ = false;
  Eigen::Index dim_;
};

inline Sign sign_query(const QueryView& view, const Vec& x) { return view.sign(x); }

}  // namespace ptloc
