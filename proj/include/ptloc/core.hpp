#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace ptloc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Sign : int { Neg = -1, Zero = 0, Pos = 1 };

// Per-point answer of a learner; Unknown is the "don't know" value.
enum class Label : int { Neg = -1, Zero = 0, Pos = 1, Unknown = 2 };

enum class Order { Lt, Eq, Gt };

inline Sign sign_of(double v) {
  if (v > 0) return Sign::Pos;
  if (v < 0) return Sign::Neg;
  return Sign::Zero;
}

inline Sign operator*(Sign a, Sign b) {
  return static_cast<Sign>(static_cast<int>(a) * static_cast<int>(b));
}

inline Label to_label(Sign s) { return static_cast<Label>(static_cast<int>(s)); }

inline int to_int(Sign s) { return static_cast<int>(s); }

inline char label_char(Label l) {
  switch (l) {
    case Label::Neg: return '-';
    case Label::Zero: return '0';
    case Label::Pos: return '+';
    default: return '?';
  }
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BudgetExhausted : Error {
  BudgetExhausted() : Error("query budget exhausted") {}
};
struct DegenerateHyperplane : Error {
  DegenerateHyperplane() : Error("hyperplane normal is zero") {}
};
struct RangeExceeded : Error {
  RangeExceeded() : Error("relative margin outside search range") {}
};
struct SizeLimitExceeded : Error {
  using Error::Error;
};
struct InvalidInput : Error {
  using Error::Error;
};
struct InvalidSpec : Error {
  using Error::Error;
};
struct IoFailure : Error {
  using Error::Error;
};
struct Infeasible : Error {
  using Error::Error;
};
struct GiveUp : Error {
  using Error::Error;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace ptloc
