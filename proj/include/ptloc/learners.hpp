#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ptloc/core.hpp"
#include "ptloc/geometry.hpp"
#include "ptloc/iso_learn.hpp"
#include "ptloc/isotropy.hpp"
#include "ptloc/oracle.hpp"
#include "ptloc/random.hpp"

namespace ptloc {

// Calibrated once from partial_learn query costs; see tools/ptloc_cli.cpp (bench --calibrate).
inline constexpr double kWeakBudgetConstant = 202.0;

struct LearnerConfig {
  IsoLearnConfig iso;
  double iso_eps = 0.25;
  ForsterOptions forster;
  std::optional<double> p;  // default min(1/8, d^-3)
  double weak_budget_c = kWeakBudgetConstant;
  double c_T = 40;
  double c_n = 8;
  bool keep_transcripts = false;
};

inline double default_failure_p(Eigen::Index d) {
  double dd = static_cast<double>(d);
  return std::min(0.125, 1.0 / (dd * dd * dd));
}

inline double log2_floor1(double d) { return std::max(1.0, std::log2(d)); }

// What a verifier needs to re-check one partial_learn round.
struct RoundTranscript {
  IsotropicTransform transform;  // host coordinates -> round frame
  Vec ref_host;                  // reference as a host-space query vector
  Sign ref_sign = Sign::Zero;
  double frame_dim = 0;
  double lambda = 0;
  IsoStatus status = IsoStatus::Aborted;
  bool reduced = false;
  std::vector<std::size_t> small_points;  // indices into the round's input pair
  std::vector<std::size_t> labeled;       // indices into the round's input pair
  std::vector<double> certificates;       // aligned with `labeled`; NaN for zero-test labels
};

struct PartialLearnResult {
  PartialLabeling labeling;
  RoundTranscript transcript;
  IsoLearnResult iso;
  DenseSubspace dense;
  double k = 0;
  double coverage = 0;
  std::uint64_t queries = 0;
};

inline double effective_lambda(const LearnerConfig& cfg, Eigen::Index d, double p) {
  if (cfg.iso.theory) return std::max(cfg.iso.lambda, 10.0 * static_cast<double>(d) / p);
  return std::max(20.0, cfg.iso.lambda);
}

inline PartialLearnResult partial_learn(const QueryView& view, const WeightedPointSet& pair, double p,
                                        const LearnerConfig& cfg, Rng& rng) {
  const std::uint64_t q0 = view.oracle().queries_used();
  PartialLearnResult out;
  out.dense = dense_isotropic_subspace(pair, cfg.iso_eps, cfg.forster);
  const IsotropicTransform& t = out.dense.transform;
  const auto& members = out.dense.subspace.member_indices;

  Mat y(t.k(), static_cast<Eigen::Index>(members.size()));
  Vec w(y.cols());
  for (std::size_t j = 0; j < members.size(); ++j) {
    auto jj = static_cast<Eigen::Index>(j);
    y.col(jj) = t.apply(pair.point(static_cast<Eigen::Index>(members[j])));
    w(jj) = pair.weight(static_cast<Eigen::Index>(members[j]));
  }
  WeightedPointSet tpair(std::move(y), w);
  Mat qmap = t.query_map();
  QueryView sub = view.restrict(qmap);

  IsoLearnConfig icfg = cfg.iso;
  icfg.lambda = effective_lambda(cfg, pair.dim(), p);
  Rng ir = rng.derive("iso_learn");
  out.iso = iso_learn(sub, tpair, icfg, p / 2, ir);

  out.labeling = PartialLabeling(static_cast<std::size_t>(pair.size()));
  RoundTranscript& tr = out.transcript;
  tr.transform = t;
  tr.frame_dim = static_cast<double>(t.k());
  tr.lambda = icfg.lambda;
  tr.status = out.iso.status;
  if (out.iso.x_ref.size()) tr.ref_host = qmap * out.iso.x_ref;
  tr.ref_sign = out.iso.ref_sign;
  tr.reduced = out.iso.reduced.has_value();
  if (out.iso.reduced)
    for (auto s : out.iso.reduced->small_points()) tr.small_points.push_back(members[tpair.source(static_cast<Eigen::Index>(s))]);
  for (Eigen::Index j = 0; j < tpair.size(); ++j) {
    auto jj = static_cast<std::size_t>(j);
    if (!out.iso.labeling.known(jj)) continue;
    std::size_t orig = members[tpair.source(j)];
    out.labeling.labels[orig] = out.iso.labeling.labels[jj];
    out.labeling.rel_margin[orig] = out.iso.labeling.rel_margin[jj];
    out.labeling.ref_index[orig] = 0;
    tr.labeled.push_back(orig);
    tr.certificates.push_back(out.iso.labeling.rel_margin[jj]);
  }
  out.k = out.iso.status == IsoStatus::Aborted ? 0.0 : out.iso.k;
  out.coverage = out.labeling.coverage(pair.weights());
  out.queries = view.oracle().queries_used() - q0;
  return out;
}

struct RoundStat {
  double k = 0;
  std::uint64_t queries = 0;
  double coverage = 0;
};

struct WeakLearnResult {
  PartialLabeling labeling;
  std::vector<RoundStat> rounds;
  std::vector<RoundTranscript> transcripts;  // filled when keep_transcripts
  std::vector<std::vector<std::size_t>> round_inputs;  // pair indices fed to each round
  std::uint64_t queries = 0;
  double budget = 0;
};

inline double weak_budget(Eigen::Index d, double c) {
  double l = log2_floor1(static_cast<double>(d));
  return 5.0 * c * static_cast<double>(d) * l * l;
}

// Rerun partial_learn on the uninferred remainder until the budget is spent
// or every point carries a label.
inline WeakLearnResult weak_learn(const QueryView& view, const WeightedPointSet& pair, const LearnerConfig& cfg,
                                  Rng& rng) {
  const std::uint64_t q0 = view.oracle().queries_used();
  const auto n = static_cast<std::size_t>(pair.size());
  const double p = cfg.p ? *cfg.p : default_failure_p(pair.dim());
  WeakLearnResult out;
  out.labeling = PartialLabeling(n);
  out.budget = weak_budget(pair.dim(), cfg.weak_budget_c);
  std::vector<std::size_t> remaining(n);
  for (std::size_t i = 0; i < n; ++i) remaining[i] = i;
  int round = 0;
  while (!remaining.empty() && static_cast<double>(view.oracle().queries_used() - q0) <= out.budget) {
    Mat pts(pair.dim(), static_cast<Eigen::Index>(remaining.size()));
    Vec w(pts.cols());
    for (std::size_t j = 0; j < remaining.size(); ++j) {
      pts.col(static_cast<Eigen::Index>(j)) = pair.point(static_cast<Eigen::Index>(remaining[j]));
      w(static_cast<Eigen::Index>(j)) = pair.weight(static_cast<Eigen::Index>(remaining[j]));
    }
    WeightedPointSet sub(std::move(pts), w);
    Rng pr = rng.derive("partial_learn");
    PartialLearnResult pl = partial_learn(view, sub, p, cfg, pr);
    std::vector<std::size_t> next;
    for (Eigen::Index j = 0; j < sub.size(); ++j) {
      std::size_t orig = remaining[sub.source(j)];
      auto jj = static_cast<std::size_t>(j);
      if (pl.labeling.known(jj)) {
        out.labeling.labels[orig] = pl.labeling.labels[jj];
        out.labeling.rel_margin[orig] = pl.labeling.rel_margin[jj];
        out.labeling.ref_index[orig] = round;
      } else {
        next.push_back(orig);
      }
    }
    out.rounds.push_back({pl.k, pl.queries, pl.coverage});
    if (cfg.keep_transcripts) {
      RoundTranscript tr = pl.transcript;
      for (auto& s : tr.small_points) s = remaining[sub.source(static_cast<Eigen::Index>(s))];
      for (auto& s : tr.labeled) s = remaining[sub.source(static_cast<Eigen::Index>(s))];
      out.transcripts.push_back(std::move(tr));
      out.round_inputs.push_back(remaining);
    }
    remaining = std::move(next);
    ++round;
  }
  out.queries = view.oracle().queries_used() - q0;
  return out;
}

// Weights 11^{-count}; only the exponents are stored so long runs do not underflow.
struct WeightState {
  std::vector<int> counts;
  int round = 0;

  explicit WeightState(std::size_t n = 0) : counts(n, 0) {}
  double weight(std::size_t i) const { return std::pow(11.0, -counts[i]); }
  double log_weight(std::size_t i) const { return -counts[i] * std::log(11.0); }

  // Normalized distribution; entries more than ~300 halvings below the
  // heaviest point come out as exact zeros.
  Vec distribution() const {
    int lo = *std::min_element(counts.begin(), counts.end());
    Vec w(static_cast<Eigen::Index>(counts.size()));
    for (std::size_t i = 0; i < counts.size(); ++i) w(static_cast<Eigen::Index>(i)) = std::pow(11.0, lo - counts[i]);
    return w / w.sum();
  }
};

struct RunRecord {
  std::uint64_t queries_total = 0;
  std::uint64_t oracle_calls = 0;
  std::size_t rounds = 0;
  std::vector<RoundStat> per_round;
  std::uint64_t verification_queries = 0;
  long errors_vs_truth = -1;  // filled by the harness
};

struct BoostResult {
  std::vector<Sign> labels;
  bool ok = true;
  std::string failure;
  bool tie_flag = false;
  RunRecord record;
  WeightState weights;
  std::vector<std::vector<std::uint32_t>> labeled_per_round;
  std::vector<std::array<int, 3>> votes;  // (-, 0, +)
};

inline std::size_t boost_rounds(std::size_t n, double delta, double c_t) {
  return static_cast<std::size_t>(std::ceil(c_t * std::log(static_cast<double>(n) / delta)));
}

inline BoostResult boost(const QueryView& view, const Mat& raw_points, double delta, const LearnerConfig& cfg, Rng& rng) {
  if (!(delta > 0 && delta < 1)) throw InvalidInput("delta must lie in (0,1)");
  if (raw_points.rows() != view.dim()) throw InvalidInput("point dimension mismatch");
  const std::uint64_t q0 = view.oracle().queries_used();
  const std::uint64_t c0 = view.oracle().oracle_calls_used();
  const auto n = static_cast<std::size_t>(raw_points.cols());
  BoostResult out;
  out.labels.assign(n, Sign::Zero);
  out.votes.assign(n, {0, 0, 0});
  std::vector<int> first_vote(n, 0);
  std::vector<bool> has_vote(n, false);

  std::vector<std::size_t> active;
  Mat pts = normalize_columns(raw_points);
  for (std::size_t i = 0; i < n; ++i)
    if (raw_points.col(static_cast<Eigen::Index>(i)).norm() > 0) active.push_back(i);
  Mat act(raw_points.rows(), static_cast<Eigen::Index>(active.size()));
  for (std::size_t j = 0; j < active.size(); ++j) act.col(static_cast<Eigen::Index>(j)) = pts.col(static_cast<Eigen::Index>(active[j]));

  out.weights = WeightState(active.size());
  const std::size_t t_rounds = active.empty() ? 0 : boost_rounds(n, delta, cfg.c_T);
  for (std::size_t t = 0; t < t_rounds; ++t) {
    WeightedPointSet pair(act, out.weights.distribution());
    Rng wr = rng.derive("weak_learn");
    WeakLearnResult wl = weak_learn(view, pair, cfg, wr);
    std::vector<std::uint32_t> labeled;
    for (Eigen::Index j = 0; j < pair.size(); ++j) {
      auto jj = static_cast<std::size_t>(j);
      if (!wl.labeling.known(jj)) continue;
      std::size_t a = pair.source(j);
      out.weights.counts[a] += 1;
      labeled.push_back(static_cast<std::uint32_t>(a));
      int v = static_cast<int>(wl.labeling.labels[jj]);
      out.votes[active[a]][static_cast<std::size_t>(v + 1)] += 1;
      if (!has_vote[active[a]]) {
        has_vote[active[a]] = true;
        first_vote[active[a]] = v;
      }
    }
    out.weights.round += 1;
    double k_sum = 0;
    for (const auto& r : wl.rounds) k_sum += r.k;
    out.record.per_round.push_back({k_sum, wl.queries, wl.labeling.coverage(pair.weights())});
    out.labeled_per_round.push_back(std::move(labeled));
  }

  for (std::size_t j = 0; j < active.size(); ++j) {
    std::size_t i = active[j];
    const auto& v = out.votes[i];
    int best = std::max({v[0], v[1], v[2]});
    if (best == 0) {
      out.ok = false;
      out.failure = "NoVote: point " + std::to_string(i) + " never labeled";
      continue;
    }
    int winners = (v[0] == best) + (v[1] == best) + (v[2] == best);
    if (winners == 1) {
      out.labels[i] = v[0] == best ? Sign::Neg : (v[1] == best ? Sign::Zero : Sign::Pos);
    } else if (v[1] == best) {
      out.ok = false;
      out.failure = "NoVote: zero/nonzero tie at point " + std::to_string(i);
    } else {
      out.labels[i] = static_cast<Sign>(first_vote[i] == 0 ? 1 : first_vote[i]);
      out.tie_flag = true;
    }
  }
  out.record.rounds = t_rounds;
  out.record.queries_total = view.oracle().queries_used() - q0;
  out.record.oracle_calls = view.oracle().oracle_calls_used() - c0;
  return out;
}

// Minimum-norm point of the convex hull of the columns (Wolfe's method).
inline Vec min_norm_point(const Mat& z, int max_iter = 100000) {
  const Eigen::Index n = z.cols();
  if (n == 0) throw InvalidInput("min_norm_point: no points");
  double scale = 0;
  Eigen::Index start = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = z.col(i).squaredNorm();
    if (s > scale) scale = s;
    if (s < z.col(start).squaredNorm()) start = i;
  }
  const double tol = 1e-12 * std::max(scale, 1e-300);
  std::vector<Eigen::Index> set{start};
  std::vector<double> lam{1.0};
  Vec x = z.col(start);
  for (int it = 0; it < max_iter; ++it) {
    Vec dots = z.transpose() * x;
    Eigen::Index j;
    dots.minCoeff(&j);
    if (x.squaredNorm() - dots(j) <= tol) break;
    if (std::find(set.begin(), set.end(), j) != set.end()) break;
    set.push_back(j);
    lam.push_back(0.0);
    for (;;) {
      const auto s = static_cast<Eigen::Index>(set.size());
      Mat zs(z.rows(), s);
      for (Eigen::Index c = 0; c < s; ++c) zs.col(c) = z.col(set[static_cast<std::size_t>(c)]);
      Mat sys = Mat::Zero(s + 1, s + 1);
      sys.topLeftCorner(s, s) = zs.transpose() * zs;
      sys.block(0, s, s, 1).setOnes();
      sys.block(s, 0, 1, s).setOnes();
      Vec rhs = Vec::Zero(s + 1);
      rhs(s) = 1.0;
      Vec sol = sys.completeOrthogonalDecomposition().solve(rhs);
      Vec a = sol.head(s);
      if (a.minCoeff() > 1e-14) {
        for (Eigen::Index c = 0; c < s; ++c) lam[static_cast<std::size_t>(c)] = a(c);
        x = zs * a;
        break;
      }
      double theta = 1.0;
      for (Eigen::Index c = 0; c < s; ++c) {
        double l = lam[static_cast<std::size_t>(c)];
        if (a(c) <= 1e-14 && l - a(c) > 0) theta = std::min(theta, l / (l - a(c)));
      }
      std::vector<Eigen::Index> nset;
      std::vector<double> nlam;
      double total = 0;
      for (Eigen::Index c = 0; c < s; ++c) {
        double l = theta * a(c) + (1 - theta) * lam[static_cast<std::size_t>(c)];
        if (l > 1e-14) {
          nset.push_back(set[static_cast<std::size_t>(c)]);
          nlam.push_back(l);
          total += l;
        }
      }
      if (nset.empty()) {
        nset.push_back(j);
        nlam.push_back(1.0);
        total = 1.0;
      }
      for (auto& l : nlam) l /= total;
      set = std::move(nset);
      lam = std::move(nlam);
      x = Vec::Zero(z.rows());
      for (std::size_t c = 0; c < set.size(); ++c) x += lam[c] * z.col(set[c]);
    }
  }
  return x;
}

// Unit normal w with sign(<w,x_i>) = labels[i] for all i, maximizing the
// smallest agreement margin over the nonzero labels.
inline Vec consistent_hypothesis(const Mat& points, const std::vector<Sign>& labels) {
  const Eigen::Index d = points.rows();
  std::vector<Eigen::Index> zero, nonzero;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    if (points.col(i).norm() == 0) continue;
    (labels[static_cast<std::size_t>(i)] == Sign::Zero ? zero : nonzero).push_back(i);
  }
  Mat zcols(d, static_cast<Eigen::Index>(zero.size()));
  for (std::size_t j = 0; j < zero.size(); ++j) zcols.col(static_cast<Eigen::Index>(j)) = points.col(zero[j]).normalized();
  Mat q;
  {
    Mat zb = span_basis(zcols);
    if (zb.cols() == 0) {
      q = Mat::Identity(d, d);
    } else if (zb.cols() >= d) {
      q = Mat(d, 0);
    } else {
      Eigen::HouseholderQR<Mat> qr(zb);
      q = (qr.householderQ() * Mat::Identity(d, d)).rightCols(d - zb.cols());
    }
  }
  if (nonzero.empty()) return q.cols() ? Vec(q.col(0)) : Vec::Zero(d);
  if (q.cols() == 0) throw Infeasible("zero labels span the whole space");
  Mat z(q.cols(), static_cast<Eigen::Index>(nonzero.size()));
  for (std::size_t j = 0; j < nonzero.size(); ++j) {
    Vec x = points.col(nonzero[j]).normalized();
    z.col(static_cast<Eigen::Index>(j)) = to_int(labels[static_cast<std::size_t>(nonzero[j])]) * (q.transpose() * x);
  }
  Vec pmin = min_norm_point(z);
  if (pmin.norm() <= 1e-12) throw Infeasible("labels are not linearly separable");
  Vec w = (q * pmin).normalized();
  for (std::size_t j = 0; j < nonzero.size(); ++j) {
    Vec x = points.col(nonzero[j]).normalized();
    if (to_int(labels[static_cast<std::size_t>(nonzero[j])]) * w.dot(x) <= 0)
      throw Infeasible("no strictly positive agreement margin");
  }
  return w;
}

struct ActiveResult {
  Vec hypothesis;  // normal in the view's coordinates
  std::size_t samples = 0;
  BoostResult boost;
  Mat points;  // drawn samples, in the view's coordinates
};

inline std::size_t active_sample_size(Eigen::Index d, double epsilon, double delta, double c_n) {
  return static_cast<std::size_t>(std::ceil(c_n * (static_cast<double>(d) + std::log(2.0 / delta)) / epsilon));
}

// Draws samples, labels them with boost at delta/2, fits a consistent normal.
inline ActiveResult active_learn_halfspace(const std::function<Vec(Rng&)>& sample_source, const QueryView& view,
                                           double epsilon, double delta, const LearnerConfig& cfg, Rng& rng) {
  if (!(epsilon > 0 && epsilon < 1)) throw InvalidInput("epsilon must lie in (0,1)");
  ActiveResult out;
  Eigen::Index d = view.is_lifted() ? view.dim() - 1 : view.dim();
  out.samples = active_sample_size(d, epsilon, delta, cfg.c_n);
  out.points.resize(view.dim(), static_cast<Eigen::Index>(out.samples));
  Rng sr = rng.derive("samples");
  for (std::size_t i = 0; i < out.samples; ++i) {
    Vec x = sample_source(sr);
    out.points.col(static_cast<Eigen::Index>(i)) = view.is_lifted() ? lift_point(x) : x;
  }
  Rng br = rng.derive("boost");
  out.boost = boost(view, out.points, delta / 2, cfg, br);
  if (!out.boost.ok) throw Infeasible("labeling failed: " + out.boost.failure);
  out.hypothesis = consistent_hypothesis(out.points, out.boost.labels);
  return out;
}

}  // namespace ptloc
