#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "ptloc/core.hpp"
#include "ptloc/iso_learn.hpp"
#include "ptloc/learners.hpp"
#include "ptloc/oracle.hpp"
#include "ptloc/random.hpp"

namespace ptloc {

// Inequalities <x_i,h> <= C_ij <x_j,h> over present entries. Rows are
// stored sign-adjusted so that, when the recorded signs are right, every
// <x_i,h> is nonnegative.
struct ConstraintMatrix {
  std::vector<Vec> points;
  Mat entries;  // NaN = absent
  std::vector<Sign> signs;

  std::size_t m() const { return points.size(); }
  bool present(std::size_t i, std::size_t j) const {
    return !std::isnan(entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  }
  double c(std::size_t i, std::size_t j) const {
    return entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  std::size_t count() const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < m(); ++i)
      for (std::size_t j = 0; j < m(); ++j) k += present(i, j);
    return k;
  }
  void validate() const {
    if (entries.rows() != static_cast<Eigen::Index>(m()) || entries.cols() != entries.rows())
      throw InvalidInput("constraint matrix shape mismatch");
    for (std::size_t i = 0; i < m(); ++i) {
      if (present(i, i)) throw InvalidInput("constraint matrix diagonal must be absent");
      for (std::size_t j = 0; j < m(); ++j)
        if (present(i, j) && !std::isfinite(c(i, j))) throw InvalidInput("constraint entries must be finite");
    }
  }
};

struct VerificationOutcome {
  bool verified = true;
  std::optional<std::pair<std::size_t, std::size_t>> failing_pair;
  std::uint64_t queries = 0;
};

struct MatrixVerifyOptions {
  std::size_t base_threshold = 64;
  int depth_cap = 3;
  double c4 = 4;
};

inline double batch_beta(double m) {
  double l = std::log2(m);
  return std::exp2(std::sqrt(l * std::log2(l)));
}

inline std::size_t choose_batch(std::size_t m, double c4 = 4) {
  double mm = static_cast<double>(m);
  double b = std::floor(mm / (c4 * std::log2(mm) * batch_beta(mm)));
  return static_cast<std::size_t>(std::max(1.0, b));
}

// Does <x_i,h> <= C_ij <x_j,h> hold? One query.
inline bool check_entry(const QueryView& view, const ConstraintMatrix& cm, std::size_t i, std::size_t j) {
  return view.sign(cm.points[i] - cm.c(i, j) * cm.points[j]) != Sign::Pos;
}

inline VerificationOutcome brute_force_verify(const QueryView& view, const ConstraintMatrix& cm) {
  const std::uint64_t q0 = view.oracle().queries_used();
  VerificationOutcome out;
  for (std::size_t i = 0; i < cm.m() && out.verified; ++i)
    for (std::size_t j = 0; j < cm.m(); ++j)
      if (cm.present(i, j) && !check_entry(view, cm, i, j)) {
        out.verified = false;
        out.failing_pair = {i, j};
        break;
      }
  out.queries = view.oracle().queries_used() - q0;
  return out;
}

struct ZeroErrorConfig;
struct ZeroErrorResult;
inline ZeroErrorResult zero_error_locate(const QueryView& view, const Mat& raw_points, const ZeroErrorConfig& cfg, Rng& rng,
                                  int depth);

struct RowArgmins {
  std::vector<std::optional<std::size_t>> argmin;  // per row; nullopt for empty rows
  std::vector<std::uint64_t> locate_queries;       // per batch, spent on its difference set
  std::uint64_t merge_queries = 0;
  std::uint64_t queries = 0;
};

// Per-row argmin of C_ij <x_j,h> over present j: batches of b columns are
// resolved by locating the difference set, then batch winners are merged
// with direct comparisons.
inline RowArgmins row_argmins(const QueryView& view, const ConstraintMatrix& cm, std::size_t b, int depth, Rng& rng,
                       const ZeroErrorConfig& cfg);

inline VerificationOutcome matrix_verify(const QueryView& view, const ConstraintMatrix& cm, std::size_t b, int depth, Rng& rng,
                                  const ZeroErrorConfig& cfg);

// Round inputs of one zero-error batch, with every index in one global numbering.
struct BatchRound {
  RoundTranscript transcript;
  std::vector<std::size_t> small_points;  // global indices
  std::vector<std::size_t> labeled;       // global indices
};

struct DirectCheck {
  std::size_t round = 0;
  std::size_t point = 0;
};

struct ConstraintBuild {
  ConstraintMatrix matrix;
  std::vector<std::size_t> round_of_row;
  std::vector<DirectCheck> direct;
};

// |<v,h>| / |T_j v| <= |<X_j,h>| / c is the requirement on every small
// point v of a reduced round j. When a later round i labeled v with
// certificate C_v it follows from |<X_i,h>| <= C_ij |<X_j,h>| with
// C_ij = |T_j v| / (2 c C_v |T_i v|); otherwise v is checked directly.
inline ConstraintBuild build_constraints(const std::vector<BatchRound>& rounds, const Mat& points) {
  ConstraintBuild out;
  const std::size_t r = rounds.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> label_of(static_cast<std::size_t>(points.cols()));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t a = 0; a < rounds[i].labeled.size(); ++a) {
      double cv = rounds[i].transcript.certificates[a];
      if (std::isfinite(cv) && cv > 0) label_of[rounds[i].labeled[a]].push_back({i, cv});
    }

  Mat c = Mat::Constant(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r), kNaN);
  std::vector<bool> used(r, false);
  for (std::size_t j = 0; j < r; ++j) {
    const RoundTranscript& tj = rounds[j].transcript;
    if (!tj.reduced) continue;
    const double cd = verification_constant(tj.frame_dim, tj.lambda);
    for (std::size_t v : rounds[j].small_points) {
      std::optional<std::pair<std::size_t, double>> later;
      for (const auto& e : label_of[v])
        if (e.first > j) {
          later = e;
          break;
        }
      if (!later) {
        out.direct.push_back({j, v});
        continue;
      }
      const std::size_t i = later->first;
      const Vec x = points.col(static_cast<Eigen::Index>(v));
      double cij = tj.transform.scale(x) / (2.0 * cd * later->second * rounds[i].transcript.transform.scale(x));
      double& slot = c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      slot = std::isnan(slot) ? cij : std::min(slot, cij);
      used[i] = used[j] = true;
    }
  }

  for (std::size_t k = 0; k < r; ++k)
    if (used[k]) out.round_of_row.push_back(k);
  const auto m = static_cast<Eigen::Index>(out.round_of_row.size());
  out.matrix.entries = Mat::Constant(m, m, kNaN);
  for (Eigen::Index a = 0; a < m; ++a) {
    const RoundTranscript& t = rounds[out.round_of_row[static_cast<std::size_t>(a)]].transcript;
    out.matrix.points.push_back(to_int(t.ref_sign) * t.ref_host);
    out.matrix.signs.push_back(t.ref_sign);
    for (Eigen::Index b = 0; b < m; ++b)
      out.matrix.entries(a, b) = c(static_cast<Eigen::Index>(out.round_of_row[static_cast<std::size_t>(a)]),
                                   static_cast<Eigen::Index>(out.round_of_row[static_cast<std::size_t>(b)]));
  }
  return out;
}

inline bool direct_small_point_check(const QueryView& view, const BatchRound& round, const Vec& v) {
  const RoundTranscript& t = round.transcript;
  const double cd = verification_constant(t.frame_dim, t.lambda);
  return compare_abs_margin(view, (cd / t.transform.scale(v)) * v, t.ref_host) != Order::Gt;
}

struct ZeroErrorConfig {
  LearnerConfig learner;
  MatrixVerifyOptions verify;
  double forced_failure = 0;   // extra probability that a verified batch is discarded
  double restart_factor = 20;  // attempt cap = factor * expected batches
};

struct ZeroErrorResult {
  std::vector<Sign> labels;
  std::uint64_t queries = 0;
  std::uint64_t verification_queries = 0;
  std::size_t batches = 0;
  std::size_t attempts = 0;
  std::vector<int> attempts_per_batch;
  std::size_t rounds = 0;
  std::size_t constraints = 0;
  std::size_t direct_checks = 0;
  std::size_t failed_verifications = 0;
};

inline std::size_t expected_batches(std::size_t n) {
  return static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(n) + 1.0)));
}

inline ZeroErrorResult zero_error_locate(const QueryView& view, const Mat& raw_points, const ZeroErrorConfig& cfg,
                                         Rng& rng, int depth) {
  if (raw_points.rows() != view.dim()) throw InvalidInput("point dimension mismatch");
  const std::uint64_t q0 = view.oracle().queries_used();
  const auto n = static_cast<std::size_t>(raw_points.cols());
  const Eigen::Index d = view.dim();
  ZeroErrorResult out;
  out.labels.assign(n, Sign::Zero);
  Mat pts = normalize_columns(raw_points);
  std::vector<std::size_t> remaining;
  for (std::size_t i = 0; i < n; ++i)
    if (raw_points.col(static_cast<Eigen::Index>(i)).norm() > 0) remaining.push_back(i);
  if (remaining.empty()) return out;

  const double p = cfg.learner.p ? *cfg.learner.p : default_failure_p(d);
  const auto per_batch = static_cast<std::size_t>(d * d);
  const auto cap = static_cast<std::size_t>(cfg.restart_factor * static_cast<double>(expected_batches(n)));
  int attempts_this_batch = 0;

  while (!remaining.empty()) {
    if (out.attempts >= cap)
      throw GiveUp("zero_error_locate: " + std::to_string(out.attempts) + " batch attempts, " +
                   std::to_string(remaining.size()) + " points unresolved");
    ++out.attempts;
    ++attempts_this_batch;
    Rng br = rng.derive("batch");

    // Run up to d^2 rounds on the points not yet labeled in this batch.
    std::vector<BatchRound> rounds;
    std::vector<std::optional<Label>> tentative(n);
    std::vector<std::size_t> open = remaining;
    for (std::size_t t = 0; t < per_batch && !open.empty(); ++t) {
      Mat sub(d, static_cast<Eigen::Index>(open.size()));
      for (std::size_t j = 0; j < open.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = pts.col(static_cast<Eigen::Index>(open[j]));
      WeightedPointSet pair = WeightedPointSet::uniform(sub);
      Rng pr = br.derive("partial_learn");
      PartialLearnResult pl = partial_learn(view, pair, p, cfg.learner, pr);
      BatchRound round;
      round.transcript = std::move(pl.transcript);
      for (auto s : round.transcript.small_points) round.small_points.push_back(open[pair.source(static_cast<Eigen::Index>(s))]);
      for (auto s : round.transcript.labeled) {
        std::size_t g = open[pair.source(static_cast<Eigen::Index>(s))];
        round.labeled.push_back(g);
        tentative[g] = pl.labeling.labels[pair.source(static_cast<Eigen::Index>(s))];
      }
      std::vector<std::size_t> next;
      for (auto g : open)
        if (!tentative[g]) next.push_back(g);
      open = std::move(next);
      rounds.push_back(std::move(round));
      ++out.rounds;
    }

    const std::uint64_t v0 = view.oracle().queries_used();
    bool ok = true;
    ConstraintBuild cb = build_constraints(rounds, pts);
    out.constraints += cb.matrix.count();
    out.direct_checks += cb.direct.size();
    for (const auto& dc : cb.direct)
      if (!direct_small_point_check(view, rounds[dc.round], pts.col(static_cast<Eigen::Index>(dc.point)))) {
        ok = false;
        break;
      }
    if (ok && cb.matrix.count() > 0) {
      Rng mr = br.derive("matrix_verify");
      std::size_t m = cb.matrix.m();
      std::size_t b = m > cfg.verify.base_threshold ? std::min(m - 1, choose_batch(m, cfg.verify.c4)) : 1;
      ok = matrix_verify(view, cb.matrix, b, depth, mr, cfg).verified;
    }
    out.verification_queries += view.oracle().queries_used() - v0;
    if (ok && cfg.forced_failure > 0 && br.uniform() < cfg.forced_failure) ok = false;
    if (!ok) {
      ++out.failed_verifications;
      continue;
    }

    std::vector<std::size_t> next;
    for (auto g : remaining) {
      if (tentative[g] && *tentative[g] != Label::Unknown)
        out.labels[g] = static_cast<Sign>(static_cast<int>(*tentative[g]));
      else
        next.push_back(g);
    }
    if (next.size() < remaining.size()) {
      ++out.batches;
      out.attempts_per_batch.push_back(attempts_this_batch);
      attempts_this_batch = 0;
    }
    remaining = std::move(next);
  }
  out.queries = view.oracle().queries_used() - q0;
  return out;
}

inline ZeroErrorResult zero_error_locate(const QueryView& view, const Mat& raw_points, const ZeroErrorConfig& cfg,
                                         Rng& rng) {
  return zero_error_locate(view, raw_points, cfg, rng, 0);
}

inline RowArgmins row_argmins(const QueryView& view, const ConstraintMatrix& cm, std::size_t b, int depth, Rng& rng,
                              const ZeroErrorConfig& cfg) {
  const std::uint64_t q0 = view.oracle().queries_used();
  const std::size_t m = cm.m();
  RowArgmins out;
  out.argmin.assign(m, std::nullopt);
  if (b == 0) b = 1;
  const std::size_t nb = (m + b - 1) / b;
  std::vector<std::vector<std::size_t>> winners(m);

  for (std::size_t k = 0; k < nb; ++k) {
    const std::size_t lo = k * b, hi = std::min(m, lo + b);
    // Difference vectors C_ij1 x_j1 - C_ij2 x_j2 for every row and column pair in the batch.
    std::vector<Vec> diffs;
    std::vector<std::vector<std::pair<std::pair<std::size_t, std::size_t>, std::size_t>>> where(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j1 = lo; j1 < hi; ++j1)
        for (std::size_t j2 = j1 + 1; j2 < hi; ++j2)
          if (cm.present(i, j1) && cm.present(i, j2)) {
            where[i].push_back({{j1, j2}, diffs.size()});
            diffs.push_back(cm.c(i, j1) * cm.points[j1] - cm.c(i, j2) * cm.points[j2]);
          }
    std::vector<Sign> signs(diffs.size(), Sign::Zero);
    const std::uint64_t l0 = view.oracle().queries_used();
    if (!diffs.empty()) {
      Mat dm(view.dim(), static_cast<Eigen::Index>(diffs.size()));
      for (std::size_t t = 0; t < diffs.size(); ++t) dm.col(static_cast<Eigen::Index>(t)) = diffs[t];
      if (diffs.size() <= cfg.verify.base_threshold || depth + 1 >= cfg.verify.depth_cap) {
        for (std::size_t t = 0; t < diffs.size(); ++t) signs[t] = view.sign(diffs[t]);
      } else {
        Rng lr = rng.derive("difference_locate");
        signs = zero_error_locate(view, dm, cfg, lr, depth + 1).labels;
      }
    }
    out.locate_queries.push_back(view.oracle().queries_used() - l0);
    for (std::size_t i = 0; i < m; ++i) {
      std::optional<std::size_t> cur;
      for (std::size_t j = lo; j < hi; ++j) {
        if (!cm.present(i, j)) continue;
        if (!cur) {
          cur = j;
          continue;
        }
        for (const auto& w : where[i])
          if (w.first == std::make_pair(*cur, j)) {
            if (signs[w.second] == Sign::Pos) cur = j;
            break;
          }
      }
      if (cur) winners[i].push_back(*cur);
    }
  }

  const std::uint64_t m0 = view.oracle().queries_used();
  for (std::size_t i = 0; i < m; ++i) {
    if (winners[i].empty()) continue;
    std::size_t cur = winners[i][0];
    for (std::size_t t = 1; t < winners[i].size(); ++t) {
      std::size_t j = winners[i][t];
      if (view.sign(cm.c(i, cur) * cm.points[cur] - cm.c(i, j) * cm.points[j]) == Sign::Pos) cur = j;
    }
    out.argmin[i] = cur;
  }
  out.merge_queries = view.oracle().queries_used() - m0;
  out.queries = view.oracle().queries_used() - q0;
  return out;
}

inline VerificationOutcome matrix_verify(const QueryView& view, const ConstraintMatrix& cm, std::size_t b, int depth,
                                         Rng& rng, const ZeroErrorConfig& cfg) {
  cm.validate();
  if (cm.m() <= cfg.verify.base_threshold || depth >= cfg.verify.depth_cap) return brute_force_verify(view, cm);
  if (b >= cm.m()) throw InvalidInput("matrix_verify: batch size must be below m");
  const std::uint64_t q0 = view.oracle().queries_used();
  RowArgmins am = row_argmins(view, cm, b, depth, rng, cfg);
  VerificationOutcome out;
  for (std::size_t i = 0; i < cm.m(); ++i) {
    if (!am.argmin[i]) continue;
    if (!check_entry(view, cm, i, *am.argmin[i])) {
      out.verified = false;
      out.failing_pair = {i, *am.argmin[i]};
      break;
    }
  }
  out.queries = view.oracle().queries_used() - q0;
  return out;
}

}  // namespace ptloc
