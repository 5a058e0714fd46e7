#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ptloc/core.hpp"
#include "ptloc/geometry.hpp"
#include "ptloc/learners.hpp"
#include "ptloc/oracle.hpp"
#include "ptloc/random.hpp"
#include "ptloc/verification.hpp"

namespace ptloc {

inline constexpr const char* kVersionTag = "ptloc-0.1.0";
inline constexpr std::uint64_t kDefaultSeed = 20240611;
inline constexpr double kMinPlantedMargin = 1e-9;

inline std::uint64_t default_seed() {
  if (const char* s = std::getenv("PTLOC_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw InvalidSpec(std::string("PTLOC_SEED is not an integer: ") + s);
    }
  }
  return kDefaultSeed;
}

enum class Family { UniformSphere, ClusteredSubspace, MarginGap, OnHyperplaneMix, LiftedNonhomogeneous };

inline const std::vector<std::pair<Family, std::string>>& family_names() {
  static const std::vector<std::pair<Family, std::string>> names{
      {Family::UniformSphere, "uniform-sphere"},
      {Family::ClusteredSubspace, "clustered-subspace"},
      {Family::MarginGap, "margin-gap"},
      {Family::OnHyperplaneMix, "on-hyperplane-mix"},
      {Family::LiftedNonhomogeneous, "lifted-nonhomogeneous"}};
  return names;
}

inline std::string to_string(Family f) {
  for (const auto& [k, v] : family_names())
    if (k == f) return v;
  return "?";
}

inline Family parse_family(const std::string& s) {
  for (const auto& [k, v] : family_names())
    if (v == s) return k;
  throw InvalidSpec("unknown family: " + s);
}

struct InstanceSpec {
  Eigen::Index d = 4;
  std::size_t n = 100;
  Family family = Family::UniformSphere;
  Eigen::Index subspace_dim = 0;  // clustered-subspace; 0 = max(1, d/4)
  double cluster_fraction = 0.5;
  double gap_fraction = 0.25;  // k/d for margin-gap
  double gap_t = 0.2;
  double gap_ratio = 1e4;
  double zero_fraction = 0.1;
  double bias_range = 0.5;  // lifted-nonhomogeneous
  std::uint64_t seed = 1;

  void validate() const {
    if (d < 1) throw InvalidSpec("d must be at least 1");
    if (n < 1) throw InvalidSpec("n must be at least 1");
    if (subspace_dim < 0 || subspace_dim > d) throw InvalidSpec("subspace_dim out of range");
    if (!(cluster_fraction >= 0 && cluster_fraction <= 1)) throw InvalidSpec("cluster_fraction out of range");
    if (!(gap_fraction > 0 && gap_fraction <= 1)) throw InvalidSpec("gap_fraction out of range");
    if (!(gap_t > 0 && gap_t <= 1)) throw InvalidSpec("gap_t out of range");
    if (!(gap_ratio >= 1)) throw InvalidSpec("gap_ratio must be at least 1");
    if (!(gap_t / gap_ratio >= kMinPlantedMargin)) throw InvalidSpec("gap_t / gap_ratio below the planted margin floor");
    if (!(zero_fraction >= 0 && zero_fraction <= 1)) throw InvalidSpec("zero_fraction out of range");
    if (!(bias_range >= 0 && bias_range < 1)) throw InvalidSpec("bias_range out of range");
  }
};

struct Instance {
  InstanceSpec spec;
  Mat points;  // d x n, unit columns
  Vec weights;
  Hyperplane hidden;

  bool lifted() const { return spec.family == Family::LiftedNonhomogeneous; }
  // Points as the locating view sees them.
  Mat located_points() const {
    if (!lifted()) return points;
    Mat y(points.rows() + 1, points.cols());
    for (Eigen::Index i = 0; i < points.cols(); ++i) y.col(i) = lift_point(points.col(i));
    return y;
  }
  WeightedPointSet pair() const { return WeightedPointSet(located_points(), weights); }
};

namespace detail {

// Unit vector with <x,h> = m for unit h.
inline Vec with_margin(const Vec& h, double m, Rng& rng) {
  Vec u = rng.normal_vec(h.size());
  u -= u.dot(h) * h;
  double un = u.norm();
  if (un < 1e-12 || h.size() == 1) return (m >= 0 ? 1.0 : -1.0) * h;
  return m * h + std::sqrt(std::max(0.0, 1 - m * m)) * (u / un);
}

inline Vec on_hyperplane(const Vec& h, Rng& rng) {
  Vec u = rng.normal_vec(h.size());
  u -= u.dot(h) * h;
  u -= u.dot(h) * h;
  return u / u.norm();
}

inline Vec resample_nonzero(const Vec& h, double bias, Rng& rng, const std::function<Vec(Rng&)>& draw) {
  for (;;) {
    Vec x = draw(rng);
    if (std::abs(x.dot(h) + bias) >= kMinPlantedMargin) return x;
  }
}

}  // namespace detail

inline Instance gen_instance(const InstanceSpec& spec) {
  spec.validate();
  Instance inst;
  inst.spec = spec;
  const Eigen::Index d = spec.d;
  const auto n = static_cast<Eigen::Index>(spec.n);
  Rng rng(spec.seed);
  Rng hr = rng.derive("hyperplane");
  Rng pr = rng.derive("points");
  inst.hidden.normal = hr.unit_vec(d);
  inst.hidden.bias = 0;
  inst.points.resize(d, n);
  inst.weights = Vec::Constant(n, 1.0 / static_cast<double>(n));
  const Vec& h = inst.hidden.normal;
  auto sphere = [d](Rng& r) { return r.unit_vec(d); };

  switch (spec.family) {
    case Family::UniformSphere:
      for (Eigen::Index i = 0; i < n; ++i) inst.points.col(i) = detail::resample_nonzero(h, 0, pr, sphere);
      break;
    case Family::ClusteredSubspace: {
      Eigen::Index k = spec.subspace_dim > 0 ? spec.subspace_dim : std::max<Eigen::Index>(1, d / 4);
      Eigen::HouseholderQR<Mat> qr(pr.normal_vec(d * k).reshaped(d, k));
      Mat basis = (qr.householderQ() * Mat::Identity(d, d)).leftCols(k);
      auto cluster = [&basis, k](Rng& r) { return Vec((basis * r.unit_vec(k)).normalized()); };
      const auto in_cluster = static_cast<Eigen::Index>(std::floor(spec.cluster_fraction * static_cast<double>(n)));
      for (Eigen::Index i = 0; i < n; ++i)
        inst.points.col(i) = detail::resample_nonzero(h, 0, pr, i < in_cluster ? std::function<Vec(Rng&)>(cluster)
                                                                                  : std::function<Vec(Rng&)>(sphere));
      break;
    }
    case Family::MarginGap: {
      const auto large = static_cast<Eigen::Index>(std::ceil(spec.gap_fraction * static_cast<double>(n)));
      const double small = spec.gap_t / spec.gap_ratio;
      for (Eigen::Index i = 0; i < n; ++i) {
        double s = pr.uniform() < 0.5 ? -1.0 : 1.0;
        double m = i < large ? pr.uniform(spec.gap_t, 1.0) : pr.uniform(kMinPlantedMargin, small);
        inst.points.col(i) = detail::with_margin(h, s * m, pr);
      }
      break;
    }
    case Family::OnHyperplaneMix: {
      const auto zeros = static_cast<Eigen::Index>(std::floor(spec.zero_fraction * static_cast<double>(n)));
      for (Eigen::Index i = 0; i < n; ++i)
        inst.points.col(i) = (i < zeros && d > 1) ? detail::on_hyperplane(h, pr) : detail::resample_nonzero(h, 0, pr, sphere);
      break;
    }
    case Family::LiftedNonhomogeneous: {
      inst.hidden.bias = hr.uniform(-spec.bias_range, spec.bias_range);
      const double b = inst.hidden.bias;
      for (Eigen::Index i = 0; i < n; ++i) inst.points.col(i) = detail::resample_nonzero(h, b, pr, sphere);
      break;
    }
  }
  return inst;
}

// ---- instance I/O ----

inline nlohmann::json instance_to_json(const Instance& inst) {
  nlohmann::json j;
  j["d"] = inst.points.rows();
  j["n"] = inst.points.cols();
  j["family"] = to_string(inst.spec.family);
  j["seed"] = inst.spec.seed;
  nlohmann::json pts = nlohmann::json::array();
  for (Eigen::Index i = 0; i < inst.points.cols(); ++i) {
    std::vector<double> p(inst.points.col(i).data(), inst.points.col(i).data() + inst.points.rows());
    pts.push_back(p);
  }
  j["points"] = pts;
  j["weights"] = std::vector<double>(inst.weights.data(), inst.weights.data() + inst.weights.size());
  j["hyperplane"] = std::vector<double>(inst.hidden.normal.data(), inst.hidden.normal.data() + inst.hidden.normal.size());
  j["bias"] = inst.hidden.bias;
  return j;
}

inline Instance instance_from_json(const nlohmann::json& j) {
  try {
    Instance inst;
    inst.spec.d = j.at("d").get<Eigen::Index>();
    inst.spec.n = j.at("n").get<std::size_t>();
    inst.spec.family = j.contains("family") ? parse_family(j["family"].get<std::string>()) : Family::UniformSphere;
    inst.spec.seed = j.value("seed", std::uint64_t{0});
    const auto& pts = j.at("points");
    if (pts.size() != inst.spec.n) throw InvalidSpec("points length does not match n");
    inst.points.resize(inst.spec.d, static_cast<Eigen::Index>(inst.spec.n));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto p = pts[i].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(p.size()) != inst.spec.d) throw InvalidSpec("point dimension does not match d");
      for (Eigen::Index r = 0; r < inst.spec.d; ++r) inst.points(r, static_cast<Eigen::Index>(i)) = p[static_cast<std::size_t>(r)];
    }
    auto w = j.at("weights").get<std::vector<double>>();
    inst.weights = Eigen::Map<Vec>(w.data(), static_cast<Eigen::Index>(w.size()));
    auto h = j.at("hyperplane").get<std::vector<double>>();
    inst.hidden.normal = Eigen::Map<Vec>(h.data(), static_cast<Eigen::Index>(h.size()));
    inst.hidden.bias = j.value("bias", 0.0);
    if (inst.hidden.bias != 0.0) inst.spec.family = Family::LiftedNonhomogeneous;
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidSpec(std::string("malformed instance: ") + e.what());
  }
}

inline std::string dump17(const nlohmann::json& j) {
  // nlohmann prints the shortest round-tripping form, which never needs more than 17 digits.
  return j.dump(1);
}

inline void write_text(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open " + path);
  f << body;
  if (!f) throw IoFailure("write failed: " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---- experiments ----

enum class Mode { Bounded, Zero, Active };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::Bounded: return "bounded";
    case Mode::Zero: return "zero";
    case Mode::Active: return "active";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  if (s == "bounded") return Mode::Bounded;
  if (s == "zero") return Mode::Zero;
  if (s == "active") return Mode::Active;
  throw InvalidSpec("unknown mode: " + s);
}

struct ExperimentConfig {
  Mode mode = Mode::Bounded;
  Family family = Family::UniformSphere;
  std::vector<Eigen::Index> ds{8};
  std::vector<std::size_t> ns{1000};
  double delta = 0.1;
  double epsilon = 0.05;
  std::size_t trials = 10;
  std::uint64_t seed = kDefaultSeed;
  bool theory = false;
  std::size_t threads = 1;
  std::size_t holdout = 10000;  // active mode test sample
  InstanceSpec base;            // family parameters

  void validate() const {
    if (!(delta > 0 && delta < 1)) throw InvalidSpec("delta must lie in (0,1)");
    if (!(epsilon > 0 && epsilon < 1)) throw InvalidSpec("epsilon must lie in (0,1)");
    for (auto d : ds)
      if (d < 1) throw InvalidSpec("d must be at least 1");
    for (auto n : ns)
      if (n < 1) throw InvalidSpec("n must be at least 1");
  }
};

struct TrialRow {
  std::size_t trial = 0;
  std::string family;
  std::string mode;
  Eigen::Index d = 0;
  std::size_t n = 0;
  double delta = 0;
  double epsilon = 0;
  std::uint64_t seed = 0;
  std::uint64_t queries_total = 0;
  std::uint64_t oracle_calls = 0;
  std::size_t rounds = 0;
  std::uint64_t verification_queries = 0;
  long errors_vs_truth = 0;
  double coverage = 0;
  double heldout_error = 0;  // active mode
  bool tie_flag = false;
  std::string status = "ok";

  bool operator==(const TrialRow&) const = default;
};

struct Aggregate {
  Eigen::Index d = 0;
  std::size_t n = 0;
  std::size_t trials = 0;
  double median_queries = 0;
  double p95_queries = 0;
  double error_run_fraction = 0;
  long total_errors = 0;
  double delta_line = 0;
  std::vector<std::size_t> coverage_histogram;  // 10 bins over [0,1]

  bool operator==(const Aggregate&) const = default;
};

struct ExperimentReport {
  nlohmann::json config;
  std::string version = kVersionTag;
  std::vector<TrialRow> rows;
  std::vector<Aggregate> aggregates;

  bool operator==(const ExperimentReport& o) const {
    return config == o.config && version == o.version && rows == o.rows && aggregates == o.aggregates;
  }
  bool hard_failure() const {
    for (const auto& r : rows)
      if (r.mode == "zero" && (r.errors_vs_truth != 0 || r.status != "ok")) return true;
    return false;
  }
};

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(v.size() - 1, lo + 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

inline std::vector<Aggregate> aggregate_rows(const std::vector<TrialRow>& rows, double delta) {
  std::map<std::pair<Eigen::Index, std::size_t>, std::vector<const TrialRow*>> groups;
  for (const auto& r : rows) groups[{r.d, r.n}].push_back(&r);
  std::vector<Aggregate> out;
  for (const auto& [key, g] : groups) {
    Aggregate a;
    a.d = key.first;
    a.n = key.second;
    a.trials = g.size();
    std::vector<double> q;
    std::size_t bad = 0;
    a.coverage_histogram.assign(10, 0);
    for (const auto* r : g) {
      q.push_back(static_cast<double>(r->queries_total));
      bad += r->errors_vs_truth > 0 || r->status != "ok";
      a.total_errors += std::max(0L, r->errors_vs_truth);
      a.coverage_histogram[std::min<std::size_t>(9, static_cast<std::size_t>(std::max(0.0, r->coverage) * 10))] += 1;
    }
    a.median_queries = median(q);
    a.p95_queries = quantile(q, 0.95);
    a.error_run_fraction = static_cast<double>(bad) / static_cast<double>(g.size());
    a.delta_line = delta;
    out.push_back(a);
  }
  return out;
}

inline LearnerConfig learner_config(const ExperimentConfig& cfg) {
  LearnerConfig lc;
  lc.iso.theory = cfg.theory;
  return lc;
}

inline std::uint64_t trial_seed(std::uint64_t base, Eigen::Index d, std::size_t n, std::size_t trial) {
  return splitmix64(base ^ splitmix64(static_cast<std::uint64_t>(d) * 0x9E3779B97F4A7C15ULL ^
                                      splitmix64(n + 0x632BE59BD9B4E019ULL * (trial + 1))));
}

inline std::function<Vec(Rng&)> circle_source(Eigen::Index d) {
  return [d](Rng& r) { return r.unit_vec(d); };
}

inline TrialRow run_trial(const ExperimentConfig& cfg, Eigen::Index d, std::size_t n, std::size_t trial) {
  TrialRow row;
  row.trial = trial;
  row.family = to_string(cfg.family);
  row.mode = to_string(cfg.mode);
  row.d = d;
  row.n = n;
  row.delta = cfg.delta;
  row.epsilon = cfg.epsilon;
  row.seed = trial_seed(cfg.seed, d, n, trial);
  try {
    InstanceSpec spec = cfg.base;
    spec.d = d;
    spec.n = n;
    spec.family = cfg.family;
    spec.seed = row.seed;
    Instance inst = gen_instance(spec);
    QueryOracle oracle(inst.hidden);
    QueryView view = inst.lifted() ? QueryView::lifted(oracle) : QueryView(oracle);
    Rng rng(splitmix64(row.seed + 1));
    LearnerConfig lc = learner_config(cfg);
    Mat located = inst.located_points();
    std::vector<Sign> labels;
    switch (cfg.mode) {
      case Mode::Bounded: {
        BoostResult b = boost(view, located, cfg.delta, lc, rng);
        labels = b.labels;
        row.rounds = b.record.rounds;
        row.tie_flag = b.tie_flag;
        double cov = 0;
        for (const auto& r : b.record.per_round) cov += r.coverage;
        row.coverage = b.record.per_round.empty() ? 0 : cov / static_cast<double>(b.record.per_round.size());
        if (!b.ok) row.status = b.failure;
        break;
      }
      case Mode::Zero: {
        ZeroErrorConfig zc;
        zc.learner = lc;
        ZeroErrorResult z = zero_error_locate(view, located, zc, rng);
        labels = z.labels;
        row.rounds = z.rounds;
        row.verification_queries = z.verification_queries;
        row.coverage = 1.0;
        break;
      }
      case Mode::Active: {
        ActiveResult a = active_learn_halfspace(circle_source(d), view, cfg.epsilon, cfg.delta, lc, rng);
        Rng tr = rng.derive("holdout");
        std::size_t wrong = 0;
        for (std::size_t t = 0; t < cfg.holdout; ++t) {
          Vec x = tr.unit_vec(d);
          Vec q = inst.lifted() ? lift_point(x) : x;
          Sign truth = view.truth(q);
          Sign pred = sign_of(a.hypothesis.dot(q));
          wrong += pred != truth;
        }
        row.heldout_error = static_cast<double>(wrong) / static_cast<double>(std::max<std::size_t>(1, cfg.holdout));
        labels = a.boost.labels;
        located = a.points;
        row.rounds = a.boost.record.rounds;
        row.coverage = 1.0;
        break;
      }
    }
    long errors = 0;
    for (Eigen::Index i = 0; i < located.cols(); ++i)
      errors += labels[static_cast<std::size_t>(i)] != view.truth(located.col(i));
    row.errors_vs_truth = errors;
    row.queries_total = oracle.queries_used();
    row.oracle_calls = oracle.oracle_calls_used();
  } catch (const Error& e) {
    row.status = e.what();
    row.errors_vs_truth = -1;
  }
  return row;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["mode"] = to_string(c.mode);
  j["family"] = to_string(c.family);
  j["d"] = c.ds;
  j["n"] = c.ns;
  j["delta"] = c.delta;
  j["epsilon"] = c.epsilon;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["theory_constants"] = c.theory;
  return j;
}

// Trials are independent; workers pull trial indices and results land in fixed slots.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  struct Job {
    Eigen::Index d;
    std::size_t n;
    std::size_t trial;
  };
  std::vector<Job> jobs;
  for (auto d : cfg.ds)
    for (auto n : cfg.ns)
      for (std::size_t t = 0; t < cfg.trials; ++t) jobs.push_back({d, n, t});
  ExperimentReport rep;
  rep.config = config_to_json(cfg);
  rep.rows.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < jobs.size();) rep.rows[k] = run_trial(cfg, jobs[k].d, jobs[k].n, jobs[k].trial);
  };
  std::size_t threads = std::max<std::size_t>(1, std::min(cfg.threads, jobs.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  rep.aggregates = aggregate_rows(rep.rows, cfg.delta);
  return rep;
}

// ---- report I/O ----

inline nlohmann::json report_to_json(const ExperimentReport& r) {
  nlohmann::json j;
  j["version"] = r.version;
  j["config"] = r.config;
  j["rows"] = nlohmann::json::array();
  for (const auto& t : r.rows)
    j["rows"].push_back({{"trial", t.trial},
                         {"family", t.family},
                         {"mode", t.mode},
                         {"d", t.d},
                         {"n", t.n},
                         {"delta", t.delta},
                         {"epsilon", t.epsilon},
                         {"seed", t.seed},
                         {"queries_total", t.queries_total},
                         {"oracle_calls", t.oracle_calls},
                         {"rounds", t.rounds},
                         {"verification_queries", t.verification_queries},
                         {"errors_vs_truth", t.errors_vs_truth},
                         {"coverage", t.coverage},
                         {"heldout_error", t.heldout_error},
                         {"tie_flag", t.tie_flag},
                         {"status", t.status}});
  j["aggregates"] = nlohmann::json::array();
  for (const auto& a : r.aggregates)
    j["aggregates"].push_back({{"d", a.d},
                               {"n", a.n},
                               {"trials", a.trials},
                               {"median_queries", a.median_queries},
                               {"p95_queries", a.p95_queries},
                               {"error_run_fraction", a.error_run_fraction},
                               {"total_errors", a.total_errors},
                               {"delta_line", a.delta_line},
                               {"coverage_histogram", a.coverage_histogram}});
  return j;
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport r;
  r.version = j.at("version").get<std::string>();
  r.config = j.at("config");
  for (const auto& t : j.at("rows")) {
    TrialRow row;
    row.trial = t.at("trial");
    row.family = t.at("family");
    row.mode = t.at("mode");
    row.d = t.at("d");
    row.n = t.at("n");
    row.delta = t.at("delta");
    row.epsilon = t.at("epsilon");
    row.seed = t.at("seed");
    row.queries_total = t.at("queries_total");
    row.oracle_calls = t.at("oracle_calls");
    row.rounds = t.at("rounds");
    row.verification_queries = t.at("verification_queries");
    row.errors_vs_truth = t.at("errors_vs_truth");
    row.coverage = t.at("coverage");
    row.heldout_error = t.at("heldout_error");
    row.tie_flag = t.at("tie_flag");
    row.status = t.at("status");
    r.rows.push_back(row);
  }
  for (const auto& a : j.at("aggregates")) {
    Aggregate g;
    g.d = a.at("d");
    g.n = a.at("n");
    g.trials = a.at("trials");
    g.median_queries = a.at("median_queries");
    g.p95_queries = a.at("p95_queries");
    g.error_run_fraction = a.at("error_run_fraction");
    g.total_errors = a.at("total_errors");
    g.delta_line = a.at("delta_line");
    g.coverage_histogram = a.at("coverage_histogram").get<std::vector<std::size_t>>();
    r.aggregates.push_back(g);
  }
  return r;
}

inline std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string report_to_csv(const ExperimentReport& r) {
  std::ostringstream os;
  os << "trial,family,mode,d,n,delta,epsilon,seed,queries_total,oracle_calls,rounds,verification_queries,"
        "errors_vs_truth,coverage,heldout_error,status\n";
  for (const auto& t : r.rows) {
    std::string status = t.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    os << t.trial << ',' << t.family << ',' << t.mode << ',' << t.d << ',' << t.n << ',' << csv_number(t.delta) << ','
       << csv_number(t.epsilon) << ',' << t.seed << ',' << t.queries_total << ',' << t.oracle_calls << ',' << t.rounds
       << ',' << t.verification_queries << ',' << t.errors_vs_truth << ',' << csv_number(t.coverage) << ','
       << csv_number(t.heldout_error) << ',' << status << '\n';
  }
  return os.str();
}

// Query-vs-(d,n) table.
inline std::string aggregates_to_csv(const ExperimentReport& r) {
  std::ostringstream os;
  os << "d,n,trials,median_queries,p95_queries,error_run_fraction,total_errors,delta_line\n";
  for (const auto& a : r.aggregates)
    os << a.d << ',' << a.n << ',' << a.trials << ',' << csv_number(a.median_queries) << ',' << csv_number(a.p95_queries)
       << ',' << csv_number(a.error_run_fraction) << ',' << a.total_errors << ',' << csv_number(a.delta_line) << '\n';
  return os.str();
}

// Writes <prefix>.json, <prefix>.csv and <prefix>_table.csv.
inline void emit_report(const ExperimentReport& r, const std::string& prefix) {
  write_text(prefix + ".json", dump17(report_to_json(r)) + "\n");
  write_text(prefix + ".csv", report_to_csv(r));
  write_text(prefix + "_table.csv", aggregates_to_csv(r));
}

// ---- calibration ----

// 95th percentile over partial_learn rounds of queries / (k log2^2 d),
// the per-unit-k cost that the weak-learn budget is written in.
inline double calibrate_weak_budget(const std::vector<Eigen::Index>& ds, std::size_t n, std::size_t runs,
                                    std::uint64_t seed) {
  std::vector<double> costs;
  for (auto d : ds)
    for (std::size_t t = 0; t < runs; ++t) {
      InstanceSpec spec;
      spec.d = d;
      spec.n = n;
      spec.seed = trial_seed(seed, d, n, t);
      Instance inst = gen_instance(spec);
      QueryOracle oracle(inst.hidden);
      Rng rng(spec.seed);
      LearnerConfig lc;
      lc.weak_budget_c = 1e6;
      WeakLearnResult wl = weak_learn(oracle, inst.pair(), lc, rng);
      double l = log2_floor1(static_cast<double>(d));
      for (const auto& r : wl.rounds)
        if (r.k > 0) costs.push_back(static_cast<double>(r.queries) / (r.k * l * l));
    }
  return quantile(costs, 0.95);
}

// ---- log-domain bookkeeping ----

// ln of the margin scale t / s^level for extreme ell / lambda settings where
// the plain product under- or overflows.
inline double log_margin_scale(double log_t, double log_s, int level) { return log_t - level * log_s; }

inline bool needs_log_domain(double ell, double lambda, int levels) {
  double l = levels * (std::log(ell) + 4 * std::log(lambda));
  return l > std::log(std::numeric_limits<double>::max()) / 2;
}

}  // namespace ptloc
