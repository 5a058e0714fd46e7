// ptloc: generate instances, locate points, run benchmark sweeps.
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ptloc.hpp"

using namespace ptloc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvariant = 1;
constexpr int kExitConfig = 2;

struct Flags {
  std::vector<long> d{8};
  std::vector<std::size_t> n{1000};
  double delta = 0.1;
  double epsilon = 0.05;
  std::string mode = "bounded";
  std::string family = "uniform-sphere";
  std::size_t trials = 10;
  std::uint64_t seed = 0;
  std::string out;
  std::string in;
  bool theory = false;
  std::size_t threads = 1;
  bool calibrate = false;
};

void emit(const std::string& out, const std::string& body) {
  if (out.empty())
    std::cout << body;
  else
    write_text(out, body);
}

Instance load_or_generate(const Flags& f) {
  if (!f.in.empty()) return instance_from_json(nlohmann::json::parse(read_text(f.in)));
  InstanceSpec spec;
  spec.d = f.d.front();
  spec.n = f.n.front();
  spec.family = parse_family(f.family);
  spec.seed = f.seed;
  return gen_instance(spec);
}

int cmd_gen(const Flags& f) {
  InstanceSpec spec;
  spec.d = f.d.front();
  spec.n = f.n.front();
  spec.family = parse_family(f.family);
  spec.seed = f.seed;
  emit(f.out, dump17(instance_to_json(gen_instance(spec))) + "\n");
  return kExitOk;
}

int cmd_locate(const Flags& f) {
  Instance inst = load_or_generate(f);
  QueryOracle oracle(inst.hidden);
  QueryView view = inst.lifted() ? QueryView::lifted(oracle) : QueryView(oracle);
  Rng rng(f.seed);
  LearnerConfig lc;
  lc.iso.theory = f.theory;
  Mat pts = inst.located_points();
  std::vector<Sign> labels;
  nlohmann::json summary;
  Mode mode = parse_mode(f.mode);
  if (mode == Mode::Bounded) {
    BoostResult b = boost(view, pts, f.delta, lc, rng);
    labels = b.labels;
    summary["ok"] = b.ok;
    summary["failure"] = b.failure;
    summary["rounds"] = b.record.rounds;
    summary["tie_flag"] = b.tie_flag;
  } else if (mode == Mode::Zero) {
    ZeroErrorConfig zc;
    zc.learner = lc;
    ZeroErrorResult z = zero_error_locate(view, pts, zc, rng);
    labels = z.labels;
    summary["rounds"] = z.rounds;
    summary["batches"] = z.batches;
    summary["verification_queries"] = z.verification_queries;
  } else {
    throw InvalidSpec("locate supports --mode bounded or zero");
  }
  long errors = 0;
  std::string signs;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    errors += labels[static_cast<std::size_t>(i)] != view.truth(pts.col(i));
    signs += label_char(to_label(labels[static_cast<std::size_t>(i)]));
  }
  summary["n"] = pts.cols();
  summary["queries"] = oracle.queries_used();
  summary["errors_vs_truth"] = errors;
  summary["labels"] = signs;
  emit(f.out, summary.dump(1) + "\n");
  if (mode == Mode::Zero && errors != 0) return kExitInvariant;
  return kExitOk;
}

ExperimentConfig experiment_config(const Flags& f) {
  ExperimentConfig c;
  c.mode = parse_mode(f.mode);
  c.family = parse_family(f.family);
  c.ds.assign(f.d.begin(), f.d.end());
  c.ns = f.n;
  c.delta = f.delta;
  c.epsilon = f.epsilon;
  c.trials = f.trials;
  c.seed = f.seed;
  c.theory = f.theory;
  c.threads = f.threads;
  return c;
}

void print_table(const ExperimentReport& r) {
  std::cout << aggregates_to_csv(r);
}

int cmd_bench(const Flags& f) {
  if (f.calibrate) {
    std::vector<Eigen::Index> ds(f.d.begin(), f.d.end());
    double c = calibrate_weak_budget(ds, f.n.front(), f.trials, f.seed);
    std::cout << "weak budget constant (p95 queries per unit k per log2^2 d): " << c << "\n";
    return kExitOk;
  }
  ExperimentReport r = run_experiment(experiment_config(f));
  if (!f.out.empty()) emit_report(r, f.out);
  print_table(r);
  return r.hard_failure() ? kExitInvariant : kExitOk;
}

int cmd_active(const Flags& f, bool d_given) {
  Flags g = f;
  g.mode = "active";
  if (!d_given) g.d = {2};
  ExperimentConfig c = experiment_config(g);
  c.ns = {1};
  ExperimentReport r = run_experiment(c);
  if (!f.out.empty()) emit_report(r, f.out);
  std::size_t good = 0;
  for (const auto& row : r.rows) good += row.status == "ok" && row.heldout_error <= f.epsilon;
  std::cout << "trials " << r.rows.size() << ", held-out error <= epsilon in " << good << "\n";
  print_table(r);
  return kExitOk;
}

// Small end-to-end checks against the planted hyperplane.
int cmd_selftest(const Flags& f) {
  int bad = 0;
  auto check = [&](bool ok, const std::string& what) {
    std::cout << (ok ? "ok   " : "FAIL ") << what << "\n";
    bad += !ok;
  };
  for (Family fam : {Family::UniformSphere, Family::ClusteredSubspace, Family::MarginGap, Family::OnHyperplaneMix,
                     Family::LiftedNonhomogeneous}) {
    InstanceSpec spec;
    spec.d = 4;
    spec.n = 200;
    spec.family = fam;
    spec.seed = f.seed + 11;
    Instance inst = gen_instance(spec);
    QueryOracle oracle(inst.hidden);
    QueryView view = inst.lifted() ? QueryView::lifted(oracle) : QueryView(oracle);
    Rng rng(f.seed);
    Mat pts = inst.located_points();
    ZeroErrorResult z = zero_error_locate(view, pts, ZeroErrorConfig{}, rng);
    long errors = 0;
    for (Eigen::Index i = 0; i < pts.cols(); ++i) errors += z.labels[static_cast<std::size_t>(i)] != view.truth(pts.col(i));
    check(errors == 0, "zero-error locate, " + to_string(fam));
  }
  {
    InstanceSpec spec;
    spec.d = 3;
    spec.n = 60;
    spec.seed = f.seed + 5;
    Instance inst = gen_instance(spec);
    QueryOracle oracle(inst.hidden);
    Rng rng(f.seed);
    BoostResult b = boost(oracle, inst.points, 0.1, LearnerConfig{}, rng);
    bool weights_ok = true;
    std::vector<int> recount(b.weights.counts.size(), 0);
    for (const auto& r : b.labeled_per_round)
      for (auto i : r) recount[i] += 1;
    for (std::size_t i = 0; i < recount.size(); ++i) weights_ok &= recount[i] == b.weights.counts[i];
    check(b.ok, "boost produced a total labeling");
    check(weights_ok, "boost weight exponents match labeled-round counts");
  }
  {
    InstanceSpec spec;
    spec.d = 3;
    spec.n = 10;
    spec.seed = f.seed + 9;
    Instance a = gen_instance(spec), b = gen_instance(spec);
    check(a.points == b.points && a.hidden.normal == b.hidden.normal, "instance generation is deterministic");
    Instance c = instance_from_json(nlohmann::json::parse(dump17(instance_to_json(a))));
    check(c.points == a.points && c.hidden.normal == a.hidden.normal, "instance JSON round-trips exactly");
  }
  return bad == 0 ? kExitOk : kExitInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point location with linear queries"};
  app.require_subcommand(1);
  Flags f;
  f.seed = kDefaultSeed;

  auto add_common = [&](CLI::App* s) {
    s->add_option("--d", f.d, "dimension(s)")->expected(1, -1);
    s->add_option("--n", f.n, "point count(s)")->expected(1, -1);
    s->add_option("--delta", f.delta, "failure probability for bounded mode");
    s->add_option("--epsilon", f.epsilon, "target error for the active learner");
    s->add_option("--mode", f.mode, "bounded | zero | active");
    s->add_option("--family", f.family,
                  "uniform-sphere | clustered-subspace | margin-gap | on-hyperplane-mix | lifted-nonhomogeneous");
    s->add_option("--trials", f.trials, "trials per grid cell");
    s->add_option("--seed", f.seed, "base seed (default: $PTLOC_SEED or built-in)");
    s->add_option("--out", f.out, "output file (gen, locate) or report prefix (bench, active)");
    s->add_option("--threads", f.threads, "worker threads for independent trials");
    s->add_flag("--theory-constants", f.theory, "use the asymptotic parameter formulas");
  };
  auto* gen = app.add_subcommand("gen", "generate an instance as JSON");
  auto* locate = app.add_subcommand("locate", "label every point of an instance");
  auto* bench = app.add_subcommand("bench", "run a trial grid and print the query table");
  auto* active = app.add_subcommand("active", "active learner benchmark on the circle");
  auto* selftest = app.add_subcommand("selftest", "quick end-to-end checks");
  for (auto* s : {gen, locate, bench, active, selftest}) add_common(s);
  locate->add_option("--in", f.in, "instance JSON (otherwise generated from flags)");
  bench->add_flag("--calibrate", f.calibrate, "measure the weak-learn budget constant instead");

  try {
    f.seed = default_seed();
  } catch (const InvalidSpec& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen(f);
    if (*locate) return cmd_locate(f);
    if (*bench) return cmd_bench(f);
    if (*active) return cmd_active(f, active->count("--d") > 0);
    if (*selftest) return cmd_selftest(f);
  } catch (const InvalidSpec& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidInput& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoFailure& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return kExitOk;
}
