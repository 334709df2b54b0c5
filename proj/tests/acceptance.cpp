// One line per acceptance criterion: PASS, FAIL or SKIP. Exit status is
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "slsada/dataset.hpp"
#include "slsada/harness.hpp"
#include "slsada/selfcheck.hpp"
#include "slsada/solver.hpp"

using namespace slsada;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int id, const std::string& status, const std::string& name, const std::string& detail) {
  if (status == "FAIL") ++failures;
  std::cout << status << " criterion " << id << ": " << name << " | " << detail << std::endl;
}

std::string summarize(const CheckResult& c) {
  std::ostringstream s;
  s << std::setprecision(3) << c.name << " n=" << c.instances << " worst=" << c.worst
    << " tol=" << c.tolerance;
  if (!c.detail.empty()) s << " " << c.detail;
  return s.str();
}

void from_checks(int id, const std::string& name, const std::vector<CheckResult>& checks,
                 const std::string& extra = "", bool extra_ok = true) {
  bool ok = extra_ok;
  std::string detail;
  for (const auto& c : checks) {
    ok = ok && c.passed;
    if (!detail.empty()) detail += "; ";
    detail += (c.passed ? "" : "[failed] ") + summarize(c);
  }
  if (!extra.empty()) detail += "; " + extra;
  report(id, ok ? "PASS" : "FAIL", name, detail);
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

void criteria_one_to_six() {
  auto start = Clock::now();
  const CheckResult identity = check_clustering_identity(200, 1);
  const double elapsed = seconds_since(start);
  from_checks(1, "projected clustering equals the intra-class scatter trace", {identity},
              "runtime " + fmt(elapsed, 3) + " s (limit 10 s)", elapsed < 10.0);

  from_checks(2, "class-wise MMD sum equals the centroid form", {check_centroid_form(200, 2)});
  from_checks(3, "MMD matrices against the mean-difference oracle", {check_mmd(100, 3)});
  from_checks(4, "harmonic propagation against a dense solve", {check_propagation(50, 4)});

  std::vector<CheckResult> descent = check_descent(100, 50, 5);
  descent.push_back(check_printed_target_rule(100, 6));
  from_checks(5, "multiplicative updates descend; printed target rule is a no-op", descent);

  from_checks(6, "eigen step meets the constraint and the oracle eigenvalues",
              {check_eigen_step(50, 7)});
}

void criterion_seven() {
  const auto start = Clock::now();
  SyntheticSpec synth;  // 3 classes, 10 dims, 15 degrees, unit offset
  const DomainPair pair = generate_synthetic_pair(synth, 100);

  ExperimentSpec spec;
  spec.pair_description = "synthetic default, seed 100";
  spec.per_class_labels = 5;
  spec.repeats = 10;
  spec.seed = 7;
  spec.solver.k = 3;
  spec.methods = {Method::slsada, Method::source_only, Method::no_clustering};
  const RunReport rep = run_protocol(pair, spec);
  if (!rep.complete()) {
    report(7, "FAIL", "end-to-end synthetic", "protocol reported method failures");
    return;
  }
  const double full = rep.summary_for(Method::slsada).mean_t;
  const double source_only = rep.summary_for(Method::source_only).mean_t;
  const double no_clustering = rep.summary_for(Method::no_clustering).mean_t;

  // Longer runs on the same labeled subsets for the trace and the stability check.
  double worst_rise = 0.0;
  double acc5 = 0.0;
  double acc10 = 0.0;
  for (int r = 0; r < spec.repeats; ++r) {
    const std::uint64_t seed = derive_seed(spec.seed, static_cast<std::uint64_t>(r));
    const Labels truth = pair.to_original_order(pair.true_labels_source());
    const DomainPair labeled =
        pair.with_labeled(sample_labeled_subset(truth, 5, seed, pair.class_count()));
    SolverConfig config = spec.solver;
    config.iterations = 10;
    config.seed = seed;
    const SolverResult result = run_slsada(labeled, config);
    for (std::size_t i = 2; i < result.records.size(); ++i) {
      const double prev = result.records[i - 1].objective;
      const double rise = (result.records[i].objective - prev) / std::max(1.0, std::abs(prev));
      worst_rise = std::max(worst_rise, rise);
    }
    acc5 += *result.records[5].accuracy_t / spec.repeats;
    acc10 += *result.records[10].accuracy_t / spec.repeats;
  }
  const double elapsed = seconds_since(start);

  const bool margin_ok = full - source_only >= 0.05;
  const bool ablation_ok = full > no_clustering;
  const bool trace_ok = worst_rise <= 1e-6;
  const bool stable_ok = std::abs(acc10 - acc5) <= 0.01;
  const bool time_ok = elapsed < 120.0;
  std::ostringstream detail;
  detail << "slsada " << fmt(full) << " vs source_only " << fmt(source_only)
         << (margin_ok ? " (margin ok)" : " (margin < 0.05)") << "; gamma=0 " << fmt(no_clustering)
         << (ablation_ok ? " (below full)" : " (not below full)") << "; worst relative rise "
         << std::scientific << std::setprecision(2) << worst_rise << std::defaultfloat
         << (trace_ok ? " (non-increasing)" : " (rises)") << "; mean acc T=5 " << fmt(acc5)
         << " T=10 " << fmt(acc10) << (stable_ok ? " (stable within 0.01)" : " (drifts > 0.01)")
         << "; runtime " << fmt(elapsed, 1) << " s";
  const bool ok = margin_ok && ablation_ok && trace_ok && stable_ok && time_ok;
  report(7, ok ? "PASS" : "FAIL", "end-to-end synthetic", detail.str());
}

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return (v && *v) ? v : nullptr;
}

void criterion_eight() {
  const char* src = env("SLSADA_SURF_SOURCE");
  const char* tgt = env("SLSADA_SURF_TARGET");
  const char* ls = env("SLSADA_SURF_SOURCE_LABELS");
  const char* lt = env("SLSADA_SURF_TARGET_LABELS");
  if (!src || !tgt || !ls || !lt) {
    report(8, "SKIP", "benchmark reproduction D to W",
           "set SLSADA_SURF_SOURCE, SLSADA_SURF_TARGET, SLSADA_SURF_SOURCE_LABELS, "
           "SLSADA_SURF_TARGET_LABELS to run");
    return;
  }
  try {
    const FeatureMatrix xs = load_features(src, infer_feature_format(src));
    const FeatureMatrix xt = load_features(tgt, infer_feature_format(tgt));
    Labels ys = load_labels(ls);
    Labels yt = load_labels(lt);
    int classes = 0;
    for (int v : ys) classes = std::max(classes, v + 1);
    const DomainPair pair = normalize_samples(DomainPair(xs, xt, classes, ys, yt));
    ExperimentSpec spec;
    spec.pair_description = "dslr to webcam";
    spec.repeats = 10;
    spec.seed = 7;
    spec.solver = SolverConfig::preset("small");
    spec.methods = {Method::slsada};
    const RunReport rep = run_protocol(pair, spec);
    const MethodSummary& s = rep.summary_for(Method::slsada);
    const bool ok = rep.complete() && std::abs(s.mean_t - 0.822) <= 0.04 &&
                    std::abs(s.mean_s - 0.861) <= 0.04;
    report(8, ok ? "PASS" : "FAIL", "benchmark reproduction D to W",
           "mean t " + fmt(s.mean_t) + " (target 0.822 +- 0.04), mean s " + fmt(s.mean_s) +
               " (target 0.861 +- 0.04)");
  } catch (const std::exception& e) {
    report(8, "FAIL", "benchmark reproduction D to W", e.what());
  }
}

void criterion_nine() {
  SyntheticSpec synth;
  const DomainPair pair = generate_synthetic_pair(synth, 101);
  ExperimentSpec spec;
  spec.pair_description = "synthetic default, seed 101";
  spec.repeats = 4;
  spec.seed = 11;
  spec.solver.k = 3;
  spec.methods = all_methods();
  spec.threads = 1;
  const std::string first = to_json(run_protocol(pair, spec)).dump(2);
  spec.threads = 4;
  const std::string second = to_json(run_protocol(pair, spec)).dump(2);
  const bool ok = first == second;
  report(9, ok ? "PASS" : "FAIL", "identical config and seed give identical reports",
         std::to_string(first.size()) + " bytes, 1 vs 4 threads" +
             (ok ? ", byte-identical" : ", reports differ"));
}

}  // namespace

int main() {
  try {
    criteria_one_to_six();
    criterion_seven();
    criterion_eight();
    criterion_nine();
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria passed or skipped" : "failing criteria: ")
            << (failures == 0 ? "" : std::to_string(failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
