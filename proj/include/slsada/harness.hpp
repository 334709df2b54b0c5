#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "slsada/dataset.hpp"
#include "slsada/solver.hpp"

namespace slsada {

/// Methods a protocol can evaluate. The first is the full solver; the rest
/// are baselines and ablations built from the same pieces.
enum class Method {
  slsada,            // full alternating solver
  source_only,       // nearest centroid of labeled source, raw feature space
  marginal_only,     // marginal-MMD projection + nearest centroid (TCA-like)
  jda_like,          // gamma = 0, nearest-centroid pseudo-labels, class-wise MMD
  propagation_only,  // initialization propagation only
  no_clustering,     // full solver with gamma = 0
  no_conditional,    // full solver without class-wise MMD
};

std::string_view method_name(Method method);
Method parse_method(std::string_view name);
std::vector<Method> all_methods();

/// Fraction of correct source predictions over all n_s samples. Labeled
/// positions count as their clamped labels. `predictions` is in position order.
double accuracy_s(std::span<const int> predictions, const DomainPair& pair);
double accuracy_t(std::span<const int> predictions, const DomainPair& pair);

/// Assigns each query column to the nearest class centroid of `train`.
/// Classes absent from `train_labels` are never predicted.
Labels nearest_centroid(const Matrix& train, std::span<const int> train_labels, int class_count,
                        const Matrix& query);

struct MethodOutcome {
  Labels source;  // position order
  Labels target;
  std::vector<double> objective_trace;
};

/// Runs one method on a pair that already carries its labeled subset.
MethodOutcome run_method(Method method, const DomainPair& pair, const SolverConfig& config);

struct ExperimentSpec {
  std::string pair_description;  // echoed in the report
  int per_class_labels = 5;
  int repeats = 10;
  std::uint64_t seed = 0;        // master seed; repeat r uses derive_seed(seed, r)
  SolverConfig solver;
  std::vector<Method> methods{Method::slsada, Method::source_only};
  int threads = 0;               // 0: SLSADA_THREADS or hardware concurrency
  bool include_timing = false;   // timing makes reports non-reproducible byte-wise

  void validate(Eigen::Index dim) const;
};

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Worker count from SLSADA_THREADS (if set and positive) else hardware
/// concurrency, capped by `requested` when it is positive.
int resolve_threads(int requested);

struct MethodScore {
  Method method;
  bool ok = false;
  double s = 0.0;
  double t = 0.0;
  std::vector<double> objective_trace;
  std::string error;
};

struct RepeatResult {
  int repeat = 0;
  std::uint64_t seed = 0;
  std::vector<int> labeled_indices;  // original source columns
  std::vector<MethodScore> scores;   // in ExperimentSpec::methods order
  [[nodiscard]] bool complete() const;
};

struct MethodSummary {
  Method method;
  int count = 0;  // successful repeats
  double mean_s = 0.0;
  double std_s = 0.0;  // sample standard deviation (n - 1); 0 for one repeat
  double mean_t = 0.0;
  double std_t = 0.0;
};

struct RunReport {
  ExperimentSpec spec;
  std::vector<RepeatResult> repeats;
  std::vector<MethodSummary> summary;
  std::optional<double> seconds;
  [[nodiscard]] bool complete() const;
  [[nodiscard]] const MethodSummary& summary_for(Method method) const;
};

/// Mean and sample standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

/// For each repeat: draws a labeled subset from the source ground truth,
/// runs every requested method, and aggregates in repeat order. Repeats run
/// concurrently. Method failures are recorded in the report, not thrown.
RunReport run_protocol(const DomainPair& pair, const ExperimentSpec& spec);

/// Parameters a sweep can vary: k, lambda, gamma, iterations (alias T),
/// per_class.
struct SweepGrid {
  std::string parameter;
  std::vector<double> values;
};

/// One report per grid value. Every grid point is validated before any run.
std::vector<RunReport> sweep(const DomainPair& pair, const ExperimentSpec& spec,
                             const SweepGrid& grid);

/// "param,value,mean_s,std_s,mean_t,std_t" rows for the full solver.
std::string sweep_csv(const SweepGrid& grid, std::span<const RunReport> reports);

nlohmann::json to_json(const SolverConfig& config);
nlohmann::json to_json(const RunReport& report);
nlohmann::json to_json(const IterationRecord& record);
/// "method,repeats,mean_s,std_s,mean_t,std_t" rows.
std::string summary_csv(const RunReport& report);

/// Labels of the multiplicative rules in use, for run reports.
nlohmann::json update_rule_variants(const SolverConfig& config);

/// Writes "domain,true_label,predicted_label,z_1..z_k" rows: source samples
/// in original order, then target. Unknown truth is written as -1.
void embed_dump(const SolverResult& result, const DomainPair& pair,
                const std::filesystem::path& path);

}  // namespace slsada
