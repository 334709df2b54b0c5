#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace slsada {

struct CheckResult {
  std::string name;
  bool passed = false;
  int instances = 0;
  double worst = 0.0;      // largest observed error for the check's metric
  double tolerance = 0.0;
  std::string detail;
};

/// ||A^T X - A^T X G F^T||^2 against tr(A^T S_w A) with S_w from explicit
/// class loops; relative error < 1e-8.
CheckResult check_clustering_identity(int instances, std::uint64_t seed);

/// Sum of class-wise trace forms against the centroid form and against
/// explicit class mean differences; relative error < 1e-8.
CheckResult check_centroid_form(int instances, std::uint64_t seed);

/// Marginal trace form against the mean difference (1e-10 relative), zero
/// row sums (1e-12) and rank one (second eigenvalue < 1e-10).
CheckResult check_mmd(int instances, std::uint64_t seed);

/// Harmonic propagation on random connected graphs: residual of the
/// unlabeled rows and agreement with a dense solve, both < 1e-8.
CheckResult check_propagation(int instances, std::uint64_t seed);

/// Constraint residual < 1e-6 and trace objective equal to the sum of the k
/// smallest generalized eigenvalues from a full decomposition (1e-8 relative).
CheckResult check_eigen_step(int instances, std::uint64_t seed);

/// Each multiplicative rule is non-increasing on its sub-objective over
/// `steps` steps, slack 1e-8 * max(1, |objective|).
std::vector<CheckResult> check_descent(int instances, int steps, std::uint64_t seed);

/// The printed target-label rule changes no entry (relative change < 1e-12).
CheckResult check_printed_target_rule(int instances, std::uint64_t seed);

/// sum_ij W_ij ||F_i - F_j||^2 = 2 tr(F^T L F) on kNN graphs (1e-10 relative).
CheckResult check_pairwise_identity(int instances, std::uint64_t seed);

/// Runs every check with default instance counts.
std::vector<CheckResult> run_selfcheck(std::uint64_t seed);

/// "PASS name (n=..., worst=..., tol=...)" lines.
void print_checks(const std::vector<CheckResult>& checks, std::ostream& out);

}  // namespace slsada
