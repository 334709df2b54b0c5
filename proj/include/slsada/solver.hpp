#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slsada/alignment.hpp"
#include "slsada/dataset.hpp"
#include "slsada/graph.hpp"
#include "slsada/types.hpp"

namespace slsada {

enum class GraphSchedule { rebuild, frozen };

/// Multiplicative rule used for F_t. `kkt` is derived from the stationarity
/// conditions of the F_t terms; `printed` has identical numerator and
/// denominator and never moves F_t. Kept for comparison only.
enum class TargetRule { kkt, printed };

/// Multiplicative rule used for F_s^u. `coupled` also carries the gradient
/// of the source-target cross term 2 tr(F_t^T L_ts F_s), so the step descends
/// on every term of the full objective that involves F_s^u. `local` uses
/// only the source-side terms.
enum class SourceRule { coupled, local };

std::string_view to_string(GraphSchedule schedule);
std::string_view to_string(TargetRule rule);
std::string_view to_string(SourceRule rule);
TargetRule parse_target_rule(std::string_view name);
SourceRule parse_source_rule(std::string_view name);
GraphSchedule parse_graph_schedule(std::string_view name);

struct SolverConfig {
  int k = 20;                // subspace dimension
  double gamma = 0.01;       // projected clustering weight
  double lambda = 0.05;      // ||A||_F^2 weight
  int iterations = 5;        // outer iterations T
  int inner_updates = 1;     // (G_s, G_t, F_s^u, F_t) passes per outer iteration
  int neighbor_count = 20;
  double epsilon = 1e-12;    // multiplicative denominator guard
  double floor = 1e-15;      // minimum entry of F and G after (re)initialization
  GraphSchedule graph_schedule = GraphSchedule::rebuild;
  bool conditional = true;   // include class-wise MMD terms
  TargetRule target_rule = TargetRule::kkt;
  SourceRule source_rule = SourceRule::coupled;
  std::uint64_t seed = 0;

  /// Named defaults: "small" (k=20, lambda=0.05) or "large" (k=100, lambda=0.1).
  static SolverConfig preset(std::string_view name);

  /// Throws UsageError on out-of-range values; `dim` is the feature count m.
  void validate(Eigen::Index dim) const;
};

/// Entries < 0 replaced by 0.
Matrix positive_part(const Matrix& t);
/// Entries > 0 replaced by 0 (the nonpositive remainder).
Matrix negative_part(const Matrix& t);

/// K_ms = sum_c X M_c X^T + gamma S_w^(s) + gamma S_w^(t) + lambda I.
/// Empty scatter matrices (size 0) are treated as zero.
Matrix assemble_kms(const Matrix& x, std::span<const MmdMatrix> mmd, const Matrix& scatter_source,
                    const Matrix& scatter_target, double gamma, double lambda);

/// Right-hand side of the eigen pencil: X X^T, plus a ridge of
/// 1e-6 * trace(X X^T) / m when X X^T is numerically singular
/// (n <= m, or reciprocal condition estimate <= 1e-10).
struct ConstraintPencil {
  Matrix gram;      // X X^T (+ ridge I)
  double ridge = 0.0;
  Matrix data_gram; // X X^T
};

ConstraintPencil make_constraint_pencil(const Matrix& x);

struct Projection {
  Matrix values;        // A, m x k
  Vector eigenvalues;   // k smallest generalized eigenvalues, ascending
  double ridge = 0.0;
  [[nodiscard]] int k() const noexcept { return static_cast<int>(values.cols()); }
};

/// Solves K a = mu (X X^T [+ ridge]) a for the k smallest mu and scales A so
/// that A^T X X^T A = I_k.
Projection solve_projection(const Matrix& kms, const ConstraintPencil& pencil, int k);
Projection solve_projection(const Matrix& kms, const Matrix& x, int k);

/// ||A^T X X^T A - I_k||_F.
double constraint_residual(const Matrix& a, const Matrix& data_gram);

// -- Multiplicative updates --------------------------------------------------
//
// [T]^- below denotes the magnitude of the negative part, -negative_part(T),
// so every numerator and denominator is nonnegative. Each rule has the form
// V <- V .* sqrt(N / (P + eps)) where grad = 2 (P - N).

/// G update for one domain (`self`), with the other domain's G fixed:
///   min ||Z_self G_self - Z_other G_other||^2 + gamma ||Z_self - Z_self G_self F_self^T||^2.
/// Source: (G_s, G_t, F_s, Z_s, Z_t). Target: (G_t, G_s, F_t, Z_t, Z_s).
Matrix update_centroid_map(const Matrix& g_self, const Matrix& g_other, const Matrix& f_self,
                           const Matrix& z_self, const Matrix& z_other, double gamma,
                           double epsilon);
double centroid_objective(const Matrix& g_self, const Matrix& g_other, const Matrix& f_self,
                          const Matrix& z_self, const Matrix& z_other, double gamma);

/// F_s^u update:
///   min gamma ||Z_s^u - Z_s G_s F_s^u^T||^2 + tr(Fu^T Luu Fu) + 2 tr(Fu^T Lul Y)
///       [+ 2 tr(Fu^T Lut Ft)].
/// The bracketed cross term is included when `l_ut` (n_su x n_t) is non-empty.
Matrix update_source_labels(const Matrix& f_unlabeled, const Matrix& y_labeled,
                            const Matrix& g_source, const Matrix& z_source,
                            const SparseMatrix& l_uu, const SparseMatrix& l_ul, double gamma,
                            double epsilon, const SparseMatrix& l_ut = {},
                            const Matrix& f_target = {});
double source_label_objective(const Matrix& f_unlabeled, const Matrix& y_labeled,
                              const Matrix& g_source, const Matrix& z_source,
                              const SparseMatrix& l_uu, const SparseMatrix& l_ul, double gamma,
                              const SparseMatrix& l_ut = {}, const Matrix& f_target = {});

/// F_t update:
///   min gamma ||Z_t - Z_t G_t F_t^T||^2 + tr(Ft^T Ltt Ft) + 2 tr(Ft^T Lts Fs).
Matrix update_target_labels(const Matrix& f_target, const Matrix& f_source,
                            const Matrix& g_target, const Matrix& z_target,
                            const SparseMatrix& l_tt, const SparseMatrix& l_ts, double gamma,
                            double epsilon, TargetRule rule = TargetRule::kkt);
double target_label_objective(const Matrix& f_target, const Matrix& f_source,
                              const Matrix& g_target, const Matrix& z_target,
                              const SparseMatrix& l_tt, const SparseMatrix& l_ts, double gamma);

// -- Algorithm state -----------------------------------------------------------

struct Embeddings {
  Matrix source;  // Z_s = A^T X_s, k x n_s
  Matrix target;  // Z_t = A^T X_t, k x n_t
};

Embeddings embed(const Matrix& a, const DomainPair& pair);

struct AdaptationState {
  Projection projection;
  Matrix g_s;  // n_s x C
  Matrix g_t;  // n_t x C
  Matrix f_s;  // n_s x C; rows [0, n_sl) are Y_s^l
  Matrix f_t;  // n_t x C
  std::vector<double> objective_trace;
  int iteration = 0;
};

Matrix update_gs(const AdaptationState& state, const Embeddings& z, const SolverConfig& config);
Matrix update_gt(const AdaptationState& state, const Embeddings& z, const SolverConfig& config);
/// Returns the full F_s with only the unlabeled rows changed.
Matrix update_fsu(const AdaptationState& state, const GraphLaplacian& laplacian,
                  const Embeddings& z, const SolverConfig& config);
Matrix update_ft(const AdaptationState& state, const GraphLaplacian& laplacian,
                 const Embeddings& z, const SolverConfig& config);

/// Full objective (without multiplier terms) at the current state:
///   gamma (pc_s + pc_t) + tr(A^T X M_0 X^T A) + ||Z_s G_s - Z_t G_t||^2
///   + propagation loss + lambda ||A||^2.
double total_objective(const AdaptationState& state, const DomainPair& pair,
                       const GraphLaplacian& laplacian, const SolverConfig& config);

/// Per outer iteration diagnostics (iteration 0 is the initialization).
struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double constraint_residual = 0.0;
  std::optional<double> accuracy_s;
  std::optional<double> accuracy_t;
};

struct SolverResult {
  AdaptationState state;
  Labels source_predictions;  // position order, labeled rows clamped
  Labels target_predictions;
  Labels initial_source_predictions;  // after the initialization propagation
  Labels initial_target_predictions;
  std::vector<IterationRecord> records;
  Embeddings embeddings;  // final
};

using IterationObserver = std::function<void(const IterationRecord&)>;

/// Runs the full alternating scheme on `pair` (jointly centered internally).
SolverResult run_slsada(const DomainPair& pair, const SolverConfig& config,
                        const IterationObserver& observer = {});

/// Initialization projection: K_ms with gamma = 0 and only M_0.
Projection initial_projection(const DomainPair& centered_pair, const ConstraintPencil& pencil,
                              const SolverConfig& config);

/// Hard labels from the two initialization propagation passes: labeled
/// source -> unlabeled source over a source-only kNN graph, then all source
/// -> target over the joint graph. `laplacian` is the joint graph.
struct InitialLabels {
  Labels source;  // position order; labeled block equals the given labels
  Labels target;
  GraphLaplacian laplacian;
};

InitialLabels propagate_initial(const DomainPair& centered_pair, const Embeddings& z,
                                const SolverConfig& config);

}  // namespace slsada
