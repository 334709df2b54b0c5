#pragma once

#include <filesystem>
#include <optional>

#include "slsada/types.hpp"

namespace slsada {

/// Symmetric kNN affinity graph with heat-kernel weights.
struct SimilarityGraph {
  SparseMatrix weights;
  int neighbor_count = 0;
  double bandwidth = 0.0;
};

/// Connects every column of `z` (k x n) to its `neighbor_count` nearest
/// columns by Euclidean distance (ties by lower index) and weights edges
/// with exp(-d^2 / (2 sigma^2)). sigma defaults to the median distance over
/// all selected neighbor pairs (1 if that median is 0). W = max(W, W^T).
SimilarityGraph build_knn_graph(const Matrix& z, int neighbor_count,
                                std::optional<double> bandwidth = std::nullopt);

/// L = D - W, D = diag(column sums of W).
SparseMatrix laplacian_of(const SparseMatrix& weights);

/// Laplacian over [source | target] nodes with the block views used by
/// label propagation. Source nodes are labeled-first: [0, n_sl) labeled,
/// [n_sl, n_s) unlabeled, [n_s, n) target.
class GraphLaplacian {
 public:
  GraphLaplacian(SparseMatrix full, int source_count, int labeled_count);

  [[nodiscard]] const SparseMatrix& full() const noexcept { return full_; }
  [[nodiscard]] int size() const noexcept { return static_cast<int>(full_.rows()); }
  [[nodiscard]] int source_count() const noexcept { return n_s_; }
  [[nodiscard]] int labeled_count() const noexcept { return n_sl_; }
  [[nodiscard]] int target_count() const noexcept { return size() - n_s_; }

  [[nodiscard]] const SparseMatrix& ss() const noexcept { return ss_; }
  [[nodiscard]] const SparseMatrix& st() const noexcept { return st_; }
  [[nodiscard]] const SparseMatrix& ts() const noexcept { return ts_; }
  [[nodiscard]] const SparseMatrix& tt() const noexcept { return tt_; }
  [[nodiscard]] const SparseMatrix& ss_ll() const noexcept { return ss_ll_; }
  [[nodiscard]] const SparseMatrix& ss_lu() const noexcept { return ss_lu_; }
  [[nodiscard]] const SparseMatrix& ss_ul() const noexcept { return ss_ul_; }
  [[nodiscard]] const SparseMatrix& ss_uu() const noexcept { return ss_uu_; }

 private:
  SparseMatrix full_;
  int n_s_;
  int n_sl_;
  SparseMatrix ss_, st_, ts_, tt_;
  SparseMatrix ss_ll_, ss_lu_, ss_ul_, ss_uu_;
};

GraphLaplacian build_laplacian(const SimilarityGraph& graph, int source_count,
                               int labeled_count);

/// Harmonic label propagation: F^u = -(L^uu)^{-1} L^ul Y^l.
///
/// A ridge of 1e-8 * trace(L^uu) / n_u is added only when some unlabeled
/// connected component has no edge to a labeled node (L^uu singular).
/// Throws NumericalError when the factorization still fails.
Matrix propagate_labels(const SparseMatrix& laplacian_uu, const SparseMatrix& laplacian_ul,
                        const Matrix& labeled);

/// Same, on a full Laplacian whose first `labeled_count` nodes are labeled.
Matrix propagate_labels(const SparseMatrix& laplacian, int labeled_count,
                        const Matrix& labeled);

/// Expanded trace form of the propagation loss:
///   tr(Fu' Luu Fu) + 2 tr(Fu' Lul Y) + tr(Ft' Ltt Ft) + 2 tr(Ft' Lts Fs).
/// Uses tr(F' L F) directly; the pairwise-sum form is twice this value.
double propagation_loss(const GraphLaplacian& laplacian, const Matrix& f_source,
                        const Matrix& f_target);

/// Writes the upper triangle of W as "i,j,w" lines.
void write_weights_csv(const SimilarityGraph& graph, const std::filesystem::path& path);

}  // namespace slsada
