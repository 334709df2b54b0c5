#pragma once

#include <span>
#include <vector>

#include "slsada/types.hpp"

// Reference computations written as plain loops or dense factorizations,
// independent of the solver path. Used by tests and `selfcheck`.
namespace slsada::oracle {

/// sum_c sum_{i in c} (x_i - mu_c)(x_i - mu_c)^T with explicit class means.
Matrix scatter_loop(const Matrix& x, std::span<const int> labels, int class_count);

/// || mean_i A^T xs_i - mean_j A^T xt_j ||^2 accumulated sample by sample.
double mean_difference_mmd(const Matrix& a, const Matrix& xs, const Matrix& xt);

/// Sum over classes populated in both domains of the class-restricted
/// mean difference.
double class_mean_difference_mmd(const Matrix& a, const Matrix& xs, const Matrix& xt,
                                 std::span<const int> labels_source,
                                 std::span<const int> labels_target, int class_count);

/// Dense n x n heat-kernel kNN weights by full sort of every distance row.
Matrix brute_knn_weights(const Matrix& z, int neighbor_count);

/// Neighbor lists (ascending distance, ties by index) by full sort.
std::vector<std::vector<int>> brute_knn(const Matrix& z, int neighbor_count);

/// sum_ij W_ij ||F_i - F_j||^2 over rows of F.
double pairwise_laplacian_sum(const Matrix& w, const Matrix& f);

/// Unlabeled block of the harmonic solution by dense LU on L_uu.
Matrix dense_harmonic(const Matrix& laplacian, int labeled_count, const Matrix& labeled);

/// All generalized eigenvalues of (K, B), ascending, via B^{-1/2} K B^{-1/2}
/// from the eigendecomposition of B.
Vector generalized_eigenvalues(const Matrix& k, const Matrix& b);

}  // namespace slsada::oracle
