#pragma once

#include <span>
#include <vector>

#include "slsada/types.hpp"

namespace slsada {

/// Rank-one MMD matrix M = e e^T over [source | target] samples.
///
/// For the marginal matrix (class_id 0) e holds 1/n_s on source samples and
/// -1/n_t on target samples. For class c (class_id c, 1-based) only the
/// samples whose pseudo-label is c - 1 participate, with 1/n_s^c and
/// -1/n_t^c; the matrix is zero when either count is 0. Only the indicator
/// is stored; `dense()` materializes the n x n matrix with entries formed
/// from the counts directly.
class MmdMatrix {
 public:
  [[nodiscard]] int class_id() const noexcept { return class_id_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(side_.size()); }
  [[nodiscard]] bool empty() const noexcept { return source_members_ == 0 || target_members_ == 0; }
  [[nodiscard]] int source_members() const noexcept { return source_members_; }
  [[nodiscard]] int target_members() const noexcept { return target_members_; }

  /// e, so that M = e e^T.
  [[nodiscard]] Vector indicator() const;
  [[nodiscard]] Matrix dense() const;
  /// Indices with nonzero rows/columns.
  [[nodiscard]] std::vector<int> support() const;

  /// X M X^T (m x m), computed as (X e)(X e)^T.
  [[nodiscard]] Matrix sandwich(const Matrix& x) const;
  /// tr(A^T X M X^T A) = ||A^T X e||^2.
  [[nodiscard]] double trace_form(const Matrix& a, const Matrix& x) const;

  friend MmdMatrix build_m0(int source_count, int target_count);
  friend MmdMatrix build_mc(std::span<const int> labels_source,
                            std::span<const int> labels_target, int class_index);

 private:
  MmdMatrix() = default;

  int class_id_ = 0;
  int n_s_ = 0;
  int source_members_ = 0;
  int target_members_ = 0;
  std::vector<signed char> side_;  // +1 source member, -1 target member, 0 outside
};

MmdMatrix build_m0(int source_count, int target_count);

/// Class-wise MMD matrix for pseudo-label `class_index` (0-based); the
/// resulting class_id() is class_index + 1.
MmdMatrix build_mc(std::span<const int> labels_source, std::span<const int> labels_target,
                   int class_index);

/// All class-wise matrices for classes [0, class_count).
std::vector<MmdMatrix> build_class_mmds(std::span<const int> labels_source,
                                        std::span<const int> labels_target, int class_count);

/// G = F (F^T F + ridge I)^{-1}. With ridge 0 and a hard F this is exactly
/// 1/n^c on the members of class c; empty classes get a zero column.
Matrix centroid_map(const Matrix& f, double ridge = 0.0);

/// S_w = (X - X G F^T)(X - X G F^T)^T with G the centroid map of the hard F.
Matrix intra_class_scatter(const Matrix& x, const Matrix& f_hard);
Matrix intra_class_scatter(const Matrix& x, std::span<const int> labels, int class_count);

/// ||A^T X - A^T X G F^T||_F^2.
double projected_clustering_loss(const Matrix& a, const Matrix& x, const Matrix& g,
                                 const Matrix& f);

/// ||A^T Xs Gs - A^T Xt Gt||_F^2.
double conditional_mmd_centroid_form(const Matrix& a, const Matrix& x_source,
                                     const Matrix& x_target, const Matrix& g_source,
                                     const Matrix& g_target);

/// Sum of trace forms over the given matrices.
double mmd_loss(const Matrix& a, const Matrix& x, std::span<const MmdMatrix> matrices);

}  // namespace slsada
