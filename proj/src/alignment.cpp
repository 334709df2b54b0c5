#include "slsada/alignment.hpp"

#include <string>

#include "slsada/dataset.hpp"
#include "slsada/error.hpp"

namespace slsada {

Vector MmdMatrix::indicator() const {
  Vector e = Vector::Zero(size());
  if (empty()) return e;
  const double ws = 1.0 / source_members_;
  const double wt = -1.0 / target_members_;
  for (std::size_t i = 0; i < side_.size(); ++i) {
    if (side_[i] > 0) e(static_cast<Eigen::Index>(i)) = ws;
    if (side_[i] < 0) e(static_cast<Eigen::Index>(i)) = wt;
  }
  return e;
}

Matrix MmdMatrix::dense() const {
  const Eigen::Index n = size();
  Matrix m = Matrix::Zero(n, n);
  if (empty()) return m;
  const double ns = source_members_;
  const double nt = target_members_;
  const double ss = 1.0 / (ns * ns);
  const double tt = 1.0 / (nt * nt);
  const double st = -1.0 / (ns * nt);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int sj = side_[static_cast<std::size_t>(j)];
    if (sj == 0) continue;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int si = side_[static_cast<std::size_t>(i)];
      if (si == 0) continue;
      m(i, j) = (si > 0 && sj > 0) ? ss : (si < 0 && sj < 0) ? tt : st;
    }
  }
  return m;
}

std::vector<int> MmdMatrix::support() const {
  std::vector<int> out;
  if (empty()) return out;
  for (std::size_t i = 0; i < side_.size(); ++i) {
    if (side_[i] != 0) out.push_back(static_cast<int>(i));
  }
  return out;
}

Matrix MmdMatrix::sandwich(const Matrix& x) const {
  if (x.cols() != size()) {
    throw DataError("MMD matrix over " + std::to_string(size()) + " samples applied to " +
                    std::to_string(x.cols()) + " columns");
  }
  const Vector xe = x * indicator();
  return xe * xe.transpose();
}

double MmdMatrix::trace_form(const Matrix& a, const Matrix& x) const {
  if (x.cols() != size()) {
    throw DataError("MMD matrix over " + std::to_string(size()) + " samples applied to " +
                    std::to_string(x.cols()) + " columns");
  }
  return (a.transpose() * (x * indicator())).squaredNorm();
}

MmdMatrix build_m0(int source_count, int target_count) {
  if (source_count < 1 || target_count < 1) {
    throw DataError("MMD matrix needs at least one sample per domain");
  }
  MmdMatrix m;
  m.class_id_ = 0;
  m.n_s_ = source_count;
  m.source_members_ = source_count;
  m.target_members_ = target_count;
  m.side_.assign(static_cast<std::size_t>(source_count + target_count), -1);
  std::fill(m.side_.begin(), m.side_.begin() + source_count, 1);
  return m;
}

MmdMatrix build_mc(std::span<const int> labels_source, std::span<const int> labels_target,
                   int class_index) {
  if (class_index < 0) throw UsageError("class index must be nonnegative");
  MmdMatrix m;
  m.class_id_ = class_index + 1;
  m.n_s_ = static_cast<int>(labels_source.size());
  m.side_.assign(labels_source.size() + labels_target.size(), 0);
  for (std::size_t i = 0; i < labels_source.size(); ++i) {
    if (labels_source[i] == class_index) {
      m.side_[i] = 1;
      ++m.source_members_;
    }
  }
  for (std::size_t j = 0; j < labels_target.size(); ++j) {
    if (labels_target[j] == class_index) {
      m.side_[labels_source.size() + j] = -1;
      ++m.target_members_;
    }
  }
  return m;
}

std::vector<MmdMatrix> build_class_mmds(std::span<const int> labels_source,
                                        std::span<const int> labels_target, int class_count) {
  std::vector<MmdMatrix> out;
  out.reserve(static_cast<std::size_t>(class_count));
  for (int c = 0; c < class_count; ++c) out.push_back(build_mc(labels_source, labels_target, c));
  return out;
}

Matrix centroid_map(const Matrix& f, double ridge) {
  const Eigen::Index n = f.rows();
  const Eigen::Index classes = f.cols();
  bool hard = true;
  for (Eigen::Index i = 0; i < n && hard; ++i) {
    int ones = 0;
    for (Eigen::Index c = 0; c < classes; ++c) {
      if (f(i, c) == 1.0) {
        ++ones;
      } else if (f(i, c) != 0.0) {
        hard = false;
      }
    }
    hard = hard && ones == 1;
  }
  if (hard) {
    // F^T F is diagonal with the class counts.
    const Vector counts = f.colwise().sum().transpose();
    Matrix g = Matrix::Zero(n, classes);
    for (Eigen::Index c = 0; c < classes; ++c) {
      const double denom = counts(c) + ridge;
      if (denom == 0.0) continue;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (f(i, c) == 1.0) g(i, c) = 1.0 / denom;
      }
    }
    return g;
  }
  Matrix gram = f.transpose() * f;
  gram.diagonal().array() += ridge;
  if (ridge > 0.0) {
    return gram.ldlt().solve(f.transpose()).transpose();
  }
  return f * gram.completeOrthogonalDecomposition().pseudoInverse();
}

Matrix intra_class_scatter(const Matrix& x, const Matrix& f_hard) {
  if (f_hard.rows() != x.cols()) {
    throw DataError("scatter: " + std::to_string(f_hard.rows()) + " label rows for " +
                    std::to_string(x.cols()) + " samples");
  }
  const Matrix g = centroid_map(f_hard);
  const Matrix residual = x - (x * g) * f_hard.transpose();
  return residual * residual.transpose();
}

Matrix intra_class_scatter(const Matrix& x, std::span<const int> labels, int class_count) {
  return intra_class_scatter(x, one_hot(labels, class_count));
}

double projected_clustering_loss(const Matrix& a, const Matrix& x, const Matrix& g,
                                 const Matrix& f) {
  const Matrix z = a.transpose() * x;
  return (z - (z * g) * f.transpose()).squaredNorm();
}

double conditional_mmd_centroid_form(const Matrix& a, const Matrix& x_source,
                                     const Matrix& x_target, const Matrix& g_source,
                                     const Matrix& g_target) {
  return (a.transpose() * (x_source * g_source) - a.transpose() * (x_target * g_target))
      .squaredNorm();
}

double mmd_loss(const Matrix& a, const Matrix& x, std::span<const MmdMatrix> matrices) {
  double total = 0.0;
  for (const auto& m : matrices) total += m.trace_form(a, x);
  return total;
}

}  // namespace slsada
