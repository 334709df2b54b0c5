#include "slsada/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace slsada::oracle {

Matrix scatter_loop(const Matrix& x, std::span<const int> labels, int class_count) {
  const Eigen::Index m = x.rows();
  Matrix s = Matrix::Zero(m, m);
  for (int c = 0; c < class_count; ++c) {
    Vector mu = Vector::Zero(m);
    int count = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != c) continue;
      for (Eigen::Index r = 0; r < m; ++r) mu(r) += x(r, static_cast<Eigen::Index>(i));
      ++count;
    }
    if (count == 0) continue;
    mu /= count;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != c) continue;
      for (Eigen::Index r = 0; r < m; ++r) {
        const double dr = x(r, static_cast<Eigen::Index>(i)) - mu(r);
        for (Eigen::Index q = 0; q < m; ++q) {
          s(r, q) += dr * (x(q, static_cast<Eigen::Index>(i)) - mu(q));
        }
      }
    }
  }
  return s;
}

namespace {

Vector projected_mean(const Matrix& a, const Matrix& x, std::span<const int> labels, int c,
                      int& count) {
  Vector mean = Vector::Zero(a.cols());
  count = 0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    if (!labels.empty() && labels[static_cast<std::size_t>(i)] != c) continue;
    for (Eigen::Index d = 0; d < a.cols(); ++d) {
      double v = 0.0;
      for (Eigen::Index r = 0; r < x.rows(); ++r) v += a(r, d) * x(r, i);
      mean(d) += v;
    }
    ++count;
  }
  if (count > 0) mean /= count;
  return mean;
}

}  // namespace

double mean_difference_mmd(const Matrix& a, const Matrix& xs, const Matrix& xt) {
  int ns = 0;
  int nt = 0;
  const Vector ms = projected_mean(a, xs, {}, 0, ns);
  const Vector mt = projected_mean(a, xt, {}, 0, nt);
  double total = 0.0;
  for (Eigen::Index d = 0; d < ms.size(); ++d) total += (ms(d) - mt(d)) * (ms(d) - mt(d));
  return total;
}

double class_mean_difference_mmd(const Matrix& a, const Matrix& xs, const Matrix& xt,
                                 std::span<const int> labels_source,
                                 std::span<const int> labels_target, int class_count) {
  double total = 0.0;
  for (int c = 0; c < class_count; ++c) {
    int ns = 0;
    int nt = 0;
    const Vector ms = projected_mean(a, xs, labels_source, c, ns);
    const Vector mt = projected_mean(a, xt, labels_target, c, nt);
    if (ns == 0 || nt == 0) continue;
    for (Eigen::Index d = 0; d < ms.size(); ++d) total += (ms(d) - mt(d)) * (ms(d) - mt(d));
  }
  return total;
}

std::vector<std::vector<int>> brute_knn(const Matrix& z, int neighbor_count) {
  const Eigen::Index n = z.cols();
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> d;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (Eigen::Index r = 0; r < z.rows(); ++r) s += (z(r, i) - z(r, j)) * (z(r, i) - z(r, j));
      d.emplace_back(s, static_cast<int>(j));
    }
    std::sort(d.begin(), d.end());
    for (int q = 0; q < neighbor_count && q < static_cast<int>(d.size()); ++q) {
      out[static_cast<std::size_t>(i)].push_back(d[static_cast<std::size_t>(q)].second);
    }
  }
  return out;
}

Matrix brute_knn_weights(const Matrix& z, int neighbor_count) {
  const Eigen::Index n = z.cols();
  const auto nbrs = brute_knn(z, neighbor_count);
  auto dist = [&](Eigen::Index i, Eigen::Index j) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < z.rows(); ++r) s += (z(r, i) - z(r, j)) * (z(r, i) - z(r, j));
    return std::sqrt(s);
  };
  std::vector<double> selected;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j : nbrs[static_cast<std::size_t>(i)]) selected.push_back(dist(i, j));
  }
  std::sort(selected.begin(), selected.end());
  double sigma = 1.0;
  if (!selected.empty()) {
    const std::size_t h = selected.size() / 2;
    sigma = selected.size() % 2 ? selected[h] : 0.5 * (selected[h - 1] + selected[h]);
    if (sigma == 0.0) sigma = 1.0;
  }
  Matrix w = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j : nbrs[static_cast<std::size_t>(i)]) {
      const double d = dist(i, j);
      const double v = std::exp(-d * d / (2.0 * sigma * sigma));
      w(i, j) = std::max(w(i, j), v);
      w(j, i) = std::max(w(j, i), v);
    }
  }
  return w;
}

double pairwise_laplacian_sum(const Matrix& w, const Matrix& f) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      if (w(i, j) == 0.0) continue;
      double s = 0.0;
      for (Eigen::Index c = 0; c < f.cols(); ++c) s += (f(i, c) - f(j, c)) * (f(i, c) - f(j, c));
      total += w(i, j) * s;
    }
  }
  return total;
}

Matrix dense_harmonic(const Matrix& laplacian, int labeled_count, const Matrix& labeled) {
  const Eigen::Index n = laplacian.rows();
  const Eigen::Index u = n - labeled_count;
  const Matrix l_uu = laplacian.bottomRightCorner(u, u);
  const Matrix l_ul = laplacian.bottomLeftCorner(u, labeled_count);
  const Eigen::FullPivLU<Matrix> lu(l_uu);
  if (!lu.isInvertible()) throw std::runtime_error("dense harmonic: singular unlabeled block");
  return lu.solve(-(l_ul * labeled));
}

Vector generalized_eigenvalues(const Matrix& k, const Matrix& b) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eb(b);
  if (eb.info() != Eigen::Success || eb.eigenvalues().minCoeff() <= 0.0) {
    throw std::runtime_error("generalized eigenvalues: B is not positive definite");
  }
  const Matrix inv_sqrt = eb.eigenvectors() *
                          eb.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                          eb.eigenvectors().transpose();
  Matrix reduced = inv_sqrt * k * inv_sqrt;
  reduced = 0.5 * (reduced + reduced.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Matrix> ek(reduced, Eigen::EigenvaluesOnly);
  return ek.eigenvalues();
}

}  // namespace slsada::oracle
