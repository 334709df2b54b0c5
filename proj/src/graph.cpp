#include "slsada/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include <Eigen/SparseCholesky>

#include "slsada/error.hpp"

namespace slsada {

SimilarityGraph build_knn_graph(const Matrix& z, int neighbor_count,
                                std::optional<double> bandwidth) {
  const Eigen::Index n = z.cols();
  if (neighbor_count <= 0) {
    throw UsageError("neighbor count must be positive, got " + std::to_string(neighbor_count));
  }
  if (n <= neighbor_count) {
    throw UsageError("kNN graph needs more than " + std::to_string(neighbor_count) +
                     " samples, got " + std::to_string(n));
  }
  if (bandwidth && !(*bandwidth > 0.0)) throw UsageError("graph bandwidth must be positive");

  const auto k = static_cast<std::size_t>(neighbor_count);
  std::vector<int> neighbors(static_cast<std::size_t>(n) * k);
  std::vector<double> distances(static_cast<std::size_t>(n) * k);
  std::vector<std::pair<double, int>> row(static_cast<std::size_t>(n - 1));

  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      row[r++] = {(z.col(i) - z.col(j)).squaredNorm(), static_cast<int>(j)};
    }
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
    for (std::size_t q = 0; q < k; ++q) {
      neighbors[static_cast<std::size_t>(i) * k + q] = row[q].second;
      distances[static_cast<std::size_t>(i) * k + q] = std::sqrt(row[q].first);
    }
  }

  double sigma = 0.0;
  if (bandwidth) {
    sigma = *bandwidth;
  } else {
    std::vector<double> sorted = distances;
    const std::size_t mid = sorted.size() / 2;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid),
                     sorted.end());
    sigma = sorted[mid];
    if (sorted.size() % 2 == 0) {
      const double lower = *std::max_element(sorted.begin(),
                                             sorted.begin() + static_cast<std::ptrdiff_t>(mid));
      sigma = 0.5 * (sigma + lower);
    }
    if (!(sigma > 0.0)) sigma = 1.0;
  }

  const double scale = 1.0 / (2.0 * sigma * sigma);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * k * 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t q = 0; q < k; ++q) {
      const std::size_t at = static_cast<std::size_t>(i) * k + q;
      const double d = distances[at];
      const double w = std::exp(-d * d * scale);
      triplets.emplace_back(static_cast<int>(i), neighbors[at], w);
      triplets.emplace_back(neighbors[at], static_cast<int>(i), w);
    }
  }
  // Duplicate (i, j) entries come from mutual neighbors and carry the same
  // weight, so keeping the max is exactly max(W, W^T).
  SparseMatrix w(n, n);
  w.setFromTriplets(triplets.begin(), triplets.end(),
                    [](double a, double b) { return std::max(a, b); });
  w.makeCompressed();
  return SimilarityGraph{std::move(w), neighbor_count, sigma};
}

SparseMatrix laplacian_of(const SparseMatrix& weights) {
  if (weights.rows() != weights.cols()) throw DataError("weight matrix must be square");
  const Eigen::Index n = weights.rows();
  Vector degree = Vector::Zero(n);
  for (Eigen::Index col = 0; col < weights.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(weights, col); it; ++it) degree(col) += it.value();
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(weights.nonZeros() + n));
  for (Eigen::Index col = 0; col < weights.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(weights, col); it; ++it) {
      if (it.row() != it.col()) triplets.emplace_back(it.row(), it.col(), -it.value());
    }
    triplets.emplace_back(col, col, degree(col));
  }
  // Self-loops cancel in D - W; the diagonal keeps only off-diagonal mass.
  for (Eigen::Index col = 0; col < weights.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(weights, col); it; ++it) {
      if (it.row() == it.col()) triplets.emplace_back(col, col, -it.value());
    }
  }
  SparseMatrix l(n, n);
  l.setFromTriplets(triplets.begin(), triplets.end());
  l.makeCompressed();
  return l;
}

GraphLaplacian::GraphLaplacian(SparseMatrix full, int source_count, int labeled_count)
    : full_(std::move(full)), n_s_(source_count), n_sl_(labeled_count) {
  const auto n = static_cast<int>(full_.rows());
  if (full_.rows() != full_.cols()) throw DataError("Laplacian must be square");
  if (n_s_ < 0 || n_s_ > n || n_sl_ < 0 || n_sl_ > n_s_) {
    throw DataError("Laplacian partition (n_s=" + std::to_string(n_s_) +
                    ", n_sl=" + std::to_string(n_sl_) + ") inconsistent with " +
                    std::to_string(n) + " nodes");
  }
  const int n_t = n - n_s_;
  const int n_su = n_s_ - n_sl_;
  ss_ = full_.block(0, 0, n_s_, n_s_);
  st_ = full_.block(0, n_s_, n_s_, n_t);
  ts_ = full_.block(n_s_, 0, n_t, n_s_);
  tt_ = full_.block(n_s_, n_s_, n_t, n_t);
  ss_ll_ = ss_.block(0, 0, n_sl_, n_sl_);
  ss_lu_ = ss_.block(0, n_sl_, n_sl_, n_su);
  ss_ul_ = ss_.block(n_sl_, 0, n_su, n_sl_);
  ss_uu_ = ss_.block(n_sl_, n_sl_, n_su, n_su);
}

GraphLaplacian build_laplacian(const SimilarityGraph& graph, int source_count,
                               int labeled_count) {
  return GraphLaplacian(laplacian_of(graph.weights), source_count, labeled_count);
}

namespace {

// True when every connected component of the unlabeled subgraph touches at
// least one labeled node.
bool every_component_anchored(const SparseMatrix& l_uu, const SparseMatrix& l_ul) {
  const Eigen::Index n = l_uu.rows();
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (Eigen::Index col = 0; col < l_uu.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(l_uu, col); it; ++it) {
      if (it.row() != it.col() && it.value() != 0.0) {
        parent[find(static_cast<int>(it.row()))] = find(static_cast<int>(it.col()));
      }
    }
  }
  std::vector<char> anchored(static_cast<std::size_t>(n), 0);
  for (Eigen::Index col = 0; col < l_ul.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(l_ul, col); it; ++it) {
      if (it.value() != 0.0) anchored[find(static_cast<int>(it.row()))] = 1;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!anchored[find(static_cast<int>(i))]) return false;
  }
  return true;
}

}  // namespace

Matrix propagate_labels(const SparseMatrix& laplacian_uu, const SparseMatrix& laplacian_ul,
                        const Matrix& labeled) {
  const Eigen::Index n_u = laplacian_uu.rows();
  if (laplacian_uu.cols() != n_u || laplacian_ul.rows() != n_u ||
      laplacian_ul.cols() != labeled.rows()) {
    throw DataError("propagate_labels: block shapes disagree (L^uu " +
                    std::to_string(laplacian_uu.rows()) + "x" +
                    std::to_string(laplacian_uu.cols()) + ", L^ul " +
                    std::to_string(laplacian_ul.rows()) + "x" +
                    std::to_string(laplacian_ul.cols()) + ", Y " +
                    std::to_string(labeled.rows()) + " rows)");
  }
  if (n_u == 0) return Matrix(0, labeled.cols());

  SparseMatrix system = laplacian_uu;
  double ridge = 0.0;
  if (!every_component_anchored(laplacian_uu, laplacian_ul)) {
    ridge = 1e-8 * laplacian_uu.diagonal().sum() / static_cast<double>(n_u);
    if (!(ridge > 0.0)) ridge = 1e-8;
    SparseMatrix eye(n_u, n_u);
    eye.setIdentity();
    system += ridge * eye;
  }

  Eigen::SimplicialLDLT<SparseMatrix> solver(system);
  if (solver.info() != Eigen::Success || (solver.vectorD().array() <= 0.0).any()) {
    throw NumericalError(
        "label propagation: L^uu is singular (ridge " + std::to_string(ridge) +
        "); use a larger ridge or check that the graph connects unlabeled nodes to labels");
  }
  const Matrix rhs = -(laplacian_ul * labeled);
  Matrix f = solver.solve(rhs);
  if (solver.info() != Eigen::Success || !f.allFinite()) {
    throw NumericalError("label propagation: harmonic solve produced non-finite values");
  }
  return f;
}

Matrix propagate_labels(const SparseMatrix& laplacian, int labeled_count,
                        const Matrix& labeled) {
  const auto n = static_cast<int>(laplacian.rows());
  if (labeled_count < 0 || labeled_count > n || labeled.rows() != labeled_count) {
    throw DataError("propagate_labels: " + std::to_string(labeled.rows()) +
                    " labeled rows for a split at " + std::to_string(labeled_count));
  }
  const int n_u = n - labeled_count;
  const SparseMatrix l_uu = laplacian.block(labeled_count, labeled_count, n_u, n_u);
  const SparseMatrix l_ul = laplacian.block(labeled_count, 0, n_u, labeled_count);
  return propagate_labels(l_uu, l_ul, labeled);
}

double propagation_loss(const GraphLaplacian& lap, const Matrix& f_source,
                        const Matrix& f_target) {
  const int n_sl = lap.labeled_count();
  const int n_su = lap.source_count() - n_sl;
  const auto y = f_source.topRows(n_sl);
  const auto fu = f_source.bottomRows(n_su);
  double loss = (fu.transpose() * (lap.ss_uu() * fu)).trace();
  loss += 2.0 * (fu.transpose() * (lap.ss_ul() * y)).trace();
  loss += (f_target.transpose() * (lap.tt() * f_target)).trace();
  loss += 2.0 * (f_target.transpose() * (lap.ts() * f_source)).trace();
  return loss;
}

void write_weights_csv(const SimilarityGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "i,j,w\n";
  for (Eigen::Index col = 0; col < graph.weights.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(graph.weights, col); it; ++it) {
      if (it.row() < it.col()) out << it.row() << ',' << it.col() << ',' << it.value() << '\n';
    }
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace slsada
