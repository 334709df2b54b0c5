#include "slsada/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "slsada/alignment.hpp"
#include "slsada/dataset.hpp"
#include "slsada/graph.hpp"
#include "slsada/oracles.hpp"
#include "slsada/solver.hpp"

namespace slsada {

namespace {

using Rng = std::mt19937_64;

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  }
  return out;
}

Matrix positive_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = uniform(rng, lo, hi);
  }
  return out;
}

// Labels in [0, classes) with every class present.
Labels covering_labels(Rng& rng, int n, int classes) {
  Labels out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = i < classes ? i : uniform_int(rng, 0, classes - 1);
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

double relative_error(double value, double reference) {
  const double scale = std::max(std::abs(value), std::abs(reference));
  return scale == 0.0 ? 0.0 : std::abs(value - reference) / scale;
}

CheckResult finish(std::string name, int instances, double worst, double tolerance,
                   std::string detail = {}) {
  CheckResult r;
  r.name = std::move(name);
  r.instances = instances;
  r.worst = worst;
  r.tolerance = tolerance;
  r.passed = worst < tolerance;
  r.detail = std::move(detail);
  return r;
}

SparseMatrix to_sparse(const Matrix& dense) { return dense.sparseView(0.0, 0.0); }

struct DescentInstance {
  Matrix zs, zt, gs, gt, fs, ft;
  GraphLaplacian lap;
  double gamma;
};

DescentInstance descent_instance(Rng& rng) {
  const int k = uniform_int(rng, 2, 5);
  const int classes = uniform_int(rng, 2, 4);
  const int n_s = uniform_int(rng, 8, 16);
  const int n_sl = uniform_int(rng, 1, n_s / 2);
  const int n_t = uniform_int(rng, 6, 14);
  const double gamma_choices[] = {0.001, 0.01, 0.1, 1.0};
  const double gamma = gamma_choices[uniform_int(rng, 0, 3)];
  Matrix zs = gaussian(rng, k, n_s);
  Matrix zt = gaussian(rng, k, n_t);
  Matrix points(k, n_s + n_t);
  points << zs, zt;
  GraphLaplacian lap =
      build_laplacian(build_knn_graph(points, uniform_int(rng, 2, 5)), n_s, n_sl);
  Matrix fs = positive_uniform(rng, n_s, classes, 0.01, 1.0);
  for (int i = 0; i < n_sl; ++i) {
    fs.row(i).setZero();
    fs(i, uniform_int(rng, 0, classes - 1)) = 1.0;
  }
  return DescentInstance{std::move(zs),
                         std::move(zt),
                         positive_uniform(rng, n_s, classes, 0.01, 1.0) / n_s,
                         positive_uniform(rng, n_t, classes, 0.01, 1.0) / n_t,
                         std::move(fs),
                         positive_uniform(rng, n_t, classes, 0.01, 1.0),
                         std::move(lap),
                         gamma};
}

}  // namespace

CheckResult check_clustering_identity(int instances, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int it = 0; it < instances; ++it) {
    const int m = uniform_int(rng, 2, 30);
    const int classes = uniform_int(rng, 1, 5);
    const int n = uniform_int(rng, 2 * classes, 60);
    const int k = uniform_int(rng, 1, m);
    const Matrix x = gaussian(rng, m, n);
    const Matrix a = gaussian(rng, m, k);
    const Labels labels = covering_labels(rng, n, classes);
    const Matrix f = one_hot(labels, classes);
    const Matrix g = centroid_map(f);
    const double lhs = projected_clustering_loss(a, x, g, f);
    const Matrix sw = oracle::scatter_loop(x, labels, classes);
    const double rhs = (a.transpose() * sw * a).trace();
    const double lib = (a.transpose() * intra_class_scatter(x, f) * a).trace();
    worst = std::max({worst, relative_error(lhs, rhs), relative_error(lib, rhs)});
  }
  return finish("clustering-scatter identity", instances, worst, 1e-8);
}

CheckResult check_centroid_form(int instances, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int it = 0; it < instances; ++it) {
    const int m = uniform_int(rng, 2, 30);
    const int classes = uniform_int(rng, 1, 5);
    const int n_s = uniform_int(rng, classes, 30);
    const int n_t = uniform_int(rng, classes, 30);
    const int k = uniform_int(rng, 1, m);
    const Matrix xs = gaussian(rng, m, n_s);
    const Matrix xt = gaussian(rng, m, n_t);
    const Matrix a = gaussian(rng, m, k);
    const Labels ls = covering_labels(rng, n_s, classes);
    const Labels lt = covering_labels(rng, n_t, classes);
    Matrix x(m, n_s + n_t);
    x << xs, xt;
    const std::vector<MmdMatrix> mcs = build_class_mmds(ls, lt, classes);
    const double trace_sum = mmd_loss(a, x, mcs);
    const double centroid = conditional_mmd_centroid_form(
        a, xs, xt, centroid_map(one_hot(ls, classes)), centroid_map(one_hot(lt, classes)));
    const double direct = oracle::class_mean_difference_mmd(a, xs, xt, ls, lt, classes);
    worst = std::max({worst, relative_error(trace_sum, centroid),
                      relative_error(trace_sum, direct)});
  }
  return finish("class-wise MMD centroid form", instances, worst, 1e-8);
}

CheckResult check_mmd(int instances, std::uint64_t seed) {
  Rng rng(seed);
  double worst_value = 0.0;
  double worst_rows = 0.0;
  double worst_rank = 0.0;
  for (int it = 0; it < instances; ++it) {
    const int m = uniform_int(rng, 2, 20);
    const int classes = uniform_int(rng, 1, 4);
    const int n_s = uniform_int(rng, 2, 30);
    const int n_t = uniform_int(rng, 2, 30);
    const int k = uniform_int(rng, 1, m);
    const Matrix xs = gaussian(rng, m, n_s);
    const Matrix xt = gaussian(rng, m, n_t);
    const Matrix a = gaussian(rng, m, k);
    Matrix x(m, n_s + n_t);
    x << xs, xt;
    const MmdMatrix m0 = build_m0(n_s, n_t);
    const double reference = oracle::mean_difference_mmd(a, xs, xt);
    worst_value = std::max(worst_value, std::abs(m0.trace_form(a, x) - reference) /
                                            std::max(1.0, std::abs(reference)));

    std::vector<MmdMatrix> all{m0};
    Labels ls(static_cast<std::size_t>(n_s));
    Labels lt(static_cast<std::size_t>(n_t));
    for (auto& v : ls) v = uniform_int(rng, 0, classes - 1);
    for (auto& v : lt) v = uniform_int(rng, 0, classes - 1);
    for (auto& mc : build_class_mmds(ls, lt, classes)) {
      if (!mc.empty()) all.push_back(std::move(mc));
    }
    for (const auto& mc : all) {
      const Matrix dense = mc.dense();
      worst_rows = std::max(worst_rows, dense.rowwise().sum().cwiseAbs().maxCoeff());
      const Eigen::SelfAdjointEigenSolver<Matrix> es(dense, Eigen::EigenvaluesOnly);
      Vector mags = es.eigenvalues().cwiseAbs();
      std::sort(mags.data(), mags.data() + mags.size(), std::greater<>());
      if (mags.size() > 1) worst_rank = std::max(worst_rank, mags(1));
    }
  }
  std::ostringstream detail;
  detail << "row sums " << worst_rows << " (tol 1e-12), second eigenvalue " << worst_rank
         << " (tol 1e-10)";
  CheckResult r = finish("MMD mean-difference oracle", instances, worst_value, 1e-10,
                         detail.str());
  r.passed = r.passed && worst_rows < 1e-12 && worst_rank < 1e-10;
  return r;
}

CheckResult check_propagation(int instances, std::uint64_t seed) {
  Rng rng(seed);
  double worst_residual = 0.0;
  double worst_diff = 0.0;
  for (int it = 0; it < instances; ++it) {
    const int n = uniform_int(rng, 10, 200);
    const int classes = uniform_int(rng, 2, 5);
    const int n_l = uniform_int(rng, 1, std::max(1, n / 3));
    Matrix w = Matrix::Zero(n, n);
    for (int i = 1; i < n; ++i) {
      const int j = uniform_int(rng, 0, i - 1);
      w(i, j) = w(j, i) = uniform(rng, 0.1, 1.0);
    }
    for (int e = 0; e < 2 * n; ++e) {
      const int i = uniform_int(rng, 0, n - 1);
      const int j = uniform_int(rng, 0, n - 1);
      if (i != j) w(i, j) = w(j, i) = uniform(rng, 0.1, 1.0);
    }
    Matrix l = -w;
    l.diagonal() = w.rowwise().sum();
    Labels given(static_cast<std::size_t>(n_l));
    for (auto& v : given) v = uniform_int(rng, 0, classes - 1);
    const Matrix y = one_hot(given, classes);
    const Matrix fu = propagate_labels(to_sparse(l), n_l, y);
    Matrix f(n, classes);
    f << y, fu;
    worst_residual = std::max(worst_residual, (l * f).bottomRows(n - n_l).cwiseAbs().maxCoeff());
    worst_diff = std::max(worst_diff,
                          (fu - oracle::dense_harmonic(l, n_l, y)).cwiseAbs().maxCoeff());
  }
  std::ostringstream detail;
  detail << "residual " << worst_residual << ", dense-solve difference " << worst_diff;
  return finish("harmonic propagation", instances, std::max(worst_residual, worst_diff), 1e-8,
                detail.str());
}

CheckResult check_eigen_step(int instances, std::uint64_t seed) {
  Rng rng(seed);
  double worst_constraint = 0.0;
  double worst_trace = 0.0;
  for (int it = 0; it < instances; ++it) {
    const int m = uniform_int(rng, 2, 15);
    const int n_s = uniform_int(rng, m + 2, 40);
    const int n_t = uniform_int(rng, 2, 40);
    const int k = uniform_int(rng, 1, m);
    const int classes = uniform_int(rng, 1, 4);
    Matrix x = gaussian(rng, m, n_s + n_t);
    x = x.colwise() - x.rowwise().mean();
    Labels ls(static_cast<std::size_t>(n_s));
    Labels lt(static_cast<std::size_t>(n_t));
    for (auto& v : ls) v = uniform_int(rng, 0, classes - 1);
    for (auto& v : lt) v = uniform_int(rng, 0, classes - 1);
    std::vector<MmdMatrix> mmds{build_m0(n_s, n_t)};
    for (auto& mc : build_class_mmds(ls, lt, classes)) mmds.push_back(std::move(mc));
    const double gamma = uniform(rng, 0.0, 1.0);
    const double lambda = uniform(rng, 0.01, 1.0);
    const Matrix kms =
        assemble_kms(x, mmds, intra_class_scatter(x.leftCols(n_s), ls, classes),
                     intra_class_scatter(x.rightCols(n_t), lt, classes), gamma, lambda);
    const Projection p = solve_projection(kms, x, k);
    const Matrix gram = x * x.transpose();
    worst_constraint = std::max(worst_constraint, constraint_residual(p.values, gram));
    const double objective = (p.values.transpose() * kms * p.values).trace();
    const Vector all = oracle::generalized_eigenvalues(kms, gram);
    const double expected = all.head(k).sum();
    worst_trace = std::max(worst_trace,
                           std::abs(objective - expected) / std::max(1.0, std::abs(expected)));
  }
  std::ostringstream detail;
  detail << "constraint residual " << worst_constraint << " (tol 1e-6), trace error "
         << worst_trace << " (tol 1e-8)";
  CheckResult r = finish("eigen step", instances, worst_trace, 1e-8, detail.str());
  r.passed = r.passed && worst_constraint < 1e-6;
  return r;
}

std::vector<CheckResult> check_descent(int instances, int steps, std::uint64_t seed) {
  Rng rng(seed);
  double rise_g = 0.0;
  double rise_fs = 0.0;
  double rise_ft = 0.0;
  constexpr double eps = 1e-12;
  auto rise = [](double next, double prev) {
    return std::max(0.0, next - prev) / std::max(1.0, std::abs(prev));
  };
  for (int it = 0; it < instances; ++it) {
    DescentInstance d = descent_instance(rng);
    const int n_sl = d.lap.labeled_count();
    const int n_su = d.lap.source_count() - n_sl;

    Matrix gs = d.gs;
    double prev = centroid_objective(gs, d.gt, d.fs, d.zs, d.zt, d.gamma);
    for (int s = 0; s < steps; ++s) {
      gs = update_centroid_map(gs, d.gt, d.fs, d.zs, d.zt, d.gamma, eps);
      const double next = centroid_objective(gs, d.gt, d.fs, d.zs, d.zt, d.gamma);
      rise_g = std::max(rise_g, rise(next, prev));
      prev = next;
    }
    Matrix gt = d.gt;
    prev = centroid_objective(gt, d.gs, d.ft, d.zt, d.zs, d.gamma);
    for (int s = 0; s < steps; ++s) {
      gt = update_centroid_map(gt, d.gs, d.ft, d.zt, d.zs, d.gamma, eps);
      const double next = centroid_objective(gt, d.gs, d.ft, d.zt, d.zs, d.gamma);
      rise_g = std::max(rise_g, rise(next, prev));
      prev = next;
    }

    const Matrix y = d.fs.topRows(n_sl);
    const SparseMatrix l_ut = d.lap.st().transpose().rightCols(n_su).transpose();
    for (const SparseMatrix& cross : {SparseMatrix(), l_ut}) {
      Matrix fu = d.fs.bottomRows(n_su);
      prev = source_label_objective(fu, y, d.gs, d.zs, d.lap.ss_uu(), d.lap.ss_ul(), d.gamma,
                                    cross, d.ft);
      for (int s = 0; s < steps; ++s) {
        fu = update_source_labels(fu, y, d.gs, d.zs, d.lap.ss_uu(), d.lap.ss_ul(), d.gamma, eps,
                                  cross, d.ft);
        const double next = source_label_objective(fu, y, d.gs, d.zs, d.lap.ss_uu(),
                                                   d.lap.ss_ul(), d.gamma, cross, d.ft);
        rise_fs = std::max(rise_fs, rise(next, prev));
        prev = next;
      }
    }

    Matrix ft = d.ft;
    prev = target_label_objective(ft, d.fs, d.gt, d.zt, d.lap.tt(), d.lap.ts(), d.gamma);
    for (int s = 0; s < steps; ++s) {
      ft = update_target_labels(ft, d.fs, d.gt, d.zt, d.lap.tt(), d.lap.ts(), d.gamma, eps,
                                TargetRule::kkt);
      const double next =
          target_label_objective(ft, d.fs, d.gt, d.zt, d.lap.tt(), d.lap.ts(), d.gamma);
      rise_ft = std::max(rise_ft, rise(next, prev));
      prev = next;
    }
  }
  return {finish("descent: centroid maps", instances, rise_g, 1e-8),
          finish("descent: unlabeled source labels (local and coupled)", instances, rise_fs, 1e-8),
          finish("descent: target labels (repaired rule)", instances, rise_ft, 1e-8)};
}

CheckResult check_printed_target_rule(int instances, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int it = 0; it < instances; ++it) {
    const DescentInstance d = descent_instance(rng);
    const Matrix next = update_target_labels(d.ft, d.fs, d.gt, d.zt, d.lap.tt(), d.lap.ts(),
                                             d.gamma, 1e-12, TargetRule::printed);
    worst = std::max(worst, ((next - d.ft).cwiseAbs().array() / d.ft.cwiseAbs().array()).maxCoeff());
  }
  return finish("printed target rule is a no-op", instances, worst, 1e-12);
}

CheckResult check_pairwise_identity(int instances, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int it = 0; it < instances; ++it) {
    const int n = uniform_int(rng, 4, 60);
    const Matrix z = gaussian(rng, uniform_int(rng, 1, 6), n);
    const SimilarityGraph g = build_knn_graph(z, uniform_int(rng, 1, std::min(8, n - 1)));
    const Matrix f = positive_uniform(rng, n, uniform_int(rng, 1, 5), 0.0, 1.0);
    const Matrix l = Matrix(laplacian_of(g.weights));
    const double trace = (f.transpose() * l * f).trace();
    worst = std::max(worst, relative_error(oracle::pairwise_laplacian_sum(Matrix(g.weights), f),
                                           2.0 * trace));
  }
  return finish("pairwise Laplacian identity", instances, worst, 1e-10);
}

std::vector<CheckResult> run_selfcheck(std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(check_clustering_identity(200, seed + 1));
  out.push_back(check_centroid_form(200, seed + 2));
  out.push_back(check_mmd(100, seed + 3));
  out.push_back(check_propagation(50, seed + 4));
  out.push_back(check_eigen_step(50, seed + 5));
  for (auto& r : check_descent(100, 50, seed + 6)) out.push_back(std::move(r));
  out.push_back(check_printed_target_rule(100, seed + 7));
  out.push_back(check_pairwise_identity(50, seed + 8));
  return out;
}

void print_checks(const std::vector<CheckResult>& checks, std::ostream& out) {
  for (const auto& c : checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << " (n=" << c.instances
        << ", worst=" << std::setprecision(3) << c.worst << ", tol=" << c.tolerance << ")";
    if (!c.detail.empty()) out << " " << c.detail;
    out << '\n';
  }
}

}  // namespace slsada
