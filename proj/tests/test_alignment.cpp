#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "slsada/alignment.hpp"
#include "slsada/dataset.hpp"
#include "slsada/oracles.hpp"
#include "test_util.hpp"

using namespace slsada;

namespace {

Labels random_labels(std::mt19937_64& rng, int n, int classes) {
  std::uniform_int_distribution<int> pick(0, classes - 1);
  Labels out(static_cast<std::size_t>(n));
  for (int& v : out) v = pick(rng);
  return out;
}

// Every class appears at least once.
Labels covering_labels(std::mt19937_64& rng, int n, int classes) {
  Labels out = random_labels(rng, n, classes);
  for (int c = 0; c < classes; ++c) out[static_cast<std::size_t>(c)] = c;
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

Matrix concat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

void check_rank_one_psd(const Matrix& m) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  const Vector ev = eig.eigenvalues();
  CHECK(ev(ev.size() - 1) >= -1e-12);
  if (ev.size() > 1) {
    CHECK(ev.head(ev.size() - 1).cwiseAbs().maxCoeff() < 1e-10);
  }
}

}  // namespace

TEST_CASE("marginal MMD matrix entries for two by two") {
  const Matrix m = build_m0(2, 2).dense();
  CHECK(m(0, 0) == 0.25);
  CHECK(m(0, 1) == 0.25);
  CHECK(m(2, 3) == 0.25);
  CHECK(m(3, 3) == 0.25);
  CHECK(m(0, 2) == -0.25);
  CHECK(m(3, 1) == -0.25);
}

TEST_CASE("marginal MMD matrix rows sum to zero and the matrix is rank one") {
  for (const auto& [ns, nt] : {std::pair{1, 1}, std::pair{3, 7}, std::pair{10, 4}}) {
    const Matrix m = build_m0(ns, nt).dense();
    CHECK(m.rowwise().sum().cwiseAbs().maxCoeff() < 1e-15);
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(m(0, 0) == 1.0 / (ns * ns));
    CHECK(m(ns, ns) == 1.0 / (nt * nt));
    CHECK(m(0, ns) == -1.0 / (ns * nt));
    check_rank_one_psd(m);
  }
  CHECK_THROWS(build_m0(0, 3));
}

TEST_CASE("marginal MMD trace equals the squared mean difference") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix xs = test::gaussian(rng, 6, 9);
    const Matrix xt = test::gaussian(rng, 6, 13) + Matrix::Constant(6, 13, 0.5);
    const Matrix a = test::gaussian(rng, 6, 3);
    const Matrix x = concat(xs, xt);
    const MmdMatrix m0 = build_m0(9, 13);
    const double ref = oracle::mean_difference_mmd(a, xs, xt);
    const double dense = (a.transpose() * x * m0.dense() * x.transpose() * a).trace();
    CHECK(std::abs(m0.trace_form(a, x) - ref) <= 1e-10 * std::max(1.0, ref));
    CHECK(std::abs(dense - ref) <= 1e-10 * std::max(1.0, ref));
    CHECK((m0.sandwich(x) - x * m0.dense() * x.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(m0.trace_form(a, x) >= -1e-10);
  }
}

TEST_CASE("class MMD matrix for one sample per domain") {
  const Labels ls{0, 1};
  const Labels lt{2, 1, 0};
  const MmdMatrix m = build_mc(ls, lt, 1);
  CHECK(m.class_id() == 2);
  const Matrix d = m.dense();
  CHECK(d(1, 1) == 1.0);
  CHECK(d(3, 3) == 1.0);
  CHECK(d(1, 3) == -1.0);
  CHECK(d(3, 1) == -1.0);
  Matrix masked = d;
  masked(1, 1) = masked(3, 3) = masked(1, 3) = masked(3, 1) = 0.0;
  CHECK(masked.cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.support() == std::vector<int>{1, 3});
}

TEST_CASE("class MMD matrix is zero when a domain lacks the class") {
  const MmdMatrix m = build_mc(Labels{0, 1, 1}, Labels{0, 0}, 1);
  CHECK(m.empty());
  CHECK(m.dense().cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.trace_form(Matrix::Ones(3, 1), Matrix::Ones(3, 5)) == 0.0);
}

TEST_CASE("class MMD trace equals the per-class mean difference") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int classes = 4;
    const Matrix xs = test::gaussian(rng, 5, 15);
    const Matrix xt = test::gaussian(rng, 5, 12);
    const Matrix a = test::gaussian(rng, 5, 2);
    const Labels ls = random_labels(rng, 15, classes);
    const Labels lt = random_labels(rng, 12, classes);
    const Matrix x = concat(xs, xt);
    const auto mcs = build_class_mmds(ls, lt, classes);
    REQUIRE(mcs.size() == static_cast<std::size_t>(classes));
    const double total = mmd_loss(a, x, mcs);
    const double ref = oracle::class_mean_difference_mmd(a, xs, xt, ls, lt, classes);
    CHECK(std::abs(total - ref) <= 1e-10 * std::max(1.0, ref));
    for (int c = 0; c < classes; ++c) {
      const Matrix d = mcs[static_cast<std::size_t>(c)].dense();
      CHECK(d.rowwise().sum().cwiseAbs().maxCoeff() < 1e-14);
      for (int i = 0; i < 27; ++i) {
        const int li = i < 15 ? ls[static_cast<std::size_t>(i)] : lt[static_cast<std::size_t>(i - 15)];
        if (li != c) CHECK(d.row(i).cwiseAbs().maxCoeff() == 0.0);
      }
      check_rank_one_psd(d);
    }
  }
}

TEST_CASE("centroid map of a hard labeling") {
  const Matrix f = one_hot(Labels{0, 1, 0, 0, 2}, 4);
  const Matrix g = centroid_map(f);
  CHECK(g(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(g(1, 1) == 1.0);
  CHECK(g(4, 2) == 1.0);
  CHECK(g(1, 0) == 0.0);
  CHECK(g.col(3).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.colwise().sum().head(3).isApprox(Eigen::RowVector3d::Ones(), 1e-15));
  CHECK(g.minCoeff() >= 0.0);
}

TEST_CASE("centroid form of conditional MMD") {
  std::mt19937_64 rng(3);
  SUBCASE("identical domains and labels give zero") {
    const Matrix x = test::gaussian(rng, 4, 10);
    const Matrix g = centroid_map(one_hot(covering_labels(rng, 10, 3), 3));
    CHECK(conditional_mmd_centroid_form(test::gaussian(rng, 4, 2), x, x, g, g) == 0.0);
  }
  SUBCASE("equals the sum of class-wise trace forms") {
    for (int trial = 0; trial < 20; ++trial) {
      const int classes = 3;
      const Matrix xs = test::gaussian(rng, 6, 14);
      const Matrix xt = test::gaussian(rng, 6, 11);
      const Matrix a = test::gaussian(rng, 6, 3);
      const Labels ls = covering_labels(rng, 14, classes);
      const Labels lt = covering_labels(rng, 11, classes);
      const double centroid = conditional_mmd_centroid_form(
          a, xs, xt, centroid_map(one_hot(ls, classes)), centroid_map(one_hot(lt, classes)));
      const double traces = mmd_loss(a, concat(xs, xt), build_class_mmds(ls, lt, classes));
      CHECK(std::abs(centroid - traces) <= 1e-8 * std::max(1.0, traces));
    }
  }
  SUBCASE("a single class reduces to the marginal term") {
    const Matrix xs = test::gaussian(rng, 5, 8);
    const Matrix xt = test::gaussian(rng, 5, 6);
    const Matrix a = test::gaussian(rng, 5, 2);
    const Matrix gs = Matrix::Constant(8, 1, 1.0 / 8);
    const Matrix gt = Matrix::Constant(6, 1, 1.0 / 6);
    const double marginal = build_m0(8, 6).trace_form(a, concat(xs, xt));
    CHECK(conditional_mmd_centroid_form(a, xs, xt, gs, gt) ==
          doctest::Approx(marginal).epsilon(1e-12));
  }
}

TEST_CASE("intra-class scatter hand cases") {
  Matrix same(2, 2);
  same << 1, 1, 2, 2;
  CHECK(intra_class_scatter(same, Labels{0, 0}, 1).cwiseAbs().maxCoeff() == 0.0);

  Matrix pair(2, 2);
  pair << 1, -1, 0, 0;
  Matrix expected(2, 2);
  expected << 2, 0, 0, 0;
  CHECK((intra_class_scatter(pair, Labels{0, 0}, 1) - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("intra-class scatter matches the per-class loop and is PSD") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = test::gaussian(rng, 7, 30);
    const Labels labels = random_labels(rng, 30, 5);
    const Matrix s = intra_class_scatter(x, labels, 5);
    const Matrix ref = oracle::scatter_loop(x, labels, 5);
    CHECK((s - ref).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s - intra_class_scatter(x, one_hot(labels, 5))).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 10; ++i) {
      const Vector v = test::gaussian(rng, 7, 1);
      CHECK(v.dot(s * v) >= -1e-10);
    }
  }
}

TEST_CASE("projected clustering loss equals the projected scatter trace") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix x = test::gaussian(rng, 6, 20);
    const Matrix a = test::gaussian(rng, 6, 3);
    const Labels labels = random_labels(rng, 20, 4);
    const Matrix f = one_hot(labels, 4);
    const double loss = projected_clustering_loss(a, x, centroid_map(f), f);
    const double trace = (a.transpose() * oracle::scatter_loop(x, labels, 4) * a).trace();
    CHECK(std::abs(loss - trace) <= 1e-8 * std::max(1.0, trace));
  }
}

TEST_CASE("projected clustering loss degenerate cases") {
  std::mt19937_64 rng(6);
  const Matrix x = test::gaussian(rng, 4, 6);
  const Matrix a = test::gaussian(rng, 4, 2);
  const Matrix eye = Matrix::Identity(6, 6);
  CHECK(projected_clustering_loss(a, x, centroid_map(eye), eye) < 1e-24);
  const Matrix f = one_hot(Labels{0, 1, 0, 1, 1, 0}, 2);
  CHECK(projected_clustering_loss(Matrix::Zero(4, 2), x, centroid_map(f), f) == 0.0);
}
