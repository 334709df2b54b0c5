#include <doctest.h>

#include <fstream>
#include <set>

#include "slsada/dataset.hpp"
#include "slsada/error.hpp"
#include "slsada/harness.hpp"
#include "test_util.hpp"

using namespace slsada;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("feature matrix rejects empty and non-finite input") {
  CHECK_THROWS_AS(FeatureMatrix(Matrix(0, 3)), DataError);
  Matrix bad = Matrix::Ones(2, 2);
  bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(FeatureMatrix{bad}, doctest::Contains("(row 1"), DataError);
  bad(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(FeatureMatrix{bad}, DataError);
}

TEST_CASE("csv features parse with header m,n") {
  const auto dir = test::scratch_dir("csv_parse");
  write_file(dir / "x.csv", "2,3\n1,2,3\n4,5,6\n");
  const FeatureMatrix x = load_features(dir / "x.csv", FeatureFormat::csv);
  CHECK(x.dim() == 2);
  CHECK(x.samples() == 3);
  CHECK(x.values()(1, 2) == 6.0);
  CHECK(x.values()(0, 1) == 2.0);
}

TEST_CASE("csv parse errors name the cell or row") {
  const auto dir = test::scratch_dir("csv_errors");
  write_file(dir / "abc.csv", "2,2\n1,2\n3,abc\n");
  CHECK_THROWS_WITH_AS(load_features(dir / "abc.csv", FeatureFormat::csv),
                       doctest::Contains("(row 1, col 1)"), DataError);
  write_file(dir / "short.csv", "2,3\n1,2,3\n4,5\n");
  CHECK_THROWS_WITH_AS(load_features(dir / "short.csv", FeatureFormat::csv),
                       doctest::Contains("row 1"), DataError);
  write_file(dir / "inf.csv", "1,2\n1,inf\n");
  CHECK_THROWS_WITH_AS(load_features(dir / "inf.csv", FeatureFormat::csv),
                       doctest::Contains("non-finite"), DataError);
  write_file(dir / "extra.csv", "1,2\n1,2\n3,4\n");
  CHECK_THROWS_AS(load_features(dir / "extra.csv", FeatureFormat::csv), DataError);
  CHECK_THROWS_AS(load_features(dir / "missing.csv", FeatureFormat::csv), DataError);
}

TEST_CASE("feature round trip is bit exact in both formats") {
  std::mt19937_64 rng(3);
  Matrix v = test::gaussian(rng, 4, 7) * 1e3;
  v(0, 0) = 1e-300;
  v(1, 1) = -0.1;
  v(2, 2) = 5e-324;
  const FeatureMatrix x(v);
  const auto dir = test::scratch_dir("roundtrip");
  for (const FeatureFormat f : {FeatureFormat::csv, FeatureFormat::binary}) {
    const auto path = dir / (f == FeatureFormat::csv ? "x.csv" : "x.bin");
    save_features(x, path, f);
    const FeatureMatrix back = load_features(path, f);
    REQUIRE(back.dim() == 4);
    REQUIRE(back.samples() == 7);
    CHECK((back.values().array() == v.array()).all());
  }
  CHECK(infer_feature_format(dir / "x.bin") == FeatureFormat::binary);
  CHECK(infer_feature_format(dir / "x.raw") == FeatureFormat::binary);
  CHECK(infer_feature_format(dir / "x.csv") == FeatureFormat::csv);
}

TEST_CASE("binary format layout is u64 m, n then row-major doubles") {
  const auto dir = test::scratch_dir("binary_layout");
  Matrix v(2, 3);
  v << 1, 2, 3, 4, 5, 6;
  save_features(FeatureMatrix(v), dir / "x.bin", FeatureFormat::binary);
  std::ifstream in(dir / "x.bin", std::ios::binary);
  std::uint64_t m = 0;
  std::uint64_t n = 0;
  double first[3];
  in.read(reinterpret_cast<char*>(&m), 8);
  in.read(reinterpret_cast<char*>(&n), 8);
  in.read(reinterpret_cast<char*>(first), sizeof(first));
  CHECK(m == 2);
  CHECK(n == 3);
  CHECK(first[0] == 1.0);
  CHECK(first[1] == 2.0);
  CHECK(first[2] == 3.0);
  CHECK(std::filesystem::file_size(dir / "x.bin") == 16 + 6 * 8);

  std::filesystem::resize_file(dir / "x.bin", 16 + 5 * 8);
  CHECK_THROWS_AS(load_features(dir / "x.bin", FeatureFormat::binary), DataError);
}

TEST_CASE("label and index files round trip") {
  const auto dir = test::scratch_dir("labels");
  const Labels labels{0, 2, 1, 1, 0};
  save_labels(labels, dir / "l.txt");
  CHECK(load_labels(dir / "l.txt") == labels);
  save_indices(std::vector<int>{4, 0, 3}, dir / "i.txt");
  CHECK(load_indices(dir / "i.txt") == std::vector<int>{4, 0, 3});
  write_file(dir / "neg.txt", "0\n-1\n");
  CHECK_THROWS_AS(load_labels(dir / "neg.txt"), DataError);
}

TEST_CASE("centering subtracts row means") {
  Matrix v(2, 2);
  v << 1, 3, 2, 2;
  const Matrix c = center_features(FeatureMatrix(v)).values();
  Matrix expected(2, 2);
  expected << -1, 1, 0, 0;
  CHECK((c - expected).cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(11);
  const FeatureMatrix r(test::gaussian(rng, 5, 7) + Matrix::Constant(5, 7, 3.0));
  const FeatureMatrix once = center_features(r);
  CHECK(once.values().rowwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  const FeatureMatrix twice = center_features(once);
  CHECK((twice.values() - once.values()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("joint centering uses the concatenated mean") {
  std::mt19937_64 rng(5);
  const Matrix xs = test::gaussian(rng, 3, 4);
  const Matrix xt = test::gaussian(rng, 3, 6) + Matrix::Constant(3, 6, 2.0);
  const DomainPair pair(FeatureMatrix(xs), FeatureMatrix(xt), 2);
  const DomainPair c = center_jointly(pair);
  Matrix all(3, 10);
  all << c.source().values(), c.target().values();
  CHECK(all.rowwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  // Target mean keeps its offset relative to source.
  const Vector gap = c.target().values().rowwise().mean() - c.source().values().rowwise().mean();
  const Vector raw_gap = xt.rowwise().mean() - xs.rowwise().mean();
  CHECK((gap - raw_gap).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("normalization scales samples to unit length and keeps zero columns") {
  Matrix v(2, 3);
  v << 3, 0, 1, 4, 0, 0;
  const Matrix n = normalize_samples(FeatureMatrix(v)).values();
  CHECK(n.col(0).norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(n(0, 0) == doctest::Approx(0.6));
  CHECK(n.col(1).norm() == 0.0);
  CHECK(n(0, 2) == 1.0);
}

TEST_CASE("labeled samples are moved first and the permutation is recorded") {
  std::mt19937_64 rng(2);
  const Matrix xs = test::gaussian(rng, 2, 6);
  const Matrix xt = test::gaussian(rng, 2, 3);
  const Labels truth{0, 1, 0, 1, 1, 0};
  const DomainPair base(FeatureMatrix(xs), FeatureMatrix(xt), 2, truth, Labels{1, 0, 1});
  const std::vector<int> idx{4, 1};
  const DomainPair p = base.with_labeled(idx);
  CHECK(p.labeled_count() == 2);
  const std::vector<int> order(p.source_order().begin(), p.source_order().end());
  CHECK(order == std::vector<int>{4, 1, 0, 2, 3, 5});
  CHECK(p.source().values().col(0) == xs.col(4));
  CHECK(p.source().values().col(2) == xs.col(0));
  CHECK(std::vector<int>(p.labeled_classes().begin(), p.labeled_classes().end()) ==
        std::vector<int>{1, 1});
  const Matrix y = p.labeled_labels().values();
  CHECK(y.rows() == 2);
  CHECK(y(0, 1) == 1.0);
  CHECK(y(0, 0) == 0.0);

  // Permutation property: mapping per-position values back restores order.
  CHECK(p.to_original_order(p.true_labels_source()) == truth);
  CHECK((p.source_original().array() == xs.array()).all());

  CHECK_THROWS_AS((void)base.with_labeled(std::vector<int>{6}), DataError);
  CHECK_THROWS_AS((void)base.with_labeled(std::vector<int>{1, 1}), DataError);
  CHECK_THROWS_AS((void)base.with_labeled(std::vector<int>{0}, std::vector<int>{2}), DataError);
}

TEST_CASE("pair rejects mismatched feature spaces") {
  CHECK_THROWS_AS(DomainPair(FeatureMatrix(Matrix::Ones(3, 2)), FeatureMatrix(Matrix::Ones(2, 2)), 2),
                  DataError);
  CHECK_THROWS_AS(DomainPair(FeatureMatrix(Matrix::Ones(2, 2)), FeatureMatrix(Matrix::Ones(2, 2)), 2,
                             Labels{0, 2}),
                  DataError);
}

TEST_CASE("label matrices and hard labels") {
  Matrix soft(3, 3);
  soft << 0.2, 0.5, 0.5, 1, 0, 0, 0, 0, 0;
  CHECK(hard_labels(soft) == Labels{1, 0, 0});
  const LabelMatrix y = LabelMatrix::one_hot(std::vector<int>{2, 0}, 3);
  CHECK(y.is_hard_row(0));
  CHECK(y.values()(0, 2) == 1.0);
  CHECK_FALSE(LabelMatrix(soft).is_hard_row(0));
  CHECK_THROWS_AS(LabelMatrix(-Matrix::Ones(1, 2)), DataError);
}

TEST_CASE("labeled subset sampling") {
  Labels labels;
  for (int c = 0; c < 10; ++c) {
    for (int i = 0; i < 8; ++i) labels.push_back(c);
  }
  const std::vector<int> idx = sample_labeled_subset(labels, 5, 42);
  CHECK(idx.size() == 50);
  CHECK(std::is_sorted(idx.begin(), idx.end()));
  CHECK(std::set<int>(idx.begin(), idx.end()).size() == 50);
  std::vector<int> per(10, 0);
  for (int i : idx) ++per[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
  for (int n : per) CHECK(n == 5);

  CHECK(sample_labeled_subset(labels, 5, 42) == idx);

  const std::vector<int> all = sample_labeled_subset(labels, 8, 1);
  CHECK(all.size() == labels.size());
  CHECK(sample_labeled_subset(labels, 8, 99) == all);

  Labels two(100);
  for (std::size_t i = 0; i < two.size(); ++i) two[i] = static_cast<int>(i % 2);
  CHECK(sample_labeled_subset(two, 5, 1) != sample_labeled_subset(two, 5, 2));

  Labels uneven{0, 0, 0, 1, 1};
  CHECK_THROWS_WITH_AS(sample_labeled_subset(uneven, 3, 0), doctest::Contains("class 1"),
                       DataError);
}

TEST_CASE("synthetic pair is deterministic and validated") {
  SyntheticSpec spec;
  const DomainPair a = generate_synthetic_pair(spec, 9);
  const DomainPair b = generate_synthetic_pair(spec, 9);
  CHECK((a.source().values().array() == b.source().values().array()).all());
  CHECK((a.target().values().array() == b.target().values().array()).all());
  CHECK(a.true_labels_target() == b.true_labels_target());
  CHECK(a.source_count() == 150);
  CHECK(a.target_count() == 150);
  CHECK(a.dim() == 10);

  SyntheticSpec bad = spec;
  bad.covariance_scale = 0.0;
  CHECK_THROWS_AS(generate_synthetic_pair(bad, 0), UsageError);
  bad = spec;
  bad.classes = 1;
  CHECK_THROWS_AS(generate_synthetic_pair(bad, 0), UsageError);
}

TEST_CASE("rotation matrix is orthogonal and acts on coordinate pairs") {
  const Matrix r = synthetic_rotation(5, 15.0);
  CHECK((r.transpose() * r - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(r(0, 0) == doctest::Approx(std::cos(15.0 * M_PI / 180.0)));
  CHECK(r(4, 4) == 1.0);
  CHECK(r(0, 2) == 0.0);
}

TEST_CASE("no-shift synthetic pair has matching class statistics") {
  SyntheticSpec spec;
  spec.rotation_deg = 0.0;
  spec.offset = 0.0;
  spec.per_class = 2000;
  spec.classes = 2;
  spec.dim = 3;
  const DomainPair p = generate_synthetic_pair(spec, 4);
  const Matrix means = synthetic_class_means(spec, 4);
  // Per-class sample means of each domain agree with the shared class mean
  // within 5 standard errors.
  const double se = std::sqrt(spec.covariance_scale / spec.per_class);
  for (int c = 0; c < 2; ++c) {
    Vector ms = Vector::Zero(3);
    Vector mt = Vector::Zero(3);
    const Matrix xs = p.source_original();
    const Labels ys = p.to_original_order(p.true_labels_source());
    for (int i = 0; i < p.source_count(); ++i) {
      if (ys[static_cast<std::size_t>(i)] == c) ms += xs.col(i);
      if (p.true_labels_target()[static_cast<std::size_t>(i)] == c) mt += p.target().values().col(i);
    }
    ms /= spec.per_class;
    mt /= spec.per_class;
    CHECK((ms - means.col(c)).cwiseAbs().maxCoeff() < 5 * se);
    CHECK((mt - means.col(c)).cwiseAbs().maxCoeff() < 5 * se);
  }
}

TEST_CASE("shifted synthetic pair hurts a source-only classifier") {
  // Bayes rule for equal isotropic covariances and equal priors is the
  // nearest true class mean; its source accuracy is compared with a
  // nearest-centroid classifier trained on 5 labels/class applied to target.
  SyntheticSpec spec;
  double bayes_source = 0.0;
  double source_only_target = 0.0;
  const int seeds = 10;
  for (int s = 0; s < seeds; ++s) {
    const DomainPair p = generate_synthetic_pair(spec, 200 + static_cast<std::uint64_t>(s));
    const Matrix means = synthetic_class_means(spec, 200 + static_cast<std::uint64_t>(s));
    const Labels truth = p.true_labels_source();
    const Labels bayes = nearest_centroid(means, std::vector<int>{0, 1, 2}, 3, p.source().values());
    int hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += bayes[i] == truth[i];
    bayes_source += static_cast<double>(hits) / truth.size() / seeds;

    const auto idx = sample_labeled_subset(p.to_original_order(truth), 5, s, 3);
    const DomainPair l = p.with_labeled(idx);
    const Labels pred = nearest_centroid(l.source().values().leftCols(l.labeled_count()),
                                         l.labeled_classes(), 3, l.target().values());
    source_only_target += accuracy_t(pred, l) / seeds;
  }
  MESSAGE("Bayes source accuracy " << bayes_source << ", source-only target accuracy "
                                   << source_only_target);
  CHECK(source_only_target < bayes_source);
}
