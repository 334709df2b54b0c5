#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "slsada/types.hpp"

namespace slsada {

/// Dense feature matrix with samples as columns (m features x n samples).
/// Construction rejects empty shapes and non-finite entries.
class FeatureMatrix {
 public:
  explicit FeatureMatrix(Matrix values);

  [[nodiscard]] const Matrix& values() const noexcept { return values_; }
  [[nodiscard]] Eigen::Index dim() const noexcept { return values_.rows(); }
  [[nodiscard]] Eigen::Index samples() const noexcept { return values_.cols(); }

 private:
  Matrix values_;
};

/// Nonnegative n x C label matrix. Hard rows are one-hot.
class LabelMatrix {
 public:
  explicit LabelMatrix(Matrix values);

  static LabelMatrix one_hot(std::span<const int> labels, int class_count);

  [[nodiscard]] const Matrix& values() const noexcept { return values_; }
  [[nodiscard]] Eigen::Index rows() const noexcept { return values_.rows(); }
  [[nodiscard]] int class_count() const noexcept {
    return static_cast<int>(values_.cols());
  }
  [[nodiscard]] bool is_hard_row(Eigen::Index row) const;

 private:
  Matrix values_;
};

/// Row argmax; ties go to the lowest class index.
Labels hard_labels(const Matrix& soft);

/// One-hot matrix for `labels` (n x class_count).
Matrix one_hot(std::span<const int> labels, int class_count);

/// A source/target pair in a shared feature space.
///
/// Source columns are stored labeled-first: positions [0, n_sl) hold the
/// labeled samples in the order they were given, followed by the remaining
/// samples in ascending original index. `source_order()[p]` is the original
/// column of position p. Target columns are never reordered.
class DomainPair {
 public:
  DomainPair(FeatureMatrix source, FeatureMatrix target, int class_count,
             Labels true_labels_source = {}, Labels true_labels_target = {});

  /// Marks `indices` (original source columns) as labeled with `labels`.
  /// Replaces any existing labeled subset.
  [[nodiscard]] DomainPair with_labeled(std::span<const int> indices,
                                        std::span<const int> labels) const;

  /// Same, taking the labels from the source ground truth.
  [[nodiscard]] DomainPair with_labeled(std::span<const int> indices) const;

  /// Replaces the features (source given in position order), keeping labels
  /// and ordering. Used after centering or normalization.
  [[nodiscard]] DomainPair with_features(FeatureMatrix source,
                                         FeatureMatrix target) const;

  [[nodiscard]] const FeatureMatrix& source() const noexcept { return source_; }
  [[nodiscard]] const FeatureMatrix& target() const noexcept { return target_; }
  [[nodiscard]] int class_count() const noexcept { return class_count_; }
  [[nodiscard]] Eigen::Index dim() const noexcept { return source_.dim(); }
  [[nodiscard]] int source_count() const noexcept {
    return static_cast<int>(source_.samples());
  }
  [[nodiscard]] int target_count() const noexcept {
    return static_cast<int>(target_.samples());
  }
  [[nodiscard]] int labeled_count() const noexcept {
    return static_cast<int>(labeled_classes_.size());
  }

  [[nodiscard]] std::span<const int> source_order() const noexcept { return order_; }
  /// Original source column of each labeled sample, in labeled-block order.
  [[nodiscard]] std::span<const int> labeled_indices() const noexcept {
    return std::span<const int>(order_).first(labeled_classes_.size());
  }
  [[nodiscard]] std::span<const int> labeled_classes() const noexcept {
    return labeled_classes_;
  }
  /// Y_s^l: one-hot rows of the labeled block (n_sl x C).
  [[nodiscard]] LabelMatrix labeled_labels() const;

  [[nodiscard]] bool has_source_truth() const noexcept { return !truth_source_.empty(); }
  [[nodiscard]] bool has_target_truth() const noexcept { return !truth_target_.empty(); }
  /// Ground truth in position order. Throws DataError when absent.
  [[nodiscard]] const Labels& true_labels_source() const;
  [[nodiscard]] const Labels& true_labels_target() const;

  /// Maps per-position source values back to original column order.
  [[nodiscard]] Labels to_original_order(std::span<const int> per_position) const;
  /// Source features in original column order.
  [[nodiscard]] Matrix source_original() const;

 private:
  DomainPair() = default;

  FeatureMatrix source_{Matrix::Zero(1, 1)};
  FeatureMatrix target_{Matrix::Zero(1, 1)};
  int class_count_ = 0;
  std::vector<int> order_;
  Labels labeled_classes_;
  Labels truth_source_;
  Labels truth_target_;
};

enum class FeatureFormat { csv, binary };

FeatureFormat parse_feature_format(std::string_view name);
/// csv unless the extension is .bin / .raw.
FeatureFormat infer_feature_format(const std::filesystem::path& path);

FeatureMatrix load_features(const std::filesystem::path& path, FeatureFormat format);
void save_features(const FeatureMatrix& features, const std::filesystem::path& path,
                   FeatureFormat format);

/// One non-negative integer per line.
Labels load_labels(const std::filesystem::path& path);
void save_labels(std::span<const int> labels, const std::filesystem::path& path);
std::vector<int> load_indices(const std::filesystem::path& path);
void save_indices(std::span<const int> indices, const std::filesystem::path& path);

/// Subtracts each feature row's mean.
FeatureMatrix center_features(const FeatureMatrix& x);

/// Centers source and target with the mean of their concatenation.
DomainPair center_jointly(const DomainPair& pair);

/// Scales every sample (column) to unit L2 norm; zero columns are kept.
FeatureMatrix normalize_samples(const FeatureMatrix& x);
DomainPair normalize_samples(const DomainPair& pair);

/// Draws `per_class` indices from each class uniformly without replacement.
/// Result is sorted ascending. `class_count` < 0 means max label + 1.
std::vector<int> sample_labeled_subset(std::span<const int> labels, int per_class,
                                       std::uint64_t seed, int class_count = -1);

/// Class-conditional Gaussian source; target is the same model under a
/// rigid motion (rotation in consecutive coordinate planes, then a constant
/// offset on every coordinate).
struct SyntheticSpec {
  int classes = 3;
  int dim = 10;
  int per_class = 50;          // samples per class, per domain
  double separation = 3.0;     // norm of each generated class mean
  double covariance_scale = 1.0;
  double rotation_deg = 15.0;
  double offset = 1.0;
  std::vector<Vector> class_means;  // overrides the generated means when set
};

/// Unlabeled pair with ground truth in both domains.
DomainPair generate_synthetic_pair(const SyntheticSpec& spec, std::uint64_t seed);

/// Class means (m x C) that `generate_synthetic_pair` uses for this seed.
Matrix synthetic_class_means(const SyntheticSpec& spec, std::uint64_t seed);

/// Rotation applied to target samples for `spec` (m x m).
Matrix synthetic_rotation(int dim, double rotation_deg);

}  // namespace slsada
