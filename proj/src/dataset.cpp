#include "slsada/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "slsada/error.hpp"

namespace slsada {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view text, double& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

bool parse_int64(std::string_view text, long long& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xffu);
    return r;
  }
  return v;
}

void write_u64(std::ostream& out, std::uint64_t v) {
  const std::uint64_t le = to_little_endian(v);
  out.write(reinterpret_cast<const char*>(&le), sizeof(le));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t le = 0;
  in.read(reinterpret_cast<char*>(&le), sizeof(le));
  return to_little_endian(le);
}

FeatureMatrix load_csv(const std::filesystem::path& path) {
  auto in = open_input(path, std::ios::in);
  std::string line;
  std::size_t line_no = 0;

  auto next_content_line = [&](std::string& dst) {
    while (std::getline(in, dst)) {
      ++line_no;
      if (!trim(dst).empty()) return true;
    }
    return false;
  };

  if (!next_content_line(line)) throw DataError(path.string() + ": empty file");
  const auto header = split(trim(line), ',');
  long long m = 0;
  long long n = 0;
  if (header.size() != 2 || !parse_int64(header[0], m) || !parse_int64(header[1], n) ||
      m < 1 || n < 1) {
    throw DataError(path.string() + ": header must be \"m,n\" with positive sizes, got '" +
                    std::string(trim(line)) + "'");
  }

  Matrix values(m, n);
  for (long long row = 0; row < m; ++row) {
    if (!next_content_line(line)) {
      throw DataError(path.string() + ": expected " + std::to_string(m) +
                      " feature rows, file ends after row " + std::to_string(row));
    }
    const auto cells = split(trim(line), ',');
    if (static_cast<long long>(cells.size()) != n) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " (line " +
                      std::to_string(line_no) + ") has " + std::to_string(cells.size()) +
                      " values, expected " + std::to_string(n));
    }
    for (long long col = 0; col < n; ++col) {
      double v = 0.0;
      if (!parse_double(cells[col], v)) {
        throw DataError(path.string() + ": cannot parse '" + std::string(cells[col]) +
                        "' at (row " + std::to_string(row) + ", col " +
                        std::to_string(col) + ")");
      }
      if (!std::isfinite(v)) {
        throw DataError(path.string() + ": non-finite value at (row " +
                        std::to_string(row) + ", col " + std::to_string(col) + ")");
      }
      values(row, col) = v;
    }
  }
  if (next_content_line(line)) {
    throw DataError(path.string() + ": unexpected content after " + std::to_string(m) +
                    " feature rows (line " + std::to_string(line_no) + ")");
  }
  return FeatureMatrix(std::move(values));
}

FeatureMatrix load_binary(const std::filesystem::path& path) {
  auto in = open_input(path, std::ios::in | std::ios::binary);
  const auto m = read_u64(in);
  const auto n = read_u64(in);
  if (!in) throw DataError(path.string() + ": truncated header");
  if (m == 0 || n == 0) throw DataError(path.string() + ": zero-sized matrix");
  const auto file_size = std::filesystem::file_size(path);
  if (n > (file_size / 8) || m > (file_size / 8) / n ||
      file_size != 16 + 8 * m * n) {
    throw DataError(path.string() + ": size " + std::to_string(file_size) +
                    " bytes does not match header " + std::to_string(m) + "x" +
                    std::to_string(n));
  }
  Matrix values(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (std::uint64_t row = 0; row < m; ++row) {
    for (std::uint64_t col = 0; col < n; ++col) {
      const std::uint64_t bits = read_u64(in);
      double v = 0.0;
      std::memcpy(&v, &bits, sizeof(v));
      if (!std::isfinite(v)) {
        throw DataError(path.string() + ": non-finite value at (row " +
                        std::to_string(row) + ", col " + std::to_string(col) + ")");
      }
      values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = v;
    }
  }
  if (!in) throw DataError(path.string() + ": truncated payload");
  return FeatureMatrix(std::move(values));
}

std::vector<int> load_integer_lines(const std::filesystem::path& path, const char* what) {
  auto in = open_input(path, std::ios::in);
  std::vector<int> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    long long v = 0;
    if (!parse_int64(text, v) || v < 0 || v > std::numeric_limits<int>::max()) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) +
                      ": invalid " + what + " '" + std::string(text) + "'");
    }
    out.push_back(static_cast<int>(v));
  }
  return out;
}

void save_integer_lines(std::span<const int> values, const std::filesystem::path& path) {
  auto out = open_output(path, std::ios::out | std::ios::trunc);
  for (const int v : values) out << v << '\n';
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

// ---------------------------------------------------------------------------

FeatureMatrix::FeatureMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw DataError("feature matrix must have at least one row and one column");
  }
  for (Eigen::Index j = 0; j < values_.cols(); ++j) {
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      if (!std::isfinite(values_(i, j))) {
        throw DataError("non-finite feature value at (row " + std::to_string(i) +
                        ", col " + std::to_string(j) + ")");
      }
    }
  }
}

LabelMatrix::LabelMatrix(Matrix values) : values_(std::move(values)) {
  if ((values_.array() < 0.0).any() || !values_.allFinite()) {
    throw DataError("label matrix entries must be finite and nonnegative");
  }
}

LabelMatrix LabelMatrix::one_hot(std::span<const int> labels, int class_count) {
  return LabelMatrix(slsada::one_hot(labels, class_count));
}

bool LabelMatrix::is_hard_row(Eigen::Index row) const {
  int ones = 0;
  for (Eigen::Index c = 0; c < values_.cols(); ++c) {
    const double v = values_(row, c);
    if (v == 1.0) {
      ++ones;
    } else if (v != 0.0) {
      return false;
    }
  }
  return ones == 1;
}

Labels hard_labels(const Matrix& soft) {
  Labels out(static_cast<std::size_t>(soft.rows()), 0);
  for (Eigen::Index i = 0; i < soft.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < soft.cols(); ++c) {
      if (soft(i, c) > soft(i, best)) best = static_cast<int>(c);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

Matrix one_hot(std::span<const int> labels, int class_count) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count) {
      throw DataError("label " + std::to_string(labels[i]) + " at position " +
                      std::to_string(i) + " outside [0, " + std::to_string(class_count) +
                      ")");
    }
    out(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------

DomainPair::DomainPair(FeatureMatrix source, FeatureMatrix target, int class_count,
                       Labels true_labels_source, Labels true_labels_target)
    : source_(std::move(source)),
      target_(std::move(target)),
      class_count_(class_count),
      truth_source_(std::move(true_labels_source)),
      truth_target_(std::move(true_labels_target)) {
  if (source_.dim() != target_.dim()) {
    throw DataError("source has " + std::to_string(source_.dim()) +
                    " features but target has " + std::to_string(target_.dim()));
  }
  if (class_count_ < 1) throw DataError("class count must be positive");
  auto check_truth = [&](const Labels& truth, Eigen::Index n, const char* domain) {
    if (truth.empty()) return;
    if (static_cast<Eigen::Index>(truth.size()) != n) {
      throw DataError(std::string(domain) + " labels: " + std::to_string(truth.size()) +
                      " entries for " + std::to_string(n) + " samples");
    }
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] < 0 || truth[i] >= class_count_) {
        throw DataError(std::string(domain) + " label " + std::to_string(truth[i]) +
                        " at sample " + std::to_string(i) + " outside [0, " +
                        std::to_string(class_count_) + ")");
      }
    }
  };
  check_truth(truth_source_, source_.samples(), "source");
  check_truth(truth_target_, target_.samples(), "target");
  order_.resize(static_cast<std::size_t>(source_.samples()));
  std::iota(order_.begin(), order_.end(), 0);
}

DomainPair DomainPair::with_labeled(std::span<const int> indices,
                                    std::span<const int> labels) const {
  if (indices.size() != labels.size()) {
    throw DataError("labeled subset: " + std::to_string(indices.size()) +
                    " indices but " + std::to_string(labels.size()) + " labels");
  }
  const auto n_s = static_cast<int>(order_.size());
  std::vector<char> seen(order_.size(), 0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    if (idx < 0 || idx >= n_s) {
      throw DataError("labeled index " + std::to_string(idx) + " outside [0, " +
                      std::to_string(n_s) + ")");
    }
    if (seen[static_cast<std::size_t>(idx)]) {
      throw DataError("labeled index " + std::to_string(idx) + " listed twice");
    }
    seen[static_cast<std::size_t>(idx)] = 1;
    if (labels[i] < 0 || labels[i] >= class_count_) {
      throw DataError("label " + std::to_string(labels[i]) + " for source sample " +
                      std::to_string(idx) + " outside [0, " +
                      std::to_string(class_count_) + ")");
    }
  }

  std::vector<int> order(indices.begin(), indices.end());
  for (int i = 0; i < n_s; ++i) {
    if (!seen[static_cast<std::size_t>(i)]) order.push_back(i);
  }

  const Matrix original = source_original();
  Matrix reordered(original.rows(), original.cols());
  for (int p = 0; p < n_s; ++p) reordered.col(p) = original.col(order[p]);

  DomainPair out;
  out.source_ = FeatureMatrix(std::move(reordered));
  out.target_ = target_;
  out.class_count_ = class_count_;
  out.labeled_classes_.assign(labels.begin(), labels.end());
  out.truth_target_ = truth_target_;
  if (!truth_source_.empty()) {
    const Labels truth = to_original_order(truth_source_);
    out.truth_source_.resize(truth.size());
    for (int p = 0; p < n_s; ++p) out.truth_source_[p] = truth[order[p]];
  }
  out.order_ = std::move(order);
  return out;
}

DomainPair DomainPair::with_labeled(std::span<const int> indices) const {
  const Labels truth = to_original_order(true_labels_source());
  Labels labels;
  labels.reserve(indices.size());
  for (const int idx : indices) {
    if (idx < 0 || idx >= static_cast<int>(truth.size())) {
      throw DataError("labeled index " + std::to_string(idx) + " outside [0, " +
                      std::to_string(truth.size()) + ")");
    }
    labels.push_back(truth[idx]);
  }
  return with_labeled(indices, labels);
}

DomainPair DomainPair::with_features(FeatureMatrix source, FeatureMatrix target) const {
  if (source.samples() != source_.samples() || target.samples() != target_.samples()) {
    throw DataError("with_features: sample counts changed");
  }
  DomainPair out = *this;
  out.source_ = std::move(source);
  out.target_ = std::move(target);
  if (out.source_.dim() != out.target_.dim()) {
    throw DataError("with_features: source and target dimensions differ");
  }
  return out;
}

LabelMatrix DomainPair::labeled_labels() const {
  return LabelMatrix::one_hot(labeled_classes_, class_count_);
}

const Labels& DomainPair::true_labels_source() const {
  if (truth_source_.empty()) throw DataError("source ground-truth labels not available");
  return truth_source_;
}

const Labels& DomainPair::true_labels_target() const {
  if (truth_target_.empty()) throw DataError("target ground-truth labels not available");
  return truth_target_;
}

Labels DomainPair::to_original_order(std::span<const int> per_position) const {
  if (per_position.size() != order_.size()) {
    throw DataError("expected " + std::to_string(order_.size()) + " source values, got " +
                    std::to_string(per_position.size()));
  }
  Labels out(per_position.size());
  for (std::size_t p = 0; p < order_.size(); ++p) out[order_[p]] = per_position[p];
  return out;
}

Matrix DomainPair::source_original() const {
  const Matrix& x = source_.values();
  Matrix out(x.rows(), x.cols());
  for (std::size_t p = 0; p < order_.size(); ++p) {
    out.col(order_[p]) = x.col(static_cast<Eigen::Index>(p));
  }
  return out;
}

// ---------------------------------------------------------------------------

FeatureFormat parse_feature_format(std::string_view name) {
  if (name == "csv") return FeatureFormat::csv;
  if (name == "bin" || name == "binary" || name == "raw") return FeatureFormat::binary;
  throw UsageError("unknown feature format '" + std::string(name) +
                   "' (expected csv or bin)");
}

FeatureFormat infer_feature_format(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".bin" || ext == ".raw") ? FeatureFormat::binary : FeatureFormat::csv;
}

FeatureMatrix load_features(const std::filesystem::path& path, FeatureFormat format) {
  return format == FeatureFormat::csv ? load_csv(path) : load_binary(path);
}

void save_features(const FeatureMatrix& features, const std::filesystem::path& path,
                   FeatureFormat format) {
  const Matrix& x = features.values();
  if (format == FeatureFormat::csv) {
    auto out = open_output(path, std::ios::out | std::ios::trunc);
    out << x.rows() << ',' << x.cols() << '\n';
    std::string line;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      line.clear();
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (j) line += ',';
        line += format_double(x(i, j));
      }
      out << line << '\n';
    }
    if (!out) throw DataError("write failed for '" + path.string() + "'");
    return;
  }
  auto out = open_output(path, std::ios::out | std::ios::binary | std::ios::trunc);
  write_u64(out, static_cast<std::uint64_t>(x.rows()));
  write_u64(out, static_cast<std::uint64_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      std::uint64_t bits = 0;
      const double v = x(i, j);
      std::memcpy(&bits, &v, sizeof(bits));
      write_u64(out, bits);
    }
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

Labels load_labels(const std::filesystem::path& path) {
  return load_integer_lines(path, "class label");
}

void save_labels(std::span<const int> labels, const std::filesystem::path& path) {
  save_integer_lines(labels, path);
}

std::vector<int> load_indices(const std::filesystem::path& path) {
  return load_integer_lines(path, "index");
}

void save_indices(std::span<const int> indices, const std::filesystem::path& path) {
  save_integer_lines(indices, path);
}

// ---------------------------------------------------------------------------

FeatureMatrix center_features(const FeatureMatrix& x) {
  const Vector mean = x.values().rowwise().mean();
  return FeatureMatrix(x.values().colwise() - mean);
}

DomainPair center_jointly(const DomainPair& pair) {
  const Matrix& xs = pair.source().values();
  const Matrix& xt = pair.target().values();
  const double n = static_cast<double>(xs.cols() + xt.cols());
  const Vector mean = (xs.rowwise().sum() + xt.rowwise().sum()) / n;
  return pair.with_features(FeatureMatrix(xs.colwise() - mean),
                            FeatureMatrix(xt.colwise() - mean));
}

FeatureMatrix normalize_samples(const FeatureMatrix& x) {
  Matrix out = x.values();
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double norm = out.col(j).norm();
    if (norm > 0.0) out.col(j) /= norm;
  }
  return FeatureMatrix(std::move(out));
}

DomainPair normalize_samples(const DomainPair& pair) {
  return pair.with_features(normalize_samples(pair.source()),
                            normalize_samples(pair.target()));
}

std::vector<int> sample_labeled_subset(std::span<const int> labels, int per_class,
                                       std::uint64_t seed, int class_count) {
  if (per_class < 1) throw UsageError("labels per class must be at least 1");
  if (labels.empty()) throw DataError("cannot sample from an empty label vector");
  int classes = class_count;
  if (classes < 0) classes = *std::max_element(labels.begin(), labels.end()) + 1;

  std::vector<std::vector<int>> members(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw DataError("label " + std::to_string(labels[i]) + " at sample " +
                      std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
    }
    members[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
  }

  std::mt19937_64 rng(seed);
  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(per_class * classes));
  for (int c = 0; c < classes; ++c) {
    auto& pool = members[static_cast<std::size_t>(c)];
    if (static_cast<int>(pool.size()) < per_class) {
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                      " samples, fewer than the " + std::to_string(per_class) +
                      " labels requested per class");
    }
    // Partial Fisher-Yates: the first per_class slots become the sample.
    for (int i = 0; i < per_class; ++i) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i),
                                                      pool.size() - 1);
      std::swap(pool[static_cast<std::size_t>(i)], pool[pick(rng)]);
      chosen.push_back(pool[static_cast<std::size_t>(i)]);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// ---------------------------------------------------------------------------

namespace {

void validate(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw UsageError("synthetic pair needs at least 2 classes");
  if (spec.dim < 2) throw UsageError("synthetic pair needs at least 2 dimensions");
  if (spec.per_class < 2) throw UsageError("synthetic pair needs at least 2 samples per class");
  if (!(spec.covariance_scale > 0.0) || !std::isfinite(spec.covariance_scale)) {
    throw UsageError("covariance scale must be positive, got " +
                     format_double(spec.covariance_scale));
  }
  if (!spec.class_means.empty()) {
    if (static_cast<int>(spec.class_means.size()) != spec.classes) {
      throw UsageError("expected " + std::to_string(spec.classes) + " class means, got " +
                       std::to_string(spec.class_means.size()));
    }
    for (const auto& mean : spec.class_means) {
      if (mean.size() != spec.dim) throw UsageError("class mean has the wrong dimension");
    }
  }
}

Matrix draw_means(const SyntheticSpec& spec, std::mt19937_64& rng) {
  Matrix means(spec.dim, spec.classes);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int c = 0; c < spec.classes; ++c) {
    Vector direction(spec.dim);
    for (int i = 0; i < spec.dim; ++i) direction(i) = normal(rng);
    means.col(c) = spec.separation * direction.normalized();
  }
  if (!spec.class_means.empty()) {
    for (int c = 0; c < spec.classes; ++c) means.col(c) = spec.class_means[c];
  }
  return means;
}

}  // namespace

Matrix synthetic_rotation(int dim, double rotation_deg) {
  Matrix rot = Matrix::Identity(dim, dim);
  const double theta = rotation_deg * std::acos(-1.0) / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  for (int i = 0; i + 1 < dim; i += 2) {
    rot(i, i) = c;
    rot(i, i + 1) = -s;
    rot(i + 1, i) = s;
    rot(i + 1, i + 1) = c;
  }
  return rot;
}

Matrix synthetic_class_means(const SyntheticSpec& spec, std::uint64_t seed) {
  validate(spec);
  std::mt19937_64 rng(seed);
  return draw_means(spec, rng);
}

DomainPair generate_synthetic_pair(const SyntheticSpec& spec, std::uint64_t seed) {
  validate(spec);
  std::mt19937_64 rng(seed);
  const Matrix means = draw_means(spec, rng);
  const Matrix rotation = synthetic_rotation(spec.dim, spec.rotation_deg);
  const double sigma = std::sqrt(spec.covariance_scale);
  std::normal_distribution<double> normal(0.0, 1.0);

  const int n = spec.classes * spec.per_class;
  auto draw_domain = [&](Matrix& x, Labels& y) {
    x.resize(spec.dim, n);
    y.resize(static_cast<std::size_t>(n));
    int col = 0;
    for (int c = 0; c < spec.classes; ++c) {
      for (int i = 0; i < spec.per_class; ++i, ++col) {
        for (int d = 0; d < spec.dim; ++d) x(d, col) = means(d, c) + sigma * normal(rng);
        y[static_cast<std::size_t>(col)] = c;
      }
    }
  };

  Matrix xs;
  Matrix xt;
  Labels ys;
  Labels yt;
  draw_domain(xs, ys);
  draw_domain(xt, yt);
  xt = (rotation * xt).array() + spec.offset;
  return DomainPair(FeatureMatrix(std::move(xs)), FeatureMatrix(std::move(xt)),
                    spec.classes, std::move(ys), std::move(yt));
}

}  // namespace slsada
