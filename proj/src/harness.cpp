#include "slsada/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "slsada/error.hpp"

namespace slsada {

namespace {

constexpr std::pair<Method, std::string_view> kMethodNames[] = {
    {Method::slsada, "slsada"},
    {Method::source_only, "source_only"},
    {Method::marginal_only, "marginal_only"},
    {Method::jda_like, "jda_like"},
    {Method::propagation_only, "propagation_only"},
    {Method::no_clustering, "no_clustering"},
    {Method::no_conditional, "no_conditional"},
};

double fraction_equal(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw DataError("accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                    std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

Matrix concat_columns(const Matrix& left, const Matrix& right) {
  Matrix out(left.rows(), left.cols() + right.cols());
  out << left, right;
  return out;
}

// Nearest-centroid labels for all source and target columns, trained on the
// labeled block. Labeled positions are clamped.
std::pair<Labels, Labels> centroid_labels(const DomainPair& pair, const Matrix& zs,
                                          const Matrix& zt) {
  const int n_sl = pair.labeled_count();
  const std::span<const int> given = pair.labeled_classes();
  Labels source = nearest_centroid(zs.leftCols(n_sl), given, pair.class_count(), zs);
  std::copy(given.begin(), given.end(), source.begin());
  Labels target = nearest_centroid(zs.leftCols(n_sl), given, pair.class_count(), zt);
  return {std::move(source), std::move(target)};
}

MethodOutcome jda_like(const DomainPair& input, const SolverConfig& config) {
  const DomainPair pair = center_jointly(input);
  const int classes = pair.class_count();
  const Matrix x = concat_columns(pair.source().values(), pair.target().values());
  const ConstraintPencil pencil = make_constraint_pencil(x);
  const MmdMatrix m0 = build_m0(pair.source_count(), pair.target_count());

  Projection projection = initial_projection(pair, pencil, config);
  Embeddings z = embed(projection.values, pair);
  auto [ys, yt] = centroid_labels(pair, z.source, z.target);
  MethodOutcome out;
  for (int t = 1; t <= config.iterations; ++t) {
    std::vector<MmdMatrix> mmds{m0};
    for (auto& mc : build_class_mmds(ys, yt, classes)) {
      if (!mc.empty()) mmds.push_back(std::move(mc));
    }
    const Matrix kms = assemble_kms(x, mmds, Matrix(), Matrix(), 0.0, config.lambda);
    projection = solve_projection(kms, pencil, config.k);
    z = embed(projection.values, pair);
    std::tie(ys, yt) = centroid_labels(pair, z.source, z.target);
    out.objective_trace.push_back(mmd_loss(projection.values, x, mmds) +
                                  config.lambda * projection.values.squaredNorm());
  }
  out.source = std::move(ys);
  out.target = std::move(yt);
  return out;
}

void run_parallel(std::size_t count, int threads, const std::function<void(std::size_t)>& task) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
}

RepeatResult run_repeat(const DomainPair& pair, const ExperimentSpec& spec, int repeat) {
  RepeatResult row;
  row.repeat = repeat;
  row.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(repeat));
  std::optional<DomainPair> labeled;
  std::string setup_error;
  try {
    const Labels truth = pair.to_original_order(pair.true_labels_source());
    row.labeled_indices =
        sample_labeled_subset(truth, spec.per_class_labels, row.seed, pair.class_count());
    labeled.emplace(pair.with_labeled(row.labeled_indices));
  } catch (const Error& e) {
    setup_error = std::string("labeled subset: ") + e.what();
  }
  for (const Method method : spec.methods) {
    MethodScore score;
    score.method = method;
    if (!labeled) {
      score.error = setup_error;
      row.scores.push_back(std::move(score));
      continue;
    }
    try {
      MethodOutcome outcome = run_method(method, *labeled, spec.solver);
      score.s = accuracy_s(outcome.source, *labeled);
      score.t = accuracy_t(outcome.target, *labeled);
      score.objective_trace = std::move(outcome.objective_trace);
      score.ok = true;
    } catch (const Error& e) {
      score.error = e.what();
    }
    row.scores.push_back(std::move(score));
  }
  return row;
}

std::vector<MethodSummary> summarize(const ExperimentSpec& spec,
                                     std::span<const RepeatResult> repeats) {
  std::vector<MethodSummary> out;
  for (std::size_t m = 0; m < spec.methods.size(); ++m) {
    std::vector<double> s;
    std::vector<double> t;
    for (const auto& row : repeats) {
      const MethodScore& score = row.scores[m];
      if (!score.ok) continue;
      s.push_back(score.s);
      t.push_back(score.t);
    }
    MethodSummary summary;
    summary.method = spec.methods[m];
    summary.count = static_cast<int>(s.size());
    std::tie(summary.mean_s, summary.std_s) = mean_std(s);
    std::tie(summary.mean_t, summary.std_t) = mean_std(t);
    out.push_back(summary);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

ExperimentSpec apply_grid_value(const ExperimentSpec& base, const std::string& parameter,
                                double value) {
  ExperimentSpec spec = base;
  auto as_int = [&](const char* name) {
    if (value != std::floor(value) || std::abs(value) > 1e9) {
      throw UsageError(std::string("sweep: ") + name + " must be an integer, got " +
                       format_double(value));
    }
    return static_cast<int>(value);
  };
  if (parameter == "k") {
    spec.solver.k = as_int("k");
  } else if (parameter == "lambda") {
    spec.solver.lambda = value;
  } else if (parameter == "gamma") {
    spec.solver.gamma = value;
  } else if (parameter == "iterations" || parameter == "T") {
    spec.solver.iterations = as_int("iterations");
  } else if (parameter == "per_class") {
    spec.per_class_labels = as_int("per_class");
  } else {
    throw UsageError("sweep: unknown parameter '" + parameter +
                     "' (expected k, lambda, gamma, iterations or per_class)");
  }
  return spec;
}

}  // namespace

std::string_view method_name(Method method) {
  for (const auto& [m, name] : kMethodNames) {
    if (m == method) return name;
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (const auto& [m, n] : kMethodNames) {
    if (n == name) return m;
  }
  throw UsageError("unknown method '" + std::string(name) + "'");
}

std::vector<Method> all_methods() {
  std::vector<Method> out;
  for (const auto& entry : kMethodNames) out.push_back(entry.first);
  return out;
}

double accuracy_s(std::span<const int> predictions, const DomainPair& pair) {
  const Labels& truth = pair.true_labels_source();
  if (predictions.size() != truth.size()) {
    throw DataError("source accuracy: " + std::to_string(predictions.size()) +
                    " predictions for " + std::to_string(truth.size()) + " samples");
  }
  Labels clamped(predictions.begin(), predictions.end());
  const auto given = pair.labeled_classes();
  std::copy(given.begin(), given.end(), clamped.begin());
  return fraction_equal(clamped, truth);
}

double accuracy_t(std::span<const int> predictions, const DomainPair& pair) {
  return fraction_equal(predictions, pair.true_labels_target());
}

Labels nearest_centroid(const Matrix& train, std::span<const int> train_labels, int class_count,
                        const Matrix& query) {
  if (static_cast<Eigen::Index>(train_labels.size()) != train.cols()) {
    throw DataError("nearest centroid: label count does not match training samples");
  }
  if (train.rows() != query.rows()) {
    throw DataError("nearest centroid: training and query dimensions differ");
  }
  Matrix centroids = Matrix::Zero(train.rows(), class_count);
  Vector counts = Vector::Zero(class_count);
  for (Eigen::Index i = 0; i < train.cols(); ++i) {
    const int c = train_labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= class_count) throw DataError("nearest centroid: label out of range");
    centroids.col(c) += train.col(i);
    counts(c) += 1.0;
  }
  if (counts.sum() == 0.0) throw DataError("nearest centroid: no training samples");
  Labels out(static_cast<std::size_t>(query.cols()));
  for (Eigen::Index j = 0; j < query.cols(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (int c = 0; c < class_count; ++c) {
      if (counts(c) == 0.0) continue;
      const double d = (query.col(j) - centroids.col(c) / counts(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    out[static_cast<std::size_t>(j)] = arg;
  }
  return out;
}

MethodOutcome run_method(Method method, const DomainPair& pair, const SolverConfig& config) {
  if (pair.labeled_count() < 1) throw DataError("at least one labeled source sample is required");
  switch (method) {
    case Method::slsada:
    case Method::no_clustering:
    case Method::no_conditional: {
      SolverConfig cfg = config;
      if (method == Method::no_clustering) cfg.gamma = 0.0;
      if (method == Method::no_conditional) cfg.conditional = false;
      SolverResult result = run_slsada(pair, cfg);
      return {std::move(result.source_predictions), std::move(result.target_predictions),
              std::move(result.state.objective_trace)};
    }
    case Method::source_only: {
      auto [s, t] = centroid_labels(pair, pair.source().values(), pair.target().values());
      return {std::move(s), std::move(t), {}};
    }
    case Method::marginal_only: {
      config.validate(pair.dim());
      const DomainPair centered = center_jointly(pair);
      const Matrix x = concat_columns(centered.source().values(), centered.target().values());
      const Projection p = initial_projection(centered, make_constraint_pencil(x), config);
      const Embeddings z = embed(p.values, centered);
      auto [s, t] = centroid_labels(centered, z.source, z.target);
      return {std::move(s), std::move(t), {}};
    }
    case Method::jda_like:
      config.validate(pair.dim());
      return jda_like(pair, config);
    case Method::propagation_only: {
      config.validate(pair.dim());
      const DomainPair centered = center_jointly(pair);
      const Matrix x = concat_columns(centered.source().values(), centered.target().values());
      const Projection p = initial_projection(centered, make_constraint_pencil(x), config);
      InitialLabels init = propagate_initial(centered, embed(p.values, centered), config);
      return {std::move(init.source), std::move(init.target), {}};
    }
  }
  throw UsageError("unknown method");
}

void ExperimentSpec::validate(Eigen::Index dim) const {
  if (repeats < 1) throw UsageError("repeats must be at least 1, got " + std::to_string(repeats));
  if (per_class_labels < 1) {
    throw UsageError("labels per class must be at least 1, got " +
                     std::to_string(per_class_labels));
  }
  if (methods.empty()) throw UsageError("no methods requested");
  solver.validate(dim);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 of (master, index)
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

int resolve_threads(int requested) {
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("SLSADA_THREADS")) {
    int value = 0;
    const std::string_view text(env);
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec == std::errc() && res.ptr == text.data() + text.size() && value > 0) {
      threads = value;
    }
  }
  if (requested > 0) threads = std::min(threads, requested);
  return threads;
}

bool RepeatResult::complete() const {
  return std::all_of(scores.begin(), scores.end(), [](const MethodScore& s) { return s.ok; });
}

bool RunReport::complete() const {
  return std::all_of(repeats.begin(), repeats.end(),
                     [](const RepeatResult& r) { return r.complete(); });
}

const MethodSummary& RunReport::summary_for(Method method) const {
  for (const auto& s : summary) {
    if (s.method == method) return s;
  }
  throw UsageError("method '" + std::string(method_name(method)) + "' not in report");
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(),
                              std::numeric_limits<double>::quiet_NaN()};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

RunReport run_protocol(const DomainPair& pair, const ExperimentSpec& spec) {
  spec.validate(pair.dim());
  if (!pair.has_source_truth()) throw DataError("protocol needs source ground truth");
  if (!pair.has_target_truth()) throw DataError("protocol needs target ground truth");
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.spec = spec;
  report.repeats.resize(static_cast<std::size_t>(spec.repeats));
  run_parallel(report.repeats.size(), resolve_threads(spec.threads), [&](std::size_t r) {
    report.repeats[r] = run_repeat(pair, spec, static_cast<int>(r));
  });
  report.summary = summarize(spec, report.repeats);
  if (spec.include_timing) {
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return report;
}

std::vector<RunReport> sweep(const DomainPair& pair, const ExperimentSpec& spec,
                             const SweepGrid& grid) {
  if (grid.values.empty()) throw UsageError("sweep grid for '" + grid.parameter + "' is empty");
  if (!pair.has_source_truth() || !pair.has_target_truth()) {
    throw DataError("sweep needs ground truth in both domains");
  }
  std::vector<ExperimentSpec> specs;
  for (double value : grid.values) {
    ExperimentSpec point = apply_grid_value(spec, grid.parameter, value);
    try {
      point.validate(pair.dim());
    } catch (const UsageError& e) {
      throw UsageError("sweep " + grid.parameter + "=" + format_double(value) + ": " + e.what());
    }
    specs.push_back(std::move(point));
  }

  const auto start = std::chrono::steady_clock::now();
  const std::size_t per_point = static_cast<std::size_t>(spec.repeats);
  std::vector<RunReport> reports(specs.size());
  for (std::size_t g = 0; g < specs.size(); ++g) {
    reports[g].spec = specs[g];
    reports[g].repeats.resize(per_point);
  }
  run_parallel(specs.size() * per_point, resolve_threads(spec.threads), [&](std::size_t i) {
    const std::size_t g = i / per_point;
    const std::size_t r = i % per_point;
    reports[g].repeats[r] = run_repeat(pair, specs[g], static_cast<int>(r));
  });
  for (auto& report : reports) {
    report.summary = summarize(report.spec, report.repeats);
    if (spec.include_timing) {
      report.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  }
  return reports;
}

std::string sweep_csv(const SweepGrid& grid, std::span<const RunReport> reports) {
  std::ostringstream out;
  out << "param,value,mean_s,std_s,mean_t,std_t\n";
  for (std::size_t g = 0; g < reports.size() && g < grid.values.size(); ++g) {
    const MethodSummary& s = reports[g].summary.front();
    out << grid.parameter << ',' << format_double(grid.values[g]) << ','
        << format_double(s.mean_s) << ',' << format_double(s.std_s) << ','
        << format_double(s.mean_t) << ',' << format_double(s.std_t) << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const SolverConfig& config) {
  return {
      {"k", config.k},
      {"gamma", config.gamma},
      {"lambda", config.lambda},
      {"iterations", config.iterations},
      {"inner_updates", config.inner_updates},
      {"neighbors", config.neighbor_count},
      {"epsilon", config.epsilon},
      {"floor", config.floor},
      {"graph", std::string(to_string(config.graph_schedule))},
      {"conditional", config.conditional},
      {"seed", config.seed},
  };
}

nlohmann::json update_rule_variants(const SolverConfig& config) {
  return {
      {"negative_part", "magnitude"},
      {"centroid_map", "gradient_split"},
      {"source_labels", std::string(to_string(config.source_rule))},
      {"target_labels", std::string(to_string(config.target_rule))},
      {"step", "sqrt_ratio"},
  };
}

nlohmann::json to_json(const IterationRecord& record) {
  nlohmann::json j = {
      {"iteration", record.iteration},
      {"objective", record.objective},
      {"constraint_residual", record.constraint_residual},
  };
  if (record.accuracy_s) j["accuracy_s"] = *record.accuracy_s;
  if (record.accuracy_t) j["accuracy_t"] = *record.accuracy_t;
  return j;
}

nlohmann::json to_json(const RunReport& report) {
  const ExperimentSpec& spec = report.spec;
  nlohmann::json methods = nlohmann::json::array();
  for (Method m : spec.methods) methods.push_back(std::string(method_name(m)));

  nlohmann::json repeats = nlohmann::json::array();
  for (const auto& row : report.repeats) {
    nlohmann::json scores = nlohmann::json::object();
    for (const auto& score : row.scores) {
      nlohmann::json entry = {{"ok", score.ok}};
      if (score.ok) {
        entry["s"] = score.s;
        entry["t"] = score.t;
        entry["objective_trace"] = score.objective_trace;
      } else {
        entry["error"] = score.error;
      }
      scores[std::string(method_name(score.method))] = std::move(entry);
    }
    repeats.push_back({{"repeat", row.repeat},
                       {"seed", row.seed},
                       {"labeled_indices", row.labeled_indices},
                       {"complete", row.complete()},
                       {"methods", std::move(scores)}});
  }

  nlohmann::json summary = nlohmann::json::array();
  for (const auto& s : report.summary) {
    summary.push_back({{"method", std::string(method_name(s.method))},
                       {"repeats", s.count},
                       {"mean_s", s.mean_s},
                       {"std_s", s.std_s},
                       {"mean_t", s.mean_t},
                       {"std_t", s.std_t}});
  }

  nlohmann::json j = {
      {"config",
       {{"pair", spec.pair_description},
        {"per_class", spec.per_class_labels},
        {"repeats", spec.repeats},
        {"seed", spec.seed},
        {"methods", std::move(methods)},
        {"solver", to_json(spec.solver)}}},
      {"update_rules", update_rule_variants(spec.solver)},
      {"complete", report.complete()},
      {"repeats", std::move(repeats)},
      {"summary", std::move(summary)},
  };
  if (report.seconds) j["seconds"] = *report.seconds;
  return j;
}

std::string summary_csv(const RunReport& report) {
  std::ostringstream out;
  out << "method,repeats,mean_s,std_s,mean_t,std_t\n";
  for (const auto& s : report.summary) {
    out << method_name(s.method) << ',' << s.count << ',' << format_double(s.mean_s) << ','
        << format_double(s.std_s) << ',' << format_double(s.mean_t) << ','
        << format_double(s.std_t) << '\n';
  }
  return out.str();
}

void embed_dump(const SolverResult& result, const DomainPair& pair,
                const std::filesystem::path& path) {
  const Matrix& zs = result.embeddings.source;
  const Matrix& zt = result.embeddings.target;
  if (zs.cols() != pair.source_count() || zt.cols() != pair.target_count()) {
    throw DataError("embedding dump: result does not match the pair");
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");

  out << "domain,true_label,predicted_label";
  for (Eigen::Index d = 0; d < zs.rows(); ++d) out << ",z_" << d + 1;
  out << '\n';

  auto row = [&](char domain, int truth, int predicted, const Matrix& z, Eigen::Index col) {
    out << domain << ',' << truth << ',' << predicted;
    for (Eigen::Index d = 0; d < z.rows(); ++d) out << ',' << format_double(z(d, col));
    out << '\n';
  };

  const auto order = pair.source_order();
  std::vector<Eigen::Index> position(order.size());
  for (std::size_t p = 0; p < order.size(); ++p) {
    position[static_cast<std::size_t>(order[p])] = static_cast<Eigen::Index>(p);
  }
  for (std::size_t o = 0; o < position.size(); ++o) {
    const Eigen::Index p = position[o];
    const std::size_t ps = static_cast<std::size_t>(p);
    const int truth = pair.has_source_truth() ? pair.true_labels_source()[ps] : -1;
    row('s', truth, result.source_predictions[ps], zs, p);
  }
  for (Eigen::Index j = 0; j < zt.cols(); ++j) {
    const std::size_t js = static_cast<std::size_t>(j);
    const int truth = pair.has_target_truth() ? pair.true_labels_target()[js] : -1;
    row('t', truth, result.target_predictions[js], zt, j);
  }
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

}  // namespace slsada
