#include "slsada/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "slsada/error.hpp"

namespace slsada {

std::string_view to_string(GraphSchedule schedule) {
  return schedule == GraphSchedule::rebuild ? "rebuild" : "frozen";
}

std::string_view to_string(TargetRule rule) {
  return rule == TargetRule::kkt ? "kkt" : "printed";
}

std::string_view to_string(SourceRule rule) {
  return rule == SourceRule::coupled ? "coupled" : "local";
}

TargetRule parse_target_rule(std::string_view name) {
  if (name == "kkt") return TargetRule::kkt;
  if (name == "printed") return TargetRule::printed;
  throw UsageError("unknown target rule '" + std::string(name) + "' (expected kkt or printed)");
}

SourceRule parse_source_rule(std::string_view name) {
  if (name == "coupled") return SourceRule::coupled;
  if (name == "local") return SourceRule::local;
  throw UsageError("unknown source rule '" + std::string(name) + "' (expected coupled or local)");
}

GraphSchedule parse_graph_schedule(std::string_view name) {
  if (name == "rebuild") return GraphSchedule::rebuild;
  if (name == "frozen") return GraphSchedule::frozen;
  throw UsageError("unknown graph schedule '" + std::string(name) +
                   "' (expected rebuild or frozen)");
}

SolverConfig SolverConfig::preset(std::string_view name) {
  SolverConfig config;
  if (name == "small") {
    config.k = 20;
    config.lambda = 0.05;
  } else if (name == "large") {
    config.k = 100;
    config.lambda = 0.1;
  } else {
    throw UsageError("unknown preset '" + std::string(name) + "' (expected small or large)");
  }
  return config;
}

void SolverConfig::validate(Eigen::Index dim) const {
  auto fail = [](const std::string& what) { throw UsageError("invalid solver config: " + what); };
  if (k < 1) fail("k must be at least 1, got " + std::to_string(k));
  if (k > dim) {
    fail("k=" + std::to_string(k) + " exceeds the feature dimension m=" + std::to_string(dim));
  }
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail("gamma must be >= 0");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) fail("lambda must be > 0");
  if (iterations < 1) fail("iterations must be at least 1");
  if (inner_updates < 1) fail("inner_updates must be at least 1");
  if (neighbor_count < 1) fail("neighbor count must be at least 1");
  if (!(epsilon > 0.0)) fail("epsilon must be > 0");
  if (!(floor >= 0.0)) fail("floor must be >= 0");
}

Matrix positive_part(const Matrix& t) { return t.cwiseMax(0.0); }

Matrix negative_part(const Matrix& t) { return t.cwiseMin(0.0); }

namespace {

SparseMatrix sparse_positive(const SparseMatrix& t) {
  SparseMatrix out = t;
  for (Eigen::Index col = 0; col < out.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(out, col); it; ++it) {
      it.valueRef() = std::max(it.value(), 0.0);
    }
  }
  return out;
}

// -negative_part(t): magnitudes of the negative entries.
SparseMatrix sparse_negative_magnitude(const SparseMatrix& t) {
  SparseMatrix out = t;
  for (Eigen::Index col = 0; col < out.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(out, col); it; ++it) {
      it.valueRef() = std::max(-it.value(), 0.0);
    }
  }
  return out;
}

Matrix negative_magnitude(const Matrix& t) { return (-t).cwiseMax(0.0); }

// v .* sqrt(num ./ (den + eps)); rejects non-finite ratios.
Matrix multiplicative_step(const Matrix& v, const Matrix& num, const Matrix& den,
                           double epsilon, const char* what) {
  Matrix out(v.rows(), v.cols());
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      const double ratio = num(i, j) / (den(i, j) + epsilon);
      if (!std::isfinite(ratio) || ratio < 0.0) {
        std::ostringstream msg;
        msg << what << " update: non-finite multiplicative ratio at (" << i << ", " << j
            << ") with epsilon " << epsilon << " (numerator " << num(i, j)
            << ", denominator " << den(i, j) << ")";
        throw NumericalError(msg.str());
      }
      out(i, j) = v(i, j) * std::sqrt(ratio);
    }
  }
  return out;
}

void require_rows(const Matrix& m, Eigen::Index rows, const char* what) {
  if (m.rows() != rows) {
    throw DataError(std::string(what) + ": expected " + std::to_string(rows) + " rows, got " +
                    std::to_string(m.rows()));
  }
}

}  // namespace

Matrix assemble_kms(const Matrix& x, std::span<const MmdMatrix> mmd, const Matrix& scatter_source,
                    const Matrix& scatter_target, double gamma, double lambda) {
  const Eigen::Index m = x.rows();
  Matrix k = lambda * Matrix::Identity(m, m);
  for (const auto& mc : mmd) {
    if (!mc.empty()) k += mc.sandwich(x);
  }
  auto add_scatter = [&](const Matrix& s, const char* domain) {
    if (s.size() == 0) return;
    if (s.rows() != m || s.cols() != m) {
      throw DataError(std::string(domain) + " scatter matrix is " + std::to_string(s.rows()) +
                      "x" + std::to_string(s.cols()) + ", expected " + std::to_string(m) +
                      "x" + std::to_string(m));
    }
    k += gamma * s;
  };
  add_scatter(scatter_source, "source");
  add_scatter(scatter_target, "target");
  // Each term is symmetric; this removes rounding asymmetry from the products.
  return 0.5 * (k + k.transpose());
}

ConstraintPencil make_constraint_pencil(const Matrix& x) {
  ConstraintPencil pencil;
  pencil.data_gram = x * x.transpose();
  pencil.gram = pencil.data_gram;
  const Eigen::Index m = x.rows();
  bool singular = x.cols() <= m;
  if (!singular) {
    Eigen::LLT<Matrix> llt(pencil.data_gram);
    singular = llt.info() != Eigen::Success || !(llt.rcond() > 1e-10);
  }
  if (singular) {
    double ridge = 1e-6 * pencil.data_gram.trace() / static_cast<double>(m);
    if (!(ridge > 0.0)) ridge = 1e-6;
    pencil.ridge = ridge;
    pencil.gram.diagonal().array() += ridge;
  }
  return pencil;
}

Projection solve_projection(const Matrix& kms, const ConstraintPencil& pencil, int k) {
  const Eigen::Index m = kms.rows();
  if (kms.cols() != m || pencil.gram.rows() != m) {
    throw DataError("eigen pencil: K is " + std::to_string(kms.rows()) + "x" +
                    std::to_string(kms.cols()) + " but the constraint matrix is " +
                    std::to_string(pencil.gram.rows()) + "x" +
                    std::to_string(pencil.gram.cols()));
  }
  if (k < 1 || k > m) {
    throw UsageError("subspace dimension k=" + std::to_string(k) + " must lie in [1, " +
                     std::to_string(m) + "]");
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> solver(
      kms, pencil.gram, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (solver.info() != Eigen::Success) {
    const Eigen::SelfAdjointEigenSolver<Matrix> gram_eigs(pencil.gram, Eigen::EigenvaluesOnly);
    const Vector ev = gram_eigs.eigenvalues();
    std::ostringstream msg;
    msg << "generalized eigen-solver failed; constraint matrix eigenvalues span [" << ev(0)
        << ", " << ev(m - 1) << "] (condition number "
        << (ev(0) > 0.0 ? ev(m - 1) / ev(0) : INFINITY) << ", ridge " << pencil.ridge << ")";
    throw NumericalError(msg.str());
  }
  Projection proj;
  proj.values = solver.eigenvectors().leftCols(k);
  proj.eigenvalues = solver.eigenvalues().head(k);
  proj.ridge = pencil.ridge;

  if (pencil.ridge > 0.0) {
    // A^T (XX^T + rI) A = I; rescale so the unridged constraint holds exactly.
    const Matrix c = proj.values.transpose() * pencil.data_gram * proj.values;
    const Eigen::SelfAdjointEigenSolver<Matrix> ce(0.5 * (c + c.transpose()));
    const Vector w = ce.eigenvalues();
    if (w.minCoeff() > 1e-8 * std::max(1.0, w.maxCoeff())) {
      proj.values = proj.values * (ce.eigenvectors() * w.cwiseInverse().cwiseSqrt().asDiagonal() *
                                   ce.eigenvectors().transpose());
    }
  }
  if (!proj.values.allFinite()) throw NumericalError("projection contains non-finite entries");
  return proj;
}

Projection solve_projection(const Matrix& kms, const Matrix& x, int k) {
  return solve_projection(kms, make_constraint_pencil(x), k);
}

double constraint_residual(const Matrix& a, const Matrix& data_gram) {
  const Eigen::Index k = a.cols();
  return (a.transpose() * data_gram * a - Matrix::Identity(k, k)).norm();
}

// ---------------------------------------------------------------------------

Matrix update_centroid_map(const Matrix& g_self, const Matrix& g_other, const Matrix& f_self,
                           const Matrix& z_self, const Matrix& z_other, double gamma,
                           double epsilon) {
  require_rows(g_self, z_self.cols(), "G");
  require_rows(g_other, z_other.cols(), "G (other domain)");
  require_rows(f_self, z_self.cols(), "F");
  const Matrix t1 = z_self.transpose() * z_self;
  const Matrix t2 = z_self.transpose() * z_other;
  const Matrix t3 = f_self.transpose() * f_self;
  const Matrix t1_pos = positive_part(t1);
  const Matrix t1_neg = negative_magnitude(t1);
  const Matrix t2_pos = positive_part(t2);
  const Matrix t2_neg = negative_magnitude(t2);

  const Matrix t1_neg_g = t1_neg * g_self;
  const Matrix t1_pos_g = t1_pos * g_self;
  const Matrix num = t2_pos * g_other + gamma * (t1_pos * f_self) + t1_neg_g +
                     gamma * (t1_neg_g * t3);
  const Matrix den = t2_neg * g_other + gamma * (t1_neg * f_self) + t1_pos_g +
                     gamma * (t1_pos_g * t3);
  return multiplicative_step(g_self, num, den, epsilon, "centroid map");
}

double centroid_objective(const Matrix& g_self, const Matrix& g_other, const Matrix& f_self,
                          const Matrix& z_self, const Matrix& z_other, double gamma) {
  const Matrix centroids = z_self * g_self;
  return (centroids - z_other * g_other).squaredNorm() +
         gamma * (z_self - centroids * f_self.transpose()).squaredNorm();
}

Matrix update_source_labels(const Matrix& f_unlabeled, const Matrix& y_labeled,
                            const Matrix& g_source, const Matrix& z_source,
                            const SparseMatrix& l_uu, const SparseMatrix& l_ul, double gamma,
                            double epsilon, const SparseMatrix& l_ut, const Matrix& f_target) {
  const Eigen::Index n_sl = y_labeled.rows();
  const Eigen::Index n_su = f_unlabeled.rows();
  if (z_source.cols() != n_sl + n_su || l_uu.rows() != n_su || l_ul.cols() != n_sl) {
    throw DataError("F_s^u update: inconsistent block sizes");
  }
  const bool coupled = l_ut.size() > 0;
  if (coupled && (l_ut.rows() != n_su || l_ut.cols() != f_target.rows())) {
    throw DataError("F_s^u update: inconsistent cross block sizes");
  }
  const Matrix centroids = z_source * g_source;  // k x C
  const Matrix k1 = z_source.rightCols(n_su).transpose() * centroids;
  const Matrix k2 = centroids.transpose() * centroids;
  const SparseMatrix luu_pos = sparse_positive(l_uu);
  const SparseMatrix luu_neg = sparse_negative_magnitude(l_uu);
  const SparseMatrix lul_pos = sparse_positive(l_ul);
  const SparseMatrix lul_neg = sparse_negative_magnitude(l_ul);

  Matrix num = gamma * positive_part(k1) + gamma * (f_unlabeled * negative_magnitude(k2)) +
               luu_neg * f_unlabeled + lul_neg * y_labeled;
  Matrix den = gamma * negative_magnitude(k1) + gamma * (f_unlabeled * positive_part(k2)) +
               luu_pos * f_unlabeled + lul_pos * y_labeled;
  if (coupled) {
    num += sparse_negative_magnitude(l_ut) * f_target;
    den += sparse_positive(l_ut) * f_target;
  }
  return multiplicative_step(f_unlabeled, num, den, epsilon, "F_s^u");
}

double source_label_objective(const Matrix& f_unlabeled, const Matrix& y_labeled,
                              const Matrix& g_source, const Matrix& z_source,
                              const SparseMatrix& l_uu, const SparseMatrix& l_ul, double gamma,
                              const SparseMatrix& l_ut, const Matrix& f_target) {
  const Eigen::Index n_su = f_unlabeled.rows();
  const Matrix centroids = z_source * g_source;
  const double fit =
      (z_source.rightCols(n_su) - centroids * f_unlabeled.transpose()).squaredNorm();
  double value = gamma * fit + (f_unlabeled.transpose() * (l_uu * f_unlabeled)).trace() +
                 2.0 * (f_unlabeled.transpose() * (l_ul * y_labeled)).trace();
  if (l_ut.size() > 0) value += 2.0 * (f_unlabeled.transpose() * (l_ut * f_target)).trace();
  return value;
}

Matrix update_target_labels(const Matrix& f_target, const Matrix& f_source,
                            const Matrix& g_target, const Matrix& z_target,
                            const SparseMatrix& l_tt, const SparseMatrix& l_ts, double gamma,
                            double epsilon, TargetRule rule) {
  const Eigen::Index n_t = f_target.rows();
  if (z_target.cols() != n_t || l_tt.rows() != n_t || l_ts.rows() != n_t ||
      l_ts.cols() != f_source.rows()) {
    throw DataError("F_t update: inconsistent block sizes");
  }
  const Matrix centroids = z_target * g_target;
  const Matrix k3 = z_target.transpose() * centroids;
  const Matrix k4 = centroids.transpose() * centroids;
  const SparseMatrix ltt_pos = sparse_positive(l_tt);
  const SparseMatrix ltt_neg = sparse_negative_magnitude(l_tt);
  const SparseMatrix lts_pos = sparse_positive(l_ts);
  const SparseMatrix lts_neg = sparse_negative_magnitude(l_ts);

  const Matrix printed = gamma * positive_part(k3) + gamma * (f_target * negative_magnitude(k4)) +
                         ltt_neg * f_target + lts_neg * f_source;
  if (rule == TargetRule::printed) {
    // Numerator and denominator are the same expression.
    Matrix out = f_target;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double den = printed(i, j);
        if (den > 0.0) out(i, j) = f_target(i, j) * std::sqrt(printed(i, j) / den);
      }
    }
    return out;
  }
  const Matrix den = gamma * negative_magnitude(k3) + gamma * (f_target * positive_part(k4)) +
                     ltt_pos * f_target + lts_pos * f_source;
  return multiplicative_step(f_target, printed, den, epsilon, "F_t");
}

double target_label_objective(const Matrix& f_target, const Matrix& f_source,
                              const Matrix& g_target, const Matrix& z_target,
                              const SparseMatrix& l_tt, const SparseMatrix& l_ts, double gamma) {
  const Matrix centroids = z_target * g_target;
  return gamma * (z_target - centroids * f_target.transpose()).squaredNorm() +
         (f_target.transpose() * (l_tt * f_target)).trace() +
         2.0 * (f_target.transpose() * (l_ts * f_source)).trace();
}

// ---------------------------------------------------------------------------

Embeddings embed(const Matrix& a, const DomainPair& pair) {
  return Embeddings{a.transpose() * pair.source().values(),
                    a.transpose() * pair.target().values()};
}

Matrix update_gs(const AdaptationState& state, const Embeddings& z, const SolverConfig& config) {
  return update_centroid_map(state.g_s, state.g_t, state.f_s, z.source, z.target, config.gamma,
                             config.epsilon);
}

Matrix update_gt(const AdaptationState& state, const Embeddings& z, const SolverConfig& config) {
  return update_centroid_map(state.g_t, state.g_s, state.f_t, z.target, z.source, config.gamma,
                             config.epsilon);
}

Matrix update_fsu(const AdaptationState& state, const GraphLaplacian& laplacian,
                  const Embeddings& z, const SolverConfig& config) {
  const int n_sl = laplacian.labeled_count();
  const int n_su = laplacian.source_count() - n_sl;
  Matrix f_s = state.f_s;
  SparseMatrix l_ut;
  if (config.source_rule == SourceRule::coupled) {
    l_ut = laplacian.st().transpose().rightCols(n_su).transpose();
  }
  f_s.bottomRows(n_su) =
      update_source_labels(state.f_s.bottomRows(n_su), state.f_s.topRows(n_sl), state.g_s,
                           z.source, laplacian.ss_uu(), laplacian.ss_ul(), config.gamma,
                           config.epsilon, l_ut, state.f_t);
  return f_s;
}

Matrix update_ft(const AdaptationState& state, const GraphLaplacian& laplacian,
                 const Embeddings& z, const SolverConfig& config) {
  return update_target_labels(state.f_t, state.f_s, state.g_t, z.target, laplacian.tt(),
                              laplacian.ts(), config.gamma, config.epsilon, config.target_rule);
}

double total_objective(const AdaptationState& state, const DomainPair& pair,
                       const GraphLaplacian& laplacian, const SolverConfig& config) {
  const Matrix& a = state.projection.values;
  const Matrix& xs = pair.source().values();
  const Matrix& xt = pair.target().values();
  const Matrix zs = a.transpose() * xs;
  const Matrix zt = a.transpose() * xt;
  const double clustering = projected_clustering_loss(a, xs, state.g_s, state.f_s) +
                            projected_clustering_loss(a, xt, state.g_t, state.f_t);
  const Vector mean_gap = zs.rowwise().mean() - zt.rowwise().mean();
  double objective = config.gamma * clustering + mean_gap.squaredNorm();
  if (config.conditional) {
    objective += conditional_mmd_centroid_form(a, xs, xt, state.g_s, state.g_t);
  }
  objective += propagation_loss(laplacian, state.f_s, state.f_t);
  objective += config.lambda * a.squaredNorm();
  return objective;
}

// ---------------------------------------------------------------------------

namespace {

double fraction_correct(std::span<const int> predicted, std::span<const int> truth) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return truth.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(truth.size());
}

Matrix concat_columns(const Matrix& left, const Matrix& right) {
  Matrix out(left.rows(), left.cols() + right.cols());
  out << left, right;
  return out;
}

void apply_floor(Matrix& m, double floor, Eigen::Index first_row = 0) {
  auto block = m.bottomRows(m.rows() - first_row);
  block = block.cwiseMax(floor);
}

GraphLaplacian full_laplacian(const Embeddings& z, const DomainPair& pair, int neighbor_count) {
  const Matrix all = concat_columns(z.source, z.target);
  const int k = std::min(neighbor_count, static_cast<int>(all.cols()) - 1);
  return build_laplacian(build_knn_graph(all, k), pair.source_count(), pair.labeled_count());
}

}  // namespace

Projection initial_projection(const DomainPair& centered_pair, const ConstraintPencil& pencil,
                              const SolverConfig& config) {
  const Matrix x = concat_columns(centered_pair.source().values(), centered_pair.target().values());
  const MmdMatrix m0 = build_m0(centered_pair.source_count(), centered_pair.target_count());
  const Matrix kms = assemble_kms(x, std::span<const MmdMatrix>(&m0, 1), Matrix(), Matrix(),
                                  0.0, config.lambda);
  return solve_projection(kms, pencil, config.k);
}

InitialLabels propagate_initial(const DomainPair& pair, const Embeddings& z,
                                const SolverConfig& config) {
  const int n_s = pair.source_count();
  const int n_sl = pair.labeled_count();
  const int classes = pair.class_count();
  const Matrix y = pair.labeled_labels().values();

  const int source_neighbors = std::min(config.neighbor_count, n_s - 1);
  const SparseMatrix source_lap = laplacian_of(build_knn_graph(z.source, source_neighbors).weights);
  const Matrix f_su = propagate_labels(source_lap, n_sl, y);
  Labels source_labels(pair.labeled_classes().begin(), pair.labeled_classes().end());
  const Labels propagated = hard_labels(f_su);
  source_labels.insert(source_labels.end(), propagated.begin(), propagated.end());

  GraphLaplacian lap = full_laplacian(z, pair, config.neighbor_count);
  const Matrix f_t = propagate_labels(lap.full(), n_s, one_hot(source_labels, classes));
  return InitialLabels{std::move(source_labels), hard_labels(f_t), std::move(lap)};
}

SolverResult run_slsada(const DomainPair& input, const SolverConfig& config,
                        const IterationObserver& observer) {
  config.validate(input.dim());
  if (input.labeled_count() < 1) {
    throw DataError("at least one labeled source sample is required");
  }
  if (input.labeled_count() >= input.source_count()) {
    throw DataError("every source sample is labeled; nothing to adapt");
  }
  if (input.source_count() + input.target_count() < 3) {
    throw DataError("need at least three samples in total");
  }

  const DomainPair pair = center_jointly(input);
  const int n_s = pair.source_count();
  const int n_sl = pair.labeled_count();
  const int classes = pair.class_count();
  const Matrix& xs = pair.source().values();
  const Matrix& xt = pair.target().values();
  const Matrix x = concat_columns(xs, xt);
  const ConstraintPencil pencil = make_constraint_pencil(x);
  const MmdMatrix m0 = build_m0(n_s, pair.target_count());

  SolverResult result;
  AdaptationState& state = result.state;
  int stage = 0;

  auto record = [&](const GraphLaplacian& lap) {
    IterationRecord rec;
    rec.iteration = state.iteration;
    rec.objective = total_objective(state, pair, lap, config);
    rec.constraint_residual = constraint_residual(state.projection.values, pencil.data_gram);
    if (pair.has_source_truth()) {
      rec.accuracy_s = fraction_correct(hard_labels(state.f_s), pair.true_labels_source());
    }
    if (pair.has_target_truth()) {
      rec.accuracy_t = fraction_correct(hard_labels(state.f_t), pair.true_labels_target());
    }
    if (state.iteration > 0) state.objective_trace.push_back(rec.objective);
    result.records.push_back(rec);
    if (observer) observer(rec);
  };

  try {
    // Initialization: marginal-only projection, then two propagation passes.
    state.projection = initial_projection(pair, pencil, config);
    Embeddings z = embed(state.projection.values, pair);

    InitialLabels initial = propagate_initial(pair, z, config);
    GraphLaplacian lap = std::move(initial.laplacian);
    const Labels& source_labels = initial.source;
    const Labels& target_labels = initial.target;
    result.initial_source_predictions = source_labels;
    result.initial_target_predictions = target_labels;

    state.f_s = one_hot(source_labels, classes);
    state.f_t = one_hot(target_labels, classes);
    apply_floor(state.f_s, config.floor, n_sl);
    apply_floor(state.f_t, config.floor);
    state.g_s = centroid_map(one_hot(source_labels, classes), config.epsilon);
    state.g_t = centroid_map(one_hot(target_labels, classes), config.epsilon);
    apply_floor(state.g_s, config.floor);
    apply_floor(state.g_t, config.floor);
    record(lap);

    for (int t = 1; t <= config.iterations; ++t) {
      stage = t;
      state.iteration = t;
      const Labels ys = hard_labels(state.f_s);
      const Labels yt = hard_labels(state.f_t);

      // Scatter and class-wise MMD from the current hard labels, then A.
      const Matrix sw_s = intra_class_scatter(xs, ys, classes);
      const Matrix sw_t = intra_class_scatter(xt, yt, classes);
      std::vector<MmdMatrix> mmds{m0};
      if (config.conditional) {
        for (auto& mc : build_class_mmds(ys, yt, classes)) {
          if (!mc.empty()) mmds.push_back(std::move(mc));
        }
      }
      const Matrix kms = assemble_kms(x, mmds, sw_s, sw_t, config.gamma, config.lambda);
      state.projection = solve_projection(kms, pencil, config.k);
      z = embed(state.projection.values, pair);
      if (config.graph_schedule == GraphSchedule::rebuild) {
        lap = full_laplacian(z, pair, config.neighbor_count);
      }

      state.g_s = centroid_map(one_hot(ys, classes), config.epsilon);
      state.g_t = centroid_map(one_hot(yt, classes), config.epsilon);
      apply_floor(state.g_s, config.floor);
      apply_floor(state.g_t, config.floor);

      for (int pass = 0; pass < config.inner_updates; ++pass) {
        state.g_s = update_gs(state, z, config);
        state.g_t = update_gt(state, z, config);
        state.f_s = update_fsu(state, lap, z, config);
        state.f_t = update_ft(state, lap, z, config);
      }
      record(lap);
    }
    result.embeddings = std::move(z);
  } catch (const Error& e) {
    const std::string where =
        stage == 0 ? "initialization" : "iteration " + std::to_string(stage);
    switch (e.kind()) {
      case ErrorKind::usage: throw UsageError(where + ": " + e.what());
      case ErrorKind::data: throw DataError(where + ": " + e.what());
      case ErrorKind::numerical: throw NumericalError(where + ": " + e.what());
    }
    throw;
  }

  result.source_predictions = hard_labels(state.f_s);
  result.target_predictions = hard_labels(state.f_t);
  return result;
}

}  // namespace slsada
