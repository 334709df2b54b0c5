#include "slsada/cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "slsada/dataset.hpp"
#include "slsada/error.hpp"
#include "slsada/harness.hpp"
#include "slsada/selfcheck.hpp"
#include "slsada/solver.hpp"

namespace slsada {

namespace {

namespace fs = std::filesystem;

struct CliConfig {
  std::string subcommand;
  std::string source;
  std::string target;
  std::string labels_source;
  std::string labels_target;
  std::string labeled_idx;
  std::string out = ".";
  std::string format;  // empty: infer from extension
  bool synthetic = false;
  bool normalize = false;
  bool timing = false;
  bool print_config = false;
  std::string config_file;

  // Synthetic pair.
  int classes = 0;  // 0: default 3 (synthetic) or inferred from labels
  int dim = 10;
  int samples_per_class = 50;
  double rotation = 15.0;
  double offset = 1.0;
  double separation = 3.0;
  double cov_scale = 1.0;

  // Protocol.
  int per_class = 5;
  int repeats = 10;
  std::string methods = "slsada,source_only";
  std::string param;
  std::string values;

  // Solver.
  std::string preset;
  std::optional<int> k;
  std::optional<double> lambda;
  double gamma = 0.01;
  int iters = 5;
  int neighbors = 20;
  int inner_updates = 1;
  std::string graph = "rebuild";
  std::string target_rule = "kkt";
  std::string source_rule = "coupled";
  std::uint64_t seed = 0;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw UsageError("sweep value '" + item + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("sweep needs at least one value (--values)");
  return out;
}

SolverConfig solver_config(const CliConfig& c) {
  SolverConfig cfg = c.preset.empty() ? SolverConfig{} : SolverConfig::preset(c.preset);
  if (c.k) cfg.k = *c.k;
  if (c.lambda) cfg.lambda = *c.lambda;
  cfg.gamma = c.gamma;
  cfg.iterations = c.iters;
  cfg.neighbor_count = c.neighbors;
  cfg.inner_updates = c.inner_updates;
  cfg.graph_schedule = parse_graph_schedule(c.graph);
  cfg.target_rule = parse_target_rule(c.target_rule);
  cfg.source_rule = parse_source_rule(c.source_rule);
  cfg.seed = c.seed;
  return cfg;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// key=value lines that reproduce the run through --config.
std::string config_echo(const CliConfig& c, const SolverConfig& cfg) {
  std::ostringstream o;
  auto kv = [&](const char* key, const std::string& value) { o << key << '=' << value << '\n'; };
  o << "# " << c.subcommand << '\n';
  if (c.synthetic || c.subcommand == "synth") {
    if (c.subcommand != "synth") kv("synthetic", "true");
    kv("classes", std::to_string(c.classes > 0 ? c.classes : 3));
    kv("dim", std::to_string(c.dim));
    if (c.subcommand == "synth") {
      kv("per-class", std::to_string(c.samples_per_class));
    } else {
      kv("samples-per-class", std::to_string(c.samples_per_class));
    }
    kv("rotation", format_number(c.rotation));
    kv("offset", format_number(c.offset));
    kv("separation", format_number(c.separation));
    kv("cov-scale", format_number(c.cov_scale));
  } else {
    if (!c.source.empty()) kv("source", c.source);
    if (!c.target.empty()) kv("target", c.target);
    if (!c.labels_source.empty()) kv("labels-source", c.labels_source);
    if (!c.labels_target.empty()) kv("labels-target", c.labels_target);
    if (!c.labeled_idx.empty()) kv("labeled-idx", c.labeled_idx);
    if (c.classes > 0) kv("classes", std::to_string(c.classes));
  }
  if (!c.format.empty()) kv("format", c.format);
  kv("seed", std::to_string(c.seed));
  if (c.subcommand == "synth") return o.str();
  if (c.normalize) kv("normalize", "true");
  if (c.subcommand != "run" || c.labeled_idx.empty()) kv("per-class", std::to_string(c.per_class));
  if (c.subcommand != "run") {
    kv("repeats", std::to_string(c.repeats));
    kv("methods", c.methods);
  }
  if (c.subcommand == "sweep") {
    kv("param", c.param);
    kv("values", c.values);
  }
  kv("k", std::to_string(cfg.k));
  kv("gamma", format_number(cfg.gamma));
  kv("lambda", format_number(cfg.lambda));
  kv("iters", std::to_string(cfg.iterations));
  kv("neighbors", std::to_string(cfg.neighbor_count));
  kv("inner-updates", std::to_string(cfg.inner_updates));
  kv("graph", std::string(to_string(cfg.graph_schedule)));
  kv("target-rule", std::string(to_string(cfg.target_rule)));
  kv("source-rule", std::string(to_string(cfg.source_rule)));
  return o.str();
}

SyntheticSpec synthetic_spec(const CliConfig& c) {
  SyntheticSpec s;
  s.classes = c.classes > 0 ? c.classes : 3;
  s.dim = c.dim;
  s.per_class = c.samples_per_class;
  s.rotation_deg = c.rotation;
  s.offset = c.offset;
  s.separation = c.separation;
  s.covariance_scale = c.cov_scale;
  return s;
}

FeatureFormat format_for(const CliConfig& c, const fs::path& path) {
  return c.format.empty() ? infer_feature_format(path) : parse_feature_format(c.format);
}

int infer_classes(const Labels& a, const Labels& b) {
  int top = -1;
  for (int v : a) top = std::max(top, v);
  for (int v : b) top = std::max(top, v);
  return top + 1;
}

// Unlabeled pair (with whatever ground truth is available) plus a description.
std::pair<DomainPair, std::string> load_pair(const CliConfig& c) {
  if (c.synthetic) {
    const SyntheticSpec spec = synthetic_spec(c);
    std::ostringstream d;
    d << "synthetic classes=" << spec.classes << " dim=" << spec.dim
      << " per_class=" << spec.per_class << " rotation=" << format_number(spec.rotation_deg)
      << " offset=" << format_number(spec.offset) << " seed=" << c.seed;
    DomainPair pair = generate_synthetic_pair(spec, c.seed);
    if (c.normalize) pair = normalize_samples(pair);
    return {std::move(pair), d.str()};
  }
  if (c.source.empty() || c.target.empty()) {
    throw UsageError("--source and --target are required (or --synthetic)");
  }
  FeatureMatrix xs = load_features(c.source, format_for(c, c.source));
  FeatureMatrix xt = load_features(c.target, format_for(c, c.target));
  if (xs.dim() != xt.dim()) {
    throw DataError("source has " + std::to_string(xs.dim()) + " features, target has " +
                    std::to_string(xt.dim()));
  }
  Labels ls = c.labels_source.empty() ? Labels{} : load_labels(c.labels_source);
  Labels lt = c.labels_target.empty() ? Labels{} : load_labels(c.labels_target);
  const int classes = c.classes > 0 ? c.classes : infer_classes(ls, lt);
  if (classes < 1) throw UsageError("class count unknown: pass --classes or --labels-source");
  DomainPair pair(std::move(xs), std::move(xt), classes, std::move(ls), std::move(lt));
  if (c.normalize) pair = normalize_samples(pair);
  return {std::move(pair), c.source + " -> " + c.target};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw DataError("write to '" + path.string() + "' failed");
}

fs::path prepare_out(const CliConfig& c) {
  const fs::path out(c.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory '" + c.out + "': " + ec.message());
  return out;
}

std::vector<Method> methods_of(const CliConfig& c) {
  std::vector<Method> out;
  for (const auto& name : split_list(c.methods)) out.push_back(parse_method(name));
  if (out.empty()) throw UsageError("--methods is empty");
  return out;
}

ExperimentSpec experiment_spec(const CliConfig& c, const SolverConfig& cfg,
                               const std::string& description) {
  ExperimentSpec spec;
  spec.pair_description = description;
  spec.per_class_labels = c.per_class;
  spec.repeats = c.repeats;
  spec.seed = c.seed;
  spec.solver = cfg;
  spec.methods = methods_of(c);
  spec.include_timing = c.timing;
  return spec;
}

int do_run(const CliConfig& c, std::ostream& out) {
  const SolverConfig cfg = solver_config(c);
  auto [pair, description] = load_pair(c);
  cfg.validate(pair.dim());
  std::vector<int> indices;
  if (!c.labeled_idx.empty()) {
    indices = load_indices(c.labeled_idx);
    if (!pair.has_source_truth()) {
      throw UsageError("--labeled-idx needs --labels-source to supply the labels");
    }
  } else {
    if (!pair.has_source_truth()) {
      throw UsageError("pass --labeled-idx with --labels-source, or --labels-source alone");
    }
    indices = sample_labeled_subset(pair.to_original_order(pair.true_labels_source()),
                                    c.per_class, derive_seed(c.seed, 0), pair.class_count());
  }
  const DomainPair labeled = pair.with_labeled(indices);
  const fs::path dir = prepare_out(c);

  std::ofstream iterations(dir / "iterations.jsonl");
  if (!iterations) throw DataError("cannot open '" + (dir / "iterations.jsonl").string() + "'");
  const SolverResult result = run_slsada(labeled, cfg, [&](const IterationRecord& r) {
    iterations << to_json(r).dump() << '\n';
    out << "iteration " << r.iteration << " objective " << format_number(r.objective);
    if (r.accuracy_t) out << " accuracy_t " << format_number(*r.accuracy_t);
    out << '\n';
  });

  nlohmann::json report = {
      {"config", {{"pair", description},
                  {"labeled_indices", indices},
                  {"solver", to_json(cfg)}}},
      {"update_rules", update_rule_variants(cfg)},
      {"objective_trace", result.state.objective_trace},
  };
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : result.records) records.push_back(to_json(r));
  report["records"] = std::move(records);
  if (labeled.has_source_truth()) {
    report["accuracy_s"] = accuracy_s(result.source_predictions, labeled);
  }
  if (labeled.has_target_truth()) {
    report["accuracy_t"] = accuracy_t(result.target_predictions, labeled);
  }

  write_text(dir / "report.json", report.dump(2) + "\n");
  write_text(dir / "config.txt", config_echo(c, cfg));
  save_labels(labeled.to_original_order(result.source_predictions),
              dir / "predictions_source.txt");
  save_labels(result.target_predictions, dir / "predictions_target.txt");
  embed_dump(result, labeled, dir / "embeddings.csv");

  if (report.contains("accuracy_s")) {
    out << "accuracy_s " << format_number(report["accuracy_s"].get<double>()) << '\n';
  }
  if (report.contains("accuracy_t")) {
    out << "accuracy_t " << format_number(report["accuracy_t"].get<double>()) << '\n';
  }
  return 0;
}

void print_summary(const RunReport& report, std::ostream& out) {
  out << std::left << std::setw(18) << "method" << " mean_s  std_s   mean_t  std_t   n\n";
  for (const auto& s : report.summary) {
    out << std::left << std::setw(18) << method_name(s.method) << std::fixed
        << std::setprecision(4) << ' ' << s.mean_s << ' ' << s.std_s << ' ' << s.mean_t << ' '
        << s.std_t << ' ' << s.count << '\n';
    out.unsetf(std::ios::fixed);
  }
  out << std::setprecision(6);
}

int do_protocol(const CliConfig& c, std::ostream& out, std::ostream& err) {
  const SolverConfig cfg = solver_config(c);
  auto [pair, description] = load_pair(c);
  const ExperimentSpec spec = experiment_spec(c, cfg, description);
  const RunReport report = run_protocol(pair, spec);
  const fs::path dir = prepare_out(c);
  write_text(dir / "report.json", to_json(report).dump(2) + "\n");
  write_text(dir / "summary.csv", summary_csv(report));
  write_text(dir / "config.txt", config_echo(c, cfg));
  print_summary(report, out);
  if (!report.complete()) {
    for (const auto& row : report.repeats) {
      for (const auto& s : row.scores) {
        if (!s.ok) {
          err << "warning: repeat " << row.repeat << " " << method_name(s.method) << ": "
              << s.error << '\n';
        }
      }
    }
  }
  return 0;
}

int do_sweep(const CliConfig& c, std::ostream& out) {
  const SolverConfig cfg = solver_config(c);
  auto [pair, description] = load_pair(c);
  ExperimentSpec spec = experiment_spec(c, cfg, description);
  if (spec.methods.front() != Method::slsada) {
    spec.methods.insert(spec.methods.begin(), Method::slsada);
  }
  std::string parameter = c.param;
  if (parameter == "per-class") parameter = "per_class";
  if (parameter.empty()) throw UsageError("sweep needs --param");
  const SweepGrid grid{parameter, parse_values(c.values)};
  const std::vector<RunReport> reports = sweep(pair, spec, grid);
  const fs::path dir = prepare_out(c);
  const std::string csv = sweep_csv(grid, reports);
  nlohmann::json all = nlohmann::json::array();
  for (const auto& r : reports) all.push_back(to_json(r));
  write_text(dir / "sweep.csv", csv);
  write_text(dir / "sweep.json", all.dump(2) + "\n");
  write_text(dir / "config.txt", config_echo(c, cfg));
  out << csv;
  return 0;
}

int do_synth(const CliConfig& c, std::ostream& out) {
  const SyntheticSpec spec = synthetic_spec(c);
  const DomainPair pair = generate_synthetic_pair(spec, c.seed);
  const fs::path dir = prepare_out(c);
  const FeatureFormat format = c.format.empty() ? FeatureFormat::csv : parse_feature_format(c.format);
  const std::string ext = format == FeatureFormat::csv ? ".csv" : ".bin";
  const fs::path files[] = {dir / ("source" + ext), dir / ("target" + ext),
                            dir / "labels_source.txt", dir / "labels_target.txt"};
  save_features(FeatureMatrix(pair.source_original()), files[0], format);
  save_features(pair.target(), files[1], format);
  save_labels(pair.to_original_order(pair.true_labels_source()), files[2]);
  save_labels(pair.true_labels_target(), files[3]);
  CliConfig echo = c;
  echo.classes = spec.classes;
  write_text(dir / "config.txt", config_echo(echo, SolverConfig{}));
  for (const auto& f : files) out << f.string() << '\n';
  return 0;
}

int do_selfcheck(const CliConfig& c, std::ostream& out) {
  const std::vector<CheckResult> checks = run_selfcheck(c.seed);
  print_checks(checks, out);
  const bool ok = std::all_of(checks.begin(), checks.end(), [](const auto& r) { return r.passed; });
  out << (ok ? "all checks passed" : "some checks failed") << '\n';
  return ok ? 0 : exit_code(ErrorKind::numerical);
}

void add_solver_flags(CLI::App* app, CliConfig& c) {
  app->add_option("--preset", c.preset, "small (k=20, lambda=0.05) or large (k=100, lambda=0.1)")
      ->check(CLI::IsMember({"small", "large"}));
  app->add_option("--k", c.k, "subspace dimension");
  app->add_option("--lambda", c.lambda, "projection regularization weight");
  app->add_option("--gamma", c.gamma, "projected clustering weight")->capture_default_str();
  app->add_option("--iters", c.iters, "outer iterations")->capture_default_str();
  app->add_option("--neighbors", c.neighbors, "kNN graph neighbors")->capture_default_str();
  app->add_option("--inner-updates", c.inner_updates, "multiplicative passes per iteration")
      ->capture_default_str();
  app->add_option("--graph", c.graph, "rebuild or frozen")
      ->check(CLI::IsMember({"rebuild", "frozen"}))
      ->capture_default_str();
  app->add_option("--target-rule", c.target_rule, "kkt or printed")
      ->check(CLI::IsMember({"kkt", "printed"}))
      ->capture_default_str();
  app->add_option("--source-rule", c.source_rule, "coupled or local")
      ->check(CLI::IsMember({"coupled", "local"}))
      ->capture_default_str();
}

void add_data_flags(CLI::App* app, CliConfig& c) {
  app->add_option("--source", c.source, "source features (m x n_s)")->check(CLI::ExistingFile);
  app->add_option("--target", c.target, "target features (m x n_t)")->check(CLI::ExistingFile);
  app->add_option("--labels-source", c.labels_source, "source labels, one per line")
      ->check(CLI::ExistingFile);
  app->add_option("--labels-target", c.labels_target, "target labels, one per line")
      ->check(CLI::ExistingFile);
  app->add_option("--format", c.format, "csv or binary (default: from extension)")
      ->check(CLI::IsMember({"csv", "binary"}));
  app->add_flag("--synthetic", c.synthetic, "use a generated pair instead of files");
  app->add_option("--classes", c.classes, "class count");
  app->add_option("--dim", c.dim, "synthetic feature dimension")->capture_default_str();
  app->add_option("--samples-per-class", c.samples_per_class, "synthetic samples per class")
      ->capture_default_str();
  app->add_option("--rotation", c.rotation, "synthetic rotation in degrees")->capture_default_str();
  app->add_option("--offset", c.offset, "synthetic target offset")->capture_default_str();
  app->add_option("--separation", c.separation, "synthetic class mean norm")
      ->capture_default_str();
  app->add_option("--cov-scale", c.cov_scale, "synthetic covariance scale")->capture_default_str();
  app->add_flag("--normalize", c.normalize, "scale samples to unit L2 norm");
}

void add_common_flags(CLI::App* app, CliConfig& c) {
  app->add_option("--seed", c.seed, "master seed")->capture_default_str();
  app->add_option("--out", c.out, "output directory")->capture_default_str();
  app->add_option("--config", c.config_file, "key=value config file; command-line flags override it");
  app->add_flag("--print-config", c.print_config, "print the effective config and exit");
}

}  // namespace

std::vector<std::string> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path.string() + "'");
  std::vector<std::string> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw UsageError(path.string() + ":" + std::to_string(number) + ": missing key");
    }
    if (key == "config") {
      throw UsageError(path.string() + ":" + std::to_string(number) + ": nested config files are not supported");
    }
    if (eq == std::string::npos) {
      out.push_back("--" + key);
    } else {
      out.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
    }
  }
  return out;
}

std::vector<std::string> expand_config_args(const std::vector<std::string>& args) {
  if (args.size() < 2) return args;
  std::vector<std::string> from_files;
  for (std::size_t i = 2; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      continue;
    }
    const auto tokens = read_config_file(path);
    from_files.insert(from_files.end(), tokens.begin(), tokens.end());
  }
  std::vector<std::string> out(args.begin(), args.begin() + 2);
  out.insert(out.end(), from_files.begin(), from_files.end());
  out.insert(out.end(), args.begin() + 2, args.end());
  return out;
}

int parse_and_dispatch(const std::vector<std::string>& raw, std::ostream& out,
                       std::ostream& err) {
  CliConfig c;
  CLI::App app{"Sparsely-labeled source domain adaptation", raw.empty() ? "slsada" : raw[0]};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "adapt once and write predictions and a report");
  CLI::App* protocol = app.add_subcommand("protocol", "repeated labeled-subset protocol");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "protocol over a parameter grid");
  CLI::App* synth = app.add_subcommand("synth", "write a synthetic drifted pair");
  CLI::App* selfcheck = app.add_subcommand("selfcheck", "run the oracle checks");

  for (CLI::App* sub : {run, protocol, sweep_cmd}) {
    add_common_flags(sub, c);
    add_data_flags(sub, c);
    add_solver_flags(sub, c);
    sub->add_option("--per-class", c.per_class, "labeled samples per class")
        ->capture_default_str();
  }
  run->add_option("--labeled-idx", c.labeled_idx, "labeled source columns, one per line")
      ->check(CLI::ExistingFile);
  for (CLI::App* sub : {protocol, sweep_cmd}) {
    sub->add_option("--repeats", c.repeats, "labeled-subset draws")->capture_default_str();
    sub->add_option("--methods", c.methods, "comma list of methods")->capture_default_str();
    sub->add_flag("--timing", c.timing, "record wall time in the report");
  }
  sweep_cmd->add_option("--param", c.param, "k, lambda, gamma, iterations or per_class")
      ->required();
  sweep_cmd->add_option("--values", c.values, "comma list of grid values")->required();

  add_common_flags(synth, c);
  synth->add_option("--classes", c.classes, "class count");
  synth->add_option("--dim", c.dim, "feature dimension")->capture_default_str();
  synth->add_option("--per-class", c.samples_per_class, "samples per class and domain")
      ->capture_default_str();
  synth->add_option("--rotation", c.rotation, "rotation in degrees")->capture_default_str();
  synth->add_option("--offset", c.offset, "target offset")->capture_default_str();
  synth->add_option("--separation", c.separation, "class mean norm")->capture_default_str();
  synth->add_option("--cov-scale", c.cov_scale, "covariance scale")->capture_default_str();
  synth->add_option("--format", c.format, "csv or binary")
      ->check(CLI::IsMember({"csv", "binary"}));

  selfcheck->add_option("--seed", c.seed, "seed for random instances")->capture_default_str();

  try {
    std::vector<std::string> args = expand_config_args(raw);
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : exit_code(ErrorKind::usage);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  }

  try {
    for (CLI::App* sub : app.get_subcommands()) c.subcommand = sub->get_name();
    if (c.print_config) {
      out << config_echo(c, c.subcommand == "synth" ? SolverConfig{} : solver_config(c));
      return 0;
    }
    if (c.subcommand == "run") return do_run(c, out);
    if (c.subcommand == "protocol") return do_protocol(c, out, err);
    if (c.subcommand == "sweep") return do_sweep(c, out);
    if (c.subcommand == "synth") return do_synth(c, out);
    if (c.subcommand == "selfcheck") return do_selfcheck(c, out);
    throw UsageError("unknown subcommand");
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(ErrorKind::data);
  }
}

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);
  return parse_and_dispatch(args, out, err);
}

}  // namespace slsada
