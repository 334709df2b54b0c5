#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "slsada/cli.hpp"
#include "slsada/dataset.hpp"
#include "test_util.hpp"

using namespace slsada;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "slsada");
  std::ostringstream out;
  std::ostringstream err;
  const int code = parse_and_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("small preset echoes the default solver settings") {
  const Outcome o = cli({"run", "--preset", "small", "--synthetic", "--print-config"});
  CHECK(o.code == 0);
  CHECK(o.out.find("k=20\n") != std::string::npos);
  CHECK(o.out.find("lambda=0.05\n") != std::string::npos);
  CHECK(o.out.find("iters=5\n") != std::string::npos);
  CHECK(o.out.find("gamma=0.01\n") != std::string::npos);
  CHECK(o.out.find("neighbors=20\n") != std::string::npos);

  const Outcome large = cli({"run", "--preset", "large", "--synthetic", "--print-config"});
  CHECK(large.out.find("k=100\n") != std::string::npos);
  CHECK(large.out.find("lambda=0.1\n") != std::string::npos);

  const Outcome override_k =
      cli({"run", "--preset", "large", "--k", "7", "--synthetic", "--print-config"});
  CHECK(override_k.out.find("k=7\n") != std::string::npos);
}

TEST_CASE("synth writes four files that load back") {
  const auto dir = test::scratch_dir("cli_synth");
  const Outcome o = cli({"synth", "--classes", "3", "--dim", "10", "--per-class", "50",
                         "--rotation", "15", "--seed", "7", "--out", dir.string()});
  REQUIRE(o.code == 0);
  for (const char* name : {"source.csv", "target.csv", "labels_source.txt", "labels_target.txt"}) {
    CHECK(std::filesystem::exists(dir / name));
  }
  const FeatureMatrix xs = load_features(dir / "source.csv", FeatureFormat::csv);
  CHECK(xs.dim() == 10);
  CHECK(xs.samples() == 150);
  CHECK(load_labels(dir / "labels_target.txt").size() == 150);

  SyntheticSpec spec;
  spec.rotation_deg = 15;
  const DomainPair ref = generate_synthetic_pair(spec, 7);
  CHECK((xs.values().array() == ref.source_original().array()).all());
}

TEST_CASE("selfcheck passes") {
  const Outcome o = cli({"selfcheck"});
  CHECK(o.code == 0);
  CHECK(o.out.find("PASS") != std::string::npos);
  CHECK(o.out.find("FAIL") == std::string::npos);
}

TEST_CASE("exit codes") {
  const auto dir = test::scratch_dir("cli_errors");
  CHECK(cli({}).code == 2);
  CHECK(cli({"run", "--bogus"}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"--help"}).code == 0);

  const Outcome missing = cli({"run", "--source", (dir / "nope.csv").string(), "--target",
                               (dir / "nope.csv").string()});
  CHECK(missing.code == 2);
  CHECK_FALSE(missing.err.empty());

  save_features(FeatureMatrix(Matrix::Ones(3, 4)), dir / "s.csv", FeatureFormat::csv);
  save_features(FeatureMatrix(Matrix::Ones(2, 4)), dir / "t.csv", FeatureFormat::csv);
  save_labels(Labels{0, 1, 0, 1}, dir / "ls.txt");
  const Outcome mismatch = cli({"run", "--source", (dir / "s.csv").string(), "--target",
                                (dir / "t.csv").string(), "--labels-source",
                                (dir / "ls.txt").string(), "--out", dir.string()});
  CHECK(mismatch.code == 3);
  CHECK(mismatch.err.find("error") != std::string::npos);

  CHECK(cli({"run", "--synthetic", "--k", "11", "--out", dir.string()}).code == 2);
  CHECK(cli({"sweep", "--synthetic", "--param", "k", "--values", "3,40", "--out", dir.string()})
            .code == 2);
}

TEST_CASE("flags override the config file") {
  const auto dir = test::scratch_dir("cli_config");
  write_file(dir / "c.txt", "# experiment\nk=4\ngamma=0.5\nsynthetic\n\niters = 2\n");
  const Outcome o = cli({"run", "--config", (dir / "c.txt").string(), "--k", "6", "--print-config"});
  REQUIRE(o.code == 0);
  CHECK(o.out.find("k=6\n") != std::string::npos);
  CHECK(o.out.find("gamma=0.5\n") != std::string::npos);
  CHECK(o.out.find("iters=2\n") != std::string::npos);
  CHECK(o.out.find("synthetic=true\n") != std::string::npos);

  write_file(dir / "bad.txt", "not-a-flag=1\n");
  CHECK(cli({"run", "--config", (dir / "bad.txt").string()}).code == 2);
}

TEST_CASE("run writes its artifacts and the echoed config reproduces them") {
  const auto dir = test::scratch_dir("cli_run");
  const auto first = dir / "first";
  const auto second = dir / "second";
  const Outcome o = cli({"run", "--synthetic", "--k", "3", "--seed", "5", "--out", first.string()});
  REQUIRE(o.code == 0);
  const char* files[] = {"report.json",     "config.txt",         "predictions_source.txt",
                         "predictions_target.txt", "embeddings.csv", "iterations.jsonl"};
  for (const char* name : files) CHECK(std::filesystem::exists(first / name));

  const Outcome again =
      cli({"run", "--config", (first / "config.txt").string(), "--out", second.string()});
  REQUIRE(again.code == 0);
  for (const char* name : files) {
    INFO(name);
    CHECK(slurp(first / name) == slurp(second / name));
  }
  const std::string report = slurp(first / "report.json");
  CHECK(report.find("\"accuracy_t\"") != std::string::npos);
  CHECK(report.find("\"update_rules\"") != std::string::npos);
}

TEST_CASE("run accepts explicit files and a labeled index file") {
  const auto dir = test::scratch_dir("cli_files");
  REQUIRE(cli({"synth", "--seed", "3", "--format", "binary", "--out", dir.string()}).code == 0);
  save_indices(std::vector<int>{0, 1, 2, 50, 51, 52, 100, 101, 102}, dir / "idx.txt");
  const Labels ls = load_labels(dir / "labels_source.txt");
  const Outcome o = cli({"run", "--source", (dir / "source.bin").string(), "--target",
                         (dir / "target.bin").string(), "--labels-source",
                         (dir / "labels_source.txt").string(), "--labels-target",
                         (dir / "labels_target.txt").string(), "--labeled-idx",
                         (dir / "idx.txt").string(), "--k", "3", "--out", (dir / "o").string()});
  REQUIRE(o.code == 0);
  const Labels pred = load_labels(dir / "o" / "predictions_source.txt");
  REQUIRE(pred.size() == ls.size());
  for (int i : {0, 1, 2, 50, 51, 52, 100, 101, 102}) {
    CHECK(pred[static_cast<std::size_t>(i)] == ls[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("protocol and sweep outputs are reproducible") {
  const auto dir = test::scratch_dir("cli_protocol");
  const std::vector<std::string> args{"protocol", "--synthetic", "--k", "3", "--repeats", "3",
                                      "--methods", "slsada,source_only,jda_like", "--seed", "9"};
  auto with_out = [&](const std::filesystem::path& p) {
    auto a = args;
    a.push_back("--out");
    a.push_back(p.string());
    return a;
  };
  REQUIRE(cli(with_out(dir / "a")).code == 0);
  REQUIRE(cli(with_out(dir / "b")).code == 0);
  CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
  CHECK(slurp(dir / "a" / "summary.csv") == slurp(dir / "b" / "summary.csv"));
  REQUIRE(cli({"protocol", "--config", (dir / "a" / "config.txt").string(), "--out",
               (dir / "c").string()})
              .code == 0);
  CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "c" / "report.json"));

  const Outcome s = cli({"sweep", "--synthetic", "--k", "3", "--repeats", "2", "--param",
                         "gamma", "--values", "0,0.01", "--out", (dir / "s").string()});
  REQUIRE(s.code == 0);
  const std::string csv = slurp(dir / "s" / "sweep.csv");
  CHECK(csv.rfind("param,value,mean_s,std_s,mean_t,std_t\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
