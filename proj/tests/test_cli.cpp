#include "glg/experiment.hpp"

#include "glg/metrics.hpp"
#include "glg/report.hpp"
#include "test_util.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace glg;
using cli::ExperimentConfig;
using nlohmann::json;
using num::Matrix;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("glg_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string parse_error(const json& doc) {
  try {
    cli::parse_config(doc);
  } catch (const Error& e) {
    CHECK(e.is_validation());
    return e.what();
  }
  FAIL("config accepted");
  return "";
}

json small_node2c() {
  return json::parse(R"({
    "name": "small", "scenario": "node2c", "seed": 3, "repeats": 2,
    "dataset": {"kind": "er", "nodes": 6, "edge_prob": 0.4, "features": 4},
    "model": {"framework": "sage", "layers": 1, "hidden": 8, "classes": 3},
    "attack": {"iterations": 30, "finalize": "threshold"},
    "mae_taus": [0.5]
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_glg(const std::string& args) {
  const std::string cmd = std::string(GLG_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config errors name the field") {
  CHECK(parse_error(json::parse(R"({"attack": {"alpha": "big"}})")) ==
        "config.attack.alpha: expected a number");
  CHECK(parse_error(json::parse(R"({"attack": {"alpah": 1}})")).find("config.attack.alpah") !=
        std::string::npos);
  CHECK(parse_error(json::parse(R"({"repeats": 0})")).find("config.repeats") != std::string::npos);
  CHECK(parse_error(json::parse(R"({"scenario": "node9"})")).find("config.scenario") !=
        std::string::npos);
  CHECK(parse_error(json::parse(R"({"scenario": "graph_a", "model": {"task": "node"}})"))
            .find("config.model.task") != std::string::npos);
  CHECK(parse_error(json::parse(R"({"attack": {"feature_init": "bogus"}})")).find("feature_init") !=
        std::string::npos);
  CHECK(parse_error(json::parse(R"({"mae_taus": [0.5, "x"]})")).find("config.mae_taus[1]") !=
        std::string::npos);
  CHECK(parse_error(json::parse(R"({"output": {"format": "xml"}})")).find("format") != std::string::npos);
}

TEST_CASE("config round trip through json") {
  const auto c = cli::parse_config(small_node2c());
  CHECK(c.attack.scenario == attack::Scenario::node2c);
  CHECK(c.dataset.kind == "er");
  CHECK(c.layers == 1);
  const auto again = cli::parse_config(c.to_json());
  CHECK(again.to_json() == c.to_json());
  CHECK(testutil::error_code_of([] { cli::load_config("/nonexistent/config.json"); }) == ErrorCode::io);
}

TEST_CASE("truth-initialized run reports zero error") {
  for (const char* scenario : {"node1", "node2c", "graph_c"}) {
    auto doc = small_node2c();
    doc["scenario"] = scenario;
    doc["repeats"] = 1;
    doc["attack"]["alpha"] = 0.0;
    doc["attack"]["beta"] = 0.0;
    doc["attack"]["feature_init"] = "truth";
    doc["attack"]["adjacency_init"] = "truth";
    if (std::string(scenario) == "graph_c") doc["dataset"]["kind"] = "synthetic";
    const auto row = cli::run_experiment(cli::parse_config(doc));
    INFO(scenario);
    REQUIRE(row.failures == 0);
    for (const auto& [k, m] : row.metrics) {
      INFO(k);
      if (k.find("rnmse") != std::string::npos || k.find("mae") != std::string::npos ||
          k == "final_objective")
        CHECK(m.max < 1e-12);
      else
        CHECK(m.min == 1.0);
    }
  }
}

TEST_CASE("experiment is deterministic across thread counts") {
  auto c = cli::parse_config(small_node2c());
  c.repeats = 3;
  c.threads = 1;
  const auto a = cli::run_experiment(c);
  c.threads = 3;
  const auto b = cli::run_experiment(c);
  CHECK(a == b);
  CHECK(a.runs[2].seed == c.seed + 2);
  CHECK(a.metrics.count("x_rnmse") == 1);
  CHECK(a.metrics.count(cli::tau_metric(0.5)) == 1);
  CHECK(a.metrics.count("target_rnmse") == 0);
}

TEST_CASE("worker count honours GLG_THREADS") {
  auto c = cli::parse_config(small_node2c());
  c.repeats = 8;
  c.threads = 4;
  ::unsetenv("GLG_THREADS");
  CHECK(cli::worker_count(c) == 4);
  ::setenv("GLG_THREADS", "2", 1);
  CHECK(cli::worker_count(c) == 2);
  c.repeats = 1;
  CHECK(cli::worker_count(c) == 1);
  ::setenv("GLG_THREADS", "zero", 1);
  CHECK(testutil::error_code_of([&] { cli::worker_count(c); }) == ErrorCode::validation);
  ::unsetenv("GLG_THREADS");
}

TEST_CASE("sweeps") {
  auto c = cli::parse_config(small_node2c());
  c.repeats = 1;
  CHECK(cli::sweep(c, "alpha", {}).empty());
  CHECK(testutil::error_code_of([&] { cli::sweep(c, "gamma", {}); }) == ErrorCode::validation);
  CHECK(testutil::error_code_of([&] { cli::sweep(c, "alpha", {"abc"}); }) == ErrorCode::validation);
  const auto rows = cli::sweep(c, "hidden", {"4", "8"});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].param == "hidden");
  CHECK(rows[0].value == "4");
  CHECK(rows[0].hyper.at("hidden") == "4");
  CHECK(rows[1].hyper.at("hidden") == "8");
  CHECK(rows[0].runs[0].seed == rows[1].runs[0].seed);
  const auto init = cli::with_param(c, "init", "constant:0.2");
  CHECK(init.attack.feature_init.kind == attack::InitKind::constant);
  CHECK(init.attack.adjacency_init.value == 0.2);
  CHECK(cli::with_param(c, "tau", "0.3").attack.finalize.tau == 0.3);
}

TEST_CASE("csv and json reports") {
  const auto c = cli::parse_config(small_node2c());
  const std::string empty = cli::format_csv({});
  CHECK(std::count(empty.begin(), empty.end(), '\n') == 1);
  CHECK(empty.rfind("scenario,framework,dataset,param,value,repeats,failures", 0) == 0);

  const auto row = cli::run_experiment(c);
  const std::string csv = cli::format_csv({row});
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  const auto cols = cli::csv_columns({row});
  const std::string data = csv.substr(csv.find('\n') + 1);
  CHECK(static_cast<std::size_t>(std::count(data.begin(), data.end(), ',')) == cols.size() - 1);
  CHECK(std::find(cols.begin(), cols.end(), "wall_seconds") == cols.end());

  const auto dir = scratch("report");
  const auto path = cli::emit_report(c, {row, row}, "json", dir.string());
  CHECK(cli::load_report_json(path) == std::vector<cli::ReportRow>{row, row});
  const auto doc = json::parse(slurp(path));
  CHECK(cli::parse_config(doc.at("config")).to_json() == c.to_json());
  CHECK(testutil::error_code_of([&] { cli::emit_report(c, {row}, "xml", dir.string()); }) ==
        ErrorCode::validation);
}

TEST_CASE("matrix csv round trip") {
  num::Rng rng(4);
  const Matrix m = num::sample_gaussian(rng, 3, 5);
  const auto dir = scratch("matrix");
  cli::write_matrix_csv(m, (dir / "m.csv").string());
  CHECK(cli::read_matrix_csv((dir / "m.csv").string()) == m);
}

TEST_CASE("metrics are recomputable from dumped artifacts") {
  auto c = cli::parse_config(small_node2c());
  const auto dir = scratch("artifacts");
  c.output.dir = dir.string();
  c.output.dump_artifacts = true;
  const auto row = cli::run_experiment(c);
  for (const auto& run : row.runs) {
    REQUIRE(run.ok);
    const auto rep = dir / "artifacts" / c.name / ("rep" + std::to_string(run.repetition));
    auto load = [&](const char* n) { return cli::read_matrix_csv((rep / (std::string(n) + ".csv")).string()); };
    const Matrix a = load("A_true");
    const auto s = metrics::score_adjacency(a, load("A_prob"), load("A_hat"), c.taus);
    CHECK(run.metrics.at("x_rnmse") == metrics::rnmse_rows(load("X_true"), load("X_hat")));
    CHECK(run.metrics.at("adj_accuracy") == s.accuracy);
    CHECK(run.metrics.at("adj_mae") == s.mae);
    CHECK(run.metrics.at(cli::tau_metric(0.5)) == s.mae_thresholded[0].mae);
    if (run.metrics.count("adj_auc")) CHECK(run.metrics.at("adj_auc") == s.auc);
  }
}

TEST_CASE("glg binary exit codes and reproducible output") {
  const auto dir = scratch("binary");
  auto doc = small_node2c();
  doc["output"] = {{"dir", (dir / "out").string()}};
  std::ofstream(dir / "ok.json") << doc.dump();
  std::ofstream(dir / "bad.json") << R"({"attack": {"alpha": -1}})";
  std::ofstream(dir / "broken.json") << "{ not json";

  const std::string ok = "--config " + (dir / "ok.json").string();
  CHECK(run_glg("attack " + ok) == 0);
  const std::string first = slurp(dir / "out" / "report.csv");
  CHECK(run_glg("attack " + ok) == 0);
  CHECK(slurp(dir / "out" / "report.csv") == first);
  CHECK(run_glg("attack " + ok + " --format json --out " + (dir / "j").string()) == 0);
  CHECK(fs::exists(dir / "j" / "report.json"));
  CHECK(run_glg("sweep " + ok + " --param beta --values 0,1e-7 --out " + (dir / "s").string()) == 0);
  CHECK(slurp(dir / "s" / "report.csv").find("beta,1e-7,") != std::string::npos);

  CHECK(run_glg("attack --config " + (dir / "bad.json").string()) == 1);
  CHECK(run_glg("attack --config " + (dir / "broken.json").string()) == 1);
  CHECK(run_glg("attack --config " + (dir / "missing.json").string()) == 1);
  CHECK(run_glg("attack " + ok + " --format xml") == 1);
  CHECK(run_glg("sweep " + ok + " --param gamma --values 1") == 1);
  CHECK(run_glg("frobnicate") == 1);
  ::setenv("GLG_THREADS", "x", 1);
  CHECK(run_glg("attack " + ok) == 1);
  ::unsetenv("GLG_THREADS");

  // Zero features make every feature error undefined, so each repetition
  // fails and the run reports a numeric failure.
  std::ofstream(dir / "x.csv") << "0,0\n0,0\n0,0\n";
  std::ofstream(dir / "e.csv") << "0,1\n1,2\n";
  std::ofstream(dir / "y.csv") << "0\n1\n0\n";
  auto zero = doc;
  zero["scenario"] = "node2b";
  zero["dataset"] = {{"kind", "files"},
                     {"features_path", (dir / "x.csv").string()},
                     {"edges_path", (dir / "e.csv").string()},
                     {"labels_path", (dir / "y.csv").string()}};
  std::ofstream(dir / "zero.json") << zero.dump();
  CHECK(run_glg("attack --config " + (dir / "zero.json").string()) == 2);
}
